"""Command-line interface: ``ibart simulate | fit | predict | pdp | ate | bench``.

Every command writes into the directory given by ``--out``. ``fit`` creates a
run directory holding ``manifest.json``, ``trace.jsonl``, ``summary.csv``,
``summary.txt``, ``variable_importance.csv`` and ``fit.csv`` (plus
``ensembles.txt``, ``pdp.csv`` and ``ate.csv`` when requested); ``predict``,
``pdp`` and ``ate`` read such a directory and add their tables to it.

Configuration files hold one ``key = value`` pair per line, with keys named
after :class:`~ibart.core.HyperParams` fields or the scalar sampler settings
(``k_trunc``, ``alternations``, ``init_trees`` ...). Flags override the file,
which overrides the defaults.

``bench`` derives replicate seeds as ``SeedSequence(seed).spawn(R)``; child
``r`` is split again into four streams used for data generation, the
train/test split, the infinite-mode chain and the classic-mode chain.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import __version__, runio
from ._backend import BACKEND
from .core import ContractError, Dataset, HyperParams
from .data import DGP_KINDS, DgpSpec, load_csv, read_covariates, split, write_csv
from .inference import (TraceStore, average_treatment_effect, default_grid,
                        estimate_f_insample, partial_dependence, predict_out_of_sample,
                        summarize, variable_importance)
from .sampler import SamplerConfig, run_chain

log = logging.getLogger("ibart")

SAMPLER_KEYS = ("k_trunc", "alternations", "init_trees", "init_gamma", "init_eta",
                "init_delta", "row_order", "refresh_every", "plug_in")
_FLOAT_OR_NONE = ("sigma_mu2",)


class UsageError(Exception):
    pass


# -- configuration ----------------------------------------------------------------

def _convert(key, raw: str, default):
    raw = raw.strip()
    if key in _FLOAT_OR_NONE:
        return None if raw.lower() in ("none", "") else float(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _defaults():
    hp = {f.name: f.default for f in dataclasses.fields(HyperParams)}
    sc = {f.name: f.default for f in dataclasses.fields(SamplerConfig) if f.name in SAMPLER_KEYS}
    return hp, sc


def parse_config(path) -> tuple[dict, dict]:
    """Read a ``key = value`` file into (hyperparameter, sampler) override dicts."""
    hp_def, sc_def = _defaults()
    hp, sc = {}, {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            try:
                if key in hp_def:
                    hp[key] = _convert(key, val, hp_def[key])
                elif key in sc_def:
                    sc[key] = _convert(key, val, sc_def[key])
                else:
                    raise ContractError(f"{path}:{lineno}: unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, ContractError):
                    raise
                raise ContractError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return hp, sc


def resolve_settings(args) -> tuple[HyperParams, dict]:
    """Merge defaults, the config file and flags; validates before any sampling."""
    hp_kw, sc_kw = parse_config(args.config) if getattr(args, "config", None) else ({}, {})
    flag_map = {"iters": "iterations", "burnin": "burn_in", "thin": "thin", "seed": "seed",
                "mode": "mode"}
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            hp_kw[key] = v
    trees = getattr(args, "trees", None)
    if trees is not None:
        if hp_kw.get("mode", "infinite") != "classic":
            raise UsageError("--trees applies to --mode classic only")
        hp_kw["classic_K"] = trees
    hp = HyperParams(**hp_kw)
    SamplerConfig(hp=hp, **sc_kw)
    return hp, sc_kw


def resolve_columns(tokens, names) -> list[int]:
    """Column indices from names or 1-based positions."""
    out = []
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        if tok in names:
            out.append(names.index(tok))
        elif tok.isdigit() and 1 <= int(tok) <= len(names):
            out.append(int(tok) - 1)
        else:
            raise ContractError(f"unknown variable {tok!r}")
    return out


def _workers(jobs: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("IBART_THREADS")
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError as exc:
            raise UsageError("IBART_THREADS must be an integer") from exc
    return max(1, min(cap, jobs))


def _progress(every):
    def report(it, total):
        if it % every == 0 or it == total:
            log.info("sweep %d / %d", it, total)
    return report


# -- run directory helpers ----------------------------------------------------------

def _portable_argv(argv):
    """``argv`` with the run directory written as ``.`` so manifests do not depend on it."""
    out, skip = [], False
    for a in argv:
        if skip:
            out.append(".")
            skip = False
        elif a == "--out":
            out.append(a)
            skip = True
        elif a.startswith("--out="):
            out.append("--out=.")
        else:
            out.append(a)
    return out


def _manifest(command, argv, hp, sc_kw, inputs, artifacts, extra=None):
    stamp = runio.build_timestamp()
    m = {"command": command, "argv": _portable_argv(argv), "version": __version__,
         "backend": BACKEND,
         "seed": hp.seed if hp is not None else None,
         "config": None if hp is None else {**dataclasses.asdict(hp), **sc_kw},
         "inputs": {k: {"path": os.path.abspath(p), "digest": runio.file_digest(p)}
                    for k, p in inputs.items()},
         "artifacts": sorted(artifacts), "started": stamp, "finished": stamp}
    m.update(extra or {})
    return m


def _add_followup(out, command, argv, artifacts):
    path = os.path.join(out, "manifest.json")
    m = runio.read_json(path)
    m.setdefault("followups", []).append({"command": command, "argv": _portable_argv(argv),
                                          "artifacts": sorted(artifacts)})
    m["artifacts"] = sorted(set(m["artifacts"]) | set(artifacts))
    runio.write_json(path, m)


def _load_run(out):
    path = os.path.join(out, "manifest.json")
    if not os.path.exists(path):
        raise ContractError(f"{out} is not a run directory (no manifest.json)")
    m = runio.read_json(path)
    if m.get("command") != "fit":
        raise ContractError(f"{out} was not produced by 'fit'")
    return m


def _run_trace(out, m) -> TraceStore:
    model = m["model"]
    classic = model["mode"] == "classic"
    tr = TraceStore.allocate(0, model["n_train"], len(model["column_names"]),
                             mode=model["mode"], y_shift=model["y_shift"],
                             y_scale=model["y_scale"], smu2=model["smu2"],
                             record_fitted=False, column_names=model["column_names"])
    ens = os.path.join(out, "ensembles.txt")
    if not os.path.exists(ens):
        raise ContractError("run has no retained ensembles; refit with --retain-ensembles")
    tr.ensembles = runio.read_ensembles(ens, model["n_train"], classic)
    tr.meta["n_train"] = model["n_train"]
    return tr


def _training_data(m, override=None) -> Dataset:
    inp = m["inputs"]["data"]
    path = override or inp["path"]
    if override is None and runio.file_digest(path) != inp["digest"]:
        raise ContractError(f"training data {path} changed since the fit")
    ds = load_csv(path, m["model"]["target"], m["model"].get("treatment"))
    if ds.column_names != m["model"]["column_names"]:
        raise ContractError("data columns do not match the training covariates")
    return ds


def _pdp_rows(names, results):
    rows = []
    for s, (grid, summ) in results:
        for g, a, lo, hi in zip(grid, summ.mean, summ.lower, summ.upper):
            rows.append((names[s], float(g), float(a), float(lo), float(hi)))
    return rows


PDP_HEADER = ("variable", "grid", "mean", "lower", "upper")


def _write_ate(out, summ):
    runio.write_table(os.path.join(out, "ate.csv"), ("statistic", "value"),
                      [("mean", float(summ.mean)), ("lower", float(summ.lower)),
                       ("upper", float(summ.upper)), ("draws", int(summ.draws.size))])
    runio.write_table(os.path.join(out, "ate_draws.csv"), ("draw", "ate"),
                      [(j, float(v)) for j, v in enumerate(summ.draws)])
    return ["ate.csv", "ate_draws.csv"]


# -- commands ---------------------------------------------------------------------

def cmd_simulate(args, argv):
    spec = DgpSpec(args.dgp, args.n, args.p, args.noise_sd, args.gamma, args.delta, args.eta,
                   args.K, args.seed)
    ds = spec.generate()
    os.makedirs(args.out, exist_ok=True)
    write_csv(ds, os.path.join(args.out, "data.csv"))
    arts = ["data.csv"]
    cols = {k: np.asarray(v) for k, v in ds.truth.items() if np.ndim(v) == 1}
    if cols:
        names = sorted(cols)
        runio.write_table(os.path.join(args.out, "truth.csv"), ["row"] + names,
                          [[i] + [cols[k][i].item() for k in names] for i in range(ds.n)])
        arts.append("truth.csv")
    scalars = {k: (v.item() if hasattr(v, "item") else v) for k, v in ds.truth.items()
               if np.ndim(v) == 0}
    runio.write_json(os.path.join(args.out, "truth.json"),
                     {"dgp": dataclasses.asdict(spec), **scalars})
    arts.append("truth.json")
    runio.write_json(os.path.join(args.out, "manifest.json"),
                     _manifest("simulate", argv, None, {}, {}, arts + ["manifest.json"],
                               {"seed": args.seed, "dgp": dataclasses.asdict(spec)}))
    print(f"wrote {ds.n} rows x {ds.p + 1} columns to {os.path.join(args.out, 'data.csv')}")


def cmd_fit(args, argv):
    hp, sc_kw = resolve_settings(args)
    ds = load_csv(args.data, args.target, args.treatment)
    pdp_vars = resolve_columns(args.vars.split(","), ds.column_names) if args.vars else []
    ate_col = ds.column_names.index(args.treatment) if args.treatment else None
    cfg = SamplerConfig(hp=hp, pdp_vars=pdp_vars, pdp_grid_points=args.grid_points,
                        ate_col=ate_col, retain_ensembles=args.retain_ensembles, **sc_kw)
    trace = run_chain(ds, cfg, np.random.default_rng(hp.seed),
                      progress=None if args.quiet else _progress(1000))
    out = args.out
    os.makedirs(out, exist_ok=True)
    arts = write_fit_outputs(out, trace, ds, hp)
    if pdp_vars:
        res = [(s, partial_dependence(trace, ds, s)) for s in pdp_vars]
        runio.write_table(os.path.join(out, "pdp.csv"), PDP_HEADER,
                          _pdp_rows(ds.column_names, res))
        arts.append("pdp.csv")
    if ate_col is not None:
        arts += _write_ate(out, average_treatment_effect(trace, ds, ate_col))
    if trace.ensembles is not None:
        runio.write_ensembles(os.path.join(out, "ensembles.txt"), trace.ensembles,
                              hp.mode == "classic")
        arts.append("ensembles.txt")
    model = {"mode": hp.mode, "target": args.target, "treatment": args.treatment,
             "column_names": list(ds.column_names), "n_train": ds.n, "y_shift": ds.y_shift,
             "y_scale": ds.y_scale, "smu2": trace.smu2,
             "alternations": sc_kw.get("alternations", SamplerConfig.alternations)}
    inputs = {"data": args.data}
    if args.config:
        inputs["config"] = args.config
    runio.write_json(os.path.join(out, "manifest.json"),
                     _manifest("fit", argv, hp, sc_kw, inputs, arts + ["manifest.json"],
                               {"model": model}))
    print(f"fit {hp.mode} model on {ds.n} rows; outputs in {out}")


def write_fit_outputs(out, trace: TraceStore, ds: Dataset, hp: HyperParams) -> list:
    runio.write_trace(os.path.join(out, "trace.jsonl"), trace)
    classic = hp.mode == "classic"
    rows = [("sigma", trace.sigma), ("sigma2", trace.sigma2 * trace.y_scale ** 2)]
    if not classic:
        rows += [("gamma", trace.gamma), ("delta", trace.delta), ("eta", trace.eta)]
    rows.append(("K_n", trace.K.astype(float)))
    table = []
    for name, d in rows:
        s = summarize(d)
        table.append((name, float(s.mean), float(s.lower), float(s.upper)))
    f_mean, f_lo, f_hi = estimate_f_insample(trace)
    y = ds.y_original()
    mse = float(np.mean((f_mean - y) ** 2))
    table.append(("mse_insample", mse / ds.y_scale ** 2, None, None))
    table.append(("mse_insample_original", mse, None, None))
    runio.write_table(os.path.join(out, "summary.csv"), ("parameter", "mean", "lower", "upper"),
                      table)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"mode {hp.mode}, {len(trace)} retained draws, n = {ds.n}, p = {ds.p}\n")
        for name, a, lo, hi in table:
            if lo is None:
                fh.write(f"{name:>22s}  {a:.6g}\n")
            else:
                fh.write(f"{name:>22s}  {a:.6g}  [{lo:.6g}, {hi:.6g}]\n")
    v = variable_importance(trace)
    vt = variable_importance(trace, per_tree=True)
    sc = trace.split_counts.mean(axis=0)
    runio.write_table(os.path.join(out, "variable_importance.csv"),
                      ("variable", "share", "share_per_tree", "mean_splits"),
                      [(ds.column_names[j], float(v[j]), float(vt[j]), float(sc[j]))
                       for j in range(ds.p)])
    runio.write_table(os.path.join(out, "fit.csv"), ("row", "y", "f_mean", "f_lower", "f_upper"),
                      [(i, float(y[i]), float(f_mean[i]), float(f_lo[i]), float(f_hi[i]))
                       for i in range(ds.n)])
    return ["trace.jsonl", "summary.csv", "summary.txt", "variable_importance.csv", "fit.csv"]


def cmd_predict(args, argv):
    m = _load_run(args.out)
    model = m["model"]
    tr = _run_trace(args.out, m)
    X, names, y = read_covariates(args.data, model["target"])
    if names != model["column_names"]:
        raise ContractError(f"new data columns {names} do not match training columns "
                            f"{model['column_names']}")
    seed = m["seed"] if args.seed is None else args.seed
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    s = predict_out_of_sample(tr, X, rng, alternations=model["alternations"],
                              plug_in=bool(m["config"].get("plug_in", False)))
    rows = [(i, float(s.mean[i]), float(s.lower[i]), float(s.upper[i]))
            + ((float(y[i]),) if y is not None else ()) for i in range(X.shape[0])]
    header = ("row", "mean", "lower", "upper") + (("y",) if y is not None else ())
    runio.write_table(os.path.join(args.out, "predictions.csv"), header, rows)
    arts = ["predictions.csv"]
    if y is not None:
        mse = float(np.mean((s.mean - y) ** 2))
        runio.write_table(os.path.join(args.out, "predict_mse.csv"), ("scale", "mse"),
                          [("standardized", mse / model["y_scale"] ** 2), ("original", mse)])
        arts.append("predict_mse.csv")
        print(f"MSE (standardized) {mse / model['y_scale'] ** 2:.6g}, (original) {mse:.6g}")
    _add_followup(args.out, "predict", argv, arts)


def cmd_pdp(args, argv):
    m = _load_run(args.out)
    tr = _run_trace(args.out, m)
    ds = _training_data(m, args.data)
    vars_ = resolve_columns(args.vars.split(","), ds.column_names)
    res = [(s, partial_dependence(tr, ds, s, default_grid(ds.X[:, s], args.grid_points)))
           for s in vars_]
    runio.write_table(os.path.join(args.out, "pdp.csv"), PDP_HEADER,
                      _pdp_rows(ds.column_names, res))
    _add_followup(args.out, "pdp", argv, ["pdp.csv"])


def cmd_ate(args, argv):
    m = _load_run(args.out)
    tr = _run_trace(args.out, m)
    ds = _training_data(m, args.data)
    col = resolve_columns([args.treatment], ds.column_names)[0]
    summ = average_treatment_effect(tr, ds, col)
    arts = _write_ate(args.out, summ)
    print(f"ATE {float(summ.mean):.4f} [{float(summ.lower):.4f}, {float(summ.upper):.4f}]")
    _add_followup(args.out, "ate", argv, arts)


# -- bench ------------------------------------------------------------------------

def holdout_mse(train: Dataset, test: Dataset, hp: HyperParams, sc_kw: dict, rng):
    """Test-set MSE (standardized, original) and mean K of one fit."""
    cfg = SamplerConfig(hp=hp, X_test=test.X, record_fitted=False, **sc_kw)
    tr = run_chain(train, cfg, rng)
    pred = tr.pred_test.mean(axis=0)
    mse = float(np.mean((pred - test.y) ** 2))
    return mse, mse * train.y_scale ** 2, float(tr.K.mean())


def bench_replicate(job):
    source, seq, modes, hp, sc_kw, fraction = job
    s_data, s_split, s_inf, s_cls = seq.spawn(4)
    ds = source.generate(np.random.default_rng(s_data)) if isinstance(source, DgpSpec) else source
    train, test = split(ds, fraction, np.random.default_rng(s_split))
    out = {}
    for mode in modes:
        s = s_inf if mode == "infinite" else s_cls
        out[mode] = holdout_mse(train, test, hp.replace(mode=mode), sc_kw, np.random.default_rng(s))
    return out


def run_bench(source, replicates: int, modes, hp: HyperParams, sc_kw=None, seed: int = 0,
              fraction: float = 0.8, workers: Optional[int] = None):
    """Per-replicate ``{mode: (mse, mse_original, mean_K)}`` in replicate order."""
    seqs = np.random.SeedSequence(seed).spawn(replicates)
    jobs = [(source, q, tuple(modes), hp, dict(sc_kw or {}), fraction) for q in seqs]
    workers = _workers(len(jobs)) if workers is None else workers
    if workers <= 1:
        return [bench_replicate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(bench_replicate, jobs))


def cmd_bench(args, argv):
    # both arms share the settings; --trees sizes the classic arm
    chain_args = argparse.Namespace(**{**vars(args), "mode": None, "trees": None})
    hp, sc_kw = resolve_settings(chain_args)
    if args.dgp and args.data:
        raise UsageError("give either --dgp or --data, not both")
    if args.dgp:
        if args.n is None:
            raise UsageError("--dgp needs --n")
        source = DgpSpec(args.dgp, args.n, args.p, args.noise_sd, args.gamma, args.delta,
                         args.eta, args.K, hp.seed)
        inputs = {}
    elif args.data:
        source = load_csv(args.data, args.target)
        inputs = {"data": args.data}
    else:
        raise UsageError("bench needs --dgp or --data")
    modes = ("infinite", "classic") if args.mode == "both" else (args.mode,)
    if args.trees is not None:
        hp = hp.replace(classic_K=args.trees)
    results = run_bench(source, args.replicates, modes, hp, sc_kw, hp.seed)
    header = (["replicate"] + [f"mse_{m}" for m in modes] + [f"mse_{m}_original" for m in modes]
              + [f"K_{m}" for m in modes])
    rows = []
    for r, res in enumerate(results):
        rows.append([r + 1] + [res[m][0] for m in modes] + [res[m][1] for m in modes]
                    + [res[m][2] for m in modes])
    if len(rows) > 1:
        arr = np.array([r[1:] for r in rows], dtype=float)
        rows.append(["mean"] + [float(v) for v in arr.mean(axis=0)])
    os.makedirs(args.out, exist_ok=True)
    runio.write_table(os.path.join(args.out, "bench.csv"), header, rows)
    runio.write_json(os.path.join(args.out, "manifest.json"),
                     _manifest("bench", argv, hp, sc_kw, inputs, ["bench.csv", "manifest.json"],
                               {"replicates": args.replicates, "modes": list(modes),
                                "seed_rule": "SeedSequence(seed).spawn(R)[r].spawn(4) = "
                                             "(data, split, infinite, classic)"}))
    print(",".join(header))
    for row in rows:
        print(",".join(str(runio._cell(v)) for v in row))


# -- parser -----------------------------------------------------------------------

def _add_dgp_flags(p, required_n):
    p.add_argument("--n", type=int, required=required_n, help="number of rows")
    p.add_argument("--p", type=int, help="number of covariates")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--K", type=int, help="number of groups (clustered_friedman)")


def _add_chain_flags(p):
    p.add_argument("--mode", choices=("infinite", "classic"))
    p.add_argument("--trees", type=int, help="number of trees in classic mode")
    p.add_argument("--config", help="key = value file overriding the defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int, help="retained-phase sweeps (default 5000)")
    p.add_argument("--burnin", type=int, help="burn-in sweeps (default 1000)")
    p.add_argument("--thin", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ibart", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--dgp", choices=DGP_KINDS, required=True)
    _add_dgp_flags(p, required_n=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="run the sampler on a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--treatment", help="binary column whose average effect is estimated")
    _add_chain_flags(p)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--vars", help="comma-separated variables for partial dependence")
    p.add_argument("--grid-points", type=int, default=20)
    p.add_argument("--retain-ensembles", action="store_true")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("predict", help="predict new rows from a fitted run")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pdp", help="partial dependence from a fitted run")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--vars", required=True)
    p.add_argument("--grid-points", type=int, default=20)
    p.add_argument("--data", help="training CSV (defaults to the one recorded in the run)")

    p = sub.add_parser("ate", help="average treatment effect from a fitted run")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--treatment", required=True)
    p.add_argument("--data", help="training CSV (defaults to the one recorded in the run)")

    p = sub.add_parser("bench", help="replicated train/test MSE comparison")
    p.add_argument("--dgp", choices=DGP_KINDS)
    p.add_argument("--data")
    p.add_argument("--target", default="y")
    _add_dgp_flags(p, required_n=False)
    _add_chain_flags(p)
    p.set_defaults(mode="both")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--out", required=True)
    for a in p._actions:
        if a.dest == "mode":
            a.choices = ("infinite", "classic", "both")
    return ap


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict, "pdp": cmd_pdp,
            "ate": cmd_ate, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args, argv)
    except UsageError as exc:
        parser.error(str(exc))
    except (ContractError, ValueError, OSError) as exc:
        print(f"ibart: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
