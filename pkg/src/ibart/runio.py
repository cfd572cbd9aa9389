"""Reading and writing the files of a run directory.

Ensemble file format (plain text, one block per retained draw)::

    draw <j> K <K> sigma2 <s2> gamma <g> delta <d> eta <e> delta_eta <d+e> one_minus_eta <1-e>
    tree <k> m <m_k>
    w <0/1 string over training rows>        (infinite mode only)
    <id> split <var> <cut>                   (pre-order node list;
    <id> leaf <mu>                            ids are pre-order positions)
    end

Variables are 0-based column indices, a row goes left when ``x[var] <= cut``
and all floats are written with round-trip precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from datetime import datetime, timezone

import numpy as np

from .core import INTERNAL, LEAF, ContractError
from .forest import Ensemble

ENSEMBLE_HEADER = "# ibart ensembles v1"


def _f(x) -> str:
    return repr(float(x))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def build_timestamp():
    """ISO time from ``SOURCE_DATE_EPOCH``, or ``None`` when it is unset.

    Wall-clock times are never recorded so that reruns are byte-identical.
    """
    v = os.environ.get("SOURCE_DATE_EPOCH")
    if not v:
        return None
    return datetime.fromtimestamp(int(v), tz=timezone.utc).isoformat()


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- trace ------------------------------------------------------------------------

def write_trace(path, trace):
    classic = trace.mode == "classic"
    with open(path, "w", encoding="utf-8") as fh:
        for j in range(len(trace)):
            rec = {"iter": int(trace.iters[j]), "sigma2": float(trace.sigma2[j]),
                   "gamma": None if classic else float(trace.gamma[j]),
                   "delta": None if classic else float(trace.delta[j]),
                   "eta": None if classic else float(trace.eta[j]),
                   "K_n": int(trace.K[j]),
                   "split_counts": [int(c) for c in trace.split_counts[j]]}
            fh.write(json.dumps(rec) + "\n")


def read_trace(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- ensembles --------------------------------------------------------------------

def _preorder(e: Ensemble, k: int):
    stack = [0]
    while stack:
        c = stack.pop()
        yield c
        if e.status[k, c] == INTERNAL:
            stack.append(int(e.right[k, c]))
            stack.append(int(e.left[k, c]))


def write_ensembles(path, ensembles, classic: bool):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ENSEMBLE_HEADER + "\n")
        for j, e in enumerate(ensembles):
            s = e.delta + e.eta if e.delta_eta is None else e.delta_eta
            a = 1.0 - e.eta if e.one_minus_eta is None else e.one_minus_eta
            fh.write(f"draw {j} K {e.K} sigma2 {_f(e.sigma2)} gamma {_f(e.gamma)} "
                     f"delta {_f(e.delta)} eta {_f(e.eta)} delta_eta {_f(s)} "
                     f"one_minus_eta {_f(a)}\n")
            for k in range(e.K):
                fh.write(f"tree {k} m {int(e.m[k])}\n")
                if not classic:
                    fh.write("w " + "".join("1" if b else "0" for b in e.W[k]) + "\n")
                for pos, c in enumerate(_preorder(e, k)):
                    if e.status[k, c] == INTERNAL:
                        fh.write(f"{pos} split {int(e.var[k, c])} {_f(e.cut[k, c])}\n")
                    else:
                        fh.write(f"{pos} leaf {_f(e.mu[k, c])}\n")
            fh.write("end\n")


def _assemble(trees, width):
    K = len(trees)
    var = np.full((K, width), -1, dtype=np.int32)
    cut = np.zeros((K, width))
    left = np.full((K, width), -1, dtype=np.int32)
    right = np.full((K, width), -1, dtype=np.int32)
    status = np.zeros((K, width), dtype=np.int8)
    mu = np.zeros((K, width))
    for k, nodes in enumerate(trees):
        # pre-order: left child follows its parent, right child follows the left subtree
        stack = []
        for pos, (kind, a, b) in enumerate(nodes):
            if stack:
                parent = stack[-1]
                if left[k, parent] < 0:
                    left[k, parent] = pos
                else:
                    right[k, parent] = pos
                    stack.pop()
            if kind == "split":
                status[k, pos] = INTERNAL
                var[k, pos], cut[k, pos] = a, b
                stack.append(pos)
            else:
                status[k, pos] = LEAF
                mu[k, pos] = a
        if stack:
            raise ContractError(f"tree {k}: truncated node list")
    return var, cut, left, right, status, mu


def read_ensembles(path, n_rows: int, classic: bool):
    """Parse an ensemble file back into :class:`Ensemble` objects."""
    out = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    i = 0
    while i < len(lines):
        head = lines[i]
        if head[0] != "draw":
            raise ContractError(f"ensemble file: expected 'draw', got {head[0]!r}")
        params = {head[t]: head[t + 1] for t in range(2, len(head), 2)}
        i += 1
        trees, ms, ws = [], [], []
        while lines[i][0] != "end":
            tl = lines[i]
            ms.append(int(tl[3]))
            i += 1
            if lines[i][0] == "w":
                ws.append(np.frombuffer(lines[i][1].encode(), dtype=np.uint8) - ord("0"))
                i += 1
            nodes = []
            while lines[i][0] not in ("tree", "end"):
                ln = lines[i]
                if ln[1] == "split":
                    nodes.append(("split", int(ln[2]), float(ln[3])))
                else:
                    nodes.append(("leaf", float(ln[2]), None))
                i += 1
            trees.append(nodes)
        i += 1
        width = max([len(t) for t in trees] + [1])
        var, cut, left, right, status, mu = _assemble(trees, width)
        K = len(trees)
        if classic:
            W = None
        else:
            W = np.array(ws, dtype=np.uint8).reshape(K, n_rows)
        e = Ensemble(var, cut, left, right, status, mu, W, np.array(ms, dtype=np.int64),
                     sigma2=float(params["sigma2"]), gamma=float(params["gamma"]),
                     delta=float(params["delta"]), eta=float(params["eta"]),
                     delta_eta=float(params["delta_eta"]),
                     one_minus_eta=float(params["one_minus_eta"]))
        out.append(e)
    return out
