import os
import subprocess
import sys

import numpy as np
import pytest

from ibart import _backend, _fallback
from ibart.core import HyperParams
from ibart.data import gen_friedman
from ibart.sampler import SamplerConfig, run_chain

ext = pytest.importorskip("ibart._ext")


def _pair(mode="infinite", **sc):
    d = gen_friedman(60, 6, 1.0, np.random.default_rng(3))
    hp = HyperParams(mode=mode, classic_K=8, iterations=80, burn_in=20)
    out = {}
    for b in ("python", "cython"):
        cfg = SamplerConfig(hp=hp, backend=b, pdp_vars=[2], X_test=d.X[:5], **sc)
        out[b] = run_chain(d, cfg, np.random.default_rng(5))
    return out["python"], out["cython"]


@pytest.mark.parametrize("mode,sc", [("infinite", {}), ("classic", {}),
                                     ("infinite", {"row_order": "random", "k_trunc": 3})])
def test_traces_bit_identical(mode, sc):
    a, c = _pair(mode, **sc)
    for field in ("K", "sigma2", "gamma", "delta", "eta", "split_counts", "fitted", "pred_test"):
        np.testing.assert_array_equal(getattr(a, field), getattr(c, field), err_msg=field)
    np.testing.assert_array_equal(a.pdp[2][1], c.pdp[2][1])


def test_names():
    assert _fallback.NAME == "python" and ext.NAME == "cython"
    assert _backend.get("python") is _fallback and _backend.get("cython") is ext


def test_default_prefers_compiled():
    if os.environ.get("IBART_BACKEND", "auto").lower() == "python":
        pytest.skip("fallback forced by the environment")
    assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    env = {**os.environ, "IBART_BACKEND": "python"}
    out = subprocess.run([sys.executable, "-c", "from ibart._backend import BACKEND; print(BACKEND)"],
                         env=env, check=True, capture_output=True, text=True).stdout.strip()
    assert out == "python"
