"""Bayesian additive regression trees with an Indian-buffet prior on which
trees are active for which observations.

The numerical kernels come from a compiled extension when it is available
and from a pure-Python implementation otherwise; both produce identical
draws. ``ibart.BACKEND`` names the one in use.
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .core import (ContractError, Dataset, DecisionTree, DegenerateResponseError,  # noqa: E402
                   HyperParams, ModelState, WeightMatrix)
from .data import (DgpSpec, gen_causal, gen_clustered_friedman, gen_friedman,  # noqa: E402
                   gen_ibp_synthetic, load_csv, split)
from .ibp import IbpParams, efpf_log, sample_prior  # noqa: E402
from .inference import (TraceStore, average_treatment_effect, estimate_f_insample,  # noqa: E402
                        partial_dependence, predict_out_of_sample, variable_importance)
from .sampler import Chain, SamplerConfig, run_chain  # noqa: E402

__all__ = [
    "BACKEND", "Chain", "ContractError", "Dataset", "DecisionTree", "DegenerateResponseError",
    "DgpSpec", "HyperParams", "IbpParams", "ModelState", "SamplerConfig", "TraceStore",
    "WeightMatrix", "average_treatment_effect", "efpf_log", "estimate_f_insample",
    "gen_causal", "gen_clustered_friedman", "gen_friedman", "gen_ibp_synthetic", "load_csv",
    "partial_dependence", "predict_out_of_sample", "run_chain", "sample_prior", "split",
    "variable_importance",
]
