"""Deep discrete-encoder copulas with rank-likelihood MAP estimation.

Multilayer binary-latent generative models for mixed-type tabular data,
estimated by Monte Carlo EM on the extended rank likelihood with
cumulative-shrinkage priors that learn every layer width.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .model import DdeDims, DdeParams, LatentState
from .frame import DataTable, RankFrame, build_rank_frame, load_table
from .em import FitConfig, FitResult, fit

__all__ = [
    "KERNEL_BACKEND",
    "DdeDims",
    "DdeParams",
    "LatentState",
    "DataTable",
    "RankFrame",
    "build_rank_frame",
    "load_table",
    "FitConfig",
    "FitResult",
    "fit",
]

__version__ = "0.1.0"
