"""Sample-efficient active learning of derivative-based sensitivity measures.

A derivative-based global sensitivity measure (DGSM) summarizes how much a
black-box function f : [0,1]^d -> R responds to each input, as the mean over
the cube of the partial derivative df/dx_i, of its absolute value, or of its
square.  Estimating DGSMs by brute force needs many function evaluations;
this package instead fits a Gaussian-process surrogate to a small number of
carefully chosen evaluations and reads the sensitivities off the surrogate's
derivative posterior, which is available in closed form for the squared-
exponential kernel.

The evaluation sites are chosen by acquisition functions that target the
derivatives themselves: variance and information-gain utilities for the raw
derivative, for its absolute value (folded normal), and for its square
(noncentral chi-square), each in a local look-ahead form and a node-averaged
global form, alongside quasirandom and function-space baselines.  A driver
runs the full replicated experiment protocol (fit, maximize acquisition,
observe, repeat) and reports RMSE and NDCG of the estimated sensitivities
against brute-force ground truth, from the ``dgsm-lab`` command line or the
Python API:

    >>> from dgsm_lab import ExperimentConfig, AcquisitionKind, run_experiment
    >>> cfg = ExperimentConfig(problem="ishigami1",
    ...                        acquisition=AcquisitionKind("DSqIG"),
    ...                        budget=15, init_points=5, replicates=2, seed=7)
    >>> summary = run_experiment(cfg)   # doctest: +SKIP

Numerical hot spots (the hypergeometric entropy term, folded-normal moments,
kernel cross-covariance stacks, and the scrambled Sobol generator) run on a
compiled extension when it is available; set ``DGSM_LAB_PURE_PYTHON=1`` to
force the pure-NumPy fallback.  ``backend_name()`` reports which one is
active.
"""

from ._accel import BACKEND_NAME as _BACKEND_NAME
from ._version import __version__
from .acquisitions import (
    GLOBAL_TAGS,
    TAGS,
    AcquisitionKind,
    acq_dabv,
    acq_dabvr,
    acq_dig,
    acq_dsqig,
    acq_dsqv,
    acq_dsqvr,
    acq_dv,
    acq_dvr,
    acq_global,
    acq_ig_f,
    acq_var_f,
)
from .dgsm import DgsmEstimate, estimate_dgsm, ground_truth_dgsm, rescale_to_box
from .distributions import GaussParams, folded_moments, hyp2f2_entropy_term, sq_entropy
from .driver import (
    ExperimentConfig,
    IterationRecord,
    OptimizerSettings,
    ndcg,
    optimize_acquisition,
    rmse,
    run_experiment,
    run_loop,
)
from .gp import Dataset, GpModel, fit, lookahead_global, lookahead_local
from .kernels import Hyperparams
from .problems import BenchProblem, list_problems, make_problem, observe
from .qmc import SobolStream, sobol_next

__all__ = [
    "__version__",
    "backend_name",
    "AcquisitionKind",
    "TAGS",
    "GLOBAL_TAGS",
    "acq_var_f",
    "acq_ig_f",
    "acq_dv",
    "acq_dvr",
    "acq_dig",
    "acq_dabv",
    "acq_dabvr",
    "acq_dsqv",
    "acq_dsqvr",
    "acq_dsqig",
    "acq_global",
    "DgsmEstimate",
    "estimate_dgsm",
    "ground_truth_dgsm",
    "rescale_to_box",
    "GaussParams",
    "folded_moments",
    "hyp2f2_entropy_term",
    "sq_entropy",
    "ExperimentConfig",
    "IterationRecord",
    "OptimizerSettings",
    "rmse",
    "ndcg",
    "optimize_acquisition",
    "run_loop",
    "run_experiment",
    "Dataset",
    "GpModel",
    "fit",
    "lookahead_local",
    "lookahead_global",
    "Hyperparams",
    "BenchProblem",
    "list_problems",
    "make_problem",
    "observe",
    "SobolStream",
    "sobol_next",
]


def backend_name():
    """Name of the active numerical backend: ``"native"`` or ``"python"``."""
    return _BACKEND_NAME
