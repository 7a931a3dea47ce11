"""Performance evaluation for CUSUM charts and Wald sequential probability
ratio tests.

The core idea: under a likelihood-ratio change-point model, the density of
the log-likelihood-ratio increment under the post-change law is an
exponential tilt of its pre-change counterpart.  Every operating
characteristic of both procedures (average sample number, operating
characteristic, average run length, run-length distribution and moments)
solves a Fredholm-type integral equation whose kernel is one of those two
densities.  The tilt lets all of them be rewritten against the pre-change
kernel alone, so a single Nystrom discretization and a single LU
factorization answer for both hypotheses at once.
"""

from .errors import NumericalError
from .model import (
    Hypothesis,
    ModelKind,
    ObservationModel,
    gaussian_shift,
    log_lr_cdf,
    log_lr_pdf,
    sample_log_lr,
)
from .discretization import (
    Grid,
    KernelMatrix,
    assemble_kernel,
    assemble_reference_kernel,
    build_grid,
    counter_snapshot,
    nystrom_extend,
    solve_grouped,
)
from .sprt import SprtConfig, SprtSolution, evaluate, solve_characteristics
from .cusum import (
    ArlOutcome,
    CusumConfig,
    CusumDiagnostics,
    CusumReport,
    MomentsResult,
    arl_direct,
    arl_via_sprt,
    build_report,
    default_survival_n_max,
    evaluate_arl,
    run_length_moments,
    run_length_survival,
)
from .bench import BenchRow, run_bench
from .simulate import SimResult, simulate_cusum, simulate_sprt

__version__ = "0.1.0"

__all__ = [
    "Hypothesis",
    "ModelKind",
    "ObservationModel",
    "gaussian_shift",
    "log_lr_pdf",
    "log_lr_cdf",
    "sample_log_lr",
    "Grid",
    "KernelMatrix",
    "build_grid",
    "assemble_kernel",
    "assemble_reference_kernel",
    "solve_grouped",
    "nystrom_extend",
    "counter_snapshot",
    "SprtConfig",
    "SprtSolution",
    "solve_characteristics",
    "evaluate",
    "ArlOutcome",
    "CusumConfig",
    "CusumDiagnostics",
    "CusumReport",
    "MomentsResult",
    "arl_via_sprt",
    "arl_direct",
    "evaluate_arl",
    "run_length_survival",
    "run_length_moments",
    "default_survival_n_max",
    "build_report",
    "SimResult",
    "simulate_sprt",
    "simulate_cusum",
    "BenchRow",
    "run_bench",
    "NumericalError",
    "__version__",
]
