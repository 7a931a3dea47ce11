"""Operating characteristics of the sequential probability ratio test.

The test tracks the log-likelihood-ratio random walk Z_n from a start
x in [a, b] and stops the first time Z_n leaves the open interval
(a, b).  Two functions of the start describe it completely under each
hypothesis: the average sample number ``N_i(x)`` and the operating
characteristic ``P_i(x)``, the probability of exiting through the lower
boundary.  Each solves a renewal equation driven by the increment
density ``K_i``::

    N_i(x) = 1        + integral_a^b K_i(y - x) N_i(y) dy
    P_i(x) = F_i(a-x) + integral_a^b K_i(y - x) P_i(y) dy

Multiplying the two post-change equations through by exp(x) and using
the tilt ``exp(x) K_1(y - x) = exp(y) K_0(y - x)`` turns their kernel
into K_0 as well, with unknowns ``exp(x) N_1(x)`` and ``exp(x) P_1(x)``
and inhomogeneous terms ``exp(x)`` and ``exp(x) F_1(a - x)``.  All four
systems then share one matrix, so one assembly and one LU factorization
produce every characteristic under both hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .discretization import (
    Grid,
    KernelMatrix,
    assemble_kernel,
    nystrom_extend,
    solve_grouped,
)
from .model import Hypothesis, ObservationModel, log_lr_cdf

# exp(x) appears as a right-hand side and exp(-x) as the recovery scale,
# so boundaries beyond +-500 would push intermediates toward float
# overflow (exp(709) is the double-precision edge).  Practical designs
# use single-digit boundaries; reject the rest loudly.
BOUNDARY_LIMIT = 500.0


@dataclass(frozen=True)
class SprtConfig:
    """Test geometry: lower boundary a <= 0 < b upper boundary."""

    a: float
    b: float
    model: ObservationModel

    def __post_init__(self) -> None:
        a = float(self.a)
        b = float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("boundaries must be finite")
        if not (a <= 0.0 < b):
            raise ValueError(f"boundaries must satisfy a <= 0 < b, got a={a}, b={b}")
        if b > BOUNDARY_LIMIT:
            raise ValueError(f"upper boundary {b} exceeds the cap of {BOUNDARY_LIMIT}")
        if a < -BOUNDARY_LIMIT:
            raise ValueError(
                f"lower boundary {a} is below the cap of -{BOUNDARY_LIMIT}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


class Characteristics(NamedTuple):
    """The four test characteristics at one starting point."""

    n0: float
    p0: float
    n1: float
    p1: float


@dataclass(frozen=True)
class SprtSolution:
    """Node values of all four characteristics plus the solving kernel.

    ``n0``/``p0`` are the pre-change average sample number and lower-exit
    probability at the grid nodes; ``n1``/``p1`` the post-change ones,
    already scaled back from the transformed system.  The kernel is
    retained so values anywhere on [a, b] can be produced on demand.
    """

    config: SprtConfig
    grid: Grid
    kernel: KernelMatrix
    n0: np.ndarray = field(repr=False)
    p0: np.ndarray = field(repr=False)
    n1: np.ndarray = field(repr=False)
    p1: np.ndarray = field(repr=False)
    # transformed-space node values exp(x_j) * {n1, p1}, kept because the
    # Nystrom extension must run in the space the system was solved in.
    n1_tilde: np.ndarray = field(repr=False)
    p1_tilde: np.ndarray = field(repr=False)


def solve_characteristics(config: SprtConfig, grid: Grid) -> SprtSolution:
    """Solve for all four characteristics with one factorization.

    The grid must span exactly [config.a, config.b]; anything else is a
    caller error, not something to silently rescale.  Assembles the
    pre-change kernel once, solves the four right-hand sides grouped
    against its single LU factorization, and untilts the post-change
    pair.
    """
    if grid.a != config.a or grid.b != config.b:
        raise ValueError(
            f"grid spans [{grid.a}, {grid.b}] but the test interval is "
            f"[{config.a}, {config.b}]"
        )
    kernel = assemble_kernel(config.model, grid)
    xs = grid.nodes
    ex = np.exp(xs)
    ones = np.ones_like(xs)
    f0_low = log_lr_cdf(config.model, Hypothesis.H0, config.a - xs)
    f1_low = log_lr_cdf(config.model, Hypothesis.H1, config.a - xs)
    n0, p0, n1_tilde, p1_tilde = solve_grouped(
        kernel, [ones, f0_low, ex, ex * f1_low]
    )
    emx = np.exp(-xs)
    return SprtSolution(
        config=config,
        grid=grid,
        kernel=kernel,
        n0=n0,
        p0=p0,
        n1=emx * n1_tilde,
        p1=emx * p1_tilde,
        n1_tilde=n1_tilde,
        p1_tilde=p1_tilde,
    )


def evaluate(solution: SprtSolution, x: float) -> Characteristics:
    """Characteristics at an arbitrary start x in [a, b].

    Uses the Nystrom extension with each equation's own inhomogeneous
    term; the post-change pair is extended in transformed space and then
    multiplied by exp(-x).  At a grid node this reproduces the stored
    node values up to rounding.
    """
    x = float(x)
    cfg = solution.config
    if not cfg.a <= x <= cfg.b:
        raise ValueError(f"start {x} lies outside [{cfg.a}, {cfg.b}]")
    model = cfg.model
    kernel = solution.kernel
    n0 = nystrom_extend(kernel, solution.n0, lambda t: 1.0, x)
    p0 = nystrom_extend(
        kernel,
        solution.p0,
        lambda t: log_lr_cdf(model, Hypothesis.H0, cfg.a - t),
        x,
    )
    scale = math.exp(-x)
    n1 = scale * nystrom_extend(kernel, solution.n1_tilde, math.exp, x)
    p1 = scale * nystrom_extend(
        kernel,
        solution.p1_tilde,
        lambda t: math.exp(t) * log_lr_cdf(model, Hypothesis.H1, cfg.a - t),
        x,
    )
    return Characteristics(n0=n0, p0=p0, n1=n1, p1=p1)
