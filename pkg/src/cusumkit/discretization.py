"""Nystrom discretization of the integral operators.

Every characteristic computed by this package solves an equation of the
form ``u(x) = v(x) + integral_a^b K(y - x) u(y) dy`` on a finite interval.
Discretizing the integral with an n-point Gauss-Legendre rule and
collocating at the quadrature nodes turns this into the dense linear
system ``(I - M) u = v`` with ``M[i, j] = w_j * K(x_j - x_i)``.

The whole point of the shared-kernel design is that one assembled matrix
(the pre-change kernel) serves many right-hand sides, so ``M`` is
factorized eagerly, exactly once, when assembled; solves against the
cached LU factors are cheap.  Module-level counters record how many
assemblies and factorizations have happened, which lets tests and the
benchmark assert the one-factorization property instead of trusting it.

Gauss-Legendre nodes are interior to [a, b], so values at arbitrary
points (the interval ends in particular) come from the Nystrom extension
formula, not from interpolation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .errors import NumericalError
from .model import Hypothesis, ObservationModel, log_lr_pdf

MAX_GRID_SIZE = 4096
CONDITION_LIMIT = 1e12

_counter_lock = threading.Lock()
_counters = {"kernel_assemblies": 0, "factorizations": 0}


def counter_snapshot() -> dict[str, int]:
    """Copy of the cumulative assembly/factorization counters.

    Tests diff two snapshots around an operation to assert how much
    linear-algebra work it really did.
    """
    with _counter_lock:
        return dict(_counters)


def _count(name: str) -> None:
    with _counter_lock:
        _counters[name] += 1


@dataclass(frozen=True)
class Grid:
    """Gauss-Legendre quadrature rule on [a, b].

    ``nodes`` are strictly inside (a, b) and sorted ascending; ``weights``
    are positive and sum to b - a.
    """

    a: float
    b: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size


def build_grid(a: float, b: float, n: int) -> Grid:
    """Build an n-point Gauss-Legendre grid on [a, b].

    Raises ValueError unless a < b (both finite) and 2 <= n <= 4096.
    The cap keeps the dense O(n^3) factorization within interactive
    budgets; accuracy saturates far below it for smooth kernels.
    """
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("interval endpoints must be finite")
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    n = int(n)
    if n < 2:
        raise ValueError("grid size must be at least 2")
    if n > MAX_GRID_SIZE:
        raise ValueError(f"grid size {n} exceeds the cap of {MAX_GRID_SIZE}")
    ref_nodes, ref_weights = leggauss(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = half * ref_nodes + mid
    weights = half * ref_weights
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return Grid(a=a, b=b, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class KernelMatrix:
    """Weighted collocation matrix with its cached LU factorization.

    ``entries[i, j] = weights[j] * K(nodes[j] - nodes[i])`` where K is the
    increment density under ``hypothesis``.  ``lu``/``piv`` factorize
    ``I - entries``; ``condition_estimate`` is the 1-norm condition
    estimate of that same matrix.
    """

    grid: Grid
    model: ObservationModel
    hypothesis: Hypothesis
    entries: np.ndarray = field(repr=False)
    lu: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)
    condition_estimate: float

    def row(self, x: float) -> np.ndarray:
        """Quadrature row ``weights[j] * K(nodes[j] - x)`` at a point x."""
        z = self.grid.nodes - x
        return self.grid.weights * log_lr_pdf(self.model, self.hypothesis, z)


def _assemble(model: ObservationModel, grid: Grid, hypothesis: Hypothesis) -> KernelMatrix:
    z = grid.nodes[None, :] - grid.nodes[:, None]
    entries = grid.weights[None, :] * log_lr_pdf(model, hypothesis, z)
    _count("kernel_assemblies")
    system = np.eye(grid.size) - entries
    anorm = np.linalg.norm(system, 1)
    lu, piv = lu_factor(system)
    _count("factorizations")
    gecon = get_lapack_funcs(("gecon",), (lu,))[0]
    rcond, info = gecon(lu, anorm)
    if info != 0:
        raise NumericalError(f"condition estimation failed (LAPACK info={info})")
    condition = float(1.0 / rcond) if rcond > 0.0 else float("inf")
    if condition > CONDITION_LIMIT:
        raise NumericalError(
            f"discretized system is numerically singular: condition estimate "
            f"{condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    return KernelMatrix(
        grid=grid,
        model=model,
        hypothesis=hypothesis,
        entries=entries,
        lu=lu,
        piv=piv,
        condition_estimate=condition,
    )


def assemble_kernel(model: ObservationModel, grid: Grid) -> KernelMatrix:
    """Assemble and factorize the pre-change kernel matrix on ``grid``.

    This is the only kernel the production solvers ever build: post-change
    quantities are obtained from it through the exponential tilt.  The
    matrix ``I - M`` is LU-factorized here, eagerly, so the returned
    object is ready for repeated solves.  Raises NumericalError if the
    condition estimate exceeds 1e12.
    """
    return _assemble(model, grid, Hypothesis.H0)


def assemble_reference_kernel(
    model: ObservationModel, grid: Grid, hypothesis: Hypothesis
) -> KernelMatrix:
    """Assemble the kernel for one named hypothesis, without tilting.

    Exists for cross-checks and for the benchmark's baseline, which pays
    for one assembly and one factorization per hypothesis.  Production
    code paths never call this.
    """
    return _assemble(model, grid, Hypothesis(hypothesis))


def solve_grouped(
    kernel: KernelMatrix, columns: Sequence[np.ndarray]
) -> list[np.ndarray]:
    """Solve ``(I - M) u = v`` for several right-hand sides v.

    All solves reuse the kernel's single cached factorization.  Columns
    are solved one at a time, in order, so the result for each column is
    bitwise identical to solving it alone; grouping changes the work
    schedule, never the arithmetic.
    """
    n = kernel.grid.size
    out: list[np.ndarray] = []
    for idx, col in enumerate(columns):
        arr = np.asarray(col, dtype=np.float64)
        if arr.shape != (n,):
            raise ValueError(
                f"right-hand side {idx} has shape {arr.shape}, expected ({n},)"
            )
        out.append(lu_solve((kernel.lu, kernel.piv), arr))
    return out


def nystrom_extend(
    kernel: KernelMatrix,
    node_values: np.ndarray,
    inhomogeneous: Callable[[float], float],
    x: float,
) -> float:
    """Evaluate a solved unknown at an arbitrary point of [a, b].

    Given node values ``u_j`` solving the collocated system and the
    equation's inhomogeneous term ``v``, the Nystrom extension
    ``u(x) = v(x) + sum_j w_j K(x_j - x) u_j`` reproduces the solution
    anywhere on the interval with the quadrature's own accuracy.  At a
    node it reproduces the stored value up to rounding.
    """
    x = float(x)
    grid = kernel.grid
    if not grid.a <= x <= grid.b:
        raise ValueError(f"extension point {x} lies outside [{grid.a}, {grid.b}]")
    node_values = np.asarray(node_values, dtype=np.float64)
    if node_values.shape != (grid.size,):
        raise ValueError(
            f"node values have shape {node_values.shape}, expected ({grid.size},)"
        )
    return float(inhomogeneous(x)) + float(kernel.row(x) @ node_values)
