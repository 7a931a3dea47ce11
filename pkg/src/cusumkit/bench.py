"""Benchmark of the shared-kernel solver against the two-pass baseline.

The production path assembles the pre-change kernel once, factorizes
once, and recovers all four test characteristics from grouped solves.
The status-quo alternative it replaces assembles and factorizes a
kernel per hypothesis.  Both produce the same numbers; this module
measures the wall-clock gap and records the factorization counts so the
claim is checked by instrumentation, not by assumption.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretization import (
    assemble_reference_kernel,
    build_grid,
    counter_snapshot,
    solve_grouped,
)
from .model import Hypothesis, ObservationModel, log_lr_cdf
from .sprt import SprtConfig, solve_characteristics


@dataclass(frozen=True)
class BenchRow:
    """Timing and equivalence record for one grid size."""

    n: int
    grouped_seconds: float
    baseline_seconds: float
    speedup: float
    grouped_factorizations: int
    baseline_factorizations: int
    max_abs_diff: float


def _baseline_solve(model: ObservationModel, config: SprtConfig, grid):
    """Per-hypothesis assemble+factorize+solve, the cost structure avoided."""
    xs = grid.nodes
    ones = np.ones_like(xs)
    kernel0 = assemble_reference_kernel(model, grid, Hypothesis.H0)
    n0, p0 = solve_grouped(
        kernel0, [ones, log_lr_cdf(model, Hypothesis.H0, config.a - xs)]
    )
    kernel1 = assemble_reference_kernel(model, grid, Hypothesis.H1)
    n1, p1 = solve_grouped(
        kernel1, [ones, log_lr_cdf(model, Hypothesis.H1, config.a - xs)]
    )
    return n0, p0, n1, p1


def _median_seconds(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        begin = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - begin)
    return statistics.median(samples)


def run_bench(
    model: ObservationModel,
    a: float,
    b: float,
    sizes: Sequence[int],
    repeats: int = 5,
) -> list[BenchRow]:
    """Compare both paths at each grid size; repeats >= 1, median-timed."""
    repeats = int(repeats)
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    config = SprtConfig(a=float(a), b=float(b), model=model)
    rows: list[BenchRow] = []
    for n in sizes:
        grid = build_grid(config.a, config.b, n)

        def grouped():
            return solve_characteristics(config, grid)

        def baseline():
            return _baseline_solve(model, config, grid)

        before = counter_snapshot()
        solution = grouped()
        middle = counter_snapshot()
        base_n0, base_p0, base_n1, base_p1 = baseline()
        after = counter_snapshot()
        grouped_factorizations = middle["factorizations"] - before["factorizations"]
        baseline_factorizations = after["factorizations"] - middle["factorizations"]

        max_abs_diff = max(
            float(np.max(np.abs(solution.n0 - base_n0))),
            float(np.max(np.abs(solution.p0 - base_p0))),
            float(np.max(np.abs(solution.n1 - base_n1))),
            float(np.max(np.abs(solution.p1 - base_p1))),
        )

        grouped_seconds = _median_seconds(grouped, repeats)
        baseline_seconds = _median_seconds(baseline, repeats)
        rows.append(
            BenchRow(
                n=int(n),
                grouped_seconds=grouped_seconds,
                baseline_seconds=baseline_seconds,
                speedup=baseline_seconds / grouped_seconds,
                grouped_factorizations=grouped_factorizations,
                baseline_factorizations=baseline_factorizations,
                max_abs_diff=max_abs_diff,
            )
        )
    return rows
