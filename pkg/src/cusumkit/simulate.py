"""Monte Carlo oracles for the sequential test and the CUSUM chart.

These simulators exist to check the analytic solvers against the
definitions of the procedures themselves, so they share nothing with the
integral-equation code except the observation model.

Reproducibility contract (stable across versions): replications are
split into fixed blocks of ``BLOCK_SIZE``; block ``j`` under hypothesis
``i`` draws from ``Philox(SeedSequence(seed, spawn_key=(namespace, i, j)))``
with namespace 0 for the main run and 1 for the pilot that sizes the
step cap.  Per-block results are integers (step totals, exit counts,
survival counts) merged in block order, so the outcome is bit-identical
for any worker count: workers change the schedule, never the streams or
the arithmetic.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cusum import CusumConfig
from .errors import NumericalError
from .model import Hypothesis, sample_log_lr
from .sprt import SprtConfig

BLOCK_SIZE = 65536
_NAMESPACE_MAIN = 0
_NAMESPACE_PILOT = 1

_PILOT_REPS = 1000
_PILOT_STEP_CAP = 100_000
_PILOT_CAP_FRACTION = 0.10
_MAIN_CAP_FRACTION = 0.001
_SPRT_STEP_LIMIT = 10_000_000


@dataclass(frozen=True)
class SimResult:
    """A simulation estimate: mean, its standard error, and sample size.

    ``extras`` optionally carries the survival histogram for chart runs:
    ``extras["survival_counts"][n]`` is the number of replications whose
    run length exceeded n, aligned with the analytic survival grid.
    """

    mean: float
    std_error: float
    reps: int
    extras: dict | None = field(default=None, repr=False)


def _resolve_workers(requested: int) -> int:
    requested = int(requested)
    if requested < 0:
        raise ValueError("workers must be nonnegative (0 selects automatic)")
    count = requested if requested > 0 else min(8, os.cpu_count() or 1)
    env = os.environ.get("CUSUMKIT_THREADS")
    if env is not None and env.strip():
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(
                f"CUSUMKIT_THREADS must be an integer, got {env!r}"
            ) from None
        if cap < 0:
            raise ValueError("CUSUMKIT_THREADS must be nonnegative (0 = automatic)")
        if cap > 0:
            count = min(count, cap)
    return max(1, count)


def _stream(seed: int, namespace: int, hypothesis: Hypothesis, block: int) -> np.random.Generator:
    key = np.random.SeedSequence(seed, spawn_key=(namespace, int(hypothesis), block))
    return np.random.Generator(np.random.Philox(key))


def _validate_common(reps: int, seed: int) -> tuple[int, int]:
    reps = int(reps)
    if reps < 1:
        raise ValueError("reps must be at least 1")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return reps, seed


def _blocks(reps: int) -> list[tuple[int, int]]:
    """(block index, replication count) pairs covering ``reps``."""
    out = []
    start = 0
    block = 0
    while start < reps:
        count = min(BLOCK_SIZE, reps - start)
        out.append((block, count))
        start += count
        block += 1
    return out


def _run_blocks(task: Callable[[int, int], object], reps: int, workers: int) -> list:
    """Run one task per block, returning results in block order."""
    plan = _blocks(reps)
    if workers <= 1 or len(plan) == 1:
        return [task(block, count) for block, count in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bc: task(*bc), plan))


def _mean_and_se(total: int, total_sq: int, reps: int) -> tuple[float, float]:
    mean = total / reps
    if reps < 2:
        return mean, float("nan")
    var = (total_sq - total * total / reps) / (reps - 1)
    var = max(var, 0.0)
    return mean, math.sqrt(var / reps)


def simulate_sprt(
    config: SprtConfig,
    hypothesis: Hypothesis,
    start: float,
    reps: int,
    seed: int,
    workers: int = 0,
) -> tuple[SimResult, SimResult]:
    """Simulate the sequential test; returns (sample-size, lower-exit) results.

    Each replication walks ``Z_n = Z_{n-1} + increment`` from
    ``Z_0 = start`` until Z leaves the open interval (a, b); the walk
    always takes at least one step, so boundary starts are legitimate.
    The first result estimates the average sample number, the second the
    probability of exiting through the lower boundary.
    """
    reps, seed = _validate_common(reps, seed)
    start = float(start)
    if not config.a <= start <= config.b:
        raise ValueError(
            f"start {start} lies outside [{config.a}, {config.b}]"
        )
    hypothesis = Hypothesis(hypothesis)
    workers = _resolve_workers(workers)
    model = config.model
    a, b = config.a, config.b

    def block_task(block: int, count: int) -> tuple[int, int, int]:
        rng = _stream(seed, _NAMESPACE_MAIN, hypothesis, block)
        state = np.full(count, start)
        total = 0
        total_sq = 0
        lower = 0
        n = 0
        while state.size:
            n += 1
            if n > _SPRT_STEP_LIMIT:
                raise NumericalError(
                    f"sequential test failed to stop within {_SPRT_STEP_LIMIT} steps"
                )
            state = state + sample_log_lr(model, hypothesis, rng, state.size)
            low = state <= a
            done = low | (state >= b)
            finished = int(np.count_nonzero(done))
            if finished:
                lower += int(np.count_nonzero(low))
                total += n * finished
                total_sq += n * n * finished
                state = state[~done]
        return total, total_sq, lower

    results = _run_blocks(block_task, reps, workers)
    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    lower = sum(r[2] for r in results)

    asn_mean, asn_se = _mean_and_se(total, total_sq, reps)
    oc_mean = lower / reps
    oc_se = math.sqrt(oc_mean * (1.0 - oc_mean) / reps)
    return (
        SimResult(mean=asn_mean, std_error=asn_se, reps=reps),
        SimResult(mean=oc_mean, std_error=oc_se, reps=reps),
    )


def _chart_survival_block(
    config: CusumConfig,
    hypothesis: Hypothesis,
    seed: int,
    namespace: int,
    block: int,
    count: int,
    step_cap: int,
) -> np.ndarray:
    """Survival counts S(n) = #{runs alive after n steps} for one block.

    Stops early once every run has alarmed; the merged array is padded
    with zeros, which is exact (no run survives past its alarm).
    """
    rng = _stream(seed, namespace, hypothesis, block)
    model = config.model
    h = config.h
    state = np.full(count, config.w)
    survival = [count]
    for _ in range(step_cap):
        if not state.size:
            break
        state = state + sample_log_lr(model, hypothesis, rng, state.size)
        np.maximum(state, 0.0, out=state)
        state = state[state < h]
        survival.append(state.size)
    return np.asarray(survival, dtype=np.int64)


def _merge_survival(parts: Sequence[np.ndarray]) -> np.ndarray:
    length = max(p.size for p in parts)
    merged = np.zeros(length, dtype=np.int64)
    for p in parts:
        merged[: p.size] += p
    return merged


def _totals_from_survival(survival: np.ndarray, cap: int) -> tuple[int, int]:
    """Exact sum and sum of squares of stopping times, censored at cap.

    A stopping time t satisfies t = sum_n 1{t > n} and
    t^2 = sum_n (2n+1) 1{t > n}, so column sums of the survival counts
    over n < cap reproduce both totals with censored runs counted at
    exactly cap steps.
    """
    counts = survival[:cap]
    n = np.arange(counts.size, dtype=np.int64)
    total = int(counts.sum())
    total_sq = int(((2 * n + 1) * counts).sum())
    return total, total_sq


def simulate_cusum(
    config: CusumConfig,
    hypothesis: Hypothesis,
    reps: int,
    seed: int,
    step_cap: int | None = None,
    survival_n_max: int | None = None,
    workers: int = 0,
) -> SimResult:
    """Simulate the chart's run length; returns the ARL estimate.

    Runs the reflected recursion ``W_n = max(0, W_{n-1} + increment)``
    from ``W_0 = w`` until ``W_n >= h``.  With ``step_cap=None`` a
    deterministic 1000-replication pilot sizes the cap at 100x its rough
    ARL estimate.  Runs still alive at the cap are counted at exactly
    ``step_cap`` steps; if they exceed 0.1% of replications the estimate
    is untrustworthy and a NumericalError reports the observed fraction.

    ``extras["survival_counts"]`` holds the survival histogram on the
    same n grid as the analytic survival curve: entry n counts runs with
    length exceeding n, for n up to ``survival_n_max`` (default: the
    full simulated range).
    """
    reps, seed = _validate_common(reps, seed)
    hypothesis = Hypothesis(hypothesis)
    workers = _resolve_workers(workers)
    if step_cap is None:
        pilot = _chart_survival_block(
            config, hypothesis, seed, _NAMESPACE_PILOT, 0, _PILOT_REPS, _PILOT_STEP_CAP
        )
        capped = int(pilot[_PILOT_STEP_CAP]) if pilot.size > _PILOT_STEP_CAP else 0
        if capped > _PILOT_CAP_FRACTION * _PILOT_REPS:
            raise NumericalError(
                f"pilot run left {capped / _PILOT_REPS:.1%} of replications "
                f"unfinished after {_PILOT_STEP_CAP} steps; pass an explicit "
                f"step_cap"
            )
        pilot_total, _ = _totals_from_survival(pilot, _PILOT_STEP_CAP)
        step_cap = int(math.ceil(100.0 * pilot_total / _PILOT_REPS))
    else:
        step_cap = int(step_cap)
        if step_cap < 1:
            raise ValueError("step_cap must be at least 1")
    if survival_n_max is not None:
        survival_n_max = int(survival_n_max)
        if survival_n_max < 0:
            raise ValueError("survival_n_max must be nonnegative")

    def block_task(block: int, count: int) -> np.ndarray:
        return _chart_survival_block(
            config, hypothesis, seed, _NAMESPACE_MAIN, block, count, step_cap
        )

    survival = _merge_survival(_run_blocks(block_task, reps, workers))
    capped = int(survival[step_cap]) if survival.size > step_cap else 0
    if capped >= _MAIN_CAP_FRACTION * reps:
        raise NumericalError(
            f"{capped / reps:.2%} of replications hit the step cap "
            f"{step_cap} (tolerated: <{_MAIN_CAP_FRACTION:.1%}); raise step_cap"
        )
    total, total_sq = _totals_from_survival(survival, step_cap)
    mean, se = _mean_and_se(total, total_sq, reps)

    horizon = survival_n_max if survival_n_max is not None else survival.size - 1
    counts = np.zeros(horizon + 1, dtype=np.int64)
    clip = min(horizon + 1, survival.size)
    counts[:clip] = survival[:clip]
    extras = {"survival_counts": counts, "step_cap": step_cap}
    return SimResult(mean=mean, std_error=se, reps=reps, extras=extras)
