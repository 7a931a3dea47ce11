"""Run-length analysis of the one-sided CUSUM chart.

The chart tracks ``W_n = max(0, W_{n-1} + log LR_n)`` from a headstart
``W_0 = w`` and alarms once ``W_n >= h``.  Its run length ``C`` is
analyzed three ways, all driven by the same pre-change kernel:

* via the sequential test: between visits to zero the chart behaves as
  a sequential probability ratio test on (0, h), and the number of
  zero-visits before the alarm is geometric, giving
  ``L_i(w) = N_i(0) P_i(w) / (1 - P_i(0)) + N_i(w)``;
* directly: ``L_i(x) = 1 + L_i(0) F_i(-x) + integral_0^h K_i(y-x) L_i(y) dy``,
  where the ``F_i(-x) L_i(0)`` atom is the probability mass the reflection
  at zero lumps onto the origin;
* iteratively: the survival probabilities ``Pr_i(C > n)`` follow from
  repeated application of the same integral operator, and moments of any
  order are survival sums with a geometric tail closure.

Post-change variants are always solved or iterated in tilted space
(multiply through by exp(x)), which turns their kernel into the
pre-change one; each operation therefore performs exactly one kernel
assembly and one LU factorization for both hypotheses together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, KernelMatrix, assemble_kernel, solve_grouped
from .errors import NumericalError
from .model import Hypothesis, ObservationModel, log_lr_cdf
from .sprt import BOUNDARY_LIMIT, SprtConfig, SprtSolution, evaluate, solve_characteristics

# restart probability this close to 1 means the geometric restart count
# is numerically unresolvable (threshold too small or grid too coarse)
DEGENERACY_TOL = 1e-12

MAX_SURVIVAL_STEPS = 10**6
MAX_MOMENT_ORDER = 12


@dataclass(frozen=True)
class CusumConfig:
    """Chart geometry: control limit h and headstart w, 0 <= w < h."""

    h: float
    w: float
    model: ObservationModel

    def __post_init__(self) -> None:
        h = float(self.h)
        w = float(self.w)
        if not (math.isfinite(h) and math.isfinite(w)):
            raise ValueError("h and w must be finite")
        if h <= 0.0:
            raise ValueError(f"control limit must be positive, got h={h}")
        if h > BOUNDARY_LIMIT:
            raise ValueError(f"control limit {h} exceeds the cap of {BOUNDARY_LIMIT}")
        if not 0.0 <= w < h:
            raise ValueError(f"headstart must satisfy 0 <= w < h, got w={w}, h={h}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class MomentsResult:
    """Run-length moments with tail-extrapolation diagnostics.

    ``moments0[k-1]`` is the k-th moment of the run length under H0
    (likewise ``moments1``); ``rho0``/``rho1`` the fitted geometric decay
    ratios; ``steps0``/``steps1`` how many survival terms were summed
    exactly before the tail closure took over.
    """

    moments0: np.ndarray = field(repr=False)
    moments1: np.ndarray = field(repr=False)
    rho0: float = 0.0
    rho1: float = 0.0
    steps0: int = 0
    steps1: int = 0
    condition_estimate: float = float("nan")


@dataclass(frozen=True)
class ArlOutcome:
    """Both ARLs plus the solve diagnostics the service reports."""

    arl0: float
    arl1: float
    condition_estimate: float
    method: str


@dataclass(frozen=True)
class CusumDiagnostics:
    grid_size: int
    condition_estimate: float
    rho0: float
    rho1: float


@dataclass(frozen=True)
class CusumReport:
    """Everything the chart analysis produces for one configuration."""

    config: CusumConfig
    arl0: float
    arl1: float
    survival0: np.ndarray = field(repr=False)
    survival1: np.ndarray = field(repr=False)
    moments: MomentsResult = field(repr=False)
    diagnostics: CusumDiagnostics = field(repr=False)


def _check_grid(config: CusumConfig, grid: Grid) -> None:
    if grid.a != 0.0 or grid.b != config.h:
        raise ValueError(
            f"grid spans [{grid.a}, {grid.b}] but the chart needs [0.0, {config.h}]"
        )


def _solve_embedded_test(config: CusumConfig, grid: Grid) -> SprtSolution:
    test = SprtConfig(a=0.0, b=config.h, model=config.model)
    return solve_characteristics(test, grid)


def _arl_from_solution(solution: SprtSolution, w: float) -> tuple[float, float]:
    at_zero = evaluate(solution, 0.0)
    at_start = at_zero if w == 0.0 else evaluate(solution, w)
    arls = []
    for n_zero, p_zero, n_start, p_start, name in (
        (at_zero.n0, at_zero.p0, at_start.n0, at_start.p0, "H0"),
        (at_zero.n1, at_zero.p1, at_start.n1, at_start.p1, "H1"),
    ):
        if p_zero >= 1.0 - DEGENERACY_TOL:
            raise NumericalError(
                f"degenerate geometry under {name}: restart probability "
                f"{p_zero!r} is numerically 1 (threshold too small or grid "
                f"too coarse)"
            )
        arls.append(n_zero * p_start / (1.0 - p_zero) + n_start)
    return arls[0], arls[1]


def arl_via_sprt(config: CusumConfig, grid: Grid) -> tuple[float, float]:
    """Average run lengths through the embedded sequential test.

    Runs of the chart between zero-resets are excursions of the
    sequential test on (0, h); the alarm ends a geometric number of
    them.  One solve of the test characteristics therefore yields both
    ARLs.  The grid must span [0, h].
    """
    _check_grid(config, grid)
    solution = _solve_embedded_test(config, grid)
    return _arl_from_solution(solution, config.w)


def arl_direct(config: CusumConfig, grid: Grid) -> tuple[float, float]:
    """Average run lengths from the renewal equation with the zero atom.

    Collocates ``L_i(x) = 1 + L_i(0) F_i(-x) + integral K_i(y-x) L_i(y) dy``
    at the grid nodes plus one extra row at x = 0, where the probability
    atom deposited by the reflection lives.  The extra row is eliminated
    by block substitution: with p solving ``(I - M) p = rhs`` and q
    solving ``(I - M) q = atom``, the x = 0 row fixes the scalar
    ``L_i(0)`` and the node values follow as ``p + L_i(0) q``.  The
    post-change system is tilted by exp(x) first, so all four
    right-hand sides share the one factorized pre-change matrix.
    """
    l0, l1, _ = _arl_direct_with_kernel(config, grid)
    return l0, l1


def _arl_direct_with_kernel(
    config: CusumConfig, grid: Grid
) -> tuple[float, float, KernelMatrix]:
    _check_grid(config, grid)
    model = config.model
    kernel = assemble_kernel(model, grid)
    xs = grid.nodes
    ex = np.exp(xs)
    atom0 = log_lr_cdf(model, Hypothesis.H0, -xs)
    atom1 = ex * log_lr_cdf(model, Hypothesis.H1, -xs)
    p0, q0, p1, q1 = solve_grouped(kernel, [np.ones_like(xs), atom0, ex, atom1])
    row_zero = kernel.row(0.0)
    row_start = kernel.row(config.w)

    def at_zero_then_start(
        p: np.ndarray, q: np.ndarray, hyp: Hypothesis, rhs_w: float, atom_w: float
    ) -> float:
        numer = 1.0 + row_zero @ p
        denom = 1.0 - log_lr_cdf(model, hyp, 0.0) - row_zero @ q
        if denom <= DEGENERACY_TOL:
            raise NumericalError(
                f"degenerate geometry under {hyp.name}: the zero-atom row is "
                f"numerically singular (denominator {denom!r})"
            )
        value_zero = numer / denom
        nodes = p + value_zero * q
        return rhs_w + value_zero * atom_w + row_start @ nodes

    w = config.w
    l0 = at_zero_then_start(
        p0, q0, Hypothesis.H0, 1.0, log_lr_cdf(model, Hypothesis.H0, -w)
    )
    l1_tilted = at_zero_then_start(
        p1,
        q1,
        Hypothesis.H1,
        math.exp(w),
        math.exp(w) * log_lr_cdf(model, Hypothesis.H1, -w),
    )
    return l0, math.exp(-w) * l1_tilted, kernel


def evaluate_arl(config: CusumConfig, grid: Grid, method: str = "via-sprt") -> ArlOutcome:
    """ARLs by the chosen method, with the solve's condition estimate."""
    if method == "via-sprt":
        solution = _solve_embedded_test(config, grid)
        arl0, arl1 = _arl_from_solution(solution, config.w)
        condition = solution.kernel.condition_estimate
    elif method == "direct":
        arl0, arl1, kernel = _arl_direct_with_kernel(config, grid)
        condition = kernel.condition_estimate
    else:
        raise ValueError(f"unknown method {method!r}; use 'via-sprt' or 'direct'")
    return ArlOutcome(
        arl0=arl0, arl1=arl1, condition_estimate=condition, method=method
    )


class _SurvivalIteration:
    """One hypothesis's survival recursion against the shared kernel.

    Maintains the current iterate at the grid nodes plus its value at
    the endpoint x = 0 (not a Gauss node), advancing
    ``v_{n+1}(x) = F(-x) v_n(0) + integral K(y-x) v_n(y) dy`` one step at
    a time.  The post-change recursion runs in tilted space, where its
    kernel coincides with the pre-change matrix; only the atom vector,
    the initial iterate, and the readout scale differ.
    """

    def __init__(self, kernel: KernelMatrix, config: CusumConfig, hypothesis: Hypothesis):
        model = config.model
        xs = kernel.grid.nodes
        w = config.w
        if hypothesis == Hypothesis.H0:
            self.values = np.ones_like(xs)
            self.atom = log_lr_cdf(model, Hypothesis.H0, -xs)
            self.atom_start = log_lr_cdf(model, Hypothesis.H0, -w)
            self.scale_start = 1.0
        else:
            self.values = np.exp(xs)
            self.atom = np.exp(xs) * log_lr_cdf(model, Hypothesis.H1, -xs)
            self.atom_start = math.exp(w) * log_lr_cdf(model, Hypothesis.H1, -w)
            self.scale_start = math.exp(-w)
        self.value_zero = 1.0
        self.cdf_zero = log_lr_cdf(model, hypothesis, 0.0)
        self.row_zero = kernel.row(0.0)
        self.row_start = kernel.row(w)
        self.matrix = kernel.entries

    def advance(self) -> float:
        """Step the recursion once; return the new survival at the start."""
        survival = self.scale_start * (
            self.atom_start * self.value_zero + self.row_start @ self.values
        )
        next_zero = self.cdf_zero * self.value_zero + self.row_zero @ self.values
        self.values = self.atom * self.value_zero + self.matrix @ self.values
        self.value_zero = next_zero
        return float(survival)


def run_length_survival(
    config: CusumConfig, grid: Grid, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Survival probabilities Pr_i(C > n) for n = 0..n_max.

    One kernel assembly serves both hypotheses; each step is a dense
    matrix-vector product, so cost grows as n_max * grid.size**2.
    Index 0 is always exactly 1 (no alarm can fire before the first
    observation).
    """
    _check_grid(config, grid)
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_max > MAX_SURVIVAL_STEPS:
        raise ValueError(f"n_max {n_max} exceeds the cap of {MAX_SURVIVAL_STEPS}")
    kernel = assemble_kernel(config.model, grid)
    out: list[np.ndarray] = []
    for hypothesis in (Hypothesis.H0, Hypothesis.H1):
        iteration = _SurvivalIteration(kernel, config, hypothesis)
        survival = np.empty(n_max + 1)
        survival[0] = 1.0
        for n in range(1, n_max + 1):
            survival[n] = iteration.advance()
        out.append(survival)
    return out[0], out[1]


def _moment_increments(n: int, k_max: int) -> np.ndarray:
    """Coefficients (n+1)^k - n^k of the survival term s_n, k = 1..k_max."""
    k = np.arange(1, k_max + 1, dtype=np.float64)
    return (n + 1.0) ** k - float(n) ** k


def _geometric_power_sums(rho: float, k_max: int) -> np.ndarray:
    """A_l = sum_{j>=1} j^l rho^j for l = 0..k_max, by recurrence."""
    sums = np.empty(k_max + 1)
    sums[0] = rho / (1.0 - rho)
    for order in range(1, k_max + 1):
        inner = 1.0
        for i in range(order):
            inner += math.comb(order, i) * sums[i]
        sums[order] = rho * inner / (1.0 - rho)
    return sums


def _shifted_power_tail(base: float, power_sums: np.ndarray, p: int) -> float:
    """sum_{j>=1} (base + j)^p rho^j given the A_l sums."""
    total = 0.0
    for l in range(p + 1):
        total += math.comb(p, l) * base ** (p - l) * power_sums[l]
    return total


# decay-ratio stabilization: lag used for the ratio estimate, minimum
# number of exact terms, and how many consecutive stable estimates end
# the iteration
_RATIO_LAG = 10
_MIN_STEPS = 30
_STABLE_NEEDED = 5


def _moments_one_hypothesis(
    iteration: _SurvivalIteration, k_max: int, tail_tol: float
) -> tuple[np.ndarray, float, int]:
    partial = _moment_increments(0, k_max)  # n = 0 term, survival exactly 1
    survival_sum = 1.0
    recent: list[float] = [1.0]
    previous_ratio = None
    stable = 0
    n = 0
    while True:
        n += 1
        s = iteration.advance()
        partial += _moment_increments(n, k_max) * s
        survival_sum += s
        recent.append(s)
        if len(recent) > _RATIO_LAG + 1:
            recent.pop(0)
        if s == 0.0:
            # survival has underflowed; the series has terminated exactly
            return partial, 0.0, n
        if n >= _MIN_STEPS and len(recent) == _RATIO_LAG + 1 and recent[0] > 0.0:
            ratio = (s / recent[0]) ** (1.0 / _RATIO_LAG)
            if previous_ratio is not None and ratio < 1.0:
                if abs(ratio - previous_ratio) <= tail_tol * ratio:
                    stable += 1
                else:
                    stable = 0
                if stable >= _STABLE_NEEDED:
                    break
            previous_ratio = ratio
        if n > 10.0 * survival_sum + 1000.0:
            raise NumericalError(
                f"survival decay ratio failed to stabilize within {n} steps "
                f"(running average-run-length estimate {survival_sum:.6g})"
            )
    rho = ratio
    if rho >= 1.0 - 1e-13:
        raise NumericalError(
            f"tail decay ratio {rho!r} is numerically 1; geometric tail closure "
            f"is impossible"
        )
    power_sums = _geometric_power_sums(rho, k_max)
    moments = np.empty(k_max)
    for k in range(1, k_max + 1):
        tail = s * (
            _shifted_power_tail(n + 1.0, power_sums, k)
            - _shifted_power_tail(float(n), power_sums, k)
        )
        moments[k - 1] = partial[k - 1] + tail
    return moments, rho, n


def run_length_moments(
    config: CusumConfig, grid: Grid, k_max: int, tail_tol: float = 1e-9
) -> MomentsResult:
    """Run-length moments E_i[C^k], k = 1..k_max, for both hypotheses.

    Uses the survival-sum representation
    ``E[C^k] = sum_n ((n+1)^k - n^k) Pr(C > n)``: terms are accumulated
    exactly while the survival sequence is iterated, and once its decay
    ratio (estimated over a lag of 10 steps) stabilizes to within
    ``tail_tol`` relative change, the infinite remainder is closed in
    closed form under geometric decay.  Raises NumericalError if the
    ratio never stabilizes within ~10x the running ARL estimate.
    """
    _check_grid(config, grid)
    k_max = int(k_max)
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if k_max > MAX_MOMENT_ORDER:
        raise ValueError(f"k_max {k_max} exceeds the cap of {MAX_MOMENT_ORDER}")
    tail_tol = float(tail_tol)
    if not 0.0 < tail_tol < 1.0:
        raise ValueError("tail_tol must lie strictly between 0 and 1")
    kernel = assemble_kernel(config.model, grid)
    moments0, rho0, steps0 = _moments_one_hypothesis(
        _SurvivalIteration(kernel, config, Hypothesis.H0), k_max, tail_tol
    )
    moments1, rho1, steps1 = _moments_one_hypothesis(
        _SurvivalIteration(kernel, config, Hypothesis.H1), k_max, tail_tol
    )
    return MomentsResult(
        moments0=moments0,
        moments1=moments1,
        rho0=rho0,
        rho1=rho1,
        steps0=steps0,
        steps1=steps1,
        condition_estimate=kernel.condition_estimate,
    )


def default_survival_n_max(arl0: float, arl1: float) -> int:
    """Default survival horizon: five times the larger ARL, capped."""
    return min(int(math.ceil(5.0 * max(arl0, arl1))), MAX_SURVIVAL_STEPS)


def build_report(
    config: CusumConfig,
    grid: Grid,
    n_max: int | None = None,
    k_max: int = 2,
    tail_tol: float = 1e-9,
) -> CusumReport:
    """Full analysis: ARLs, survival curve, moments, and diagnostics.

    ``n_max=None`` derives the survival horizon from the computed ARLs.
    """
    _check_grid(config, grid)
    solution = _solve_embedded_test(config, grid)
    arl0, arl1 = _arl_from_solution(solution, config.w)
    if n_max is None:
        n_max = default_survival_n_max(arl0, arl1)
    survival0, survival1 = run_length_survival(config, grid, n_max)
    moments = run_length_moments(config, grid, k_max, tail_tol)
    diagnostics = CusumDiagnostics(
        grid_size=grid.size,
        condition_estimate=solution.kernel.condition_estimate,
        rho0=moments.rho0,
        rho1=moments.rho1,
    )
    return CusumReport(
        config=config,
        arl0=arl0,
        arl1=arl1,
        survival0=survival0,
        survival1=survival1,
        moments=moments,
        diagnostics=diagnostics,
    )
