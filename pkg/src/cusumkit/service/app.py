"""HTTP service wrapping the solver and simulator.

Thin by design: endpoints validate through the schemas, call the core
package, and wrap results in the versioned response envelope.  Numerical
failures surface as 500 with ``error_kind: "numerical"`` so clients can
distinguish them from validation problems (422 from schema validation,
400 for argument errors the core raises itself).
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import run_bench
from ..cusum import (
    CusumConfig,
    default_survival_n_max,
    evaluate_arl,
    run_length_moments,
    run_length_survival,
)
from ..discretization import build_grid, counter_snapshot
from ..errors import NumericalError
from ..model import Hypothesis, gaussian_shift
from ..simulate import simulate_cusum, simulate_sprt
from ..sprt import SprtConfig, evaluate, solve_characteristics
from .schemas import (
    BenchDiagnostics,
    BenchRequest,
    BenchResponse,
    BenchRowSchema,
    CusumArlRequest,
    CusumArlResponse,
    CusumArlResults,
    HealthResponse,
    MomentsDiagnostics,
    MomentsRequest,
    MomentsResponse,
    MomentsRow,
    RunLengthDiagnostics,
    RunLengthRequest,
    RunLengthResponse,
    RunLengthRow,
    SimulateDiagnostics,
    SimulateRequest,
    SimulateResponse,
    SimulateRow,
    SolveDiagnostics,
    SprtRequest,
    SprtResponse,
    SprtRow,
)


class _FactorizationMeter:
    """Counts factorizations performed between enter and exit.

    Diagnostic only: concurrent requests in one process would interleave
    counts, which is harmless for a metric meant to demonstrate the
    one-factorization property under sequential use.
    """

    def __enter__(self) -> "_FactorizationMeter":
        self._before = counter_snapshot()
        return self

    def __exit__(self, *exc) -> None:
        after = counter_snapshot()
        self.factorizations = after["factorizations"] - self._before["factorizations"]


def create_app() -> FastAPI:
    app = FastAPI(title="cusumkit", version=__version__)

    @app.exception_handler(NumericalError)
    async def numerical_error(request, exc: NumericalError):
        return JSONResponse(
            status_code=500,
            content={"detail": str(exc), "error_kind": "numerical"},
        )

    @app.exception_handler(ValueError)
    async def value_error(request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"detail": str(exc), "error_kind": "validation"},
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/sprt", response_model=SprtResponse)
    def sprt_endpoint(req: SprtRequest) -> SprtResponse:
        config = SprtConfig(a=req.a, b=req.b, model=gaussian_shift(req.theta))
        grid = build_grid(req.a, req.b, req.n)
        with _FactorizationMeter() as meter:
            solution = solve_characteristics(config, grid)
            rows = []
            for x in req.at:
                values = evaluate(solution, x)
                rows.append(
                    SprtRow(
                        x=x,
                        n0=values.n0,
                        p0=values.p0,
                        n1=values.n1,
                        p1=values.p1,
                    )
                )
        return SprtResponse(
            spec=req,
            results=rows,
            diagnostics=SolveDiagnostics(
                grid_size=grid.size,
                condition_estimate=solution.kernel.condition_estimate,
                factorization_count=meter.factorizations,
            ),
        )

    @app.post("/v1/cusum/arl", response_model=CusumArlResponse)
    def cusum_arl_endpoint(req: CusumArlRequest) -> CusumArlResponse:
        config = CusumConfig(h=req.h, w=req.w, model=gaussian_shift(req.theta))
        grid = build_grid(0.0, req.h, req.n)
        with _FactorizationMeter() as meter:
            outcome = evaluate_arl(config, grid, req.method)
        return CusumArlResponse(
            spec=req,
            results=CusumArlResults(
                arl0=outcome.arl0, arl1=outcome.arl1, method=outcome.method
            ),
            diagnostics=SolveDiagnostics(
                grid_size=grid.size,
                condition_estimate=outcome.condition_estimate,
                factorization_count=meter.factorizations,
            ),
        )

    @app.post("/v1/cusum/run-length", response_model=RunLengthResponse)
    def run_length_endpoint(req: RunLengthRequest) -> RunLengthResponse:
        config = CusumConfig(h=req.h, w=req.w, model=gaussian_shift(req.theta))
        grid = build_grid(0.0, req.h, req.n)
        with _FactorizationMeter() as meter:
            n_max = req.n_max
            if n_max is None:
                outcome = evaluate_arl(config, grid)
                n_max = default_survival_n_max(outcome.arl0, outcome.arl1)
            survival0, survival1 = run_length_survival(config, grid, n_max)
        rows = [
            RunLengthRow(n=n, survival0=float(survival0[n]), survival1=float(survival1[n]))
            for n in range(n_max + 1)
        ]
        return RunLengthResponse(
            spec=req,
            results=rows,
            diagnostics=RunLengthDiagnostics(
                grid_size=grid.size,
                n_max=n_max,
                factorization_count=meter.factorizations,
            ),
        )

    @app.post("/v1/cusum/moments", response_model=MomentsResponse)
    def moments_endpoint(req: MomentsRequest) -> MomentsResponse:
        config = CusumConfig(h=req.h, w=req.w, model=gaussian_shift(req.theta))
        grid = build_grid(0.0, req.h, req.n)
        with _FactorizationMeter() as meter:
            result = run_length_moments(config, grid, req.k_max, req.tail_tol)
        rows = [
            MomentsRow(
                k=k,
                mu0=float(result.moments0[k - 1]),
                mu1=float(result.moments1[k - 1]),
            )
            for k in range(1, req.k_max + 1)
        ]
        return MomentsResponse(
            spec=req,
            results=rows,
            diagnostics=MomentsDiagnostics(
                grid_size=grid.size,
                condition_estimate=result.condition_estimate,
                factorization_count=meter.factorizations,
                rho0=result.rho0,
                rho1=result.rho1,
                steps0=result.steps0,
                steps1=result.steps1,
            ),
        )

    @app.post("/v1/simulate", response_model=SimulateResponse)
    def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
        model = gaussian_shift(req.theta)
        hypotheses = {
            "h0": [Hypothesis.H0],
            "h1": [Hypothesis.H1],
            "both": [Hypothesis.H0, Hypothesis.H1],
        }[req.hypothesis]
        rows: list[SimulateRow] = []
        diagnostics = SimulateDiagnostics()
        if req.a is not None:
            config = SprtConfig(a=req.a, b=req.b, model=model)
            for hyp in hypotheses:
                asn, oc = simulate_sprt(
                    config, hyp, req.start, req.reps, req.seed, workers=req.workers
                )
                label = "h0" if hyp == Hypothesis.H0 else "h1"
                rows.append(
                    SimulateRow(
                        hypothesis=label,
                        quantity="asn",
                        mean=asn.mean,
                        std_error=asn.std_error,
                        reps=asn.reps,
                    )
                )
                rows.append(
                    SimulateRow(
                        hypothesis=label,
                        quantity="oc",
                        mean=oc.mean,
                        std_error=oc.std_error,
                        reps=oc.reps,
                    )
                )
        else:
            config = CusumConfig(h=req.h, w=req.w, model=model)
            for hyp in hypotheses:
                result = simulate_cusum(
                    config,
                    hyp,
                    req.reps,
                    req.seed,
                    step_cap=req.step_cap,
                    survival_n_max=req.survival_n_max,
                    workers=req.workers,
                )
                label = "h0" if hyp == Hypothesis.H0 else "h1"
                rows.append(
                    SimulateRow(
                        hypothesis=label,
                        quantity="arl",
                        mean=result.mean,
                        std_error=result.std_error,
                        reps=result.reps,
                    )
                )
                cap = result.extras["step_cap"]
                if hyp == Hypothesis.H0:
                    diagnostics.step_cap_h0 = cap
                else:
                    diagnostics.step_cap_h1 = cap
                if req.survival_n_max is not None:
                    counts = result.extras["survival_counts"]
                    for n in range(req.survival_n_max + 1):
                        fraction = float(counts[n]) / result.reps
                        binom_se = (
                            fraction * (1.0 - fraction) / result.reps
                        ) ** 0.5
                        rows.append(
                            SimulateRow(
                                hypothesis=label,
                                quantity="survival",
                                n=n,
                                mean=fraction,
                                std_error=binom_se,
                                reps=result.reps,
                            )
                        )
        return SimulateResponse(spec=req, results=rows, diagnostics=diagnostics)

    @app.post("/v1/bench", response_model=BenchResponse)
    def bench_endpoint(req: BenchRequest) -> BenchResponse:
        rows = run_bench(
            gaussian_shift(req.theta), req.a, req.b, req.sizes, repeats=req.repeats
        )
        return BenchResponse(
            spec=req,
            results=[
                BenchRowSchema(
                    n=row.n,
                    grouped_seconds=row.grouped_seconds,
                    baseline_seconds=row.baseline_seconds,
                    speedup=row.speedup,
                    grouped_factorizations=row.grouped_factorizations,
                    baseline_factorizations=row.baseline_factorizations,
                    max_abs_diff=row.max_abs_diff,
                )
                for row in rows
            ],
            diagnostics=BenchDiagnostics(),
        )

    return app


app = create_app()
