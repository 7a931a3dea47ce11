"""Command-line client for the evaluation service.

Every subcommand builds one request, sends it to the service (an
in-process instance by default, or a remote one via ``--server``), and
renders the versioned response envelope as JSON or CSV.  All numeric
output is rounded to 12 significant digits so byte-level comparison of
two runs is meaningful.

Exit codes: 0 success, 2 invalid arguments, 3 numerical failure,
1 transport or other unexpected failure.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import sys
from typing import Any

import httpx

EXIT_OK = 0
EXIT_TRANSPORT = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_COMMAND_PATHS = {
    "sprt": "/v1/sprt",
    "cusum-arl": "/v1/cusum/arl",
    "rl-dist": "/v1/cusum/run-length",
    "moments": "/v1/cusum/moments",
    "simulate": "/v1/simulate",
    "bench": "/v1/bench",
}

# CSV column layout per command: (header row, result-row key order).
# The sprt header is a documented contract; keep it stable.
_CSV_LAYOUT = {
    "sprt": (["x", "N0", "P0", "N1", "P1"], ["x", "n0", "p0", "n1", "p1"]),
    "cusum-arl": (["arl0", "arl1", "method"], ["arl0", "arl1", "method"]),
    "rl-dist": (["n", "survival0", "survival1"], ["n", "survival0", "survival1"]),
    "moments": (["k", "mu0", "mu1"], ["k", "mu0", "mu1"]),
    "simulate": (
        ["hypothesis", "quantity", "n", "mean", "std_error", "reps"],
        ["hypothesis", "quantity", "n", "mean", "std_error", "reps"],
    ),
    "bench": (
        [
            "n",
            "grouped_seconds",
            "baseline_seconds",
            "speedup",
            "grouped_factorizations",
            "baseline_factorizations",
            "max_abs_diff",
        ],
        [
            "n",
            "grouped_seconds",
            "baseline_seconds",
            "speedup",
            "grouped_factorizations",
            "baseline_factorizations",
            "max_abs_diff",
        ],
    ),
}


def _sizes_list(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"sizes must be comma-separated integers, got {text!r}"
        ) from None
    if not sizes:
        raise argparse.ArgumentTypeError("sizes must name at least one grid size")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cusumkit",
        description=(
            "Operating characteristics of CUSUM charts and sequential "
            "probability ratio tests, computed from one shared kernel "
            "factorization, with a Monte Carlo cross-check."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format", choices=["json", "csv"], default="json", help="output format"
    )
    common.add_argument(
        "-o", "--output", metavar="PATH", help="write the report to PATH instead of stdout"
    )
    common.add_argument(
        "--server",
        metavar="URL",
        help="send the request to a running service instead of computing in-process",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "sprt", parents=[common], help="sequential test characteristics N0, P0, N1, P1"
    )
    p.add_argument("--theta", type=float, required=True, help="mean shift")
    p.add_argument("--a", type=float, required=True, help="lower boundary (a <= 0)")
    p.add_argument("--b", type=float, required=True, help="upper boundary (b > 0)")
    p.add_argument("--n", type=int, help="grid size (default 256)")
    p.add_argument(
        "--at",
        type=float,
        action="append",
        metavar="X",
        help="evaluation point; repeatable (default 0)",
    )

    p = sub.add_parser(
        "cusum-arl", parents=[common], help="chart average run lengths under both regimes"
    )
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--h", type=float, required=True, help="control limit (> 0)")
    p.add_argument("--w", type=float, help="headstart in [0, h) (default 0)")
    p.add_argument("--n", type=int, help="grid size (default 256)")
    p.add_argument("--method", choices=["via-sprt", "direct"], help="solution path")

    p = sub.add_parser(
        "rl-dist", parents=[common], help="run-length survival probabilities"
    )
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--w", type=float)
    p.add_argument("--n", type=int)
    p.add_argument(
        "--n-max", type=int, help="largest n reported (default: 5x the ARL estimate)"
    )

    p = sub.add_parser(parents=[common], name="moments", help="run-length moments")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--w", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--k-max", type=int, help="highest moment order (default 2)")
    p.add_argument("--tail-tol", type=float, help="decay-ratio stabilization tolerance")

    p = sub.add_parser(
        "simulate", parents=[common], help="Monte Carlo estimates for either procedure"
    )
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--reps", type=int, required=True, help="number of replications")
    p.add_argument("--seed", type=int, help="stream seed (default 0)")
    p.add_argument("--hypothesis", choices=["h0", "h1", "both"], help="default both")
    p.add_argument("--a", type=float, help="test lower boundary (with --b)")
    p.add_argument("--b", type=float, help="test upper boundary")
    p.add_argument("--start", type=float, help="test start (default 0)")
    p.add_argument("--h", type=float, help="chart control limit")
    p.add_argument("--w", type=float, help="chart headstart (default 0)")
    p.add_argument("--step-cap", type=int, help="chart step cap (default: pilot-sized)")
    p.add_argument(
        "--survival-n-max",
        type=int,
        help="also report the empirical survival curve up to this n",
    )
    p.add_argument("--workers", type=int, help="simulation workers (0 = auto)")

    p = sub.add_parser(
        "bench",
        parents=[common],
        help="time grouped single-factorization solves against the two-pass baseline",
    )
    p.add_argument(
        "--sizes",
        type=_sizes_list,
        help="comma-separated grid sizes (default 128,256,512,1024)",
    )
    p.add_argument("--theta", type=float, help="mean shift (default 1)")
    p.add_argument("--a", type=float, help="lower boundary (default -2)")
    p.add_argument("--b", type=float, help="upper boundary (default 2)")
    p.add_argument("--repeats", type=int, help="timing repetitions (default 5)")

    return parser


_PAYLOAD_FIELDS = {
    "sprt": ["theta", "a", "b", "n", "at"],
    "cusum-arl": ["theta", "h", "w", "n", "method"],
    "rl-dist": ["theta", "h", "w", "n", "n_max"],
    "moments": ["theta", "h", "w", "n", "k_max", "tail_tol"],
    "simulate": [
        "theta",
        "reps",
        "seed",
        "hypothesis",
        "a",
        "b",
        "start",
        "h",
        "w",
        "step_cap",
        "survival_n_max",
        "workers",
    ],
    "bench": ["sizes", "theta", "a", "b", "repeats"],
}


def _build_payload(args: argparse.Namespace) -> dict[str, Any]:
    """Request body from parsed flags; omitted flags defer to service defaults."""
    payload = {}
    for name in _PAYLOAD_FIELDS[args.command]:
        value = getattr(args, name, None)
        if value is not None:
            payload[name] = value
    return payload


def _post(path: str, payload: dict, server: str | None) -> tuple[int, dict]:
    if server:
        response = httpx.post(
            server.rstrip("/") + path, json=payload, timeout=httpx.Timeout(None)
        )
        return response.status_code, response.json()

    from .service.app import create_app

    async def call() -> tuple[int, dict]:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport,
            base_url="http://cusumkit.internal",
            timeout=httpx.Timeout(None),
        ) as client:
            response = await client.post(path, json=payload)
            return response.status_code, response.json()

    return asyncio.run(call())


def _round_floats(value: Any) -> Any:
    """Round every float to 12 significant digits, recursively."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(format(value, ".12g"))
    if isinstance(value, dict):
        return {key: _round_floats(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_round_floats(item) for item in value]
    return value


def _format_cell(value: Any) -> Any:
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return format(value, ".12g")
    return value


def _render_json(body: dict) -> str:
    return json.dumps(_round_floats(body), indent=2) + "\n"


def _render_csv(command: str, body: dict) -> str:
    header, keys = _CSV_LAYOUT[command]
    results = body["results"]
    rows = [results] if isinstance(results, dict) else results
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(row.get(key)) for key in keys])
    return buffer.getvalue()


def _print_validation_details(body: dict) -> None:
    detail = body.get("detail")
    if isinstance(detail, list):
        for item in detail:
            location = ".".join(
                str(part) for part in item.get("loc", []) if part != "body"
            )
            message = item.get("msg", "invalid value")
            print(f"error: {location or 'request'}: {message}", file=sys.stderr)
    else:
        print(f"error: {detail}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    payload = _build_payload(args)
    path = _COMMAND_PATHS[args.command]
    try:
        status, body = _post(path, payload, args.server)
    except httpx.HTTPError as exc:
        print(f"error: request failed: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ValueError as exc:
        print(f"error: malformed response: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT

    if status in (400, 422):
        _print_validation_details(body)
        return EXIT_VALIDATION
    if status == 500 and body.get("error_kind") == "numerical":
        print(f"error: {body.get('detail')}", file=sys.stderr)
        return EXIT_NUMERICAL
    if status != 200:
        print(f"error: service returned status {status}: {body}", file=sys.stderr)
        return EXIT_TRANSPORT

    if args.format == "csv":
        text = _render_csv(args.command, body)
        units = body.get("diagnostics", {}).get("units")
        if units:
            print(f"note: {units}", file=sys.stderr)
    else:
        text = _render_json(body)

    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
