"""Command-line front end: compute means, run verification campaigns, search.

Exit codes are part of the contract so scripts and CI can branch on them:

    0  success (mean converged / all checks hold / counterexample found)
    1  input or configuration error
    2  solver did not converge
    3  at least one inequality check failed (witnesses embedded)
    4  counterexample search exhausted its budget without a hit

``verify`` emits JSON lines, one report per campaign cell followed by one
summary line, buffered and written in deterministic cell order no matter
how many worker threads run the cells.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .config import SolverConfig
from .errors import ConfigError, NoConvergence, OpmeansError
from .inequalities import (
    FAMILIES,
    SearchConfig,
    optimality_scan,
    recheck,
    run_cell,
    verify_counterexample,
    kantorovich,
)
from .meanfns import repfn_from_json
from .multimeans import eval_mean, meanspec_from_json
from .psd_core import matrix_from_json

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CHECK_FAILED = 3
EXIT_SEARCH_EXHAUSTED = 4


@dataclass(frozen=True)
class CampaignConfig:
    inequality_ids: tuple
    dimensions: tuple
    r_values: tuple
    alpha_values: tuple
    trials: int
    seed: int
    output_path: str

    @classmethod
    def from_json(cls, obj) -> "CampaignConfig":
        try:
            ids = tuple(obj["inequality_ids"])
            dims = tuple(int(d) for d in obj["dimensions"])
            rs = tuple(float(r) for r in obj["r_values"])
            alphas = tuple(float(a) for a in obj.get("alpha_values", []))
            trials = int(obj.get("trials", 200))
            seed = int(obj.get("seed", 0))
            output_path = str(obj.get("output_path", "-"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad campaign config: {exc}") from exc
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        if not ids or not dims or not rs:
            raise ConfigError("inequality_ids, dimensions and r_values must be nonempty")
        if any(d < 1 for d in dims):
            raise ConfigError("dimensions must be positive")
        unknown = [i for i in ids if i not in FAMILIES]
        if unknown:
            raise ConfigError(f"unknown inequality ids: {unknown}")
        return cls(ids, dims, rs, alphas, trials, seed, output_path)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from exc


def _solver_config(args) -> SolverConfig:
    kwargs = {}
    if getattr(args, "tol", None) is not None:
        kwargs["dt_tol"] = args.tol
    if getattr(args, "max_iters", None) is not None:
        kwargs["max_iters"] = args.max_iters
    if getattr(args, "no_certify", False):
        kwargs["certify"] = False
    return SolverConfig(**kwargs)


def _emit(text, output):
    if output and output != "-":
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_mean(args) -> int:
    spec = meanspec_from_json(_load_json(args.spec))
    raw = _load_json(args.matrices)
    mats_json = raw["matrices"] if isinstance(raw, dict) else raw
    mats = [matrix_from_json(m) for m in mats_json]
    cfg = _solver_config(args)
    try:
        result = eval_mean(spec, mats, cfg)
    except NoConvergence as exc:
        diag = {
            "error": "NoConvergence",
            "message": str(exc),
            "residual": exc.residual,
        }
        _emit(json.dumps(diag, indent=2) + "\n", args.output)
        return EXIT_NO_CONVERGENCE
    _emit(json.dumps(result.to_json(), indent=2) + "\n", args.output)
    return EXIT_OK


def _campaign_cells(config: CampaignConfig):
    alphas = config.alpha_values or (0.5,)
    cells = []
    for fam in config.inequality_ids:
        fam_alphas = alphas if FAMILIES[fam]["needs_alpha"] else (None,)
        for dim in config.dimensions:
            for alpha in fam_alphas:
                for r in config.r_values:
                    cells.append((fam, dim, alpha, r))
    return cells


def _run_campaign_cell(fam, dim, alpha, r, config, cfg):
    try:
        rep = run_cell(fam, dim, r, alpha, config.trials, config.seed, cfg)
        return rep.to_json()
    except NoConvergence as exc:
        return {
            "inequality_id": f"{fam}[dim={dim},r={r},alpha={alpha}]",
            "holds": False,
            "error": "NoConvergence",
            "message": str(exc),
        }
    except OpmeansError as exc:
        return {
            "inequality_id": f"{fam}[dim={dim},r={r},alpha={alpha}]",
            "holds": False,
            "error": type(exc).__name__,
            "message": str(exc),
        }


def cmd_verify(args) -> int:
    cfg = _solver_config(args)
    if args.recheck:
        report = recheck(_load_json(args.recheck), cfg)
        _emit(json.dumps(report.to_json(), indent=2) + "\n", args.output)
        return EXIT_OK if report.holds else EXIT_CHECK_FAILED
    raw = _load_json(args.campaign)
    if getattr(args, "seed", None) is not None:
        raw = {**raw, "seed": args.seed}
    config = CampaignConfig.from_json(raw)
    cells = _campaign_cells(config)
    if args.threads and args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(
                pool.map(lambda c: _run_campaign_cell(*c, config, cfg), cells)
            )
    else:
        results = [_run_campaign_cell(*c, config, cfg) for c in cells]
    lines = [json.dumps(r, sort_keys=True) for r in results]
    passed = sum(1 for r in results if r.get("holds") and "error" not in r)
    errors = sum(1 for r in results if "error" in r)
    failed = len(results) - passed - errors
    summary = {
        "summary": {"total": len(results), "passed": passed, "failed": failed, "errors": errors}
    }
    lines.append(json.dumps(summary, sort_keys=True))
    out_path = args.output or config.output_path
    _emit("\n".join(lines) + "\n", out_path)
    if errors:
        return EXIT_INPUT
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_search(args) -> int:
    tau = repfn_from_json(_load_json(args.tau))
    search_cfg = SearchConfig(
        ratio_points=args.ratio_points,
        t_points=args.t_points,
        k_points=args.k_points,
        shift=args.shift,
        tol=args.search_tol,
    )
    cx = optimality_scan(tau, args.r, args.mode, search_cfg)
    if cx is None:
        _emit("none\n", args.output)
        return EXIT_SEARCH_EXHAUSTED
    if not verify_counterexample(cx, tau, search_cfg):  # pragma: no cover - scan output self-checks
        raise ConfigError("scan produced a counterexample that does not re-verify")
    _emit(json.dumps(cx.to_json(), indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_kantorovich(args) -> int:
    _emit(f"{kantorovich(args.h, args.p):.17g}\n", args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opmeans",
        description="Matrix means of positive definite matrices and inequality verification campaigns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mean = sub.add_parser("mean", help="compute a mean of SPD matrices")
    p_mean.add_argument("--spec", required=True, help="mean description JSON file")
    p_mean.add_argument("--matrices", required=True, help="JSON file with a list of matrices")
    p_mean.add_argument("--tol", type=float, default=None, help="Thompson-step stopping tolerance")
    p_mean.add_argument("--max-iters", type=int, default=None)
    p_mean.add_argument("--no-certify", action="store_true", help="skip the Karcher enclosure certificate")
    p_mean.add_argument("--output", default=None, help="write result here instead of stdout")
    p_mean.set_defaults(func=cmd_mean)

    p_verify = sub.add_parser("verify", help="run an inequality verification campaign")
    p_verify.add_argument("campaign", nargs="?", help="campaign config JSON file")
    p_verify.add_argument("--recheck", default=None, help="re-run one failed report line (JSON file)")
    p_verify.add_argument("--threads", type=int, default=1)
    p_verify.add_argument("--seed", type=int, default=None, help="override the campaign seed")
    p_verify.add_argument("--tol", type=float, default=None)
    p_verify.add_argument("--max-iters", type=int, default=None)
    p_verify.add_argument("--output", default=None, help="report path (JSON lines); '-' for stdout")
    p_verify.set_defaults(func=cmd_verify)

    p_search = sub.add_parser("search", help="search for r-range counterexamples")
    p_search.add_argument("--tau", required=True, help="representing-function JSON file")
    p_search.add_argument("--mode", required=True, choices=["prop_6_1", "prop_6_2"])
    p_search.add_argument("--r", type=float, required=True)
    p_search.add_argument("--ratio-points", type=int, default=SearchConfig.ratio_points)
    p_search.add_argument("--t-points", type=int, default=SearchConfig.t_points)
    p_search.add_argument("--k-points", type=int, default=SearchConfig.k_points)
    p_search.add_argument("--shift", type=float, default=SearchConfig.shift)
    p_search.add_argument("--search-tol", type=float, default=SearchConfig.tol)
    p_search.add_argument("--output", default=None)
    p_search.set_defaults(func=cmd_search)

    p_k = sub.add_parser("kantorovich", help="evaluate the generalized Kantorovich constant")
    p_k.add_argument("h", type=float)
    p_k.add_argument("p", type=float)
    p_k.add_argument("--output", default=None)
    p_k.set_defaults(func=cmd_kantorovich)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and not args.campaign and not args.recheck:
        parser.error("verify needs a campaign file or --recheck")
    try:
        return args.func(args)
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except OpmeansError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
