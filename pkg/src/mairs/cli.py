"""Command line entry point: ``mairs validate|solve|sweep|cost-sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import (
    CostModel,
    check_trend,
    emit_results,
    load_experiment,
    ordering_inversions,
    run_cost_sweep,
    run_sweep,
    run_validation,
    scenario_from_source,
)
from .optimizer import OptimizerConfig, optimize
from .scenario import Scheme, validate
from .solver import DEFAULT_TOL_FEAS, DEFAULT_TOL_OBJ

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_IO = 2

_TRENDS = {"J": "nonincreasing", "N_e": "nondecreasing"}


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(eps=args.eps_ao, tol_obj=args.tol_obj, tol_feas=args.tol_feas,
                           workers=args.workers)


def _load_spec(source: str):
    spec = scenario_from_source(source)
    problems = validate(spec)
    return spec, problems


def cmd_validate(args) -> int:
    spec, problems = _load_spec(args.scenario)
    if problems:
        for p in problems:
            print(f"invalid scenario: {p}")
        return EXIT_FAIL
    report = run_validation(spec, args.draws, args.seed)
    print(f"points={len(report.rows)} draws={report.n_draws} "
          f"max|z|={report.max_abs_z:.3f} max_rel_err={report.max_rel_error:.2e}")
    if args.out:
        rows = [{"area": r.area, "point": r.point, "closed_form": r.closed_form,
                 "mc_mean": r.mc_mean, "mc_stderr": r.mc_stderr, "z": r.z_score}
                for r in report.rows]
        _write_json(args.out, {"max_abs_z": report.max_abs_z, "rows": rows})
    return EXIT_OK if report.passed(args.z_limit) else EXIT_FAIL


def cmd_solve(args) -> int:
    spec, problems = _load_spec(args.scenario)
    if problems:
        for p in problems:
            print(f"invalid scenario: {p}")
        return EXIT_FAIL
    scheme = Scheme(args.scheme) if args.scheme else spec.scheme
    spec = spec.with_(scheme=scheme, rng_seed=args.seed)
    sol = optimize(spec, scheme, _config(args))
    print(f"scheme={scheme.value} worst_snr_db={sol.worst_case_snr_db:.3f} "
          f"iters={sol.iterations} worst_point={sol.worst_point[0]}:{sol.worst_point[1]}")
    if args.out:
        _write_json(args.out, {
            "scheme": scheme.value,
            "worst_snr": sol.worst_case_snr,
            "worst_snr_db": sol.worst_case_snr_db,
            "worst_point": list(sol.worst_point),
            "layouts": sol.layouts.tolist(),
            "reflections_re": sol.reflections.real.tolist(),
            "reflections_im": sol.reflections.imag.tolist(),
            "trace": [s.eta for s in sol.trace.steps],
        })
    return EXIT_OK


def cmd_sweep(args) -> int:
    exp = load_experiment(args.experiment)
    cfg = _config(args)
    records = run_sweep(exp, cfg, args.workers)
    out = args.out or exp.out
    for r in records:
        print(f"{r.scheme:22s} {exp.sweep_var}={r.sweep_value:g} seed={r.seed} "
              f"{r.worst_snr_db:8.3f} dB iters={r.iters} {r.status}")
    trend = _TRENDS.get(exp.sweep_var)
    checks = check_trend(records, trend) if trend else []
    for c in checks:
        print(f"trend {c.direction} {c.scheme}: {'holds' if c.holds else 'VIOLATED'}")
    for big, small, value in ordering_inversions(records):
        print(f"ordering inversion at {exp.sweep_var}={value:g}: {small} beats {big}")
    if out:
        emit_results(records, out, exp.base, cfg,
                     {"sweep_var": exp.sweep_var, "values": list(exp.values),
                      "trends": {c.scheme: c.holds for c in checks}})
    hard_ok = all(r.monotone and r.feasible for r in records if r.status == "ok")
    return EXIT_OK if hard_ok else EXIT_FAIL


def cmd_cost_sweep(args) -> int:
    exp = load_experiment(args.experiment)
    cost = exp.cost or CostModel()
    cfg = _config(args)
    res = run_cost_sweep(cost, exp.base, cfg, exp.seeds, args.workers)
    for m, n in res.candidates:
        print(f"M={m} N={n} worst_snr_db={10 * np.log10(res.etas[m]):.3f}")
    print(f"M*={res.m_star} N*={res.n_star} M*/N*={res.ratio:.4f} "
          f"predicted M*={res.predicted_m_star:.2f} interior={res.interior_max}")
    out = args.out or exp.out
    if out:
        emit_results(res.records, out, exp.base, cfg,
                     {"m_star": res.m_star, "n_star": res.n_star,
                      "predicted_m_star": res.predicted_m_star,
                      "candidates": [list(c) for c in res.candidates]})
    hard_ok = all(r.monotone and r.feasible for r in res.records if r.status == "ok")
    return EXIT_OK if hard_ok else EXIT_FAIL


def _write_json(path, payload) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file")
    common.add_argument("--tol-obj", type=float, default=DEFAULT_TOL_OBJ)
    common.add_argument("--tol-feas", type=float, default=DEFAULT_TOL_FEAS)
    common.add_argument("--eps-ao", type=float, default=1e-3,
                        help="fractional objective increase that ends the AO loop")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mairs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common],
                       help="closed-form vs Monte Carlo check of a scenario")
    p.add_argument("scenario", help="scenario file or preset (desk, full)")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z-limit", type=float, default=4.0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[common], help="optimize one scheme")
    p.add_argument("scenario", help="scenario file or preset (desk, full)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="run a scheme sweep experiment")
    p.add_argument("experiment")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost-sweep", parents=[common], help="fixed-budget (M, N) sweep")
    p.add_argument("experiment")
    p.set_defaults(func=cmd_cost_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
