"""Command-line interface: single solves, sweeps, continuation, checks.

Exit codes: 0 success, 1 solver failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .examples import build_example
from .fe_mesh import build_mesh, build_space, export_vtk, interpolate
from .harness import RunConfig, estimate_order, run_cell, run_sweep
from .kkt_solver import recover_control, solve_kkt
from .regpath import RegPathConfig, run_path, verify_lemma_rate
from .state_solver import StateProblem, m_norm, solve_state
from .stationarity import (
    check_bouligand_residual,
    check_chi_admissible,
    check_primal_stationarity,
    check_strong_sign,
    sample_directions,
)

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_CONFIG_ERROR = 2


class ConfigError(ValueError):
    pass


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}")
        known = set(vars(cfg))
        for key, val in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key: {key}")
            setattr(cfg, key, val)
    if args.example is not None:
        cfg.example = args.example
    if args.m:
        cfg.m_list = list(args.m)
    if args.alpha:
        cfg.alpha_list = list(args.alpha)
    if args.gamma:
        cfg.gamma_list = list(args.gamma)
    if args.out:
        cfg.output_dir = args.out
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_state(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    m = cfg.m_list[0]
    space = build_space(build_mesh(m))
    data, exact = build_example(cfg.example, space, cfg.alpha_list[0], cfg.gamma_list[0])
    prob = StateProblem(data.ops, data.f)
    u = interpolate(space, exact.u)
    y, rep = solve_state(prob, u)
    y_star = interpolate(space, exact.y)
    err = m_norm(data.ops, y.coeffs - y_star.coeffs) / m_norm(data.ops, y_star.coeffs)
    print(f"state solve: converged={rep.converged} iters={rep.iterations} rel_err={err:.6e}")
    export_vtk([("y", y)], out / "state.vtk")
    return EXIT_OK if rep.converged else EXIT_SOLVER_FAILURE


def _cmd_kkt(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    row, pt, rep = run_cell(cfg.example, cfg.m_list[0], cfg.alpha_list[0], cfg.gamma_list[0])
    print(f"kkt solve: status={row.status} iters={row.newton_iters} "
          f"err_y_rel={row.err_y_rel} err_p={row.err_p}")
    report = {
        "status": row.status,
        "iterations": row.newton_iters,
        "residual_history": rep.residual_history,
        "err_y_rel": row.err_y_rel,
        "err_p": row.err_p,
        "err_chi_linf": row.err_chi_linf,
    }
    (out / "kkt.json").write_text(json.dumps(report, indent=2))
    if rep.converged:
        u = recover_control(pt, cfg.alpha_list[0])
        export_vtk([("y", pt.y), ("p", pt.p), ("chi", pt.chi), ("u", u)], out / "kkt.vtk")
    return EXIT_OK if rep.converged else EXIT_SOLVER_FAILURE


def _cmd_regpath(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    space = build_space(build_mesh(cfg.m_list[0]))
    data, _ = build_example(cfg.example, space, cfg.alpha_list[0], cfg.gamma_list[0])
    path_cfg = RegPathConfig(tuple(cfg.eps_schedule))
    pt, report = run_path(data, path_cfg)
    rows = [{"eps": e, "iterations": r.iterations, "converged": r.converged,
             "limit_residual": lr}
            for e, r, lr in zip(report.eps_values, report.inner_reports,
                                report.limit_residuals + [None] * len(report.eps_values))]
    (out / "regpath.json").write_text(json.dumps(
        {"aborted": report.aborted, "steps": rows}, indent=2))
    for r in rows:
        print(f"eps={r['eps']:.1e} iters={r['iterations']} limit_residual={r['limit_residual']}")
    export_vtk([("y", pt.y), ("p", pt.p), ("chi", pt.chi)], out / "regpath.vtk")
    return EXIT_SOLVER_FAILURE if report.aborted else EXIT_OK


def _cmd_check(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    row, pt, rep = run_cell(cfg.example, cfg.m_list[0], cfg.alpha_list[0], cfg.gamma_list[0])
    if not rep.converged:
        print("solver did not converge; nothing to check")
        return EXIT_SOLVER_FAILURE
    space = pt.y.space
    data, _ = build_example(cfg.example, space, cfg.alpha_list[0], cfg.gamma_list[0])
    chi_rep = check_chi_admissible(pt.y, pt.chi, chi_tol=1e-6)
    sign_rep = check_strong_sign(pt.y, pt.p)
    primal_rep = check_primal_stationarity(data, pt, sample_directions(space))
    reports = {
        "bouligand_residual": check_bouligand_residual(data, pt),
        "chi_admissible": chi_rep.to_dict(),
        "strong_sign": sign_rep.to_dict(),
        "primal_stationarity": primal_rep.to_dict(),
    }
    (out / "checks.json").write_text(json.dumps(reports, indent=2))
    for name, rep_d in reports.items():
        print(f"{name}: {rep_d}")
    ok = chi_rep.passed and sign_rep.passed and primal_rep.passed
    return EXIT_OK if ok else EXIT_SOLVER_FAILURE


def _cmd_sweep(cfg: RunConfig) -> int:
    rows, path = run_sweep(cfg, progress=lambda r: print(
        f"h={r.h:.6g} alpha={r.alpha:.3g} gamma={r.gamma:.3g} "
        f"err_y={r.err_y_rel} iters={r.newton_iters} {r.status}"))
    print(f"wrote {path}")
    converged = [r for r in rows if r.status == "converged"]
    if len({r.h for r in converged}) >= 2 and len(converged) == len(rows):
        order = estimate_order([r.h for r in converged], [r.err_y_rel for r in converged])
        print(f"fitted convergence order (y): {order:.3f}")
    return EXIT_OK


def _cmd_selftest(cfg: RunConfig) -> int:
    from .nonsmooth import SmoothedMaxParams, prox, subdiff_max_contains, verify_smoothing_assumptions

    failures = 0

    def report(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1

    gamma = 0.25
    ok = True
    for z in (-1.0, -gamma, 0.0, gamma / 2, gamma, 2 * gamma):
        for g in (0.0, 0.25, 1.0):
            lhs = subdiff_max_contains(z, g)
            rhs = z == prox(gamma, z + gamma * g)
            ok = ok and (lhs == rhs)
    report("prox/subdifferential resolvent identity", ok)

    rep = verify_smoothing_assumptions(
        SmoothedMaxParams(0.1), np.linspace(-1, 1, 2001), delta=0.5)
    report("smoothed max family assumptions", rep.passed)

    row, _, krep = run_cell(1, 9, 1e-4, 1e-4)
    report("small coupled solve (example 1, m=9)", krep.converged)
    return EXIT_OK if failures == 0 else EXIT_SOLVER_FAILURE


_COMMANDS = {
    "state": _cmd_state,
    "kkt": _cmd_kkt,
    "regpath": _cmd_regpath,
    "check": _cmd_check,
    "sweep": _cmd_sweep,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nsocp",
        description="Optimal control of -Δy + max(0,y) = u + f: solvers and experiments.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--example", type=int, choices=(1, 2))
        p.add_argument("--m", type=int, action="append", help="mesh subdivisions (repeatable)")
        p.add_argument("--alpha", type=float, action="append")
        p.add_argument("--gamma", type=float, action="append")
        p.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        return _COMMANDS[args.mode](cfg)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())
