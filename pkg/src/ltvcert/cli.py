"""Command-line front end.

Subcommands: validate, certify, margin, simulate, frozen, verify.
Exit codes: 0 success/feasible, 1 infeasible (or verification failure),
2 inconclusive, 64 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, cert, margin, sdp
from .lmi import lower
from .model import SystemFileError, UncertainPiecewiseLTVSystem, load_system

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT_ERROR = 64


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path, eps_override):
    sys_obj, eps_file = load_system(path)
    nbp = len(sys_obj.grid.breakpoints)
    if eps_override is not None:
        eps = cert.DecayRates.uniform(nbp, eps_override)
    elif eps_file is not None:
        eps = cert.DecayRates(tuple(eps_file))
    else:
        eps = cert.DecayRates.uniform(nbp)
    return sys_obj, eps


def _write_report(out_dir, name, payload):
    path = Path(out_dir) / name
    payload = dict(payload, format=1)
    path.write_text(json.dumps(payload, indent=1))
    return path


def cmd_validate(args) -> int:
    try:
        sys_obj, eps = _load(args.system, args.eps)
    except SystemFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    bad = sys_obj.validate()
    if bad:
        for b in bad:
            print(f"violation: {b}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    kind = "uncertain" if isinstance(sys_obj, UncertainPiecewiseLTVSystem) else "nominal"
    print(f"ok: {kind} system, n={sys_obj.n}, segments={sys_obj.n_segments}")
    return EXIT_FEASIBLE


def cmd_certify(args) -> int:
    t_start = time.perf_counter()
    try:
        sys_obj, eps = _load(args.system, args.eps)
        robust = args.delta is not None
        if robust and not isinstance(sys_obj, UncertainPiecewiseLTVSystem):
            raise SystemFileError("robust certification needs B matrices in the system file")
    except (SystemFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.dump_lowered:
        prob = (cert.build_robust(sys_obj, eps, args.delta, args.strict_boundary)
                if robust else cert.build_nominal(sys_obj, eps))
        sdp.dump_text(lower(prob), out_dir / "lowered.txt")

    if robust:
        out = cert.solve_robust(sys_obj, eps, args.delta, args.strict_boundary)
    else:
        out = cert.solve_nominal(sys_obj, eps)

    report = {
        "command": "certify",
        "input": str(args.system),
        "input_sha256": _digest(args.system),
        "robust": robust,
        "status": out.status,
        "mu_star": out.mu_star,
    }
    if out.status == "feasible":
        cert_path = out_dir / "certificate.json"
        cert.save_certificate(cert_path, out.certificate)
        # report numbers come from the serialized artifact, not solver state
        reloaded = cert.load_certificate(cert_path)
        g = analysis.verify_certificate_grid(reloaded, sys_obj, args.grid)
        report.update(mu_star=reloaded.mu_star,
                      oracle_max_eig=g.max_eig,
                      oracle_confirmed=g.confirmed,
                      certificate=str(cert_path))
        if robust:
            report.update(Delta=reloaded.Delta, beta=reloaded.beta)
        code = EXIT_FEASIBLE
    elif out.status == "infeasible":
        if out.most_violated:
            report["most_violated"] = {"constraint": out.most_violated[0],
                                       "slack": out.most_violated[1]}
        code = EXIT_INFEASIBLE
    else:
        report["solver_status"] = out.solve_result.solver_status
        code = EXIT_INCONCLUSIVE
    report["elapsed"] = time.perf_counter() - t_start
    rp = _write_report(out_dir, "certify_report.json", report)
    print(f"{out.status} (mu* = {out.mu_star:.6g}); report: {rp}")
    return code


def cmd_margin(args) -> int:
    t_start = time.perf_counter()
    try:
        sys_obj, eps = _load(args.system, args.eps)
        if not isinstance(sys_obj, UncertainPiecewiseLTVSystem):
            raise SystemFileError("margin search needs B matrices in the system file")
    except (SystemFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    opts = margin.MarginOptions(delta_max=args.delta_max, tol_bis=args.tol_bis,
                                strict_boundary=not args.as_printed_boundary)
    res = margin.max_uncertainty(sys_obj, eps, opts)
    report = {
        "command": "margin",
        "input": str(args.system),
        "input_sha256": _digest(args.system),
    }
    if res is None:
        report["status"] = "infeasible"
        _write_report(out_dir, "margin_report.json", report)
        print("no certifiable uncertainty interval (infeasible at Delta = 1)",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    probes_path = out_dir / "margin_probes.csv"
    margin.write_probe_csv(probes_path, res.probes)
    cert_path = out_dir / "margin_certificate.json"
    cert.save_certificate(cert_path, res.certificate)
    reloaded = cert.load_certificate(cert_path)
    report.update(status="feasible",
                  delta_star=res.delta_star,
                  beta_star=res.beta_star,
                  interval=[res.interval[0], res.interval[1]],
                  certificate_Delta=reloaded.Delta,
                  certificate_mu_star=reloaded.mu_star,
                  uncertainty_inactive=res.uncertainty_inactive,
                  bracket_capped=res.bracket_capped,
                  had_inconclusive=res.had_inconclusive,
                  probes=str(probes_path),
                  certificate=str(cert_path),
                  elapsed=time.perf_counter() - t_start)
    rp = _write_report(out_dir, "margin_report.json", report)
    lo, hi = res.interval
    print(f"stable for all delta in [{lo:.6g}, {hi:.6g}] "
          f"(Delta* = {res.delta_star:.6g}, beta* = {res.beta_star:.6g}); report: {rp}")
    return EXIT_FEASIBLE


def cmd_simulate(args) -> int:
    try:
        sys_obj, eps = _load(args.system, args.eps)
        x0 = np.array([float(v) for v in args.x0.split(",")])
        if len(x0) != sys_obj.n:
            raise SystemFileError(f"x0 has {len(x0)} entries, system has n={sys_obj.n}")
        if args.delta != 0.0 and not isinstance(sys_obj, UncertainPiecewiseLTVSystem):
            raise SystemFileError("nonzero --delta needs B matrices in the system file")
    except (SystemFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bp = sys_obj.grid.breakpoints
    t0 = bp[0] if args.t0 is None else args.t0
    t1 = bp[-1] if args.t1 is None else args.t1
    traj = analysis.simulate(sys_obj, args.delta, x0, (t0, t1), args.h)
    lyap = None
    note = None
    verdict = None
    if args.cert:
        c = cert.load_certificate(args.cert)
        lyap = analysis.lyapunov_monitor(traj, c, sys_obj)
        verdict = lyap.passed
        if isinstance(c, cert.RobustCertificate):
            lo, hi = 1.0 / c.Delta, c.Delta
            if not (lo <= args.delta <= hi):
                note = f"delta = {args.delta:.6g} outside certified interval [{lo:.6g}, {hi:.6g}]"
    csv_path = out_dir / "trajectory.csv"
    analysis.write_trajectory_csv(csv_path, traj, lyap)
    report = {
        "command": "simulate",
        "input": str(args.system),
        "input_sha256": _digest(args.system),
        "delta": args.delta,
        "t_span": [t0, t1],
        "h": args.h,
        "diverged": traj.diverged,
        "final_norm": float(np.linalg.norm(traj.states[-1])),
        "csv": str(csv_path),
    }
    if verdict is not None:
        report["lyapunov_decay_pass"] = verdict
    if note:
        report["note"] = note
        print(f"note: {note}")
    rp = _write_report(out_dir, "simulate_report.json", report)
    print(f"simulated {len(traj.times)} samples; report: {rp}")
    return EXIT_FEASIBLE


def cmd_frozen(args) -> int:
    try:
        sys_obj, _ = _load(args.system, args.eps)
        if not isinstance(sys_obj, UncertainPiecewiseLTVSystem):
            raise SystemFileError("frozen-time margins need B matrices in the system file")
    except (SystemFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_obj = analysis.frozen_time_margins(sys_obj, signed=args.signed)
    csv_path = out_dir / "frozen_margins.csv"
    analysis.write_frozen_csv(csv_path, report_obj)
    payload = {
        "command": "frozen",
        "input": str(args.system),
        "input_sha256": _digest(args.system),
        "intersection": list(report_obj.intersection) if report_obj.intersection else None,
        "csv": str(csv_path),
    }
    rp = _write_report(out_dir, "frozen_report.json", payload)
    print(f"frozen-time margins for {len(report_obj.entries)} breakpoints; report: {rp}")
    return EXIT_FEASIBLE


def cmd_verify(args) -> int:
    try:
        sys_obj, _ = _load(args.system, args.eps)
        c = cert.load_certificate(args.certificate)
    except (SystemFileError, ValueError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        g = analysis.verify_certificate_grid(c, sys_obj, args.grid)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    loc = f"k={g.k}" + (f", alpha={g.alpha:.4g}" if g.alpha is not None else "") \
        + (f", delta={g.delta:.4g}" if g.delta is not None else "")
    print(f"max eigenvalue {g.max_eig:.6g} at {loc}: "
          f"{'confirmed' if g.confirmed else 'REJECTED'}")
    return EXIT_FEASIBLE if g.confirmed else EXIT_INFEASIBLE


def _add_common(p, eps=True, out=True):
    if eps:
        p.add_argument("--eps", type=float, default=None,
                       help="uniform decay-rate override")
    if out:
        p.add_argument("--out-dir", default=".", help="directory for emitted files")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltvcert",
                                 description="Stability certification for piecewise LTV systems")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a system file")
    p.add_argument("system")
    _add_common(p, out=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("certify", help="solve the stability LMIs")
    p.add_argument("system")
    p.add_argument("--delta", type=float, default=None,
                   help="robust certification with this uncertainty bound Delta")
    p.add_argument("--strict-boundary", action="store_true",
                   help="add vertex boundary conditions at delta = 1/Delta, Delta")
    p.add_argument("--grid", type=int, default=101, help="oracle grid density")
    p.add_argument("--dump-lowered", action="store_true",
                   help="dump the lowered conic form to lowered.txt")
    _add_common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("margin", help="maximize the certified uncertainty interval")
    p.add_argument("system")
    p.add_argument("--delta-max", type=float, default=1e6, help="bracket cap")
    p.add_argument("--tol-bis", type=float, default=1e-3,
                   help="relative bisection tolerance")
    p.add_argument("--as-printed-boundary", action="store_true",
                   help="drop the vertex boundary conditions from margin probes")
    _add_common(p)
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("simulate", help="integrate a trajectory")
    p.add_argument("system")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--x0", default=None, help="comma-separated initial state")
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--t1", type=float, default=None)
    p.add_argument("--h", type=float, default=1e-3, help="integration step")
    p.add_argument("--cert", default=None,
                   help="certificate file for Lyapunov monitoring")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("frozen", help="frozen-time LTI gain margins")
    p.add_argument("system")
    p.add_argument("--signed", action="store_true", help="search negative gains too")
    _add_common(p)
    p.set_defaults(func=cmd_frozen)

    p = sub.add_parser("verify", help="grid-oracle check of a certificate")
    p.add_argument("certificate")
    p.add_argument("system")
    p.add_argument("--grid", type=int, default=101)
    _add_common(p, out=False)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "x0", "sentinel") is None:
        # default initial state: first unit vector
        try:
            sys_obj, _ = load_system(args.system)
            args.x0 = ",".join(["1"] + ["0"] * (sys_obj.n - 1))
        except SystemFileError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
