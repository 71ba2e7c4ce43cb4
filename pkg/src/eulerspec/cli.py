"""Command-line front end.

Subcommands:
    check-flow   validate a flow and test it against the steady-flow residual
    trace        integrate one trajectory and export it as CSV
    exponents    stretching exponents for a single initial condition
    spectrum     full sampled estimate with annulus and gap reporting
    audit        drift report, oracle comparison, and tolerance study

Exit codes: 0 success, 1 numerical failure (integration/estimation), 2
validation failure (bad flow, bad state, bad config). Every artifact embeds
the package version and the config hash, and each spectrum run persists its
effective post-override config so the run can be reproduced from that file
alone. The default output directory comes from --outdir, then the config
file, then $EULERSPEC_OUTDIR, then the working directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bas import IntegrationError, StateValidationError, integrate_bas
from .cocycle import evolve_exponents, init_fiber_frame
from .config import (VERSION, RunConfig, apply_overrides, canonical_json,
                     load_config)
from .flows import FlowValidationError, check_steady_euler
from .spectrum import EstimateError, annulus, estimate_spectrum
from .verify import audit_trajectory, oracle_comparison, step_halving_study

ENV_OUTDIR = "EULERSPEC_OUTDIR"


def _parse_vec(text: str) -> np.ndarray:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated numbers, got {text!r}")
    return np.array(parts)


def _parse_floats(text: str) -> list:
    return [float(p) for p in text.split(",")]


def _add_flow_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("flow")
    g.add_argument("--flow", choices=("abc", "shear", "kolmogorov", "file"),
                   help="flow family (overrides config)")
    g.add_argument("--A", type=float, help="first ABC coefficient")
    g.add_argument("--B", type=float, help="second ABC coefficient")
    g.add_argument("--C", type=float, help="third ABC coefficient")
    g.add_argument("--U", type=_parse_vec, metavar="UX,UY,UZ",
                   help="constant shear velocity")
    g.add_argument("--amplitude", type=float, help="sinusoidal shear amplitude")
    g.add_argument("--flow-file", help="path to a JSON flow description")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--outdir", help="output directory")
    g = p.add_argument_group("integrator")
    g.add_argument("--rtol", type=float)
    g.add_argument("--atol", type=float)
    g.add_argument("--reorth-interval", type=float, dest="reorth_interval")
    g.add_argument("--cond-max", type=float, dest="cond_max")
    g.add_argument("--max-steps", type=int, dest="max_steps")


def _flow_overrides(args) -> dict:
    params = {}
    if args.A is not None:
        params["A"] = args.A
    if args.B is not None:
        params["B"] = args.B
    if args.C is not None:
        params["C"] = args.C
    if args.U is not None:
        params["U"] = [float(v) for v in args.U]
    if args.amplitude is not None:
        params["amplitude"] = args.amplitude
    if args.flow_file is not None:
        params["path"] = args.flow_file
    out = {}
    if args.flow is not None:
        out["flow_kind"] = args.flow
        out["flow_params"] = params
    elif params:
        out["flow_params_patch"] = params
    return out


def _build_config(args, extra=None) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = dict(extra or {})
    over.update(_flow_overrides(args))
    patch = over.pop("flow_params_patch", None)
    if patch:
        over["flow_params"] = {**cfg.flow_params, **patch}
    for name in ("rtol", "atol", "reorth_interval", "cond_max", "max_steps",
                 "outdir"):
        over.setdefault(name, getattr(args, name, None))
    return apply_overrides(cfg, **over)


def _resolve_outdir(cfg: RunConfig) -> Path:
    out = cfg.outdir or os.environ.get(ENV_OUTDIR) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stamp(cfg: RunConfig) -> str:
    return f"# eulerspec version={VERSION} config={cfg.config_hash()}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(canonical_json(payload) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, np.floating):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, stamp: str, header: str, rows) -> None:
    lines = [stamp, header]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def cmd_check_flow(args) -> int:
    cfg = _build_config(args)
    flow = cfg.build_flow()
    flow.require_valid()
    report = check_steady_euler(flow, grid_per_axis=args.grid,
                                tol=args.steady_tol)
    print(report.summary())
    if not report.passed:
        print(f"worst grid point: {tuple(float(v) for v in report.worst_point)}")
        return 2
    return 0


def cmd_trace(args) -> int:
    cfg = _build_config(args)
    flow = cfg.build_flow()
    frame = init_fiber_frame(args.xi0, seed=cfg.frame_seed)
    rec = integrate_bas(flow, args.x0, args.xi0, frame, args.T,
                        cfg.controls, n_samples=args.samples)
    outdir = _resolve_outdir(cfg)
    rows = [
        (rec.t[i], rec.x[i, 0], rec.x[i, 1], rec.x[i, 2],
         rec.xi_dir[i, 0], rec.xi_dir[i, 1], rec.xi_dir[i, 2],
         rec.log_xi[i], rec.H[i], rec.drift_bxi[i])
        for i in range(rec.t.size)
    ]
    path = outdir / "trace.csv"
    _write_csv(path, _stamp(cfg), "t,x1,x2,x3,xi1,xi2,xi3,log_xi,H,drift_bxi",
               rows)
    fin = rec.final_state
    print(f"wrote {path}")
    print(f"t={fin.t:g}  x=({fin.x[0]:.6f}, {fin.x[1]:.6f}, {fin.x[2]:.6f})  "
          f"log|xi|={fin.log_xi:.6f}")
    print(f"max |H - H0| = {rec.max_H_drift:.3e}   "
          f"max |b.xi| = {rec.max_bxi:.3e}   "
          f"steps accepted/rejected = {rec.n_accepted}/{rec.n_rejected}")
    return 0


def cmd_exponents(args) -> int:
    cfg = _build_config(args, extra={"frame_seed": args.frame_seed})
    flow = cfg.build_flow()
    sample = evolve_exponents(flow, args.x0, args.xi0, args.T,
                              reorth_interval=cfg.controls.reorth_interval,
                              controls=cfg.controls, seed=cfg.frame_seed)
    outdir = _resolve_outdir(cfg)
    path = outdir / "exponents.csv"
    _write_csv(
        path, _stamp(cfg),
        "x01,x02,x03,xi01,xi02,xi03,T,lambda1,lambda2,drift_H,drift_bxi",
        [(sample.x0[0], sample.x0[1], sample.x0[2],
          sample.xi0[0], sample.xi0[1], sample.xi0[2],
          sample.T, sample.lambda1, sample.lambda2,
          sample.drift_H, sample.drift_bxi)],
    )
    print(f"wrote {path}")
    print(f"lambda1 = {sample.lambda1:+.6f}   lambda2 = {sample.lambda2:+.6f}")
    for t, l1, l2 in sample.convergence_tail:
        print(f"  T={t:10.3f}   lambda1={l1:+.6f}   lambda2={l2:+.6f}")
    return 0


def cmd_spectrum(args) -> int:
    extra = {
        "count": args.count, "strategy": args.strategy, "seed": args.seed,
        "constraint": args.constraint, "horizon": args.horizon,
        "checkpoints": args.checkpoints, "frame_seed": args.frame_seed,
        "workers": args.workers,
    }
    if args.times is not None:
        extra["report_times"] = args.times
    cfg = _build_config(args, extra=extra)
    flow = cfg.build_flow()
    est = estimate_spectrum(flow, cfg.plan, controls=cfg.controls,
                            frame_seed=cfg.frame_seed, workers=cfg.workers)

    first = est.samples[0]
    t_audit = float(np.sign(cfg.plan.horizon) * min(20.0, abs(cfg.plan.horizon)))
    audit = audit_trajectory(flow, first.x0, first.xi0,
                             init_fiber_frame(first.xi0, seed=cfg.frame_seed),
                             t_audit, cfg.controls)

    outdir = _resolve_outdir(cfg)
    chash = cfg.config_hash()
    _write_json(outdir / "config.json", {
        "version": VERSION, "config_hash": chash,
        "config": cfg.to_dict(include_outdir=True),
    })
    payload = {
        "version": VERSION,
        "config_hash": chash,
        "flow": {"kind": cfg.flow_kind, "name": flow.name, **cfg.flow_params},
        "plan": cfg.to_dict(include_outdir=False)["plan"],
        "mu_hat": est.mu_hat,
        "M_hat": est.M_hat,
        "n_samples": len(est.samples),
        "n_failed": est.n_failed,
        "drift": {"max_H": est.max_drift_H, "max_bxi": est.max_drift_bxi},
        "gap_report": {
            "resolution": est.gap_report.resolution,
            "n_intervals": est.gap_report.n_intervals,
            "components": [[lo, hi] for lo, hi in est.gap_report.components],
            "gaps": list(est.gap_report.gaps),
            "largest_gap": est.gap_report.largest_gap,
            "connected": est.gap_report.connected,
        },
        "convergence": est.convergence,
        "annulus": [
            {"t": a.t, "r_inner": a.r_inner, "r_outer": a.r_outer}
            for a in (est.annulus(t) for t in cfg.report_times)
        ],
        "audit": audit.as_dict(),
    }
    _write_json(outdir / "estimate.json", payload)

    stamp = _stamp(cfg)
    _write_csv(
        outdir / "samples.csv", stamp,
        "x01,x02,x03,xi01,xi02,xi03,T,lambda1,lambda2,drift_H,drift_bxi",
        [(s.x0[0], s.x0[1], s.x0[2], s.xi0[0], s.xi0[1], s.xi0[2],
          s.T, s.lambda1, s.lambda2, s.drift_H, s.drift_bxi)
         for s in est.samples],
    )
    _write_csv(outdir / "intervals.csv", stamp, "lambda_lo,lambda_hi",
               [(lo, hi) for lo, hi in est.interval_cover])
    _write_csv(outdir / "annuli.csv", stamp, "t,r_inner,r_outer",
               [(a["t"], a["r_inner"], a["r_outer"]) for a in payload["annulus"]])

    print(f"wrote {outdir / 'estimate.json'}")
    print(f"mu_hat = {est.mu_hat:+.6f}   M_hat = {est.M_hat:+.6f}   "
          f"samples = {len(est.samples)} ({est.n_failed} failed)")
    print(est.gap_report.summary())
    for a in payload["annulus"]:
        print(f"annulus t={a['t']:g}: r_inner={a['r_inner']:.6g} "
              f"r_outer={a['r_outer']:.6g}")
    return 0


def cmd_audit(args) -> int:
    cfg = _build_config(args, extra={"frame_seed": args.frame_seed})
    flow = cfg.build_flow()
    frame = init_fiber_frame(args.xi0, seed=cfg.frame_seed)
    report = audit_trajectory(flow, args.x0, args.xi0, frame, args.T,
                              cfg.controls)
    oracle_dev = oracle_comparison(flow, args.x0, args.xi0, frame.b1, args.T,
                                   cfg.controls)
    study = step_halving_study(flow, args.x0, args.xi0, args.T,
                               args.tolerances, seed=cfg.frame_seed,
                               controls=cfg.controls)

    outdir = _resolve_outdir(cfg)
    payload = {
        "version": VERSION,
        "config_hash": cfg.config_hash(),
        "flow": {"kind": cfg.flow_kind, "name": flow.name, **cfg.flow_params},
        "initial": {"x0": list(map(float, args.x0)),
                    "xi0": list(map(float, args.xi0)),
                    "frame_seed": cfg.frame_seed},
        "T": float(args.T),
        "report": report.as_dict(),
        "oracle_max_deviation": oracle_dev,
        "step_halving": {
            "tolerances": study.tolerances,
            "lambda1": study.lambda1,
            "lambda2": study.lambda2,
            "diffs": study.diffs,
            "floor": study.floor,
            "passed": study.passed,
        },
    }
    _write_json(outdir / "audit.json", payload)
    rows = []
    for i, (tol, l1, l2) in enumerate(study.rows()):
        rows.append((tol, l1, l2, "" if i == 0 else study.diffs[i - 1]))
    _write_csv(outdir / "halving.csv", _stamp(cfg),
               "tolerance,lambda1,lambda2,diff_from_prev", rows)

    print(f"wrote {outdir / 'audit.json'}")
    for key, val in report.as_dict().items():
        print(f"{key:24s} = {val:.3e}")
    if oracle_dev is not None:
        print(f"{'oracle_max_deviation':24s} = {oracle_dev:.3e}")
    print(f"step-halving: {'PASS' if study.passed else 'FAIL'} "
          f"(diffs: {', '.join(f'{d:.3e}' for d in study.diffs)})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eulerspec",
        description="Essential-spectrum annulus estimation for steady "
                    "torus flows via transported high-frequency amplitudes.",
    )
    parser.add_argument("--version", action="version",
                        version=f"eulerspec {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-flow", help="validate flow and steadiness")
    _add_common_args(p)
    _add_flow_args(p)
    p.add_argument("--grid", type=int, default=None,
                   help="grid points per axis for the residual check")
    p.add_argument("--steady-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_check_flow)

    p = sub.add_parser("trace", help="integrate one trajectory to CSV")
    _add_common_args(p)
    _add_flow_args(p)
    p.add_argument("--x0", type=_parse_vec, required=True)
    p.add_argument("--xi0", type=_parse_vec, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("exponents", help="exponent pair for one sample")
    _add_common_args(p)
    _add_flow_args(p)
    p.add_argument("--x0", type=_parse_vec, required=True)
    p.add_argument("--xi0", type=_parse_vec, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--frame-seed", type=int, dest="frame_seed", default=None)
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("spectrum", help="sampled spectrum estimate")
    _add_common_args(p)
    _add_flow_args(p)
    p.add_argument("--count", type=int)
    p.add_argument("--strategy", choices=("lattice", "low-discrepancy", "random"))
    p.add_argument("--seed", type=int)
    p.add_argument("--constraint", choices=("none", "omega_perp"))
    p.add_argument("--horizon", type=float)
    p.add_argument("--checkpoints", type=_parse_floats, metavar="T1,T2,...")
    p.add_argument("--times", type=_parse_floats, metavar="T1,T2,...",
                   help="annulus report times")
    p.add_argument("--frame-seed", type=int, dest="frame_seed", default=None)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("audit", help="drift report and tolerance study")
    _add_common_args(p)
    _add_flow_args(p)
    p.add_argument("--x0", type=_parse_vec, required=True)
    p.add_argument("--xi0", type=_parse_vec, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--tolerances", type=_parse_floats,
                   default=[1e-6, 1e-8, 1e-10], metavar="TOL1,TOL2,...")
    p.add_argument("--frame-seed", type=int, dest="frame_seed", default=None)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FlowValidationError, StateValidationError, ValueError,
            TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, EstimateError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
