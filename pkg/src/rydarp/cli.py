"""Command-line interface.

Subcommands: dressed, evolve, sweep, gate, calibrate, motional, selftest.
All read a JSON config (file path or bundled name fig2/fig3/fig5) and write
CSV or JSON results; diagnostics go to stderr.  Exit codes: 0 success,
1 configuration/validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

from . import _kernels, dressed, dynamics, experiments, selftest
from .config import load_config
from .errors import CalibrationError, ConfigError, DomainError, PropagationError
from .hamiltonian import build_product_hamiltonian, dump_hamiltonian_rows
from .params import UnitConvention


def _fmt(x) -> str:
    """CSV float formatting: 12 significant digits, deterministic."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_csv(path, header, rows):
    fh, close = _open_out(path)
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    finally:
        if close:
            fh.close()


def _emit_json(path, payload):
    fh, close = _open_out(path)
    try:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "convention", None):
        cfg = replace(cfg, convention=UnitConvention.from_name(args.convention))
    if getattr(args, "vint_mhz", None) is not None:
        cfg = replace(cfg, atoms=replace(cfg.atoms, v_int_mhz=args.vint_mhz))
    if getattr(args, "gamma_i_mhz", None) is not None:
        cfg = replace(cfg, atoms=replace(cfg.atoms, gamma_i_mhz=args.gamma_i_mhz))
    if getattr(args, "gamma_r_khz", None) is not None:
        cfg = replace(cfg, atoms=replace(cfg.atoms, gamma_r_khz=args.gamma_r_khz))
    return cfg


def _workers(args, cfg) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get("RYDARP_WORKERS")
    if env:
        return max(1, int(env))
    return cfg.workers


def cmd_dressed(args) -> int:
    cfg = _load(args)
    trace = dressed.trace_spectrum(cfg.pulses, cfg.atoms, convention=cfg.convention,
                                   n_samples=args.samples)
    header = ["t_us", "delta_rad_us", "eps1", "eps2", "eps3",
              "c2_gg", "c2_plus_rg", "c2_rr", "c3_gg", "c3_plus_rg", "c3_rr"]
    rows = [
        (trace.times[k], trace.delta[k], trace.eps1[k], trace.eps2[k], trace.eps3[k],
         trace.comps2[k][0], trace.comps2[k][1], trace.comps2[k][2],
         trace.comps3[k][0], trace.comps3[k][1], trace.comps3[k][2])
        for k in range(len(trace.times))
    ]
    _write_csv(args.out, header, rows)
    return 0


def cmd_evolve(args) -> int:
    cfg = _load(args)
    if args.dump_h_at_us is not None:
        H = build_product_hamiltonian(cfg.pulses.internal(cfg.convention),
                                      cfg.atoms.internal(cfg.convention),
                                      args.dump_h_at_us)
        _write_csv(args.dump_h_out, ["row", "col", "re", "im"],
                   dump_hamiltonian_rows(H))
        return 0
    traj = dynamics.lindblad_propagate(args.state, cfg.pulses, cfg.atoms, cfg.grid,
                                       convention=cfg.convention,
                                       n_samples=args.samples)
    rows = []
    for k, t in enumerate(traj.times):
        obs = dynamics.observables(traj.matrices[k], traj.basis)
        rows.append((t, obs["rho_gg"], obs["rho_plus_rg"], obs["rho_rr"],
                     obs["rho_ii"], obs["trace"]))
    _write_csv(args.out, ["t_us", "rho_gg", "rho_plus_rg", "rho_rr", "rho_ii", "trace"],
               rows)
    if args.checkpoint:
        dynamics.save_density_checkpoint(args.checkpoint, traj.final)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    points = experiments.run_sweep(cfg.sweep, cfg.pulses, cfg.atoms, cfg.grid,
                                   convention=cfg.convention,
                                   workers=_workers(args, cfg))
    suffix = cfg.convention.name
    alt = "two_pi" if suffix == "plain" else "plain"
    header = ["omega_mhz", "alpha_mhz_per_us", "efficiency",
              "diag_adiab1", "diag_adiab2",
              f"diag_adiab1_{alt}", f"diag_adiab2_{alt}", "error"]
    rows = []
    for p in points:
        if p.error:
            print(f"sweep point (omega={p.omega_mhz}, alpha={p.alpha_mhz_per_us}) "
                  f"failed: {p.error}", file=sys.stderr)
        d = p.diagnostics
        rows.append((p.omega_mhz, p.alpha_mhz_per_us, p.efficiency,
                     d.get(f"omega2_over_2alpha_{suffix}", math.nan),
                     d.get(f"two_alpha_tau2_{suffix}", math.nan),
                     d.get(f"omega2_over_2alpha_{alt}", math.nan),
                     d.get(f"two_alpha_tau2_{alt}", math.nan),
                     p.error or ""))
    _write_csv(args.out, header, rows)
    return 0


def _gate_protocol(args, cfg):
    protocol = cfg.gate or experiments.GateProtocol()
    if args.delay_ns is not None:
        protocol = protocol.with_half_delay(args.delay_ns * 1e-3 / 2.0)
    return protocol


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    protocol = cfg.gate or experiments.GateProtocol()
    cal = experiments.calibrate_delay(protocol, cfg.pulses, cfg.atoms,
                                      convention=cfg.convention)
    _emit_json(args.out, {
        "half_delay_us": cal.half_delay_us,
        "delay_ns": cal.delay_ns,
        "phi_11": cal.phi_11,
        "residual": cal.residual,
    })
    return 0


def cmd_gate(args) -> int:
    cfg = _load(args)
    protocol = _gate_protocol(args, cfg)
    if protocol.half_delay_us is None:
        cal = experiments.calibrate_delay(protocol, cfg.pulses, cfg.atoms,
                                          convention=cfg.convention)
        protocol = cal.protocol
        print(f"calibrated delay: {cal.delay_ns:.3f} ns "
              f"(phi_11 residual {cal.residual:.2e} rad)", file=sys.stderr)
    result = experiments.run_gate(protocol, cfg.pulses, cfg.atoms, cfg.grid,
                                  convention=cfg.convention, motional=cfg.motional)
    payload = result.report()
    payload["convention"] = cfg.convention.name
    payload["backend"] = _kernels.backend_name()
    payload["v_int_mhz"] = cfg.atoms.v_int_mhz
    payload["variant"] = protocol.variant
    _emit_json(args.out, payload)
    return 0


def cmd_motional(args) -> int:
    cfg = _load(args)
    params = cfg.motional or experiments.MotionalParams()
    prob = experiments.motional_error(params, cfg.atoms.v_int_mhz,
                                      convention=cfg.convention)
    _emit_json(args.out, {"motional_excitation_probability": prob})
    return 0


def cmd_selftest(args) -> int:
    failures = selftest.run_selftest(sys.stdout)
    return 2 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydarp",
        description="Chirped-pulse ARP simulator for interacting Rydberg atom pairs")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="JSON config path or bundled name (fig2/fig3/fig5)")
        p.add_argument("--convention", choices=["plain", "two_pi"],
                       help="override the angular convention")
        p.add_argument("--vint-mhz", type=float, help="override V_int (MHz)")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("dressed", help="CSV trace of the dressed spectrum over the sweep")
    add_common(p)
    p.add_argument("--samples", type=int, default=2001)
    p.set_defaults(func=cmd_dressed)

    p = sub.add_parser("evolve", help="CSV populations from the master equation")
    add_common(p)
    p.add_argument("--state", default="gg", help="initial product state label")
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--checkpoint", default=None,
                   help="write the final density matrix to this binary file")
    p.add_argument("--dump-h-at-us", type=float, default=None,
                   help="debug: dump H(t) at this time as CSV and exit")
    p.add_argument("--dump-h-out", default=None)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="transfer-efficiency grid as CSV")
    add_common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (env RYDARP_WORKERS, then config)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gate", help="run the two-step phase gate, JSON report")
    add_common(p)
    p.add_argument("--delay-ns", type=float, default=None,
                   help="explicit full delay 2(t_c - T) in ns; otherwise calibrate")
    p.add_argument("--gamma-i-mhz", type=float, default=None)
    p.add_argument("--gamma-r-khz", type=float, default=None)
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("calibrate", help="calibrate the gate delay, JSON output")
    add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("motional", help="motional-excitation estimate, JSON output")
    add_common(p)
    p.set_defaults(func=cmd_motional)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, PropagationError, CalibrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
