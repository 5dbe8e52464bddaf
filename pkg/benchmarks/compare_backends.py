"""Benchmark the compiled propagation core against the pure-NumPy fallback.

Runs the same master-equation problems through both kernels and reports wall
times.  Usage:

    python benchmarks/compare_backends.py [--quick]
"""
import argparse
import sys
import time
from dataclasses import replace

import numpy as np

from rydarp._kernels import get_backend
from rydarp.config import load_config
from rydarp.dynamics import Segment, _flatten_channels, collapse_channels
from rydarp.hamiltonian import product_basis


def _problem(name):
    if name == "transfer":
        cfg = load_config("fig3")
        pulses = cfg.pulses.internal(cfg.convention)
        atoms = cfg.atoms.internal(cfg.convention)
        window = (pulses.t_c - 0.2, pulses.t_c + 0.2)
        basis = product_basis("three")
    else:  # gate-sized 16-level problem
        cfg = load_config("fig5")
        pulses = replace(cfg.pulses.internal(cfg.convention), t_c=0.0)
        atoms = cfg.atoms.internal(cfg.convention)
        window = (-0.15, 0.15)
        basis = product_basis("four")
    seg = Segment(window[0], window[1], pulses)
    rho0 = np.zeros((basis.dim, basis.dim), dtype=complex)
    rho0[0, 0] = 1.0
    ch_rate, ch_ptr, ch_src, ch_dst, damp = _flatten_channels(
        collapse_channels(basis, atoms), basis.dim)
    t_eval = np.linspace(window[0], window[1], 5)
    args = (seg.row()[None, :], basis.n_i, basis.n_r, basis.rr_index, atoms.v_int,
            basis.bonds_p, basis.bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp,
            rho0, t_eval, 1e-8, 1e-10, 0.05)
    return args


def run(name, repeats):
    args = _problem(name)
    print(f"\n{name} ({args[12].shape[0]}x{args[12].shape[0]} density matrix, "
          f"window {args[13][-1] - args[13][0]:.2f} us)")
    times = {}
    for backend in ("cython", "python"):
        try:
            kern = get_backend(backend)
        except (ImportError, ValueError) as exc:
            print(f"  {backend:>7}: unavailable ({exc})")
            continue
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            out, stats = kern.integrate_lindblad(*args)
            best = min(best, time.perf_counter() - t0)
        times[backend] = best
        print(f"  {backend:>7}: {best:8.3f} s   "
              f"({stats['steps']} steps, {stats['rhs_evals']} rhs evals, "
              f"final rho_rr = {out[-1][args[3], args[3]].real:.6f})")
    if len(times) == 2:
        print(f"  speedup: {times['python'] / times['cython']:.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="single repetition")
    opts = parser.parse_args(argv)
    repeats = 1 if opts.quick else 2
    run("transfer", repeats)
    run("gate", repeats)
    return 0


if __name__ == "__main__":
    sys.exit(main())
