"""Fast invariant suite behind the `selftest` CLI subcommand.

Each check is a small self-contained assertion on a core property; the CLI
prints one PASS/FAIL line per property.
"""
from __future__ import annotations

import os
import tempfile

import numpy as np

from . import dressed, dynamics, hamiltonian
from .params import AtomSystem, PulseSet, SimGrid, UnitConvention

_PULSES = PulseSet(omega0_p_mhz=120, omega0_s_mhz=120, tau_p_ns=75, tau_s_ns=75,
                   t_c_us=0.5, alpha_mhz_per_us=190, delta0_p_mhz=1500,
                   delta0_s_mhz=-1500)
_ATOMS = AtomSystem(levels="three", gamma_i_mhz=6, gamma_r_khz=0.485, v_int_mhz=5)


def _check_pulse_symmetry():
    p = _PULSES.internal()
    for x in (0.01, 0.1, 0.3):
        a, b = p.omega_p(p.t_c + x), p.omega_p(p.t_c - x)
        assert abs(a - b) < 1e-11 * max(a, b)


def _check_chirp_antisymmetry():
    p = _PULSES.internal()
    d0 = p.delta(p.t_c)
    for x in (0.05, 0.2):
        assert abs((p.delta(p.t_c + x) - d0) + (p.delta(p.t_c - x) - d0)) < 1e-9


def _check_unit_round_trip():
    for conv in (UnitConvention.plain(), UnitConvention.two_pi()):
        for x in (0.485, 120.0, 2190.0):
            assert abs(conv.to_mhz(conv.from_mhz(x)) - x) < 1e-12 * max(1.0, x)


def _check_hermiticity():
    H = hamiltonian.build_product_hamiltonian(_PULSES.internal(), _ATOMS.internal(), 0.42)
    assert np.abs(H - H.conj().T).max() < 1e-12 * np.abs(H).max()


def _check_swap_commutation():
    basis = hamiltonian.product_basis("three")
    H = hamiltonian.build_product_hamiltonian(_PULSES.internal(), _ATOMS.internal(), 0.47)
    S = hamiltonian.swap_operator(basis)
    assert np.abs(H @ S - S @ H).max() < 1e-12 * np.abs(H).max()


def _check_minus_decoupling():
    H = hamiltonian.build_product_hamiltonian(_PULSES.internal(), _ATOMS.internal(), 0.51)
    Hm = hamiltonian.product_to_molecular(H)
    plus = [0, 1, 3, 4, 6, 8]
    minus = [2, 5, 7]
    assert np.abs(Hm[np.ix_(plus, minus)]).max() == 0.0


def _check_four_level_reduction():
    atoms4 = AtomSystem(levels="four", gamma_i_mhz=6, gamma_r_khz=0.485, v_int_mhz=5)
    basis4 = hamiltonian.product_basis("four")
    H3 = hamiltonian.build_product_hamiltonian(_PULSES.internal(), _ATOMS.internal(), 0.5)
    H4 = hamiltonian.build_product_hamiltonian(_PULSES.internal(), atoms4.internal(), 0.5)
    assert np.abs(H4[:9, :9] - H3).max() == 0.0
    i00 = basis4.index("g'g'")
    assert np.abs(H4[i00, :]).max() == 0.0 and np.abs(H4[:, i00]).max() == 0.0


def _check_cubic_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(20):
        om_p, om_s = rng.uniform(0, 200, 2)
        dp = float(rng.choice([-1, 1]) * rng.uniform(500, 3000))
        de = float(rng.uniform(-100, 100))
        v = float(rng.uniform(0, 100))
        M = dressed.reduced_matrix(om_p, om_s, dp, de, v)
        ev = np.sort(np.linalg.eigvalsh(M))
        roots = dressed.cubic_roots(om_p, om_s, dp, de, v)
        scale = max(1.0, float(np.abs(ev).max()))
        assert np.abs(ev - roots).max() < 1e-9 * scale


def _check_closed_form_spectrum():
    om_p, om_s, dp, de = 120.0, 80.0, 1500.0, 17.0
    M = dressed.reduced_matrix(om_p, om_s, dp, de, 0.0, include_cross=False)
    ev = np.sort(np.linalg.eigvalsh(M))
    e1, e2, e3 = dressed.eq5_energies(de, om_p, om_s, dp)
    assert np.abs(ev - np.sort([e1, e2, e3])).max() < 1e-10 * max(1.0, np.abs(ev).max())


def _check_single_atom_identity():
    ep, em = dressed.single_atom_eps(12.0, 120.0, 120.0, 1500.0)
    e1, e2, e3 = dressed.eq5_energies(12.0, 120.0, 120.0, 1500.0)
    assert abs(2 * ep - e2) < 1e-10 and abs(2 * em - e3) < 1e-10


def _check_minus_subspace():
    grid = SimGrid(t_start_us=0.35, t_end_us=0.65, rel_tol=1e-8, abs_tol=1e-10)
    traj = dynamics.schrodinger_propagate("gg", _PULSES, _ATOMS, grid, n_samples=21)
    minus_amp = np.abs(traj.molecular_states()[:, [2, 5, 7]]).max()
    assert minus_amp < 1e-12


def _check_trace_and_positivity():
    grid = SimGrid(t_start_us=0.35, t_end_us=0.65, rel_tol=1e-8, abs_tol=1e-10)
    traj = dynamics.lindblad_propagate("gg", _PULSES, _ATOMS, grid, n_samples=21)
    assert np.abs(traj.traces() - 1.0).max() < 1e-8
    assert traj.min_eigenvalues().min() >= -1e-7


def _check_checkpoint_round_trip():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "rho.bin")
        dynamics.save_density_checkpoint(path, rho)
        back = dynamics.load_density_checkpoint(path)
    assert np.abs(back - rho).max() == 0.0


CHECKS = (
    ("pulse-envelope-symmetry", _check_pulse_symmetry),
    ("chirp-antisymmetry", _check_chirp_antisymmetry),
    ("unit-round-trip", _check_unit_round_trip),
    ("hamiltonian-hermiticity", _check_hermiticity),
    ("swap-commutation", _check_swap_commutation),
    ("molecular-minus-decoupling", _check_minus_decoupling),
    ("four-level-reduction", _check_four_level_reduction),
    ("cubic-eigenvalue-equivalence", _check_cubic_equivalence),
    ("closed-form-spectrum", _check_closed_form_spectrum),
    ("single-atom-energy-identity", _check_single_atom_identity),
    ("minus-subspace-isolation", _check_minus_subspace),
    ("trace-and-positivity", _check_trace_and_positivity),
    ("checkpoint-round-trip", _check_checkpoint_round_trip),
)


def run_selftest(out) -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # report every property, keep going
            failures += 1
            print(f"FAIL {name}: {exc}", file=out)
        else:
            print(f"PASS {name}", file=out)
    return failures
