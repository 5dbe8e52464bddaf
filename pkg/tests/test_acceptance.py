"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  Two known-red items are
asserted at their stated tolerances anyway (the assertion messages carry the
analysis): the gate fidelity lands at ~0.980, above the quoted
[0.91, 0.97] reference range, and the per-branch perturbative-energy error
shrinks ~2x per interaction halving rather than ~4x because the quoted
perturbative form omits an even-in-detuning first-order term (its branch
splitting does shrink ~4x, which is also reported).
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from rydarp import dressed, dynamics, experiments
from rydarp.config import load_config
from rydarp.dynamics import Segment, collapse_channels, propagate_segments_lindblad
from rydarp.hamiltonian import build_product_hamiltonian, product_basis
from rydarp.params import SimGrid, UnitConvention

PLAIN = UnitConvention.plain()
TWO_PI = UnitConvention.two_pi()


def _report(num, name, ok, detail):
    print(f"\nACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


# ---------------------------------------------------------------------------
# criterion 1: peak transfer efficiency
# ---------------------------------------------------------------------------

def test_criterion_1_peak_transfer():
    cfg = load_config("fig3")
    t0 = time.perf_counter()
    res = experiments.transfer_efficiency(cfg.pulses, cfg.atoms, cfg.grid,
                                          convention=cfg.convention)
    elapsed = time.perf_counter() - t0
    eff_default = res.efficiency
    in_range = 0.94 <= eff_default <= 0.99
    eff_plain = experiments.transfer_efficiency(
        cfg.pulses, cfg.atoms, cfg.grid, convention=PLAIN).efficiency
    ok = _report(1, "peak transfer",
                 in_range and elapsed < 10.0,
                 f"rho_rr={eff_default:.4f} under default two_pi convention "
                 f"(plain convention gives {eff_plain:.4f}), {elapsed:.1f}s/point")
    assert in_range, (
        f"final rho_rr = {eff_default:.4f} outside [0.94, 0.99] under the default "
        f"convention (plain gives {eff_plain:.4f})")
    assert elapsed < 10.0, f"single point took {elapsed:.1f}s (limit 10s)"


# ---------------------------------------------------------------------------
# criterion 2: plateau structure on the 8x8 grid
# ---------------------------------------------------------------------------

def test_criterion_2_plateau_structure():
    cfg = load_config("fig3")
    t0 = time.perf_counter()
    points = experiments.run_sweep(cfg.sweep, cfg.pulses, cfg.atoms, cfg.grid,
                                   convention=cfg.convention, workers=4)
    elapsed = time.perf_counter() - t0
    n_om = len(cfg.sweep.omegas_mhz)
    n_al = len(cfg.sweep.alphas_mhz_per_us)
    eff = np.array([p.efficiency for p in points]).reshape(n_om, n_al)
    assert not np.any(np.isnan(eff)), [p.error for p in points if p.error]
    low, high = eff[0, 0], eff[-1, -1]
    diag = np.array([eff[k, k] for k in range(min(n_om, n_al))])
    steps = np.diff(diag)
    monotone = bool(np.all(steps >= -0.02))
    ok = high > 0.9 and low < 0.5 and monotone and elapsed < 600.0
    _report(2, "plateau structure", ok,
            f"corner(low)={low:.4f}, corner(high)={high:.4f}, diagonal="
            f"{np.array2string(diag, precision=3)}, {elapsed:.0f}s on 4 workers")
    assert high > 0.9, f"high-Omega/high-alpha corner {high:.4f} <= 0.9"
    assert low < 0.5, f"low/low corner {low:.4f} >= 0.5"
    assert monotone, f"diagonal decreases by more than 0.02: steps {steps}"
    assert elapsed < 600.0, f"sweep took {elapsed:.0f}s (limit 600s)"


# ---------------------------------------------------------------------------
# criteria 3 and 4 share the calibrated gate runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def calibrated_gate():
    cfg = load_config("fig5")
    cal = experiments.calibrate_delay(cfg.gate, cfg.pulses, cfg.atoms,
                                      convention=cfg.convention)
    result = experiments.run_gate(cal.protocol, cfg.pulses, cfg.atoms, cfg.grid,
                                  convention=cfg.convention)
    atoms_nogi = replace(cfg.atoms, gamma_i_mhz=0.0)
    result_nogi = experiments.run_gate(cal.protocol, cfg.pulses, atoms_nogi,
                                       cfg.grid, convention=cfg.convention)
    return cfg, cal, result, result_nogi


def test_criterion_3_gate_fidelity(calibrated_gate):
    cfg, cal, result, _ = calibrated_gate
    fid = result.fidelity
    in_range = 0.91 <= fid <= 0.97
    # cross-check under the plain reading of the same quoted numbers
    cal_p = experiments.calibrate_delay(cfg.gate, cfg.pulses, cfg.atoms,
                                        convention=PLAIN)
    fid_plain = experiments.run_gate(cal_p.protocol, cfg.pulses, cfg.atoms,
                                     cfg.grid, convention=PLAIN).fidelity
    _report(3, "gate fidelity range", in_range,
            f"F={fid:.4f} at calibrated delay {result.delay_ns:.1f} ns under the "
            f"default two_pi convention; plain convention gives F={fid_plain:.4f}")
    assert in_range, (
        f"F = {fid:.4f} outside the quoted reference range [0.91, 0.97] "
        f"(plain convention gives {fid_plain:.4f}, also outside).  With the "
        f"documented +/-5 tau pulse windows and an exactly calibrated delay the "
        f"gate error is decay-dominated "
        f"(intermediate-state loss {result.error_budget['intermediate_state_loss']:.4f}), "
        f"which beats the quoted fidelity")


def test_criterion_3_decay_sensitivity(calibrated_gate):
    _, _, result, result_nogi = calibrated_gate
    gain = result_nogi.fidelity - result.fidelity
    ok = 0.005 <= gain <= 0.02
    _report(3, "intermediate-decay sensitivity", ok,
            f"F(Gamma_i=0) - F = {gain:.4f}, expected within [0.005, 0.02]")
    assert ok, f"fidelity gain from disabling Gamma_i is {gain:.4f}"


def test_criterion_3_phase_consistency(calibrated_gate):
    # dressed-integral phase vs the phase of the <11|rho|00> coherence
    _, _, result, _ = calibrated_gate
    diff = abs(((result.phi_11_measured - result.phi_11) + math.pi) % (2 * math.pi)
               - math.pi)
    ok = diff < 0.05
    _report(3, "dressed vs dynamical phase", ok,
            f"|arg<11|rho|00> + phi_11| = {diff:.4f} rad")
    assert ok


def test_criterion_4_phase_laws(calibrated_gate):
    cfg, cal, _, _ = calibrated_gate
    phases = experiments.phase_accumulation(cal.protocol, cfg.pulses, cfg.atoms,
                                            convention=cfg.convention)
    atoms_small = replace(cfg.atoms, v_int_mhz=0.5)
    cal_small = experiments.calibrate_delay(cfg.gate, cfg.pulses, atoms_small,
                                            convention=cfg.convention)
    v_small = atoms_small.internal(cfg.convention).v_int
    ratio = cal_small.phi_11 / (2.0 * v_small * cal_small.half_delay_us)
    pulses = cfg.pulses.internal(cfg.convention)
    sweep_depth = abs(pulses.alpha) * cal_small.half_delay_us
    omega = abs(pulses.peak_two_photon_rabi())
    ok = (cal.residual < 1e-3 and abs(phases.phi_01) < 2e-3
          and abs(phases.phi_10) < 2e-3 and 0.95 <= ratio <= 1.05
          and sweep_depth >= 10 * omega)
    _report(4, "phase laws", ok,
            f"|phi_11 - pi| = {cal.residual:.2e}, |phi_01| = {abs(phases.phi_01):.2e}, "
            f"small-V ratio phi_11/(2 V (t_c - T)) = {ratio:.4f} "
            f"at alpha*(t_c-T)/Omega = {sweep_depth / omega:.1f}")
    assert cal.residual < 1e-3
    assert abs(phases.phi_01) < 2e-3 and abs(phases.phi_10) < 2e-3
    assert sweep_depth >= 10 * omega
    assert 0.95 <= ratio <= 1.05


# ---------------------------------------------------------------------------
# criterion 5: spectrum oracles
# ---------------------------------------------------------------------------

def test_criterion_5_spectrum_oracles():
    rng = np.random.default_rng(2024)
    worst_cubic = 0.0
    for _ in range(100):
        om_p, om_s = rng.uniform(0, 200, 2)
        dp = float(rng.choice([-1, 1]) * rng.uniform(500, 3000))
        de = float(rng.uniform(-100, 100))
        v = float(rng.uniform(0, 100))
        M = dressed.reduced_matrix(om_p, om_s, dp, de, v)
        ev = np.sort(np.linalg.eigvalsh(M))
        roots = dressed.cubic_roots(om_p, om_s, dp, de, v)
        scale = max(1.0, float(np.abs(ev).max()))
        worst_cubic = max(worst_cubic, float(np.abs(ev - roots).max() / scale))

    worst_eq5 = 0.0
    for _ in range(50):
        om_p, om_s = rng.uniform(0, 200, 2)
        dp = float(rng.choice([-1, 1]) * rng.uniform(500, 3000))
        de = float(rng.uniform(-100, 100))
        M = dressed.reduced_matrix(om_p, om_s, dp, de, 0.0, include_cross=False)
        ev = np.sort(np.linalg.eigvalsh(M))
        closed = np.sort(dressed.eq5_energies(de, om_p, om_s, dp))
        scale = max(1.0, float(np.abs(ev).max()))
        worst_eq5 = max(worst_eq5, float(np.abs(ev - closed).max() / scale))

    worst_ident = 0.0
    for de in np.linspace(-80, 80, 33):
        ep, em = dressed.single_atom_eps(de, 120.0, 120.0, 1500.0)
        _, e2, e3 = dressed.eq5_energies(de, 120.0, 120.0, 1500.0)
        scale = max(1.0, abs(e2), abs(e3))
        worst_ident = max(worst_ident,
                          abs(2 * ep - e2) / scale, abs(2 * em - e3) / scale)

    ok = worst_cubic < 1e-9 and worst_eq5 < 1e-10 and worst_ident < 1e-10
    _report(5, "spectrum oracles", ok,
            f"cubic-vs-eigh {worst_cubic:.1e} (<1e-9), closed-form {worst_eq5:.1e} "
            f"(<1e-10), pair identity {worst_ident:.1e} (<1e-10)")
    assert worst_cubic < 1e-9
    assert worst_eq5 < 1e-10
    assert worst_ident < 1e-10


# ---------------------------------------------------------------------------
# criterion 6: dynamics oracles
# ---------------------------------------------------------------------------

def test_criterion_6_dynamics_oracles():
    cfg = load_config("fig2")
    conv = cfg.convention
    # (a) the antisymmetric subspace stays empty starting from |gg>
    psi = dynamics.schrodinger_propagate("gg", cfg.pulses, cfg.atoms, cfg.grid,
                                         convention=conv, n_samples=41)
    minus_max = float(np.abs(psi.molecular_states()[:, [2, 5, 7]]).max())

    # (b) no interaction, no decay: the pair factorizes into the single atom
    atoms_free = replace(cfg.atoms, gamma_i_mhz=0.0, gamma_r_khz=0.0, v_int_mhz=0.0)
    grid_tight = SimGrid(rel_tol=1e-10, abs_tol=1e-12)
    pair = dynamics.lindblad_propagate("gg", cfg.pulses, atoms_free, grid_tight,
                                       convention=conv, n_samples=11)
    p_rr = pair.population("rr")[-1]
    pulses_int = cfg.pulses.internal(conv)

    def single_rhs(t, y):
        om_p, om_s = pulses_int.omega_p(t), pulses_int.omega_s(t)
        dp, de = pulses_int.delta_p(t), pulses_int.delta(t)
        h = np.array([[0.0, -om_p, 0.0], [-om_p, dp, -om_s], [0.0, -om_s, de]])
        return -1j * (h @ y)

    t0, t1 = grid_tight.resolve_window(pulses_int)
    sol = solve_ivp(single_rhs, (t0, t1), np.array([1, 0, 0], complex),
                    rtol=1e-11, atol=1e-13)
    p_single = float(np.abs(sol.y[2, -1]) ** 2)
    factor_err = abs(p_rr - p_single ** 2)

    # (c) frozen drive against the dense superoperator exponential
    pulses = cfg.pulses.internal(conv)
    atoms = cfg.atoms.internal(conv)
    basis = product_basis("three")
    seg = Segment(0.0, 0.1, pulses, freeze_envelopes_at=pulses.t_c)
    rho0 = np.zeros((9, 9), complex)
    rho0[0, 0] = 1.0
    frozen = propagate_segments_lindblad(
        [seg], rho0, basis, atoms, SimGrid(rel_tol=1e-11, abs_tol=1e-13),
        np.linspace(0.0, 0.1, 6))
    H = build_product_hamiltonian(pulses, atoms, pulses.t_c)
    eye = np.eye(9)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in collapse_channels(basis, atoms):
        Lm = np.zeros((9, 9))
        for s, d in zip(ch.src, ch.dst):
            Lm[d, s] = 1.0
        LdL = Lm.T @ Lm
        L += ch.rate * (np.kron(Lm, Lm.conj())
                        - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    rho_ref = (expm(L * 0.1) @ rho0.ravel()).reshape(9, 9)
    superop_err = float(np.abs(frozen.final - rho_ref).max())

    trace_drift = max(float(np.abs(t.traces() - 1.0).max()) for t in (pair, frozen))
    min_eig = min(float(t.min_eigenvalues().min()) for t in (pair, frozen))

    ok = (minus_max < 1e-12 and factor_err < 1e-6 and superop_err < 1e-6
          and trace_drift < 1e-8 and min_eig >= -1e-7)
    _report(6, "dynamics oracles", ok,
            f"minus-subspace {minus_max:.1e} (<1e-12), factorization {factor_err:.1e} "
            f"(<1e-6), superoperator {superop_err:.1e} (<1e-6), trace drift "
            f"{trace_drift:.1e} (<1e-8), min eig {min_eig:.1e} (>=-1e-7)")
    assert minus_max < 1e-12
    assert factor_err < 1e-6
    assert superop_err < 1e-6
    assert trace_drift < 1e-8
    assert min_eig >= -1e-7


# ---------------------------------------------------------------------------
# criterion 7: perturbative consistency
# ---------------------------------------------------------------------------

def test_criterion_7_perturbative_consistency():
    om_p, dp = 120.0, 1500.0
    om = om_p ** 2 / dp
    de = 2 * om
    errs_e2, errs_split = [], []
    for v in (2.0, 1.0, 0.5):
        M = dressed.reduced_matrix(om_p, om_p, dp, de, v, include_cross=False)
        ev = np.sort(np.linalg.eigvalsh(M))
        e2p, e3p = dressed.perturbative_eigs(de, om, om_p, dp, v)
        errs_e2.append(abs(ev[2] - e2p))
        errs_split.append(abs((ev[2] - ev[0]) - (e2p - e3p)))
    r_e2 = (errs_e2[0] / errs_e2[1], errs_e2[1] / errs_e2[2])
    r_split = (errs_split[0] / errs_split[1], errs_split[1] / errs_split[2])
    ok = all(3.5 <= r <= 4.5 for r in r_e2)
    _report(7, "perturbative consistency", ok,
            f"eps2 error ratios per halving {r_e2[0]:.2f}, {r_e2[1]:.2f} "
            f"(required 3.5-4.5); branch-splitting ratios {r_split[0]:.2f}, "
            f"{r_split[1]:.2f}")
    assert ok, (
        f"per-branch error ratios {r_e2[0]:.2f}, {r_e2[1]:.2f} show first-order "
        f"scaling: the quoted perturbative form keeps only the odd-in-detuning "
        f"part of the first-order level shift V*(1+cos)^2/4 and misses the even "
        f"part V*(1+cos^2)/4, a first-order omission common to both branches.  "
        f"The branch splitting, where that omission cancels, does shrink "
        f"second-order: ratios {r_split[0]:.2f}, {r_split[1]:.2f}")


# ---------------------------------------------------------------------------
# criterion 8: motional excitation estimate
# ---------------------------------------------------------------------------

def test_criterion_8_motional_estimate():
    cfg = load_config("fig5")
    params = cfg.motional
    val = experiments.motional_error(params, cfg.atoms.v_int_mhz,
                                     convention=cfg.convention)
    omega0 = cfg.convention.from_khz(params.omega0_khz)
    null = experiments.motional_error(
        replace(params, dwell_ns=1e3 * math.pi / omega0), cfg.atoms.v_int_mhz,
        convention=cfg.convention)
    ok = 0.005 <= val <= 0.08 and null < 1e-20
    _report(8, "motional estimate", ok,
            f"|c_mot|^2 = {val:.4f} (within [0.005, 0.08]), "
            f"zero at omega_0*dwell = pi: {null:.1e}")
    assert 0.005 <= val <= 0.08
    assert null < 1e-20
