import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from rydarp import dynamics
from rydarp.dynamics import (Segment, collapse_channels, load_density_checkpoint,
                             observables, propagate_segments_lindblad,
                             save_density_checkpoint)
from rydarp.errors import ConfigError, PropagationError
from rydarp.hamiltonian import build_product_hamiltonian, product_basis, swap_operator
from rydarp.params import AtomSystem, PulseSet, SimGrid, UnitConvention

PLAIN = UnitConvention.plain()
TWO_PI = UnitConvention.two_pi()

FIG2_PULSES = PulseSet(120, 120, 75, 75, 0.5, 190, 1500, -1500)
ATOMS_V5 = AtomSystem(levels="three", gamma_i_mhz=6, gamma_r_khz=0.485, v_int_mhz=5)
OFF_PULSES = PulseSet(0, 0, 75, 75, 0.5, 0, 0, 0)


def test_stationary_state_no_fields():
    atoms = AtomSystem(levels="three", gamma_i_mhz=6, gamma_r_khz=0.485, v_int_mhz=50)
    grid = SimGrid(t_start_us=0.0, t_end_us=1.0)
    traj = dynamics.schrodinger_propagate("gg", OFF_PULSES, atoms, grid,
                                          convention=PLAIN, n_samples=11)
    # |gg> has zero energy, so it is exactly stationary
    assert np.abs(np.abs(traj.states[:, 0]) - 1.0).max() < 1e-12
    assert np.abs(traj.states[:, 1:]).max() < 1e-12


def test_minus_subspace_never_populated():
    grid = SimGrid()
    traj = dynamics.schrodinger_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                          convention=PLAIN, n_samples=41)
    minus = traj.molecular_states()[:, [2, 5, 7]]
    assert np.abs(minus).max() < 1e-12
    assert abs(traj.norms()[-1] - 1.0) < 1e-12


def _single_atom_rydberg_probability(pulses, grid, rtol=1e-11, atol=1e-13):
    """Independent 3-level single-atom oracle via scipy's own integrator."""

    def rhs(t, psi):
        om_p, om_s = pulses.omega_p(t), pulses.omega_s(t)
        dp, de = pulses.delta_p(t), pulses.delta(t)
        h = np.array([[0.0, -om_p, 0.0],
                      [-om_p, dp, -om_s],
                      [0.0, -om_s, de]])
        return -1j * (h @ psi)

    t0, t1 = grid.resolve_window(pulses)
    sol = solve_ivp(rhs, (t0, t1), np.array([1, 0, 0], complex),
                    rtol=rtol, atol=atol)
    return float(np.abs(sol.y[2, -1]) ** 2)


@pytest.mark.parametrize("conv", [PLAIN, TWO_PI])
def test_noninteracting_pair_factorizes(conv):
    atoms = AtomSystem(levels="three", gamma_i_mhz=0, gamma_r_khz=0, v_int_mhz=0)
    pulses = FIG2_PULSES.internal(conv)
    grid = SimGrid(rel_tol=1e-10, abs_tol=1e-12)
    traj = dynamics.schrodinger_propagate("gg", pulses, atoms, grid,
                                          convention=conv, n_samples=11)
    p_rr = float(np.abs(traj.final[traj.basis.rr_index]) ** 2)
    p_single = _single_atom_rydberg_probability(pulses, grid)
    assert p_rr == pytest.approx(p_single ** 2, abs=1e-6)


def test_decay_of_double_intermediate_state():
    # H = 0: rho_ii,ii decays as exp(-2 Gamma_i t)
    atoms = AtomSystem(levels="three", gamma_i_mhz=1.0, gamma_r_khz=0.0, v_int_mhz=0)
    grid = SimGrid(t_start_us=0.0, t_end_us=2.0)
    traj = dynamics.lindblad_propagate("ii", OFF_PULSES, atoms, grid,
                                       convention=PLAIN, n_samples=21)
    expected = np.exp(-2.0 * 1.0 * traj.times)
    assert np.abs(traj.population("ii") - expected).max() < 1e-9


def test_cascade_reaches_ground():
    # r -> i -> g cascade empties into |gg> at long times
    atoms = AtomSystem(levels="three", gamma_i_mhz=2.0, gamma_r_khz=1000.0, v_int_mhz=0)
    grid = SimGrid(t_start_us=0.0, t_end_us=40.0, max_step_us=0.5)
    traj = dynamics.lindblad_propagate("rr", OFF_PULSES, atoms, grid,
                                       convention=PLAIN, n_samples=11)
    assert traj.population("gg")[-1] == pytest.approx(1.0, abs=1e-6)
    assert abs(traj.traces()[-1] - 1.0) < 1e-9


def test_closed_system_matches_schrodinger():
    atoms = AtomSystem(levels="three", gamma_i_mhz=0, gamma_r_khz=0, v_int_mhz=5)
    grid = SimGrid(t_start_us=0.35, t_end_us=0.65)
    rho = dynamics.lindblad_propagate("gg", FIG2_PULSES, atoms, grid,
                                      convention=PLAIN, n_samples=13)
    psi = dynamics.schrodinger_propagate("gg", FIG2_PULSES, atoms, grid,
                                         convention=PLAIN, n_samples=13)
    pops_rho = np.einsum("tii->ti", rho.matrices).real
    pops_psi = np.abs(psi.states) ** 2
    assert np.abs(pops_rho - pops_psi).max() < 1e-6


def test_lindblad_matches_superoperator_exponential():
    """Frozen drive: propagation equals the superoperator matrix exponential.

    The dense superoperator is built here from scratch (kron algebra and
    explicit lowering matrices) and exponentiated with scipy.
    """
    conv = TWO_PI
    pulses = FIG2_PULSES.internal(conv)
    atoms = ATOMS_V5.internal(conv)
    basis = product_basis("three")
    seg = Segment(0.0, 0.1, pulses, freeze_envelopes_at=pulses.t_c)
    rho0 = np.zeros((9, 9), complex)
    rho0[0, 0] = 1.0
    grid = SimGrid(rel_tol=1e-11, abs_tol=1e-13)
    t_eval = np.linspace(0.0, 0.1, 6)
    traj = propagate_segments_lindblad([seg], rho0, basis, atoms, grid, t_eval)

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
    assert np.abs(traj.final - rho_ref).max() < 1e-6
    assert np.abs(traj.traces() - 1.0).max() < 1e-8
    assert traj.min_eigenvalues().min() >= -1e-7


def test_density_invariants_on_chirped_run():
    grid = SimGrid(t_start_us=0.3, t_end_us=0.7)
    traj = dynamics.lindblad_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                       convention=PLAIN, n_samples=41)
    assert np.abs(traj.traces() - 1.0).max() < 1e-8
    assert max(np.abs(m - m.conj().T).max() for m in traj.matrices) < 1e-10
    assert traj.min_eigenvalues().min() >= -1e-7


def test_swap_symmetry_preserved():
    grid = SimGrid(t_start_us=0.35, t_end_us=0.6)
    traj = dynamics.lindblad_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                       convention=PLAIN, n_samples=9)
    S = swap_operator(traj.basis)
    for m in traj.matrices:
        assert np.abs(S @ m @ S - m).max() < 1e-9


def test_rk4_reference_mode_is_fourth_order():
    conv = PLAIN
    pulses = FIG2_PULSES.internal(conv)
    atoms = ATOMS_V5.internal(conv)
    window = dict(t_start_us=pulses.t_c - 0.15, t_end_us=pulses.t_c + 0.15)
    ref = dynamics.lindblad_propagate("gg", pulses, atoms,
                                      SimGrid(rel_tol=1e-12, abs_tol=1e-14, **window),
                                      convention=conv, n_samples=7)
    r_ref = ref.population("rr")[-1]
    errs = []
    for h in (1e-4, 5e-5, 2.5e-5):
        traj = dynamics.lindblad_propagate("gg", pulses, atoms, SimGrid(**window),
                                           convention=conv, n_samples=7,
                                           method="rk4", fixed_step=h, validate=False)
        errs.append(abs(traj.population("rr")[-1] - r_ref))
    assert 10.0 < errs[0] / errs[1] < 22.0
    assert 10.0 < errs[1] / errs[2] < 22.0


def test_backends_agree():
    grid = SimGrid(t_start_us=0.4, t_end_us=0.6, rel_tol=1e-9, abs_tol=1e-11)
    a = dynamics.lindblad_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                    convention=PLAIN, n_samples=5, backend="cython")
    b = dynamics.lindblad_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                    convention=PLAIN, n_samples=5, backend="python")
    assert a.stats["steps"] == b.stats["steps"]
    assert np.abs(a.matrices - b.matrices).max() < 1e-9


def test_step_size_underflow_reports_stiffness():
    grid = SimGrid(t_start_us=0.45, t_end_us=0.55, rel_tol=1e-300, abs_tol=1e-300)
    with pytest.raises(PropagationError, match="stiff"):
        dynamics.schrodinger_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                       convention=PLAIN, n_samples=3)


def test_observables_pure_states():
    basis = product_basis("three")
    vec = np.zeros(9, complex)
    vec[basis.index("gg")] = 1.0
    obs = observables(vec, basis)
    assert obs["rho_gg"] == 1.0
    assert obs["rho_rr"] == obs["rho_ii"] == obs["rho_plus_rg"] == 0.0
    plus = np.zeros(9, complex)
    plus[basis.index("rg")] = plus[basis.index("gr")] = 1 / np.sqrt(2)
    obs = observables(plus, basis)
    assert obs["rho_plus_rg"] == pytest.approx(1.0)
    assert obs["rho_minus_rg"] == pytest.approx(0.0, abs=1e-15)
    # requested coherences come back as complex matrix entries
    mixed = (vec + 1j * plus) / np.sqrt(2)
    obs = observables(mixed, basis, coherences=[("rg", "gg"), ("rr", "gg")])
    assert obs["rho_rg_gg"] == pytest.approx(1j * 0.5 / np.sqrt(2))
    assert obs["rho_rr_gg"] == 0.0


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    path = tmp_path / "rho.bin"
    save_density_checkpoint(path, rho)
    raw = path.read_bytes()
    assert len(raw) == 8 + 16 * 16 * 16
    assert int(np.frombuffer(raw[:8], dtype="<u8")[0]) == 16
    back = load_density_checkpoint(path)
    assert np.abs(back - rho).max() == 0.0


def test_checkpoint_rejects_truncated_file(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(np.array([9], dtype="<u8").tobytes() + b"\x00" * 64)
    with pytest.raises(ValueError):
        load_density_checkpoint(path)


def test_input_validation():
    grid = SimGrid(t_start_us=0.0, t_end_us=1.0)
    with pytest.raises(ConfigError):
        dynamics.schrodinger_propagate(np.zeros(5, complex), FIG2_PULSES, ATOMS_V5,
                                       grid, convention=PLAIN)
    with pytest.raises(ConfigError):
        dynamics.lindblad_propagate("gg", FIG2_PULSES, ATOMS_V5, grid,
                                    convention=PLAIN, t_eval=[0.5, 0.4])


def test_collapse_channels_structure():
    basis3 = product_basis("three")
    chans = collapse_channels(basis3, ATOMS_V5.internal(PLAIN))
    assert len(chans) == 4  # two per atom
    basis4 = product_basis("four")
    atoms4 = AtomSystem(levels="four", gamma_i_mhz=6, gamma_r_khz=0.485,
                        v_int_mhz=5).internal(PLAIN)
    for ch in collapse_channels(basis4, atoms4):
        # decay never feeds |g'>
        for d in ch.dst:
            assert "g'" not in basis4.labels[d] or \
                basis4.pairs[d][0] == "g'" or basis4.pairs[d][1] == "g'"
        # the decaying atom never lands in g'
        for s, d in zip(ch.src, ch.dst):
            src_pair, dst_pair = basis4.pairs[s], basis4.pairs[d]
            changed = [k for k in range(2) if src_pair[k] != dst_pair[k]]
            assert len(changed) == 1 and dst_pair[changed[0]] in ("g", "i")