import numpy as np
import pytest

from rydarp.hamiltonian import (MOLECULAR_LABELS, build_product_hamiltonian,
                                molecular_transform, pair_superposition,
                                product_basis, product_to_molecular, swap_operator)
from rydarp.params import AtomSystem, PulseSet, UnitConvention

SQ2 = np.sqrt(2.0)
PLAIN = UnitConvention.plain()


def _fig2(plain=True):
    conv = PLAIN if plain else UnitConvention.two_pi()
    pulses = PulseSet(120, 120, 75, 75, 0.5, 190, 1500, -1500).internal(conv)
    atoms = AtomSystem(levels="three", gamma_i_mhz=6, gamma_r_khz=0.485,
                       v_int_mhz=5).internal(conv)
    return pulses, atoms


def test_basis_orderings():
    b3 = product_basis("three")
    assert b3.labels == ("gg", "gi", "ig", "ii", "gr", "rg", "ir", "ri", "rr")
    b4 = product_basis("four")
    assert b4.labels[:9] == b3.labels
    assert b4.dim == 16
    # bijective index map
    assert sorted(set(b4.labels)) == sorted(b4.labels)
    for k, lab in enumerate(b4.labels):
        assert b4.index(lab) == k
    # qubit encoding: |1> = g, |0> = g'
    assert b4.labels[b4.qubit_index("11")] == "gg"
    assert b4.labels[b4.qubit_index("00")] == "g'g'"
    assert b4.labels[b4.qubit_index("01")] == "g'g"
    assert b4.labels[b4.qubit_index("10")] == "gg'"


def test_bare_interaction_only():
    conv = PLAIN
    pulses = PulseSet(0, 0, 75, 75, 0.5, 0, 0, 0).internal(conv)
    atoms = AtomSystem(levels="three", gamma_i_mhz=0, gamma_r_khz=0,
                       v_int_mhz=50).internal(conv)
    H = build_product_hamiltonian(pulses, atoms, 0.5)
    expected = np.zeros((9, 9))
    expected[8, 8] = 50.0
    assert np.abs(H - expected).max() == 0.0


def test_fig2_entries_at_center():
    pulses, atoms = _fig2()
    basis = product_basis("three")
    H = build_product_hamiltonian(pulses, atoms, pulses.t_c)
    assert H[basis.index("gg"), basis.index("ig")].real == pytest.approx(-120.0)
    # delta(t_c) = 0 for the symmetric static detunings, so H[rr,rr] = 2*0 + V
    assert H[basis.rr_index, basis.rr_index].real == pytest.approx(5.0)
    assert H[basis.index("ii"), basis.index("ii")].real == pytest.approx(2 * 1500.0)


def test_hermitian_at_random_times():
    pulses, atoms = _fig2()
    rng = np.random.default_rng(0)
    for t in rng.uniform(0.0, 1.0, 10):
        H = build_product_hamiltonian(pulses, atoms, t)
        assert np.abs(H - H.conj().T).max() < 1e-12 * max(1.0, np.abs(H).max())


def test_transform_is_orthogonal():
    U = molecular_transform()
    assert np.abs(U @ U.T - np.eye(9)).max() < 1e-15


def test_molecular_matrix_matches_equations_of_motion():
    """The rotated Hamiltonian must reproduce the molecular-amplitude equations
    coefficient for coefficient."""
    pulses, atoms = _fig2()
    t = 0.47
    om_p, om_s = pulses.omega_p(t), pulses.omega_s(t)
    dp, de = pulses.delta_p(t), pulses.delta(t)
    v = atoms.v_int
    Hm = product_to_molecular(build_product_hamiltonian(pulses, atoms, t))
    lab = {l: k for k, l in enumerate(MOLECULAR_LABELS)}
    expected = np.zeros((9, 9))
    expected[lab["+ig"], lab["+ig"]] = dp
    expected[lab["-ig"], lab["-ig"]] = dp
    expected[lab["ii"], lab["ii"]] = 2 * dp
    expected[lab["+rg"], lab["+rg"]] = de
    expected[lab["-rg"], lab["-rg"]] = de
    expected[lab["+ri"], lab["+ri"]] = de + dp
    expected[lab["-ri"], lab["-ri"]] = de + dp
    expected[lab["rr"], lab["rr"]] = 2 * de + v

    def couple(a, b, val):
        expected[lab[a], lab[b]] = expected[lab[b], lab[a]] = val

    couple("gg", "+ig", -SQ2 * om_p)
    couple("+ig", "ii", -SQ2 * om_p)
    couple("+ig", "+rg", -om_s)
    couple("-ig", "-rg", -om_s)
    couple("ii", "+ri", -SQ2 * om_s)
    couple("+rg", "+ri", -om_p)
    couple("-rg", "-ri", -om_p)
    couple("+ri", "rr", -SQ2 * om_s)
    assert np.abs(Hm.real - expected).max() < 1e-12 * np.abs(expected).max()
    assert np.abs(Hm.imag).max() == 0.0


def test_plus_minus_blocks_decouple():
    pulses, atoms = _fig2()
    Hm = product_to_molecular(build_product_hamiltonian(pulses, atoms, 0.51))
    plus = [MOLECULAR_LABELS.index(l) for l in ("gg", "+ig", "ii", "+rg", "+ri", "rr")]
    minus = [MOLECULAR_LABELS.index(l) for l in ("-ig", "-rg", "-ri")]
    assert np.abs(Hm[np.ix_(plus, minus)]).max() == 0.0


def test_molecular_transform_rejects_wrong_shape():
    with pytest.raises(ValueError):
        product_to_molecular(np.zeros((16, 16)))


def test_swap_commutes():
    pulses, atoms = _fig2()
    for levels in ("three", "four"):
        atoms_l = AtomSystem(levels=levels, gamma_i_mhz=6, gamma_r_khz=0.485,
                             v_int_mhz=5).internal(PLAIN)
        basis = product_basis(levels)
        H = build_product_hamiltonian(pulses, atoms_l, 0.43)
        S = swap_operator(basis)
        assert np.abs(H @ S - S @ H).max() < 1e-12 * np.abs(H).max()
        assert np.abs(S @ S - np.eye(basis.dim)).max() == 0.0


def test_four_level_reduction_entry_for_entry():
    pulses, _ = _fig2()
    atoms3 = AtomSystem(levels="three", v_int_mhz=5).internal(PLAIN)
    atoms4 = AtomSystem(levels="four", v_int_mhz=5).internal(PLAIN)
    H3 = build_product_hamiltonian(pulses, atoms3, 0.5)
    H4 = build_product_hamiltonian(pulses, atoms4, 0.5)
    assert np.abs(H4[:9, :9] - H3).max() == 0.0


def test_gprime_level_is_dark():
    """No matrix element moves an atom into or out of |g'>; the doubly dark
    g'g' state has a fully vanishing row and column, while the partner atom of
    a g' state is still driven."""
    pulses, _ = _fig2()
    atoms4 = AtomSystem(levels="four", v_int_mhz=5).internal(PLAIN)
    basis = product_basis("four")
    H = build_product_hamiltonian(pulses, atoms4, 0.5)
    i00 = basis.index("g'g'")
    assert np.abs(H[i00, :]).max() == 0.0
    assert np.abs(H[:, i00]).max() == 0.0
    for a, (x, y) in enumerate(basis.pairs):
        for b, (u, v) in enumerate(basis.pairs):
            if a != b and ((x == "g'") != (u == "g'") or (y == "g'") != (v == "g'")):
                assert H[a, b] == 0.0, (basis.labels[a], basis.labels[b])
    # single-qubit subspace evolves through the driven partner
    assert H[basis.index("g'g"), basis.index("g'i")].real == pytest.approx(
        -pulses.omega_p(0.5))


def test_pair_superposition_vectors():
    basis = product_basis("three")
    plus = pair_superposition(basis, "r", "g", +1)
    assert plus[basis.index("rg")] == pytest.approx(1 / SQ2)
    assert plus[basis.index("gr")] == pytest.approx(1 / SQ2)
    assert np.linalg.norm(plus) == pytest.approx(1.0)
