"""Dressed states of the driven pair after eliminating the intermediate state.

For a large one-photon detuning the fast amplitudes follow the slow ones, and
the symmetric subspace reduces to three levels {|gg>, |+,rg>, |rr>} with the
real symmetric Hamiltonian (rad/us)

    [ -2 Wp^2/Dp                 -sqrt(2) W      -2 W^2/Dp                  ]
    [ -sqrt(2) W       d - (Wp^2+Ws^2)/Dp        -sqrt(2) W                 ]
    [ -2 W^2/Dp                  -sqrt(2) W      2 d + V - 2 Ws^2/Dp        ]

where W = Wp*Ws/Dp is the two-photon Rabi frequency and d the two-photon
detuning.  Note the |rr> entry carries 2d: both atoms contribute their
two-photon detuning (the bare limit has levels {0, d, 2d+V}).

The characteristic cubic of this matrix is kept as an independent cross-check
of the eigensolver; its expansion includes the (2W^2/Dp)^2 completion term of
the determinant, which is of the same order as terms already dropped by the
adiabatic elimination but is required for the roots to coincide with the 3x3
eigenvalues to full precision.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError
from .params import AtomRates, AtomSystem, DrivePulses, PulseSet, DEFAULT_CONVENTION

_SQ2 = np.sqrt(2.0)

#: Ordering of the reduced basis.
REDUCED_LABELS = ("gg", "+rg", "rr")


def reduced_matrix(omega_p, omega_s, delta_p, delta, v_int,
                   include_cross: bool = True) -> np.ndarray:
    """Reduced 3x3 Hamiltonian over (|gg>, |+,rg>, |rr>) from internal values.

    ``include_cross=False`` zeroes the -2 W^2/Dp direct gg<->rr coupling, the
    idealization behind the closed-form spectrum of :func:`eq5_energies`.
    """
    if delta_p == 0:
        raise DomainError("adiabatic elimination requires a nonzero one-photon detuning")
    om = omega_p * omega_s / delta_p
    cross = -2.0 * om * om / delta_p if include_cross else 0.0
    return np.array([
        [-2.0 * omega_p ** 2 / delta_p, -_SQ2 * om, cross],
        [-_SQ2 * om, delta - (omega_p ** 2 + omega_s ** 2) / delta_p, -_SQ2 * om],
        [cross, -_SQ2 * om, 2.0 * delta + v_int - 2.0 * omega_s ** 2 / delta_p],
    ])


def adiabatic_eliminate(pulses: DrivePulses, atoms: AtomRates, t: float,
                        include_cross: bool = True) -> np.ndarray:
    """Reduced Hamiltonian at time t for the given drive and interaction."""
    return reduced_matrix(pulses.omega_p(t), pulses.omega_s(t), pulses.delta_p(t),
                          pulses.delta(t), atoms.v_int, include_cross)


def cubic_coefficients(omega_p, omega_s, delta_p, delta, v_int) -> np.ndarray:
    """Coefficients (c3, c2, c1, c0) of det(H_red - eps*I) in eps."""
    if delta_p == 0:
        raise DomainError("cubic undefined at zero one-photon detuning")
    om = omega_p * omega_s / delta_p
    a = -2.0 * omega_p ** 2 / delta_p
    d = delta - (omega_p ** 2 + omega_s ** 2) / delta_p
    e = 2.0 * delta + v_int - 2.0 * omega_s ** 2 / delta_p
    b2 = 2.0 * om * om
    c = -2.0 * om * om / delta_p
    return np.array([
        -1.0,
        a + d + e,
        -(a * d + a * e + d * e) + 2.0 * b2 + c * c,
        a * d * e - b2 * (a + e - 2.0 * c) - c * c * d,
    ])


def characteristic_cubic(eps, omega_p, omega_s, delta_p, delta, v_int) -> float:
    """Residual of the energy cubic at eps; zero exactly at the dressed energies."""
    return float(np.polyval(cubic_coefficients(omega_p, omega_s, delta_p, delta, v_int), eps))


def cubic_roots(omega_p, omega_s, delta_p, delta, v_int) -> np.ndarray:
    """Sorted real roots of the energy cubic (companion-matrix path)."""
    roots = np.roots(cubic_coefficients(omega_p, omega_s, delta_p, delta, v_int))
    return np.sort(roots.real)


@dataclass(frozen=True)
class DressedSpectrum:
    """Eigenvalues and eigenvector columns of the reduced Hamiltonian.

    In "sorted" mode the energies ascend; in "adiabatic" mode positions follow
    the branches of the previous spectrum by maximal eigenvector overlap, with
    signs fixed to keep overlaps positive.
    """

    energies: np.ndarray   # (3,)
    vectors: np.ndarray    # (3,3), columns aligned with energies
    mode: str

    def residuals(self, h_red: np.ndarray) -> np.ndarray:
        return np.array([
            np.linalg.norm(h_red @ self.vectors[:, k] - self.energies[k] * self.vectors[:, k])
            for k in range(3)])


def solve_spectrum(h_red: np.ndarray, prev: DressedSpectrum | None = None,
                   degeneracy_tol: float = 1e-12) -> DressedSpectrum:
    """Diagonalize the reduced Hamiltonian with optional adiabatic continuation."""
    h_red = np.asarray(h_red, dtype=float)
    if h_red.shape != (3, 3):
        raise ValueError(f"expected a 3x3 reduced Hamiltonian, got {h_red.shape}")
    w, v = np.linalg.eigh(h_red)
    if prev is None:
        return DressedSpectrum(energies=w, vectors=v, mode="sorted")
    overlap = prev.vectors.T @ v
    gaps = np.diff(w)
    if np.any(np.abs(gaps) < degeneracy_tol * max(1.0, np.abs(w).max())):
        warnings.warn("degenerate dressed energies; falling back to sorted labels",
                      RuntimeWarning, stacklevel=2)
        return DressedSpectrum(energies=w, vectors=v, mode="sorted-degenerate")
    row, col = linear_sum_assignment(-np.abs(overlap))
    order = np.empty(3, dtype=int)
    order[row] = col
    w = w[order]
    v = v[:, order]
    signs = np.sign(np.sum(prev.vectors * v, axis=0))
    signs[signs == 0] = 1.0
    v = v * signs
    return DressedSpectrum(energies=w, vectors=v, mode="adiabatic")


def single_atom_eps(delta, omega_p, omega_s, delta_p):
    """Dressed energies (eps_plus, eps_minus) of one atom under the two-photon drive.

    Accepts scalars or aligned arrays.
    """
    if np.any(np.asarray(delta_p) == 0):
        raise DomainError("single-atom dressed energies undefined at zero one-photon detuning")
    om = omega_p * omega_s / delta_p
    mid = delta / 2.0 - (omega_p ** 2 + omega_s ** 2) / (2.0 * delta_p)
    root = np.sqrt((delta / 2.0) ** 2 + om * om)
    return mid + root, mid - root


def eq5_energies(delta, omega_p, omega_s, delta_p):
    """Closed-form dressed energies (e1, e2, e3) for V=0 with the cross term dropped.

    e1 is the middle branch; e2/e3 = e1 +/- sqrt(...) are the top/bottom ones.
    """
    if delta_p == 0:
        raise DomainError("closed-form energies undefined at zero one-photon detuning")
    ls = (omega_p ** 2 + omega_s ** 2) / delta_p
    e1 = delta - ls
    root = np.sqrt(delta ** 2 + 2.0 * delta * (omega_p ** 2 - omega_s ** 2) / delta_p
                   + ls ** 2)
    return e1, e1 + root, e1 - root


def perturbative_eigs(delta, omega, omega_p, delta_p, v_int):
    """Small-interaction two-atom energies (eps2, eps3) = 2*eps_pm +/- correction.

    Assumes equal pump and Stokes Rabi frequencies; the correction is the part
    of the first-order |rr> shift that is odd in the two-photon detuning.
    """
    ep, em = single_atom_eps(delta, omega_p, omega_p, delta_p)
    corr = delta * v_int / (2.0 * np.sqrt(delta ** 2 + 4.0 * omega ** 2))
    return 2.0 * ep + corr, 2.0 * em - corr


@dataclass
class DressedTrace:
    """Dressed spectrum tracked along a chirp sweep, in branch-label order.

    eps1 is the branch that starts in the middle of the spectrum, eps2 the one
    that starts on top, eps3 the one that starts at the bottom; for a sweep
    entering with large positive two-photon detuning eps3 is the gg-dominated
    branch that carries the population transfer.
    """

    times: np.ndarray
    delta: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    eps3: np.ndarray
    comps2: np.ndarray  # (nt, 3) components (c_gg, c_+rg, c_rr) of branch 2
    comps3: np.ndarray  # (nt, 3) same for branch 3


def recommended_samples(pulses: DrivePulses, atoms: AtomRates, window,
                        min_per_gap: int = 20, coarse: int = 512,
                        cap: int = 200_001) -> int:
    """Sample count resolving the minimum avoided-crossing gap by >= min_per_gap points.

    The crossing is traversed in a time of order gap / |d(delta)/dt|; the
    returned count puts at least ``min_per_gap`` samples inside that window.
    """
    t0, t1 = window
    ts = np.linspace(t0, t1, coarse)
    min_gap = np.inf
    for t in ts:
        w = np.linalg.eigvalsh(adiabatic_eliminate(pulses, atoms, t))
        min_gap = min(min_gap, float(np.diff(w).min()))
    slope = max(abs(2.0 * pulses.alpha), 1e-12)
    dt_cross = max(min_gap, 1e-12) / slope
    n = int(np.ceil((t1 - t0) / dt_cross * min_per_gap)) + 1
    return int(min(max(n, 801), cap))


def trace_spectrum(pulses, atoms, *, convention=DEFAULT_CONVENTION,
                   t_grid=None, n_samples: int | None = None,
                   window=None, include_cross: bool = True) -> DressedTrace:
    """Track the three dressed branches continuously across the chirp sweep."""
    if isinstance(pulses, PulseSet):
        pulses = pulses.internal(convention)
    if isinstance(atoms, AtomSystem):
        atoms = atoms.internal(convention)
    if t_grid is None:
        if window is None:
            window = pulses.window()
        if n_samples is None:
            n_samples = recommended_samples(pulses, atoms, window)
        t_grid = np.linspace(window[0], window[1], n_samples)
    t_grid = np.asarray(t_grid, dtype=float)
    nt = len(t_grid)
    energies = np.empty((nt, 3))
    vectors = np.empty((nt, 3, 3))
    spec = None
    for k, t in enumerate(t_grid):
        spec = solve_spectrum(adiabatic_eliminate(pulses, atoms, t, include_cross), spec)
        energies[k] = spec.energies
        vectors[k] = spec.vectors
    # branch labels fixed by the ordering at the first sample:
    # positions there are ascending, so (bottom, middle, top) = (eps3, eps1, eps2)
    i3, i1, i2 = 0, 1, 2
    return DressedTrace(
        times=t_grid,
        delta=np.array([pulses.delta(t) for t in t_grid]),
        eps1=energies[:, i1], eps2=energies[:, i2], eps3=energies[:, i3],
        comps2=vectors[:, :, i2], comps3=vectors[:, :, i3],
    )
