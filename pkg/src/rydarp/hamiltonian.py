"""Two-atom product-basis Hamiltonian and the molecular (+/-) basis transform.

Product basis ordering (atom1 letter first, atom2 second):

    three-level: gg gi ig ii gr rg ir ri rr                (indices 0..8)
    four-level:  the nine states above, then the |0>=|g'> block
                 g'g' g'g gg' g'i ig' g'r rg'              (indices 9..15)

Keeping the three-level states in the same leading positions makes the
four-level matrix reduce to the three-level one entry-for-entry when the
|g'> rows and columns are deleted.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .params import AtomRates, DrivePulses, Levels

_SQ2 = np.sqrt(2.0)

_THREE_PAIRS = (
    ("g", "g"), ("g", "i"), ("i", "g"), ("i", "i"),
    ("g", "r"), ("r", "g"), ("i", "r"), ("r", "i"), ("r", "r"),
)
_FOUR_EXTRA = (
    ("g'", "g'"), ("g'", "g"), ("g", "g'"),
    ("g'", "i"), ("i", "g'"), ("g'", "r"), ("r", "g'"),
)

#: Molecular-basis ordering; |+/-,xy> = (|xy> +/- |yx>)/sqrt(2).
MOLECULAR_LABELS = ("gg", "+ig", "-ig", "ii", "+rg", "-rg", "+ri", "-ri", "rr")


@dataclass(frozen=True)
class ProductBasis:
    """Ordered two-atom product basis with precomputed structure arrays."""

    levels: str
    pairs: tuple
    labels: tuple
    n_i: np.ndarray        # number of atoms in |i> per state
    n_r: np.ndarray        # number of atoms in |r> per state
    rr_index: int
    bonds_p: np.ndarray    # (n,2) int32 index pairs coupled by the pump
    bonds_s: np.ndarray    # (n,2) int32 index pairs coupled by the Stokes field
    swap_perm: np.ndarray  # index permutation implementing atom exchange

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown state label {label!r}") from None

    def qubit_index(self, qubits: str) -> int:
        """Index of a computational state '00','01','10','11' (|1>=|g>, |0>=|g'>)."""
        lv = {"0": "g'", "1": "g"}
        a, b = qubits
        return self.pairs.index((lv[a], lv[b]))


def _bonds(pairs, lo: str, hi: str) -> np.ndarray:
    found = set()
    plist = list(pairs)
    for k, (a, b) in enumerate(plist):
        if a == lo and (hi, b) in plist:
            found.add(tuple(sorted((k, plist.index((hi, b))))))
        if b == lo and (a, hi) in plist:
            found.add(tuple(sorted((k, plist.index((a, hi))))))
    return np.array(sorted(found), dtype=np.int32).reshape(-1, 2)


@lru_cache(maxsize=None)
def product_basis(levels: str = Levels.THREE) -> ProductBasis:
    if levels == Levels.THREE:
        pairs = _THREE_PAIRS
    elif levels == Levels.FOUR:
        pairs = _THREE_PAIRS + _FOUR_EXTRA
    else:
        raise ConfigError(f"unknown level scheme {levels!r}")
    labels = tuple(a + b for a, b in pairs)
    n_i = np.array([(a == "i") + (b == "i") for a, b in pairs], dtype=float)
    n_r = np.array([(a == "r") + (b == "r") for a, b in pairs], dtype=float)
    swap = np.array([pairs.index((b, a)) for a, b in pairs], dtype=np.int64)
    return ProductBasis(
        levels=levels,
        pairs=pairs,
        labels=labels,
        n_i=n_i,
        n_r=n_r,
        rr_index=pairs.index(("r", "r")),
        bonds_p=_bonds(pairs, "g", "i"),
        bonds_s=_bonds(pairs, "i", "r"),
        swap_perm=swap,
    )


def build_product_hamiltonian(pulses: DrivePulses, atoms: AtomRates, t: float) -> np.ndarray:
    """H(t)/hbar in the product basis, rad/us.

    Diagonal: Delta_p(t) per atom in |i>, delta(t) per atom in |r>, plus V_int
    on |rr>.  Off-diagonal: -Omega_p(t) on every g<->i bond and -Omega_s(t) on
    every i<->r bond.  The |g'> level itself is dark: no matrix element moves
    an atom into or out of |g'> and it carries zero rotating-frame energy, so
    the g'g' row and column vanish identically while states like g'g still
    evolve through the driven partner atom.
    """
    basis = product_basis(atoms.levels)
    om_p = pulses.omega_p(t)
    om_s = pulses.omega_s(t)
    dp = pulses.delta_p(t)
    de = pulses.delta(t)
    H = np.zeros((basis.dim, basis.dim), dtype=complex)
    idx = np.arange(basis.dim)
    H[idx, idx] = dp * basis.n_i + de * basis.n_r
    H[basis.rr_index, basis.rr_index] += atoms.v_int
    for a, b in basis.bonds_p:
        H[a, b] -= om_p
        H[b, a] -= om_p
    for a, b in basis.bonds_s:
        H[a, b] -= om_s
        H[b, a] -= om_s
    return H


@lru_cache(maxsize=1)
def _molecular_rows() -> tuple:
    """Each molecular state as [(product index, coefficient), ...]."""
    basis = product_basis(Levels.THREE)
    rows = []
    for lab in MOLECULAR_LABELS:
        if lab in ("gg", "ii", "rr"):
            rows.append(((basis.index(lab), 1.0),))
        else:
            sign = 1.0 if lab[0] == "+" else -1.0
            x, y = lab[1], lab[2]
            rows.append(((basis.index(x + y), 1.0 / _SQ2),
                         (basis.index(y + x), sign / _SQ2)))
    return tuple(rows)


@lru_cache(maxsize=1)
def molecular_transform() -> np.ndarray:
    """Orthogonal map U from the 9-state product basis to MOLECULAR_LABELS rows."""
    U = np.zeros((9, 9))
    for row, terms in enumerate(_molecular_rows()):
        for k, a in terms:
            U[row, k] = a
    return U


def product_to_molecular(H: np.ndarray) -> np.ndarray:
    """Rotate a 9x9 three-level product Hamiltonian into the molecular basis.

    Accumulated term by term rather than through matrix products so the
    symmetric cancellations between the + and - blocks are exact: every
    cross-block element of the result is a bitwise zero.
    """
    H = np.asarray(H)
    if H.shape != (9, 9):
        raise ValueError(f"expected a 9x9 three-level Hamiltonian, got shape {H.shape}")
    rows = _molecular_rows()
    out = np.zeros((9, 9), dtype=complex)
    for r, row_terms in enumerate(rows):
        for c, col_terms in enumerate(rows):
            acc = 0.0 + 0.0j
            for k, a in row_terms:
                for l, b in col_terms:
                    acc += (a * b) * H[k, l]
            out[r, c] = acc
    return out


def swap_operator(basis: ProductBasis) -> np.ndarray:
    """Permutation matrix exchanging the two atoms."""
    S = np.zeros((basis.dim, basis.dim))
    S[np.arange(basis.dim), basis.swap_perm] = 1.0
    return S


def pair_superposition(basis: ProductBasis, x: str, y: str, sign: int = +1) -> np.ndarray:
    """State vector (|xy> + sign*|yx>)/sqrt(2) in the product basis."""
    v = np.zeros(basis.dim, dtype=complex)
    v[basis.index(x + y)] = 1.0 / _SQ2
    v[basis.index(y + x)] += sign / _SQ2
    return v


def dump_hamiltonian_rows(H: np.ndarray):
    """Yield (row, col, re, im) tuples for CSV dumps of H(t)."""
    n = H.shape[0]
    for i in range(n):
        for j in range(n):
            yield i, j, H[i, j].real, H[i, j].imag
