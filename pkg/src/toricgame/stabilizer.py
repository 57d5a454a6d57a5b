"""Stabilizer tableau backend for qubits (M = 2).

A Pauli operator is stored as ``i**phase * prod_b X_b^x_b Z_b^z_b`` with the
X and Z masks bit-packed.  In this convention a product only needs one
popcount: ``P1 P2 = i**(p1 + p2 + 2 |z1 & x2|) X^(x1^x2) Z^(z1^z2)``, and
``Y = i X Z``.

The tableau keeps destabilizers in rows ``0..n-1`` and stabilizers in rows
``n..2n-1``, each row packed into 64-bit words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import (
    DIRECT,
    Loop,
    TorusLattice,
    plaquette_bonds,
    row_dual_loop,
    row_wilson_loop,
    star_bonds,
)
from .statevector import ClockShiftString, DenseState, WrongKindError

MAX_DENSE_QUBITS = 20

_COEFF_LABELS = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LABEL_COEFFS = {"": 0, "+": 0, "+i": 1, "i": 1, "-": 2, "-i": 3}


@dataclass(frozen=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 4)
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("Pauli masks exceed the qubit count")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse labels such as ``"+XIZY"`` or ``"-iZZ"``; qubit 0 is the first letter."""
        body = label.lstrip("+-i")
        prefix = label[: len(label) - len(body)]
        if prefix not in _LABEL_COEFFS:
            raise ValueError(f"bad Pauli coefficient {prefix!r}")
        x = z = 0
        n_y = 0
        for q, ch in enumerate(body):
            if ch == "X":
                x |= 1 << q
            elif ch == "Z":
                z |= 1 << q
            elif ch == "Y":
                x |= 1 << q
                z |= 1 << q
                n_y += 1
            elif ch not in "I_":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(len(body), x, z, _LABEL_COEFFS[prefix] + n_y)

    @classmethod
    def z_string(cls, n: int, qubits: Sequence[int], phase: int = 0) -> PauliString:
        return cls(n, 0, _mask(qubits), phase)

    @classmethod
    def x_string(cls, n: int, qubits: Sequence[int], phase: int = 0) -> PauliString:
        return cls(n, _mask(qubits), 0, phase)

    @property
    def label(self) -> str:
        n_y = (self.x & self.z).bit_count()
        letters = []
        for q in range(self.n):
            xb, zb = (self.x >> q) & 1, (self.z >> q) & 1
            letters.append("IXZY"[xb + 2 * zb])
        return _COEFF_LABELS[(self.phase - n_y) % 4] + "".join(letters)

    def __str__(self):
        return self.label

    def __mul__(self, other: PauliString) -> PauliString:
        if self.n != other.n:
            raise ValueError("Pauli strings act on different qubit counts")
        phase = self.phase + other.phase + 2 * (self.z & other.x).bit_count()
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z, phase)

    def commutes(self, other: PauliString) -> bool:
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def is_hermitian(self) -> bool:
        return (self.phase - (self.x & self.z).bit_count()) % 2 == 0


def _mask(qubits: Sequence[int]) -> int:
    m = 0
    for q in qubits:
        m |= 1 << q
    return m


def _pack(mask: int, words: int) -> np.ndarray:
    return np.array([(mask >> (64 * w)) & 0xFFFFFFFFFFFFFFFF for w in range(words)], dtype=np.uint64)


def _unpack(row: np.ndarray) -> int:
    return sum(int(v) << (64 * w) for w, v in enumerate(row))


def _popcount_rows(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).sum(axis=-1, dtype=np.int64)


class Tableau:
    """Stabilizer state on ``n`` qubits with a full destabilizer basis.

    Operations mutate the tableau in place.  The global phase of the state is
    not tracked.  With ``debug=True`` every operation re-checks the
    commutation invariants.
    """

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, phase: np.ndarray, debug: bool = False):
        self.n = n
        self.words = x.shape[1]
        self.x = x
        self.z = z
        self.phase = phase
        self.debug = debug
        if debug:
            self.check_invariants()

    @classmethod
    def from_stabilizers(cls, generators: Sequence[PauliString], debug: bool = False) -> Tableau:
        """Tableau stabilized by ``generators``; destabilizers come from symplectic Gram-Schmidt."""
        generators = list(generators)
        n = len(generators)
        if n == 0 or any(g.n != n for g in generators):
            raise ValueError("need exactly n generators on n qubits")
        for i, g in enumerate(generators):
            if not g.is_hermitian():
                raise ValueError(f"generator {i} ({g}) is not Hermitian")
            for h in generators[:i]:
                if not g.commutes(h):
                    raise ValueError(f"generators {g} and {h} anticommute")
        destabs = _destabilizers(generators)
        words = max(1, (n + 63) // 64)
        rows = destabs + generators
        x = np.stack([_pack(r.x, words) for r in rows])
        z = np.stack([_pack(r.z, words) for r in rows])
        phase = np.array([r.phase for r in rows], dtype=np.int64)
        return cls(n, x, z, phase, debug)

    def copy(self) -> Tableau:
        return Tableau(self.n, self.x.copy(), self.z.copy(), self.phase.copy(), self.debug)

    def row(self, i: int) -> PauliString:
        return PauliString(self.n, _unpack(self.x[i]), _unpack(self.z[i]), int(self.phase[i]))

    def stabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n, 2 * self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    def dump(self) -> str:
        lines = [f"D{i}: {self.row(i)}" for i in range(self.n)]
        lines += [f"S{i}: {self.row(self.n + i)}" for i in range(self.n)]
        return "\n".join(lines)

    def symplectic_matrix(self) -> np.ndarray:
        """Pairwise anticommutation bits between all 2n rows."""
        xz = _popcount_rows(self.x[:, None, :] & self.z[None, :, :])
        zx = _popcount_rows(self.z[:, None, :] & self.x[None, :, :])
        return (xz + zx) % 2

    def check_invariants(self) -> None:
        n = self.n
        omega = self.symplectic_matrix()
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expected[np.arange(n), n + np.arange(n)] = 1
        expected[n + np.arange(n), np.arange(n)] = 1
        if not np.array_equal(omega, expected):
            raise AssertionError("tableau rows violate the symplectic pairing")
        n_y = _popcount_rows(self.x[n:] & self.z[n:])
        if np.any((self.phase[n:] - n_y) % 2):
            raise AssertionError("a stabilizer row is not Hermitian")

    def _rowmul(self, targets: np.ndarray, source: int) -> None:
        """``row_t <- row_t * row_source`` for every target row."""
        if targets.size == 0:
            return
        extra = 2 * _popcount_rows(self.z[targets] & self.x[source])
        self.phase[targets] = (self.phase[targets] + self.phase[source] + extra) % 4
        self.x[targets] ^= self.x[source]
        self.z[targets] ^= self.z[source]

    def _product_phase(self, rows: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
        """Phase and masks of ``row_0 * row_1 * ...`` in the given order."""
        xs, zs = self.x[rows], self.z[rows]
        if rows.size == 0:
            zero = np.zeros(self.words, dtype=np.uint64)
            return 0, zero, zero
        z_before = np.bitwise_xor.accumulate(zs, axis=0)
        z_before = np.vstack([np.zeros((1, self.words), dtype=np.uint64), z_before[:-1]])
        phase = int(self.phase[rows].sum()) + 2 * int(_popcount_rows(z_before & xs).sum())
        return phase % 4, np.bitwise_xor.reduce(xs, axis=0), z_before[-1] ^ zs[-1]


def _destabilizers(generators: list[PauliString]) -> list[PauliString]:
    n = len(generators)
    # row j solves <d, s_j> = delta_ij; d packed as x | z << n
    rows = [(g.z | (g.x << n), 1 << j) for j, g in enumerate(generators)]
    pivots = []
    r = 0
    for col in range(2 * n):
        k = next((k for k in range(r, n) if (rows[k][0] >> col) & 1), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        pv, pe = rows[r]
        for i in range(n):
            if i != r and (rows[i][0] >> col) & 1:
                rows[i] = (rows[i][0] ^ pv, rows[i][1] ^ pe)
        pivots.append(col)
        r += 1
        if r == n:
            break
    if r < n:
        raise ValueError("stabilizer generators are not independent")

    full = (1 << n) - 1
    destabs: list[PauliString] = []
    for i in range(n):
        d = 0
        for k, (_, e) in enumerate(rows):
            if (e >> i) & 1:
                d |= 1 << pivots[k]
        cand = PauliString(n, d & full, d >> n)
        for j, prev in enumerate(destabs):
            if not cand.commutes(prev):
                cand = cand * generators[j]
        n_y = (cand.x & cand.z).bit_count()
        destabs.append(PauliString(n, cand.x, cand.z, n_y))
    return destabs


def prepare_cat_tableau(lattice: TorusLattice, w_x_sign: int = 1, debug: bool = False) -> Tableau:
    """Tableau of ``(|00> + |01>)/sqrt 2`` (``w_x_sign=+1``) or ``(|10> + |11>)/sqrt 2`` (``-1``).

    Generators: every plaquette and star but the last of each, ``+-W_x`` and ``+V_x``.
    """
    if w_x_sign not in (1, -1):
        raise ValueError("w_x_sign must be +1 or -1")
    n = lattice.n_bonds
    gens = []
    cells = [(x, y) for y in range(lattice.ly) for x in range(lattice.lx)][:-1]
    gens += [PauliString.z_string(n, plaquette_bonds(lattice, x, y)) for x, y in cells]
    gens += [PauliString.x_string(n, star_bonds(lattice, x, y)) for x, y in cells]
    gens.append(PauliString.z_string(n, row_wilson_loop(lattice, 0).bonds, 0 if w_x_sign == 1 else 2))
    gens.append(PauliString.x_string(n, row_dual_loop(lattice, 0).bonds))
    return Tableau.from_stabilizers(gens, debug)


def apply_half_wilson(tableau: Tableau, team_loop: Loop, a: int) -> Tableau:
    """Conjugate by ``W^(a/2)`` for ``W = prod Z`` on the loop.

    Rows anticommuting with ``W`` become ``i * row * W``; the rest are unchanged.
    """
    if team_loop.kind != DIRECT:
        raise WrongKindError("half Wilson loops act on direct loops only")
    if a not in (0, 1):
        raise ValueError(f"a must be 0 or 1, got {a}")
    if a == 0:
        return tableau
    w = _pack(_mask(team_loop.bonds), tableau.words)
    anti = _popcount_rows(tableau.x & w) % 2 == 1
    tableau.phase[anti] = (tableau.phase[anti] + 1) % 4
    tableau.z[anti] ^= w
    if tableau.debug:
        tableau.check_invariants()
    return tableau


def measure_x(tableau: Tableau, bond: int, rng: np.random.Generator) -> int:
    """Measure ``X_bond``; returns ``y`` with outcome ``(-1)**y``."""
    n = tableau.n
    if not 0 <= bond < n:
        raise ValueError(f"qubit {bond} out of range")
    word, bit = divmod(bond, 64)
    m = np.uint64(1 << bit)
    anti = (tableau.z[:, word] & m) != 0
    hits = np.flatnonzero(anti[n:])
    if hits.size:
        p = n + int(hits[0])
        others = np.flatnonzero(anti)
        tableau._rowmul(others[others != p], p)
        tableau.x[p - n] = tableau.x[p]
        tableau.z[p - n] = tableau.z[p]
        tableau.phase[p - n] = tableau.phase[p]
        y = int(rng.integers(2))
        tableau.x[p] = 0
        tableau.z[p] = 0
        tableau.x[p, word] = m
        tableau.phase[p] = 2 * y
        if tableau.debug:
            tableau.check_invariants()
        return y

    phase, xs, zs = tableau._product_phase(n + np.flatnonzero(anti[:n]))
    if tableau.debug:
        expected = _pack(1 << bond, tableau.words)
        if not (np.array_equal(xs, expected) and not zs.any() and phase % 2 == 0):
            raise AssertionError("deterministic measurement did not reconstruct +-X")
    return phase // 2


def tableau_to_dense(tableau: Tableau) -> DenseState:
    """Dense amplitudes of the stabilized state (unit norm, arbitrary global phase)."""
    n = tableau.n
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits exceeds the dense conversion cap of {MAX_DENSE_QUBITS}")
    rng = np.random.default_rng(0)
    state = DenseState(rng.normal(size=2**n) + 1j * rng.normal(size=2**n), 2, n)
    for g in tableau.stabilizers():
        image = ClockShiftString.from_pauli(g).apply(state)
        state = DenseState((state.amplitudes + image.amplitudes) / 2, 2, n)
    return state.normalized()
