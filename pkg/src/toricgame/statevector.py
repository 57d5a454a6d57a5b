"""Dense state vectors over Z_M qudits, one qudit per bond.

Amplitudes are stored as a flat complex128 vector of length ``M ** n``; the
site value of bond ``b`` is the ``b``-th digit of the flat index counted from
the most significant end, so ``amplitudes.reshape((M,) * n)`` has one axis per
bond.  Clock ``C|k> = w^k |k>`` and shift ``S|k> = |k + 1>`` with
``w = exp(2 pi i / M)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lattice import (
    DIRECT,
    PLAQUETTE_SIGNS,
    STAR_SIGNS,
    Loop,
    TorusLattice,
    column_dual_loop,
    column_loop,
    plaquette_bonds,
    row_dual_loop,
    row_wilson_loop,
    star_bonds,
)

MAX_AMPLITUDES = 2**28
NORM_TOL = 1e-9


class MemoryBudgetError(ValueError):
    pass


class ZeroProjectionError(RuntimeError):
    pass


class WrongKindError(ValueError):
    pass


def check_budget(modulus: int, n_sites: int, budget: int = MAX_AMPLITUDES) -> int:
    size = modulus**n_sites
    if size > budget:
        raise MemoryBudgetError(
            f"{modulus}^{n_sites} = {size} amplitudes exceeds the budget of {budget}"
        )
    return size


class DenseState:
    """Amplitude vector of ``n_sites`` qudits of dimension ``modulus``."""

    def __init__(self, amplitudes, modulus: int, n_sites: int | None = None):
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        if n_sites is None:
            n_sites = int(round(np.log(amps.size) / np.log(modulus)))
        if modulus**n_sites != amps.size:
            raise ValueError(f"{amps.size} amplitudes do not match {modulus}^{n_sites}")
        self.modulus = modulus
        self.n_sites = n_sites
        self.amplitudes = amps

    @classmethod
    def basis_state(cls, modulus: int, sigma: Sequence[int]) -> DenseState:
        n = len(sigma)
        check_budget(modulus, n)
        amps = np.zeros(modulus**n, dtype=np.complex128)
        amps[basis_index(modulus, sigma)] = 1.0
        return cls(amps, modulus, n)

    @classmethod
    def random(cls, modulus: int, n_sites: int, rng: np.random.Generator) -> DenseState:
        size = check_budget(modulus, n_sites)
        amps = rng.normal(size=size) + 1j * rng.normal(size=size)
        return cls(amps / np.linalg.norm(amps), modulus, n_sites)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.modulus,) * self.n_sites)

    def copy(self) -> DenseState:
        return DenseState(self.amplitudes.copy(), self.modulus, self.n_sites)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> DenseState:
        nrm = self.norm()
        if nrm == 0:
            raise ZeroProjectionError("cannot normalize the zero vector")
        return DenseState(self.amplitudes / nrm, self.modulus, self.n_sites)

    def __repr__(self):
        return f"DenseState(M={self.modulus}, sites={self.n_sites}, norm={self.norm():.12g})"


def basis_index(modulus: int, sigma: Sequence[int]) -> int:
    idx = 0
    for s in sigma:
        if not 0 <= s < modulus:
            raise ValueError(f"site value {s} outside Z_{modulus}")
        idx = idx * modulus + int(s)
    return idx


def basis_digits(modulus: int, n_sites: int, index: int) -> tuple[int, ...]:
    if not 0 <= index < modulus**n_sites:
        raise ValueError(f"basis index {index} out of range")
    digits = []
    for _ in range(n_sites):
        index, d = divmod(index, modulus)
        digits.append(d)
    return tuple(reversed(digits))


def site_sum(modulus: int, n_sites: int, coeffs: dict[int, int]) -> np.ndarray:
    """``sum_b coeffs[b] * sigma_b mod M`` as an array broadcastable to the state tensor."""
    shape = [1] * n_sites
    out = np.zeros(shape, dtype=np.int64)
    values = np.arange(modulus, dtype=np.int64)
    for b, c in coeffs.items():
        if c % modulus == 0:
            continue
        axis_shape = [1] * n_sites
        axis_shape[b] = modulus
        out = out + (c * values).reshape(axis_shape)
    return out % modulus


@dataclass(frozen=True)
class ClockShiftString:
    """``phase * prod_b S_b^shift[b] C_b^clock[b]`` (clock acts first).

    For M = 2 this is ``phase * prod X^x Z^z``.
    """

    clock: tuple[int, ...]
    shift: tuple[int, ...]
    phase: complex = 1.0
    modulus: int = 2

    def __post_init__(self):
        M = self.modulus
        object.__setattr__(self, "clock", tuple(int(c) % M for c in self.clock))
        object.__setattr__(self, "shift", tuple(int(s) % M for s in self.shift))
        if len(self.clock) != len(self.shift):
            raise ValueError("clock and shift exponents differ in length")

    @property
    def n_sites(self) -> int:
        return len(self.clock)

    @classmethod
    def identity(cls, n_sites: int, modulus: int = 2) -> ClockShiftString:
        return cls((0,) * n_sites, (0,) * n_sites, 1.0, modulus)

    @classmethod
    def from_pauli(cls, pauli) -> ClockShiftString:
        n = pauli.n
        clock = tuple((pauli.z >> b) & 1 for b in range(n))
        shift = tuple((pauli.x >> b) & 1 for b in range(n))
        return cls(clock, shift, 1j**pauli.phase, 2)

    @classmethod
    def clock_loop(cls, loop: Loop, n_sites: int, modulus: int, power: int = 1) -> ClockShiftString:
        clock = [0] * n_sites
        for b, s in zip(loop.bonds, loop.signs):
            clock[b] = power * s
        return cls(tuple(clock), (0,) * n_sites, 1.0, modulus)

    @classmethod
    def shift_loop(cls, loop: Loop, n_sites: int, modulus: int, power: int = 1) -> ClockShiftString:
        shift = [0] * n_sites
        for b, s in zip(loop.bonds, loop.signs):
            shift[b] = power * s
        return cls((0,) * n_sites, tuple(shift), 1.0, modulus)

    def matrix(self) -> np.ndarray:
        """Explicit matrix, for small checks only."""
        M = self.modulus
        w = np.exp(2j * np.pi / M)
        C = np.diag(w ** np.arange(M))
        S = np.roll(np.eye(M), 1, axis=0)
        out = np.array([[self.phase]], dtype=np.complex128)
        for c, s in zip(self.clock, self.shift):
            out = np.kron(out, np.linalg.matrix_power(S, s) @ np.linalg.matrix_power(C, c))
        return out

    def apply(self, state: DenseState) -> DenseState:
        if state.modulus != self.modulus or state.n_sites != self.n_sites:
            raise ValueError("operator and state dimensions differ")
        M = self.modulus
        psi = state.tensor
        coeffs = {b: c for b, c in enumerate(self.clock) if c}
        if coeffs:
            powers = np.exp(2j * np.pi * np.arange(M) / M)
            psi = psi * powers[site_sum(M, self.n_sites, coeffs)]
        axes = [b for b, s in enumerate(self.shift) if s]
        if axes:
            psi = np.roll(psi, [self.shift[b] for b in axes], axis=axes)
        elif not coeffs:
            psi = psi.copy()
        return DenseState(self.phase * psi, M, self.n_sites)


def plaquette_operator(lattice: TorusLattice, x: int, y: int, modulus: int) -> ClockShiftString:
    clock = [0] * lattice.n_bonds
    for b, s in zip(plaquette_bonds(lattice, x, y), PLAQUETTE_SIGNS):
        clock[b] = s
    return ClockShiftString(tuple(clock), (0,) * lattice.n_bonds, 1.0, modulus)


def star_operator(lattice: TorusLattice, x: int, y: int, modulus: int) -> ClockShiftString:
    shift = [0] * lattice.n_bonds
    for b, s in zip(star_bonds(lattice, x, y), STAR_SIGNS):
        shift[b] = s
    return ClockShiftString((0,) * lattice.n_bonds, tuple(shift), 1.0, modulus)


def logical_operators(lattice: TorusLattice, modulus: int) -> dict[str, ClockShiftString]:
    """Reference Wilson loops ``W_x, W_y`` (clock) and dual loops ``V_x, V_y`` (shift).

    ``V_x`` raises the ``W_y`` label and ``V_y`` raises the ``W_x`` label.
    """
    n = lattice.n_bonds
    return {
        "W_x": ClockShiftString.clock_loop(row_wilson_loop(lattice, 0), n, modulus),
        "W_y": ClockShiftString.clock_loop(column_loop(lattice, 0), n, modulus),
        "V_x": ClockShiftString.shift_loop(row_dual_loop(lattice, 0), n, modulus),
        "V_y": ClockShiftString.shift_loop(column_dual_loop(lattice, 0), n, modulus),
    }


def _zero_flux_state(lattice: TorusLattice, modulus: int, budget: int) -> DenseState:
    n = lattice.n_bonds
    check_budget(modulus, n, budget)
    psi = np.zeros((modulus,) * n, dtype=np.complex128)
    psi[(0,) * n] = 1.0
    for y in range(lattice.ly):
        for x in range(lattice.lx):
            bonds = list(star_bonds(lattice, x, y))
            acc = psi.copy()
            for r in range(1, modulus):
                acc += np.roll(psi, [r * s for s in STAR_SIGNS], axis=bonds)
            psi = acc / modulus
    state = DenseState(psi, modulus, n)
    if state.norm() < 1e-12:
        raise ZeroProjectionError("star projection annihilated the reference state")
    return state.normalized()


def prepare_ground_state(
    lattice: TorusLattice, modulus: int, j: int = 0, k: int = 0, budget: int = MAX_AMPLITUDES
) -> DenseState:
    """Ground state ``|jk> = V_y^j V_x^k |00>`` with ``W_x = w^j`` and ``W_y = w^k``."""
    if modulus < 2:
        raise ValueError(f"modulus must be >= 2, got {modulus}")
    state = _zero_flux_state(lattice, modulus, budget)
    ops = logical_operators(lattice, modulus)
    for _ in range(k % modulus):
        state = ops["V_x"].apply(state)
    for _ in range(j % modulus):
        state = ops["V_y"].apply(state)
    return state


def prepare_cat_dense(lattice: TorusLattice, modulus: int, budget: int = MAX_AMPLITUDES) -> DenseState:
    """Topological cat state ``(1/sqrt M) sum_k |0k>``."""
    state = _zero_flux_state(lattice, modulus, budget)
    v_x = logical_operators(lattice, modulus)["V_x"]
    total = state.amplitudes.copy()
    for _ in range(1, modulus):
        state = v_x.apply(state)
        total += state.amplitudes
    return DenseState(total / np.sqrt(modulus), modulus, lattice.n_bonds)


def prepare_full_cat(lattice: TorusLattice, modulus: int, budget: int = MAX_AMPLITUDES) -> DenseState:
    """``(1/M) sum_{jk} |jk>``: the shared state for simultaneous two-direction play."""
    cat = prepare_cat_dense(lattice, modulus, budget)
    v_y = logical_operators(lattice, modulus)["V_y"]
    total = cat.amplitudes.copy()
    for _ in range(1, modulus):
        cat = v_y.apply(cat)
        total += cat.amplitudes
    return DenseState(total / np.sqrt(modulus), modulus, lattice.n_bonds)


def apply_wilson_root(
    state: DenseState, team_loop: Loop, a: int, modulus: int | None = None, sign: int = 1
) -> DenseState:
    """Fractional Wilson loop ``W^(sign * a / M)`` defined by eigenspace projection.

    Each basis state picks up ``exp(sign * 2 pi i * a * w / M^2)`` where ``w`` is
    the loop's clock charge in ``{0, .., M-1}``.
    """
    M = state.modulus if modulus is None else modulus
    if M != state.modulus:
        raise ValueError(f"modulus {M} does not match state modulus {state.modulus}")
    if team_loop.kind != DIRECT:
        raise WrongKindError("Wilson loop roots act on direct (clock) loops only")
    if M > 2 and not team_loop.oriented:
        raise ValueError("M > 2 requires an oriented team loop")
    if not 0 <= a < M:
        raise ValueError(f"a must lie in 0..{M - 1}, got {a}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if a == 0:
        return state.copy()
    w = site_sum(M, state.n_sites, team_loop.coefficients())
    phases = np.exp(sign * 2j * np.pi * a * np.arange(M) / M**2)
    return DenseState(state.tensor * phases[w], M, state.n_sites)


def shift_basis_marginal(state: DenseState, sites: Sequence[int]) -> np.ndarray:
    """Joint probabilities of shift-basis outcomes on ``sites``, shape ``(M,) * len(sites)``.

    Outcome ``y`` is the eigenvector ``(1/sqrt M) sum_k w^(-y k) |k>`` of ``S``
    with eigenvalue ``w^y``.
    """
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise ValueError("sites repeat")
    psi = state.tensor
    for b in sites:
        psi = np.fft.ifft(psi, axis=b, norm="ortho")
    probs = np.abs(psi) ** 2
    others = tuple(b for b in range(state.n_sites) if b not in sites)
    marginal = probs.sum(axis=others) if others else probs
    kept = sorted(sites)
    return np.transpose(marginal, [kept.index(b) for b in sites])


def _returned_value_array(loop: Loop, modulus: int) -> np.ndarray:
    k = len(loop.bonds)
    total = np.zeros([1] * k, dtype=np.int64)
    values = np.arange(modulus)
    for i, s in enumerate(loop.signs):
        shape = [1] * k
        shape[i] = modulus
        total = total + (s * values).reshape(shape)
    return total % modulus


def dual_outcome_distribution(state: DenseState, dual_loop: Loop, modulus: int | None = None) -> np.ndarray:
    """Exact law of ``r' = sum_b s_b y_b mod M`` over the dual loop, as a length-M array.

    ``s_b`` is the bond's orientation sign, so players crossing against the
    loop direction report ``-y_b``.
    """
    M = state.modulus if modulus is None else modulus
    if M != state.modulus:
        raise ValueError(f"modulus {M} does not match state modulus {state.modulus}")
    joint = shift_basis_marginal(state, dual_loop.bonds)
    r = np.broadcast_to(_returned_value_array(dual_loop, M), joint.shape)
    return np.bincount(r.ravel(), weights=joint.ravel(), minlength=M)


def joint_dual_distribution(state: DenseState, loops: Sequence[Loop]) -> np.ndarray:
    """Joint law of the parities of several disjoint dual loops, shape ``(M,) * len(loops)``."""
    M = state.modulus
    sites = [b for loop in loops for b in loop.bonds]
    joint = shift_basis_marginal(state, sites)
    out = np.zeros((M,) * len(loops))
    flat = joint.reshape(-1)
    parities = []
    start = 0
    for loop in loops:
        k = len(loop.bonds)
        shape = [1] * len(sites)
        shape[start : start + k] = [M] * k
        parities.append(np.broadcast_to(_returned_value_array(loop, M).reshape(shape), joint.shape).ravel())
        start += k
    np.add.at(out, tuple(parities), flat)
    return out


def sample_shift_outcomes(state: DenseState, sites: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    joint = shift_basis_marginal(state, sites)
    p = joint.reshape(-1)
    idx = rng.choice(p.size, p=p / p.sum())
    return basis_digits(state.modulus, len(sites), int(idx))


def sample_dual_outcomes(state: DenseState, dual_loop: Loop, rng: np.random.Generator) -> tuple[int, ...]:
    """One full measurement of the dual loop; returns each player's reported value."""
    ys = sample_shift_outcomes(state, dual_loop.bonds, rng)
    M = state.modulus
    return tuple((s * y) % M for s, y in zip(dual_loop.signs, ys))


def expectation(state: DenseState, op: ClockShiftString) -> complex:
    return complex(np.vdot(state.amplitudes, op.apply(state).amplitudes))


def inner(s1: DenseState, s2: DenseState) -> complex:
    if s1.modulus != s2.modulus or s1.n_sites != s2.n_sites:
        raise ValueError("state dimensions differ")
    return complex(np.vdot(s1.amplitudes, s2.amplitudes))


def overlap(s1: DenseState, s2: DenseState) -> float:
    """``|<s1|s2>|^2``, insensitive to global phase."""
    return abs(inner(s1, s2)) ** 2


def flip_mask(n_sites: int, bonds: Sequence[int]) -> int:
    """Flat-index XOR mask that flips the given qubits (M = 2)."""
    mask = 0
    for b in bonds:
        mask |= 1 << (n_sites - 1 - b)
    return mask


def _require_qubits(state: DenseState) -> None:
    if state.modulus != 2:
        raise ValueError("cat fidelities are defined for M = 2 only")


def cat_fidelities(state: DenseState, dual_loop: Loop, sigma) -> tuple[float, float]:
    """``(|<psi|phi+>|^2, |<psi|phi->|^2)`` with ``phi+- = (1 +- V)|sigma> / sqrt 2``.

    ``sigma`` is a flat basis index or a sequence of bits.
    """
    _require_qubits(state)
    n = state.n_sites
    idx = sigma if isinstance(sigma, (int, np.integer)) else basis_index(2, sigma)
    if not 0 <= idx < 2**n:
        raise ValueError(f"basis state {sigma} out of range")
    c = state.amplitudes[idx]
    cv = state.amplitudes[idx ^ flip_mask(n, dual_loop.bonds)]
    return abs(c + cv) ** 2 / 2, abs(c - cv) ** 2 / 2


def cat_fidelity_table(state: DenseState, dual_loop: Loop) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``cat_fidelities`` over every basis state."""
    _require_qubits(state)
    c = state.amplitudes
    cv = c[np.arange(c.size) ^ flip_mask(state.n_sites, dual_loop.bonds)]
    return np.abs(c + cv) ** 2 / 2, np.abs(c - cv) ** 2 / 2


_DUMP_HEADER = struct.Struct("<II")


def save_amplitudes(state: DenseState, path) -> None:
    """Little-endian dump: header ``(M, n_sites)`` as uint32, then interleaved float64 re/im."""
    data = np.empty(2 * state.amplitudes.size, dtype="<f8")
    data[0::2] = state.amplitudes.real
    data[1::2] = state.amplitudes.imag
    Path(path).write_bytes(_DUMP_HEADER.pack(state.modulus, state.n_sites) + data.tobytes())


def load_amplitudes(path) -> DenseState:
    raw = Path(path).read_bytes()
    M, n = _DUMP_HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f8", offset=_DUMP_HEADER.size)
    return DenseState(data[0::2] + 1j * data[1::2], M, n)

