"""Closed-form winning probability, instance projectors and the ground-space certificate.

Everything here works on qubits (M = 2).  Basis states are flat indices with
bond ``b`` stored in bit ``n - 1 - b``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .lattice import GameInstance, TorusLattice
from .statevector import (
    DenseState,
    cat_fidelities,
    cat_fidelity_table,
    flip_mask,
    logical_operators,
    prepare_cat_dense,
)


class UnsupportedModulusError(ValueError):
    pass


def _require_qubits(modulus: int) -> None:
    if modulus != 2:
        raise UnsupportedModulusError(f"only M = 2 is supported here, got M = {modulus}")


def _bond_bits(n_sites: int, bonds: Sequence[int]) -> np.ndarray:
    """Parity of the given bonds for every flat basis index."""
    idx = np.arange(2**n_sites, dtype=np.int64)
    parity = np.zeros(idx.size, dtype=np.int64)
    for b in bonds:
        parity ^= (idx >> (n_sites - 1 - b)) & 1
    return parity


def team_charges(instance: GameInstance) -> np.ndarray:
    """``w[j, s]``: clock charge of team ``j`` on basis state ``s``, in ``{0, 1}``."""
    _require_qubits(instance.modulus)
    n = instance.lattice.n_bonds
    return np.array([_bond_bits(n, t.bonds) for t in instance.teams])


def _check_state(state: DenseState, instance: GameInstance) -> None:
    _require_qubits(instance.modulus)
    _require_qubits(state.modulus)
    if state.n_sites != instance.lattice.n_bonds:
        raise ValueError(f"state has {state.n_sites} sites, lattice has {instance.lattice.n_bonds} bonds")


def lemma1_probability(state: DenseState, instance: GameInstance) -> float:
    """``1/2 + 1/2 * sum (f+ - f-)`` over basis states where every team charge vanishes.

    ``f+-`` are the fidelities with ``(1 +- V)|sigma> / sqrt 2``.  Flipping the
    dual loop toggles every team charge, so the partner ``V sigma`` of a
    sector state lies outside the sector and each pair is counted once.
    """
    _check_state(state, instance)
    charges = team_charges(instance)
    sector = ~charges.any(axis=0)
    f_plus, f_minus = cat_fidelity_table(state, instance.dual_loop)
    return float(0.5 + 0.5 * (f_plus[sector].sum() - f_minus[sector].sum()))


def lemma1_from_fidelities(state: DenseState, instance: GameInstance) -> float:
    """Same quantity as ``lemma1_probability``, one basis state at a time via ``cat_fidelities``.

    Written as ``1/2 (1 + sum f+ - sum f-)``.
    """
    _check_state(state, instance)
    n = instance.lattice.n_bonds
    teams = [t.bonds for t in instance.teams]
    total_plus = total_minus = 0.0
    for sigma in range(2**n):
        bits = [(sigma >> (n - 1 - b)) & 1 for b in range(n)]
        if any(sum(bits[b] for b in team) % 2 for team in teams):
            continue
        fp, fm = cat_fidelities(state, instance.dual_loop, sigma)
        total_plus += fp
        total_minus += fm
    return 0.5 * (1 + total_plus - total_minus)


@dataclass(frozen=True)
class InstanceProjector:
    """``1/2 (1 + V) (prod (1 + W_j)/2 + prod (1 - W_j)/2)`` on flat amplitude arrays.

    The team factor keeps basis states whose team charges all agree; ``V``
    permutes basis states by flipping the dual-loop bits.
    """

    n_sites: int
    keep: np.ndarray
    partner: np.ndarray

    @classmethod
    def from_instance(cls, instance: GameInstance) -> InstanceProjector:
        _require_qubits(instance.modulus)
        n = instance.lattice.n_bonds
        charges = team_charges(instance)
        keep = (charges == charges[0]).all(axis=0)
        partner = np.arange(2**n) ^ flip_mask(n, instance.dual_loop.bonds)
        return cls(n, keep, partner)

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Works on a flat vector or on a ``(2**n, k)`` batch of columns."""
        kept = amplitudes * (self.keep[:, None] if amplitudes.ndim == 2 else self.keep)
        return 0.5 * (kept + kept[self.partner])


def apply_instance_projector(state: DenseState, instance: GameInstance) -> DenseState:
    """Unnormalised image of ``state`` under the instance projector."""
    _check_state(state, instance)
    proj = InstanceProjector.from_instance(instance)
    return DenseState(proj.apply(state.amplitudes), 2, state.n_sites)


def cat_states(lattice: TorusLattice) -> tuple[DenseState, DenseState]:
    """The two cat states fixed by every instance projector of the vertical game."""
    first = prepare_cat_dense(lattice, 2)
    second = logical_operators(lattice, 2)["V_y"].apply(first)
    return first, second


@dataclass
class UniquenessCertificate:
    n_instances: int
    family: str
    probes: int
    iterations: int
    converged: bool
    singular_values: list[float]
    dimension: int
    saturated: bool
    max_residual: float
    cat_fixed_residuals: list[float]
    cat_span_residuals: list[float]
    basis: np.ndarray = field(repr=False)

    @property
    def conclusive(self) -> bool:
        return self.converged and not self.saturated

    def to_json(self) -> str:
        data = asdict(self)
        del data["basis"]
        data["conclusive"] = self.conclusive
        return json.dumps(data, indent=2)


def uniqueness_certificate(
    lattice: TorusLattice,
    family: Sequence[GameInstance],
    probes: int = 8,
    tol: float = 1e-8,
    max_iter: int = 2000,
    seed: int = 0,
    family_name: str = "",
) -> UniquenessCertificate:
    """Estimate the subspace fixed by every projector in ``family``.

    Random probes are pushed through the full cycle of projectors until their
    Gram matrix stops changing; the fixed-space dimension is the numerical
    rank (singular values above ``tol`` times the largest).  A rank equal to
    ``probes`` only bounds the dimension from below and is flagged as
    saturated.  Hitting ``max_iter`` leaves ``converged`` false.
    """
    if not family:
        raise ValueError("empty instance family")
    projectors = [InstanceProjector.from_instance(inst) for inst in family]
    n = lattice.n_bonds
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(2**n, probes)) + 1j * rng.normal(size=(2**n, probes))
    Q /= np.linalg.norm(Q, axis=0)

    gram = Q.conj().T @ Q
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        for proj in projectors:
            Q = proj.apply(Q)
        new_gram = Q.conj().T @ Q
        change = np.abs(new_gram - gram).max()
        gram = new_gram
        if change <= 1e-15 * max(1.0, np.abs(gram).max()):
            converged = True
            break

    U, svals, _ = np.linalg.svd(Q, full_matrices=False)
    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    rank = int((svals > tol * scale).sum())
    basis = U[:, :rank]

    residuals = []
    for proj in projectors:
        residuals.append(float(np.linalg.norm(proj.apply(basis) - basis, axis=0).max()) if rank else 0.0)

    fixed, span = [], []
    for cat in cat_states(lattice):
        c = cat.amplitudes
        fixed.append(max(float(np.linalg.norm(p.apply(c) - c)) for p in projectors))
        span.append(float(np.linalg.norm(c - basis @ (basis.conj().T @ c))))

    return UniquenessCertificate(
        n_instances=len(family),
        family=family_name,
        probes=probes,
        iterations=iterations,
        converged=converged,
        singular_values=[float(s) for s in svals],
        dimension=rank,
        saturated=rank == probes,
        max_residual=max(residuals),
        cat_fixed_residuals=fixed,
        cat_span_residuals=span,
        basis=basis,
    )


def parity_identity_check(z: Sequence[complex], r: int, modulus: int = 2) -> tuple[complex, complex]:
    """Both sides of ``sum_{sum y = r mod 2} prod z_j^y_j = 1/2 (prod(1 + z) + (-1)^r prod(1 - z))``.

    The left side is summed term by term over all constrained bit vectors.
    """
    _require_qubits(modulus)
    z = [complex(v) for v in z]
    lhs = 0j
    for y in itertools.product((0, 1), repeat=len(z)):
        if sum(y) % 2 != r % 2:
            continue
        term = 1 + 0j
        for zj, yj in zip(z, y):
            if yj:
                term *= zj
        lhs += term
    plus = np.prod([1 + v for v in z]) if z else 1
    minus = np.prod([1 - v for v in z]) if z else 1
    rhs = 0.5 * (plus + (-1) ** (r % 2) * minus)
    return complex(lhs), complex(rhs)
