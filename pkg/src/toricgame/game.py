"""Referee, round play and winning statistics."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import HORIZONTAL_GAME, VERTICAL_GAME, GameInstance, validate_instance
from .stabilizer import Tableau, apply_half_wilson, measure_x
from .statevector import (
    DenseState,
    apply_wilson_root,
    dual_outcome_distribution,
    joint_dual_distribution,
    prepare_full_cat,
    sample_shift_outcomes,
)


class InvalidInputError(ValueError):
    pass


class BackendMismatchError(ValueError):
    pass


class InvalidConfigurationError(ValueError):
    pass


def promised_inputs(T: int, M: int) -> list[tuple[int, ...]]:
    """All input vectors in ``Z_M^T`` whose sum is divisible by ``M``, in lexicographic order."""
    return [a for a in itertools.product(range(M), repeat=T) if sum(a) % M == 0]


def sample_promised_input(T: int, M: int, rng: np.random.Generator) -> tuple[int, ...]:
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    head = [int(v) for v in rng.integers(M, size=T - 1)]
    return tuple(head + [(-sum(head)) % M])


def referee_target(a: Sequence[int], M: int) -> int:
    """``(sum a) / M mod M``; raises ``InvalidInputError`` if the promise fails."""
    if any(not 0 <= v < M for v in a):
        raise InvalidInputError(f"input {tuple(a)} has entries outside Z_{M}")
    total = sum(a)
    if total % M:
        raise InvalidInputError(f"input {tuple(a)} violates the promise: sum {total} not divisible by {M}")
    return (total // M) % M


@dataclass
class RoundResult:
    input: tuple[int, ...]
    outcomes: tuple[int, ...]
    target: int
    won: bool

    def to_json(self, round_index: int) -> str:
        return json.dumps(
            {
                "round": round_index,
                "input": list(self.input),
                "outcomes": list(self.outcomes),
                "target": self.target,
                "won": self.won,
            }
        )


def _result(a: Sequence[int], outcomes: Sequence[int], M: int) -> RoundResult:
    r = referee_target(a, M)
    outcomes = tuple(int(y) for y in outcomes)
    return RoundResult(tuple(a), outcomes, r, sum(outcomes) % M == r)


@dataclass
class WinStats:
    """Raw counts, an optional exact probability and a per-input breakdown.

    ``per_input`` maps an input vector to ``[wins, rounds]``.
    """

    rounds: int = 0
    wins: int = 0
    exact: float | None = None
    per_input: dict = field(default_factory=dict)

    def add(self, result: RoundResult) -> None:
        self.rounds += 1
        self.wins += int(result.won)
        entry = self.per_input.setdefault(result.input, [0, 0])
        entry[0] += int(result.won)
        entry[1] += 1

    def merge(self, other: WinStats) -> WinStats:
        out = WinStats(self.rounds + other.rounds, self.wins + other.wins, self.exact)
        for src in (self.per_input, other.per_input):
            for key, (w, n) in src.items():
                entry = out.per_input.setdefault(key, [0, 0])
                entry[0] += w
                entry[1] += n
        return out

    @property
    def losses(self) -> int:
        return self.rounds - self.wins

    @property
    def rate(self) -> float:
        return self.wins / self.rounds if self.rounds else float("nan")

    def wilson_interval(self, z: float = 1.96) -> tuple[float, float]:
        """Wilson score interval for the win rate (95% by default)."""
        n = self.rounds
        if n == 0:
            return 0.0, 1.0
        p = self.wins / n
        denom = 1 + z * z / n
        centre = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        return max(0.0, centre - half), min(1.0, centre + half)

    def to_dict(self) -> dict:
        lo, hi = self.wilson_interval()
        return {
            "rounds": self.rounds,
            "wins": self.wins,
            "rate": self.rate if self.rounds else None,
            "wilson95": [lo, hi],
            "exact": self.exact,
            "per_input": {",".join(map(str, k)): v for k, v in sorted(self.per_input.items())},
        }


def strategy_sign(M: int) -> int:
    """Exponent sign of the fractional Wilson loop: ``+a/2`` for qubits, ``-a/M`` otherwise."""
    return 1 if M == 2 else -1


def _check_backend(instance: GameInstance, backend) -> None:
    n = instance.lattice.n_bonds
    if isinstance(backend, Tableau):
        if instance.modulus != 2:
            raise BackendMismatchError("the tableau backend supports M = 2 only")
        if backend.n != n:
            raise BackendMismatchError(f"tableau has {backend.n} qubits, lattice has {n} bonds")
    elif isinstance(backend, DenseState):
        if backend.modulus != instance.modulus or backend.n_sites != n:
            raise BackendMismatchError(
                f"state is M={backend.modulus} on {backend.n_sites} sites, "
                f"instance is M={instance.modulus} on {n} bonds"
            )
    else:
        raise BackendMismatchError(f"unsupported backend {type(backend).__name__}")


def apply_strategy(instance: GameInstance, state: DenseState, a: Sequence[int]) -> DenseState:
    """Every team applies its fractional Wilson loop for input ``a``."""
    sign = strategy_sign(instance.modulus)
    for team, ai in zip(instance.teams, a):
        state = apply_wilson_root(state, team, ai, instance.modulus, sign)
    return state


def play_round_quantum(instance: GameInstance, backend, a: Sequence[int], rng: np.random.Generator) -> RoundResult:
    """One round of the perfect quantum strategy; the backend is cloned, not mutated."""
    _check_backend(instance, backend)
    M = instance.modulus
    referee_target(a, M)
    if len(a) != instance.n_teams:
        raise InvalidInputError(f"{len(a)} inputs for {instance.n_teams} teams")
    if isinstance(backend, Tableau):
        tab = backend.copy()
        for team, ai in zip(instance.teams, a):
            apply_half_wilson(tab, team, ai)
        outcomes = [measure_x(tab, b, rng) for b in instance.dual_loop.bonds]
    else:
        state = apply_strategy(instance, backend, a)
        ys = sample_shift_outcomes(state, instance.dual_loop.bonds, rng)
        outcomes = [(s * y) % M for s, y in zip(instance.dual_loop.signs, ys)]
    return _result(a, outcomes, M)


def round_rng(seed: int, round_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, round_index])


def _play_chunk(instance: GameInstance, backend, seed: int, start: int, stop: int) -> list[RoundResult]:
    out = []
    for i in range(start, stop):
        rng = round_rng(seed, i)
        a = sample_promised_input(instance.n_teams, instance.modulus, rng)
        out.append(play_round_quantum(instance, backend, a, rng))
    return out


def play_rounds(
    instance: GameInstance,
    backend,
    rounds: int,
    seed: int,
    log: list | None = None,
    workers: int = 1,
) -> WinStats:
    """Sampled play; round ``i`` draws its input and outcomes from ``(seed, i)`` only.

    Results are identical for any ``workers`` count.  Completed rounds are
    appended to ``log`` when given.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    _check_backend(instance, backend)
    if workers <= 1:
        results = _play_chunk(instance, backend, seed, 0, rounds)
    else:
        bounds = np.linspace(0, rounds, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            futures = [
                pool.submit(_play_chunk, instance, backend, seed, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            results = [r for f in futures for r in f.result()]
    stats = WinStats()
    for r in results:
        stats.add(r)
    if log is not None:
        log.extend(results)
    return stats


def exact_win_breakdown(instance: GameInstance, state: DenseState) -> dict[tuple[int, ...], float]:
    """Exact winning probability of the quantum strategy for each promised input."""
    _check_backend(instance, state)
    M = instance.modulus
    out = {}
    for a in promised_inputs(instance.n_teams, M):
        dist = dual_outcome_distribution(apply_strategy(instance, state, a), instance.dual_loop, M)
        out[a] = float(dist[referee_target(a, M)])
    return out


def win_probability_quantum_exact(instance: GameInstance, state: DenseState) -> float:
    """Uniform average over promised inputs of the exact winning probability."""
    breakdown = exact_win_breakdown(instance, state)
    return sum(breakdown.values()) / len(breakdown)


def play_round_classical(instance: GameInstance, strategy, a: Sequence[int]) -> RoundResult:
    """Deterministic play: intersection players answer ``f_i(a_i)``, the rest constants."""
    M = instance.modulus
    T = instance.n_teams
    n_dual = len(instance.dual_loop)
    if len(strategy.tables) != T or len(strategy.tables) + len(strategy.constants) != n_dual:
        raise ValueError(
            f"strategy for {len(strategy.tables)} teams and {len(strategy.constants)} constants "
            f"does not fit {T} teams on a dual loop of {n_dual} bonds"
        )
    if len(a) != T:
        raise InvalidInputError(f"{len(a)} inputs for {T} teams")
    answers = {}
    for t, table, ai in zip(instance.intersections, strategy.tables, a):
        answers[t] = table[ai] % M
    constants = iter(strategy.constants)
    outcomes = [answers[b] if b in answers else next(constants) % M for b in instance.dual_loop.bonds]
    return _result(a, outcomes, M)


def _check_simultaneous(vertical: GameInstance, horizontal: GameInstance) -> None:
    if vertical.lattice != horizontal.lattice or vertical.modulus != horizontal.modulus:
        raise InvalidConfigurationError("simultaneous games must share the lattice and modulus")
    if vertical.direction != VERTICAL_GAME or horizontal.direction != HORIZONTAL_GAME:
        raise InvalidConfigurationError("need one vertical and one horizontal instance")
    for inst in (vertical, horizontal):
        problems = validate_instance(inst)
        if problems:
            raise InvalidConfigurationError(f"invalid {inst.direction} instance: {problems}")
    overlap = vertical.dual_loop.bond_set & horizontal.dual_loop.bond_set
    if overlap:
        raise InvalidConfigurationError(f"dual loops overlap on bonds {sorted(overlap)}")


def play_simultaneous(
    vertical: GameInstance,
    horizontal: GameInstance,
    rng: np.random.Generator,
    state: DenseState | None = None,
) -> tuple[RoundResult, RoundResult]:
    """Both team sets act on one shared state, then both dual loops are measured."""
    _check_simultaneous(vertical, horizontal)
    M = vertical.modulus
    if state is None:
        state = prepare_full_cat(vertical.lattice, M)
    _check_backend(vertical, state)
    a_v = sample_promised_input(vertical.n_teams, M, rng)
    a_h = sample_promised_input(horizontal.n_teams, M, rng)
    final = apply_strategy(horizontal, apply_strategy(vertical, state, a_v), a_h)
    loops = (vertical.dual_loop, horizontal.dual_loop)
    ys = sample_shift_outcomes(final, [b for loop in loops for b in loop.bonds], rng)
    k = len(vertical.dual_loop)
    out_v = [(s * y) % M for s, y in zip(vertical.dual_loop.signs, ys[:k])]
    out_h = [(s * y) % M for s, y in zip(horizontal.dual_loop.signs, ys[k:])]
    return _result(a_v, out_v, M), _result(a_h, out_h, M)


def simultaneous_win_breakdown(
    vertical: GameInstance, horizontal: GameInstance, state: DenseState | None = None
) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
    """Exact probability that both games are won, for every pair of promised inputs."""
    _check_simultaneous(vertical, horizontal)
    M = vertical.modulus
    if state is None:
        state = prepare_full_cat(vertical.lattice, M)
    out = {}
    for a_v in promised_inputs(vertical.n_teams, M):
        after_v = apply_strategy(vertical, state, a_v)
        for a_h in promised_inputs(horizontal.n_teams, M):
            final = apply_strategy(horizontal, after_v, a_h)
            joint = joint_dual_distribution(final, [vertical.dual_loop, horizontal.dual_loop])
            out[(a_v, a_h)] = float(joint[referee_target(a_v, M), referee_target(a_h, M)])
    return out
