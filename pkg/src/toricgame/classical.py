"""Deterministic classical strategies: exhaustive optimum and the closed form for M = 2.

Only the intersection player of each team sees that team's input, so a
deterministic strategy is one response table ``f_i: Z_M -> Z_M`` per team plus
constant answers for the remaining dual-loop players.  Shared randomness is
not searched: the uniform-average payoff of a mixture is a convex combination
of deterministic payoffs, so it never beats the best deterministic strategy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .game import promised_inputs, referee_target

DEFAULT_BUDGET = 10**8


class SearchBudgetExceeded(ValueError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"exhaustive search needs ~{required} table evaluations, budget is {budget}")
        self.required = required
        self.budget = budget


@dataclass(frozen=True)
class ClassicalStrategy:
    tables: tuple[tuple[int, ...], ...]
    constants: tuple[int, ...] = ()
    modulus: int = 2

    def __post_init__(self):
        M = self.modulus
        object.__setattr__(self, "tables", tuple(tuple(int(v) for v in t) for t in self.tables))
        object.__setattr__(self, "constants", tuple(int(c) for c in self.constants))
        for t in self.tables:
            if len(t) != M or any(not 0 <= v < M for v in t):
                raise ValueError(f"response table {t} is not a map Z_{M} -> Z_{M}")
        if any(not 0 <= c < M for c in self.constants):
            raise ValueError(f"constant answers {self.constants} outside Z_{M}")

    @property
    def n_teams(self) -> int:
        return len(self.tables)


def strategy_value(strategy: ClassicalStrategy) -> Fraction:
    """Exact winning probability under the uniform promised-input law."""
    M = strategy.modulus
    offset = sum(strategy.constants)
    inputs = promised_inputs(strategy.n_teams, M)
    wins = sum(
        (sum(t[ai] for t, ai in zip(strategy.tables, a)) + offset) % M == referee_target(a, M)
        for a in inputs
    )
    return Fraction(wins, len(inputs))


def search_cost(T: int, M: int, sweep_offset: bool = True) -> int:
    return M ** (M * T) * (M if sweep_offset else 1) * M ** (T - 1)


def optimal_classical(
    T: int, M: int = 2, dual_loop_size: int | None = None, budget: int = DEFAULT_BUDGET
) -> tuple[Fraction, ClassicalStrategy]:
    """Best deterministic strategy by exhaustive exact scoring.

    The constants of the non-intersection players only enter through their sum
    ``c``, which is swept explicitly.  Ties go to the lexicographically first
    ``(flattened tables, c)``.
    """
    if T < 2:
        raise ValueError(f"need T >= 2 teams, got {T}")
    if M < 2:
        raise ValueError(f"need M >= 2, got {M}")
    dual_loop_size = T if dual_loop_size is None else dual_loop_size
    if dual_loop_size < T:
        raise ValueError("the dual loop must contain every intersection bond")
    n_const = dual_loop_size - T
    offsets = M if n_const > 0 else 1
    required = search_cost(T, M, n_const > 0)
    if required > budget:
        raise SearchBudgetExceeded(required, budget)

    L = M * T
    n_tables = M**L
    # digits[s, k] is entry k of the flattened table set s, most significant first
    powers = M ** np.arange(L - 1, -1, -1, dtype=np.int64)
    digits = (np.arange(n_tables, dtype=np.int64)[:, None] // powers) % M
    inputs = promised_inputs(T, M)
    scores = np.zeros((n_tables, offsets), dtype=np.int64)
    for a in inputs:
        r = referee_target(a, M)
        answer = digits[:, [i * M + ai for i, ai in enumerate(a)]].sum(axis=1)
        for c in range(offsets):
            scores[:, c] += (answer + c) % M == r

    best = int(np.argmax(scores.reshape(-1)))
    s, c = divmod(best, offsets)
    tables = tuple(tuple(int(v) for v in digits[s, i * M : (i + 1) * M]) for i in range(T))
    constants = (c,) + (0,) * (n_const - 1) if n_const else ()
    strategy = ClassicalStrategy(tables, constants, M)
    return Fraction(int(scores[s, c]), len(inputs)), strategy


def closed_form_classical(T: int) -> Fraction:
    """``1/2 + 2^-ceil(T/2)``, the optimal classical value for M = 2."""
    if T < 2:
        raise ValueError(f"need T >= 2 teams, got {T}")
    return Fraction(1, 2) + Fraction(1, 2 ** math.ceil(T / 2))


def boyer_game_value(T: int, M: int) -> Fraction:
    """Optimal value of the T-player mod-M divisor-M game by plain enumeration.

    Kept deliberately naive and separate from ``optimal_classical``.
    """
    functions = list(itertools.product(range(M), repeat=M))
    allowed = [a for a in itertools.product(range(M), repeat=T) if sum(a) % M == 0]
    best = 0
    for strategy in itertools.product(functions, repeat=T):
        wins = 0
        for a in allowed:
            total = 0
            for f, ai in zip(strategy, a):
                total += f[ai]
            if total % M == (sum(a) // M) % M:
                wins += 1
        best = max(best, wins)
    return Fraction(best, len(allowed))
