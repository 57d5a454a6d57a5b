"""Acceptance suite: one reported pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the summary) or
``python tests/test_acceptance.py``.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from toricgame.analysis import lemma1_probability, parity_identity_check, uniqueness_certificate
from toricgame.classical import boyer_game_value, closed_form_classical, optimal_classical
from toricgame.game import exact_win_breakdown, play_rounds, simultaneous_win_breakdown
from toricgame.lattice import TorusLattice, instance_family, straight_instance
from toricgame.stabilizer import measure_x, prepare_cat_tableau, tableau_to_dense
from toricgame.statevector import (
    DenseState,
    basis_index,
    overlap,
    prepare_cat_dense,
    prepare_full_cat,
    shift_basis_marginal,
)

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


def test_criterion_1_exact_perfect_strategy():
    start = time.perf_counter()
    worst = 1.0
    for lx, ly in [(3, 2), (3, 3)]:
        lat = TorusLattice(lx, ly)
        cat = prepare_cat_dense(lat, 2)
        for y in range(ly):
            breakdown = exact_win_breakdown(straight_instance(lat, [0, 1, 2], y), cat)
            worst = min(worst, min(breakdown.values()))
    elapsed = time.perf_counter() - start
    record(1, abs(worst - 1) < 1e-9 and elapsed < 30, f"min per-input probability {worst:.15f}, {elapsed:.1f}s")


def test_criterion_2_sampled_perfect_strategy():
    start = time.perf_counter()
    lat = TorusLattice(8, 8)
    tab = prepare_cat_tableau(lat)
    losses, repeat_ok = [], True
    for T in (3, 4):
        inst = straight_instance(lat, range(0, 2 * T, 2), 3)
        log_a, log_b = [], []
        stats = play_rounds(inst, tab, 10_000, seed=2024 + T, log=log_a)
        losses.append(stats.losses)
        play_rounds(inst, tab, 200, seed=2024 + T, log=log_b)
        repeat_ok &= log_a[:200] == log_b
    elapsed = time.perf_counter() - start
    record(2, losses == [0, 0] and repeat_ok and elapsed < 60, f"losses {losses}, reproducible {repeat_ok}, {elapsed:.1f}s")


def test_criterion_3_classical_optimum():
    start = time.perf_counter()
    rows = []
    for T, expected in [(3, Fraction(3, 4)), (4, Fraction(3, 4)), (5, Fraction(5, 8))]:
        value, _ = optimal_classical(T, 2)
        rows.append(value == closed_form_classical(T) == expected)
    elapsed = time.perf_counter() - start
    record(3, all(rows) and elapsed < 60, f"T=3,4,5 exact matches {rows}, {elapsed:.1f}s")


def test_criterion_4_lemma1_oracle():
    start = time.perf_counter()
    lat = TorusLattice(3, 2)
    inst = straight_instance(lat, [0, 1, 2], 0)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        state = DenseState.random(2, lat.n_bonds, rng)
        direct = sum(exact_win_breakdown(inst, state).values()) / 4
        worst = max(worst, abs(lemma1_probability(state, inst) - direct))
    n = lat.n_bonds
    anti = np.zeros(2**n, complex)
    anti[0] = 1 / np.sqrt(2)
    anti[basis_index(2, [1 if b in inst.dual_loop.bond_set else 0 for b in range(n)])] = -1 / np.sqrt(2)
    fixed = (
        lemma1_probability(prepare_cat_dense(lat, 2), inst),
        lemma1_probability(DenseState.basis_state(2, [0] * n), inst),
        lemma1_probability(DenseState(anti, 2, n), inst),
    )
    fixed_ok = np.allclose(fixed, (1, 0.5, 0), atol=1e-9)
    elapsed = time.perf_counter() - start
    record(4, worst < 1e-9 and fixed_ok and elapsed < 120, f"max |diff| {worst:.2e}, fixed points {np.round(fixed, 12).tolist()}, {elapsed:.1f}s")


def test_criterion_5_uniqueness_certificate():
    start = time.perf_counter()
    lat = TorusLattice(3, 2)
    deformed = uniqueness_certificate(lat, instance_family(lat, deformations=True))
    straight = uniqueness_certificate(lat, instance_family(lat, deformations=False))
    ok = (
        deformed.conclusive
        and deformed.dimension == 2
        and deformed.max_residual < 1e-8
        and max(deformed.cat_span_residuals) < 1e-8
        and max(deformed.cat_fixed_residuals) < 1e-8
        and straight.dimension > 2
    )
    elapsed = time.perf_counter() - start
    record(
        5,
        ok and elapsed < 300,
        f"deformed dim {deformed.dimension} (residual {deformed.max_residual:.1e}), "
        f"straight-only dim >= {straight.dimension}, {elapsed:.1f}s",
    )


def test_criterion_6_qutrit_game():
    lat = TorusLattice(2, 2)
    inst = straight_instance(lat, [0, 1], 0, modulus=3)
    worst = min(exact_win_breakdown(inst, prepare_cat_dense(lat, 3)).values())
    value, _ = optimal_classical(3, 3)
    boyer = boyer_game_value(3, 3)
    ok = abs(worst - 1) < 1e-9 and value == boyer and value < 1
    record(6, ok, f"quantum min {worst:.15f}, classical {value} = enumerator {boyer}")


def test_criterion_7_backend_equivalence():
    lat = TorusLattice(3, 2)
    tab = prepare_cat_tableau(lat)
    dense = prepare_cat_dense(lat, 2)
    ov = overlap(tableau_to_dense(tab), dense)
    sites = [1, 4, 7]
    exact = shift_basis_marginal(dense, sites).reshape(-1)
    rng = np.random.default_rng(7)
    n = 10_000
    counts = np.zeros(exact.size)
    for _ in range(n):
        t = tab.copy()
        ys = [measure_x(t, b, rng) for b in sites]
        counts[ys[0] * 4 + ys[1] * 2 + ys[2]] += 1
    sigma = np.sqrt(n * exact * (1 - exact))
    within = bool(np.all(np.abs(counts - n * exact) <= 3 * sigma + 1e-9))
    record(7, ov >= 1 - 1e-9 and within, f"overlap {ov:.12f}, marginals within 3 sigma {within}")


def test_criterion_8_simultaneous_play():
    lat = TorusLattice(3, 3)
    v = straight_instance(lat, [0, 1, 2], 0)
    h = straight_instance(lat, [0, 1, 2], 0, direction="horizontal")
    worst = min(simultaneous_win_breakdown(v, h, prepare_full_cat(lat, 2)).values())
    record(8, abs(worst - 1) < 1e-9, f"min joint probability over 16 input pairs {worst:.15f}")


def test_criterion_9_parity_identity():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 11))
        z = rng.normal(size=k) + 1j * rng.normal(size=k)
        lhs, rhs = parity_identity_check(z, int(rng.integers(2)))
        worst = max(worst, abs(lhs - rhs))
    record(9, worst < 1e-12, f"max |lhs - rhs| {worst:.2e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
