import itertools
import json

import numpy as np
import pytest

from toricgame.classical import ClassicalStrategy
from toricgame.game import (
    BackendMismatchError,
    InvalidConfigurationError,
    InvalidInputError,
    RoundResult,
    WinStats,
    apply_strategy,
    exact_win_breakdown,
    play_round_classical,
    play_round_quantum,
    play_rounds,
    play_simultaneous,
    promised_inputs,
    referee_target,
    sample_promised_input,
    win_probability_quantum_exact,
)
from toricgame.lattice import GameInstance, TorusLattice, deform, star_loop, straight_instance, validate_instance
from toricgame.stabilizer import PauliString, Tableau, prepare_cat_tableau
from toricgame.statevector import DenseState, prepare_cat_dense, prepare_full_cat


def test_promised_supports():
    assert promised_inputs(3, 2) == [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]
    assert promised_inputs(2, 3) == [(0, 0), (1, 2), (2, 1)]


def test_sampling_is_uniform(rng):
    support = promised_inputs(3, 2)
    draws = [sample_promised_input(3, 2, rng) for _ in range(10_000)]
    assert set(draws) == set(support)
    counts = np.array([draws.count(a) for a in support])
    expected = len(draws) / len(support)
    chi2 = ((counts - expected) ** 2 / expected).sum()
    df = len(support) - 1
    assert chi2 <= df + 3 * np.sqrt(2 * df)


@pytest.mark.parametrize("a,M,r", [((1, 1, 0), 2, 1), ((1, 1, 1, 1), 2, 0), ((2, 2, 2), 3, 2), ((0, 0), 2, 0)])
def test_referee(a, M, r):
    assert referee_target(a, M) == r


@pytest.mark.parametrize("a,M", [((1, 0, 0), 2), ((1, 1), 3), ((2, 0), 2)])
def test_referee_rejects(a, M):
    with pytest.raises(InvalidInputError):
        referee_target(a, M)


@pytest.mark.parametrize("backend", ["dense", "tableau"])
def test_quantum_always_wins(lat32, inst32, rng, backend):
    state = prepare_cat_dense(lat32, 2) if backend == "dense" else prepare_cat_tableau(lat32)
    for a in promised_inputs(3, 2):
        for _ in range(10):
            assert play_round_quantum(inst32, state, a, rng).won


def test_qutrit_always_wins(rng):
    lat = TorusLattice(2, 2)
    inst = straight_instance(lat, [0, 1], 0, modulus=3)
    cat = prepare_cat_dense(lat, 3)
    for a in promised_inputs(2, 3):
        for _ in range(10):
            assert play_round_quantum(inst, cat, a, rng).won


def test_backend_not_mutated(lat32, inst32, rng):
    tab = prepare_cat_tableau(lat32)
    before = tab.dump()
    play_round_quantum(inst32, tab, (1, 1, 0), rng)
    assert tab.dump() == before


def test_backend_mismatch(lat32, inst32, rng):
    with pytest.raises(BackendMismatchError):
        play_round_quantum(inst32, prepare_cat_tableau(TorusLattice(2, 2)), (0, 0, 0), rng)
    qutrit = straight_instance(TorusLattice(2, 2), [0, 1], 0, modulus=3)
    with pytest.raises(BackendMismatchError):
        play_round_quantum(qutrit, prepare_cat_tableau(TorusLattice(2, 2)), (0, 0), rng)


def test_product_state_wins_half(lat32, inst32):
    n = lat32.n_bonds
    zeros = Tableau.from_stabilizers([PauliString.z_string(n, [b]) for b in range(n)])
    stats = play_rounds(inst32, zeros, 10_000, seed=5)
    # exact value 1/2 from the closed form; 3 sigma band
    assert abs(stats.rate - 0.5) <= 3 * np.sqrt(0.25 / stats.rounds)
    assert win_probability_quantum_exact(inst32, DenseState.basis_state(2, [0] * n)) == pytest.approx(0.5)


def test_exact_fixed_points(lat32, inst32):
    assert win_probability_quantum_exact(inst32, prepare_cat_dense(lat32, 2)) == pytest.approx(1, abs=1e-9)
    n = lat32.n_bonds
    amps = np.zeros(2**n, complex)
    sigma = [0] * n
    flipped = list(sigma)
    for b in inst32.dual_loop.bonds:
        flipped[b] = 1
    amps[0] = 1 / np.sqrt(2)
    amps[int("".join(map(str, flipped)), 2)] = -1 / np.sqrt(2)
    assert win_probability_quantum_exact(inst32, DenseState(amps, 2, n)) == pytest.approx(0, abs=1e-9)


def test_exact_bounds(lat32, inst32, rng):
    for _ in range(5):
        breakdown = exact_win_breakdown(inst32, DenseState.random(2, lat32.n_bonds, rng))
        assert all(-1e-12 <= p <= 1 + 1e-12 for p in breakdown.values())


def test_play_rounds_reproducible(lat32, inst32):
    tab = prepare_cat_tableau(lat32)
    log_a, log_b, log_c = [], [], []
    play_rounds(inst32, tab, 40, seed=11, log=log_a)
    play_rounds(inst32, tab, 40, seed=11, log=log_b)
    play_rounds(inst32, tab, 40, seed=11, log=log_c, workers=2)
    assert log_a == log_b == log_c
    other = []
    play_rounds(inst32, tab, 40, seed=12, log=other)
    assert other != log_a


def test_round_json():
    line = RoundResult((1, 1, 0), (0, 1, 0), 1, True).to_json(3)
    assert json.loads(line) == {"round": 3, "input": [1, 1, 0], "outcomes": [0, 1, 0], "target": 1, "won": True}


def test_winstats():
    s = WinStats()
    s.add(RoundResult((0, 0), (0, 0), 0, True))
    s.add(RoundResult((1, 1), (0, 0), 1, False))
    t = WinStats()
    t.add(RoundResult((1, 1), (1, 0), 1, True))
    merged = s.merge(t)
    assert (merged.rounds, merged.wins, merged.losses) == (3, 2, 1)
    assert merged.per_input[(1, 1)] == [1, 2]
    lo, hi = merged.wilson_interval()
    assert 0 <= lo < 2 / 3 < hi <= 1
    perfect = WinStats(10_000, 10_000)
    assert perfect.wilson_interval()[0] > 0.9996


def test_classical_round_examples(inst32):
    zero = ClassicalStrategy(((0, 0),) * 3)
    assert play_round_classical(inst32, zero, (0, 0, 0)).won
    res = play_round_classical(inst32, zero, (1, 1, 0))
    assert res.target == 1 and not res.won


def test_best_three_team_strategy_wins_three_of_four(inst32):
    """Exhaustive over all 64 deterministic strategies."""
    best = 0
    for tables in itertools.product(itertools.product(range(2), repeat=2), repeat=3):
        strat = ClassicalStrategy(tables)
        wins = sum(play_round_classical(inst32, strat, a).won for a in promised_inputs(3, 2))
        best = max(best, wins)
    assert best == 3


def test_classical_shape_mismatch(inst32):
    with pytest.raises(ValueError):
        play_round_classical(inst32, ClassicalStrategy(((0, 0),) * 2), (0, 0))


def test_classical_with_constants():
    lat = TorusLattice(4, 2)
    inst = straight_instance(lat, [0, 1], 1)
    strat = ClassicalStrategy(((0, 1), (0, 0)), (1, 0))
    # y = (a0, 0, 1, 0): sum is a0 + 1
    res = play_round_classical(inst, strat, (1, 1))
    assert res.outcomes == (1, 0, 1, 0) and res.won is False
    assert play_round_classical(inst, strat, (0, 0)).outcomes == (0, 0, 1, 0)


def test_simultaneous_commuting_strategies():
    lat = TorusLattice(3, 3)
    v = straight_instance(lat, [0, 1, 2], 0)
    h = straight_instance(lat, [0, 1, 2], 0, direction="horizontal")
    full = prepare_full_cat(lat, 2)
    a_v, a_h = (1, 1, 0), (0, 1, 1)
    one = apply_strategy(h, apply_strategy(v, full, a_v), a_h)
    two = apply_strategy(v, apply_strategy(h, full, a_h), a_v)
    assert np.max(np.abs(one.amplitudes - two.amplitudes)) < 1e-12
    rng = np.random.default_rng(0)
    for _ in range(10):
        rv, rh = play_simultaneous(v, h, rng, full)
        assert rv.won and rh.won


def test_simultaneous_overlap_rejected():
    lat = TorusLattice(3, 3)
    h = straight_instance(lat, [0, 1, 2], 0, direction="horizontal")
    base = straight_instance(lat, [0, 1, 2], 0)
    # pushing the vertical game's dual loop across star (1, 1) picks up h(0, 1)
    dual = deform(base.dual_loop, star_loop(lat, 1, 1))
    v = GameInstance(lat, 2, base.teams, dual)
    assert validate_instance(v) == []
    with pytest.raises(InvalidConfigurationError, match="overlap"):
        play_simultaneous(v, h, np.random.default_rng(0))
