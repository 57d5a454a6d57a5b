import itertools
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toricgame.lattice import (
    DIRECT,
    DUAL,
    GameInstance,
    InvalidLatticeError,
    InvalidLoopError,
    Loop,
    NotEnoughColumnsError,
    TorusLattice,
    build_lattice,
    column_dual_loop,
    column_loop,
    deform,
    enumerate_instances,
    homology_class,
    instance_from_json,
    instance_to_json,
    is_closed,
    loop_from_bonds,
    orient_loop,
    plaquette_bonds,
    plaquette_loop,
    row_dual_loop,
    row_wilson_loop,
    star_bonds,
    star_loop,
    straight_instance,
    validate_instance,
)

dims = st.integers(2, 6)


def test_counts():
    lat = build_lattice(3, 2)
    assert (lat.n_bonds, lat.n_plaquettes, lat.n_stars) == (12, 6, 6)
    assert build_lattice(2, 2).n_bonds == 8


@pytest.mark.parametrize("lx,ly", [(1, 4), (4, 1), (0, 0)])
def test_too_small(lx, ly):
    with pytest.raises(InvalidLatticeError):
        build_lattice(lx, ly)


@given(dims, dims)
def test_bond_bijection(lx, ly):
    lat = TorusLattice(lx, ly)
    seen = set()
    for b in range(lat.n_bonds):
        o, x, y = lat.decode(b)
        assert lat.bond(o, x, y) == b
        seen.add((o, x, y))
    assert len(seen) == lat.n_bonds


def test_plaquette_and_star_examples():
    lat = TorusLattice(3, 2)
    assert set(plaquette_bonds(lat, 0, 0)) == {lat.h(0, 0), lat.h(0, 1), lat.v(0, 0), lat.v(1, 0)}
    assert set(star_bonds(lat, 0, 0)) == {lat.h(2, 0), lat.h(0, 0), lat.v(0, 1), lat.v(0, 0)}
    lat2 = TorusLattice(2, 2)
    face = plaquette_bonds(lat2, 1, 1)
    assert lat2.h(1, 0) in face and lat2.v(0, 1) in face
    with pytest.raises(ValueError):
        plaquette_bonds(lat, 3, 0)


@given(dims, dims)
@settings(max_examples=30)
def test_each_bond_in_two_cells(lx, ly):
    lat = TorusLattice(lx, ly)
    cells = list(itertools.product(range(lx), range(ly)))
    plaq = Counter(b for x, y in cells for b in plaquette_bonds(lat, x, y))
    star = Counter(b for x, y in cells for b in star_bonds(lat, x, y))
    # product of all plaquettes (resp. stars) is the identity: every bond twice
    assert set(plaq.values()) == {2} and len(plaq) == lat.n_bonds
    assert set(star.values()) == {2} and len(star) == lat.n_bonds


def test_star_plaquette_overlap_even():
    lat = TorusLattice(3, 2)
    cells = list(itertools.product(range(3), range(2)))
    for p in cells:
        for s in cells:
            assert len(set(plaquette_bonds(lat, *p)) & set(star_bonds(lat, *s))) in (0, 2)


def test_straight_loops(lat32):
    assert len(column_loop(lat32, 0)) == 2
    assert len(row_dual_loop(lat32, 1)) == 3
    for x, y in itertools.product(range(3), range(2)):
        assert column_loop(lat32, x).bond_set & row_dual_loop(lat32, y).bond_set == {lat32.v(x, y)}
    assert homology_class(lat32, column_loop(lat32, 0)) == (0, 1)
    assert homology_class(lat32, row_dual_loop(lat32, 0)) == (1, 0)
    assert homology_class(lat32, row_wilson_loop(lat32, 1)) == (1, 0)
    assert homology_class(lat32, column_dual_loop(lat32, 2)) == (0, 1)
    with pytest.raises(ValueError):
        column_loop(lat32, 3)


def test_contractible_loops(lat32):
    assert homology_class(lat32, plaquette_loop(lat32, 1, 1)) == (0, 0)
    assert homology_class(lat32, star_loop(lat32, 2, 0)) == (0, 0)


def test_open_loop_rejected(lat32):
    open_loop = Loop((lat32.v(0, 0),), DIRECT)
    assert not is_closed(lat32, open_loop)
    with pytest.raises(InvalidLoopError):
        homology_class(lat32, open_loop)


def _all_closed_loops(lat, kind):
    """Every closed unoriented loop, as bond subsets (small lattices only)."""
    cells = itertools.product(range(lat.lx), range(lat.ly))
    make = plaquette_bonds if kind == DIRECT else star_bonds
    gens = [frozenset(make(lat, x, y)) for x, y in cells]
    if kind == DIRECT:
        gens += [column_loop(lat, 0).bond_set, row_wilson_loop(lat, 0).bond_set]
    else:
        gens += [row_dual_loop(lat, 0).bond_set, column_dual_loop(lat, 0).bond_set]
    span = {frozenset()}
    for g in gens:
        span |= {s ^ g for s in span}
    return span


@pytest.mark.parametrize("lx,ly", [(3, 2), (3, 3)])
def test_intersection_parity_matches_homology(lx, ly):
    lat = TorusLattice(lx, ly)
    directs = [(d, homology_class(lat, Loop(tuple(sorted(d)), DIRECT))) for d in _all_closed_loops(lat, DIRECT)]
    duals = [(v, homology_class(lat, Loop(tuple(sorted(v)), DUAL))) for v in _all_closed_loops(lat, DUAL)]
    for d, wd in directs:
        for v, wv in duals:
            # direct (wx, wy) pairs with dual (wx', wy') as wx*wy' + wy*wx'
            assert len(d & v) % 2 == (wd[0] * wv[1] + wd[1] * wv[0]) % 2


def test_validate_ok_and_violations(lat32, inst32):
    assert validate_instance(inst32) == []
    clash = GameInstance(lat32, 2, (column_loop(lat32, 0), column_loop(lat32, 0)), inst32.dual_loop)
    assert any(v.startswith("teams not disjoint") for v in validate_instance(clash))

    lat = TorusLattice(3, 3)
    team = column_loop(lat, 1)
    dual = row_dual_loop(lat, 0)
    # adding the star at (1, 2) puts two more column-1 bonds on the dual loop
    wiggly = Loop(tuple(sorted(dual.bond_set ^ set(star_bonds(lat, 1, 2)))), DUAL)
    assert len(team.bond_set & wiggly.bond_set) == 3
    bad = GameInstance(lat, 2, (team,), wiggly)
    problems = validate_instance(bad)
    assert any("intersection count ≠ 1" in v for v in problems)
    # every violation is reported, including the team count
    assert any("at least 2 teams" in v for v in problems)


def test_validate_wrong_homology(lat32):
    inst = GameInstance(lat32, 2, (row_wilson_loop(lat32, 0), column_loop(lat32, 1)), row_dual_loop(lat32, 1))
    assert any("homology" in v for v in validate_instance(inst))


def test_enumerate_counts(lat32):
    assert len(enumerate_instances(lat32, 3)) == 2
    assert len(enumerate_instances(lat32, 2)) == 3 * 2
    with pytest.raises(NotEnoughColumnsError):
        enumerate_instances(lat32, 4)


def test_deformed_instances_valid(lat32):
    family = enumerate_instances(lat32, 3, deformations=True)
    assert len(family) > 2
    for inst in family:
        assert validate_instance(inst) == []


def test_star_deformation_symmetric_difference(lat32):
    """Dual loops of instances sharing teams differ by at most one star."""
    family = enumerate_instances(lat32, 3, deformations=True)
    stars = {frozenset(star_bonds(lat32, x, y)) for x in range(3) for y in range(2)}
    by_teams = {}
    for inst in family:
        by_teams.setdefault(tuple(t.bonds for t in inst.teams), []).append(inst.dual_loop.bond_set)
    checked = 0
    for duals in by_teams.values():
        for a, b in itertools.combinations(duals, 2):
            diff = a ^ b
            if diff in stars:
                checked += 1
                assert len(diff) == 4
    assert checked > 0


def test_deform_orientation_consistent(lat32):
    loop = deform(row_dual_loop(lat32, 0), star_loop(lat32, 1, 1))
    assert is_closed(lat32, loop)
    assert homology_class(lat32, loop) in ((1, 0), (-1, 0))


def test_orient_loop_roundtrip(lat32):
    loop = orient_loop(lat32, reversed(column_loop(lat32, 2).bonds), DIRECT)
    assert homology_class(lat32, loop) == (0, 1)
    with pytest.raises(InvalidLoopError):
        orient_loop(lat32, [lat32.v(0, 0), lat32.v(1, 0)], DIRECT)


def test_json_roundtrip(lat32, inst32):
    data = instance_to_json(inst32)
    assert data == {"lx": 3, "ly": 2, "M": 2, "teams": [[6, 9], [7, 10], [8, 11]], "dual_loop": [6, 7, 8]}
    back = instance_from_json(data)
    assert back.key() == inst32.key()
    with pytest.raises(ValueError):
        instance_from_json({"lx": 3})


def test_oriented_json_for_qutrits():
    lat = TorusLattice(2, 2)
    inst = straight_instance(lat, [0, 1], 0, modulus=3)
    back = instance_from_json(instance_to_json(inst))
    assert validate_instance(back) == []
    assert all(t.oriented for t in back.teams)


def test_unoriented_loop_needs_signs_for_qutrits():
    lat = TorusLattice(2, 2)
    teams = tuple(Loop(column_loop(lat, x).bonds, DIRECT) for x in range(2))
    inst = GameInstance(lat, 3, teams, row_dual_loop(lat, 0))
    assert any("orientation" in v for v in validate_instance(inst))
    assert loop_from_bonds(lat, teams[0].bonds, DIRECT, 3).oriented


def test_nonlocal_flag(lat32):
    assert straight_instance(lat32, [0, 1, 2], 0).is_nonlocal
    assert not straight_instance(lat32, [0, 1], 0).is_nonlocal
