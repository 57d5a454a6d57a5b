"""Torus geometry: bonds, plaquettes, stars, direct and dual loops, game instances.

Bonds are indexed ``orientation * lx * ly + y * lx + x`` with orientation 0 for
horizontal and 1 for vertical bonds.  The horizontal bond ``h(x, y)`` joins
vertex ``(x, y)`` to ``(x + 1, y)`` and the vertical bond ``v(x, y)`` joins
``(x, y)`` to ``(x, y + 1)``; both are oriented along those directions.

A direct loop lives on bonds (a string of clock / Z operators).  A dual loop
lives on the dual lattice and crosses bonds (a string of shift / X operators).
Orientation signs only matter for Z_M with M > 2:

* direct loop: ``+1`` when the bond is traversed along its orientation;
* dual loop: ``+1`` when a vertical bond is crossed towards ``+x`` or a
  horizontal bond is crossed towards ``-y``.

With these conventions the unitary plaquette ``C C C^dag C^dag`` (daggers on
the north and west bonds) and the unitary star ``S S S^dag S^dag`` (daggers on
the incoming west and south bonds) commute, and a star is the clockwise dual
loop around its vertex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

HORIZONTAL = 0
VERTICAL = 1

DIRECT = "direct"
DUAL = "dual"

VERTICAL_GAME = "vertical"
HORIZONTAL_GAME = "horizontal"


class InvalidLatticeError(ValueError):
    pass


class InvalidLoopError(ValueError):
    pass


class NotEnoughColumnsError(ValueError):
    pass


@dataclass(frozen=True)
class TorusLattice:
    lx: int
    ly: int

    def __post_init__(self):
        if not (isinstance(self.lx, int) and isinstance(self.ly, int)):
            raise InvalidLatticeError(f"lattice dimensions must be integers, got {self.lx!r}x{self.ly!r}")
        if self.lx < 2 or self.ly < 2:
            raise InvalidLatticeError(f"lattice dimensions must be >= 2, got {self.lx}x{self.ly}")

    @property
    def n_bonds(self) -> int:
        return 2 * self.lx * self.ly

    @property
    def n_plaquettes(self) -> int:
        return self.lx * self.ly

    @property
    def n_stars(self) -> int:
        return self.lx * self.ly

    def bond(self, orientation: int, x: int, y: int) -> int:
        """Bond id for ``(orientation, x, y)``; coordinates wrap around the torus."""
        if orientation not in (HORIZONTAL, VERTICAL):
            raise ValueError(f"orientation must be 0 or 1, got {orientation}")
        return orientation * self.lx * self.ly + (y % self.ly) * self.lx + (x % self.lx)

    def h(self, x: int, y: int) -> int:
        return self.bond(HORIZONTAL, x, y)

    def v(self, x: int, y: int) -> int:
        return self.bond(VERTICAL, x, y)

    def decode(self, bond: int) -> tuple[int, int, int]:
        self.check_bond(bond)
        orientation, rest = divmod(bond, self.lx * self.ly)
        y, x = divmod(rest, self.lx)
        return orientation, x, y

    def check_bond(self, bond: int) -> None:
        if not 0 <= bond < self.n_bonds:
            raise ValueError(f"bond id {bond} out of range [0, {self.n_bonds})")

    def _check_cell(self, x: int, y: int) -> None:
        if not (0 <= x < self.lx and 0 <= y < self.ly):
            raise ValueError(f"coordinates ({x}, {y}) outside {self.lx}x{self.ly} lattice")

    def bond_label(self, bond: int) -> str:
        o, x, y = self.decode(bond)
        return f"{'hv'[o]}({x},{y})"

    # endpoints used for loop tracing: (tail, head) along the sign +1 direction
    def _vertex_ends(self, bond: int) -> tuple[tuple[int, int], tuple[int, int]]:
        o, x, y = self.decode(bond)
        if o == HORIZONTAL:
            return (x, y), ((x + 1) % self.lx, y)
        return (x, y), (x, (y + 1) % self.ly)

    def _plaquette_ends(self, bond: int) -> tuple[tuple[int, int], tuple[int, int]]:
        o, x, y = self.decode(bond)
        if o == VERTICAL:
            return ((x - 1) % self.lx, y), (x, y)
        return (x, y), (x, (y - 1) % self.ly)


def build_lattice(lx: int, ly: int) -> TorusLattice:
    return TorusLattice(lx, ly)


def plaquette_bonds(lattice: TorusLattice, x: int, y: int) -> tuple[int, int, int, int]:
    """Bonds around face ``(x, y)`` in the order south, north, west, east."""
    lattice._check_cell(x, y)
    return (lattice.h(x, y), lattice.h(x, y + 1), lattice.v(x, y), lattice.v(x + 1, y))


def star_bonds(lattice: TorusLattice, x: int, y: int) -> tuple[int, int, int, int]:
    """Bonds meeting vertex ``(x, y)`` in the order west, east, south, north."""
    lattice._check_cell(x, y)
    return (lattice.h(x - 1, y), lattice.h(x, y), lattice.v(x, y - 1), lattice.v(x, y))


PLAQUETTE_SIGNS = (1, -1, -1, 1)
STAR_SIGNS = (-1, 1, -1, 1)


@dataclass(frozen=True)
class Loop:
    """A closed string of bonds.

    ``signs`` holds one orientation sign per bond.  Loops read from plain bond
    lists are ``oriented=False``: they carry all ``+1`` signs and are only
    meaningful mod 2.
    """

    bonds: tuple[int, ...]
    kind: str
    signs: tuple[int, ...] = None
    oriented: bool = False

    def __post_init__(self):
        object.__setattr__(self, "bonds", tuple(int(b) for b in self.bonds))
        if self.kind not in (DIRECT, DUAL):
            raise InvalidLoopError(f"loop kind must be {DIRECT!r} or {DUAL!r}, got {self.kind!r}")
        if self.signs is None:
            object.__setattr__(self, "signs", (1,) * len(self.bonds))
        else:
            object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.signs) != len(self.bonds):
            raise InvalidLoopError("signs and bonds differ in length")
        if any(s not in (1, -1) for s in self.signs):
            raise InvalidLoopError("orientation signs must be +1 or -1")
        if len(set(self.bonds)) != len(self.bonds):
            raise InvalidLoopError("loop repeats a bond")

    @property
    def bond_set(self) -> frozenset[int]:
        return frozenset(self.bonds)

    def sign_of(self, bond: int) -> int:
        return self.signs[self.bonds.index(bond)]

    def coefficients(self) -> dict[int, int]:
        return dict(zip(self.bonds, self.signs))

    def reversed(self) -> Loop:
        return Loop(self.bonds, self.kind, tuple(-s for s in self.signs), self.oriented)

    def __len__(self):
        return len(self.bonds)


def column_loop(lattice: TorusLattice, x: int) -> Loop:
    """Direct loop through the vertical bonds of column ``x``, oriented upward."""
    lattice._check_cell(x, 0)
    return Loop(tuple(lattice.v(x, y) for y in range(lattice.ly)), DIRECT, oriented=True)


def row_wilson_loop(lattice: TorusLattice, y: int) -> Loop:
    """Direct loop through the horizontal bonds of row ``y``, oriented rightward."""
    lattice._check_cell(0, y)
    return Loop(tuple(lattice.h(x, y) for x in range(lattice.lx)), DIRECT, oriented=True)


def row_dual_loop(lattice: TorusLattice, y: int) -> Loop:
    """Dual loop crossing every vertical bond of row ``y``, running rightward."""
    lattice._check_cell(0, y)
    return Loop(tuple(lattice.v(x, y) for x in range(lattice.lx)), DUAL, oriented=True)


def column_dual_loop(lattice: TorusLattice, x: int) -> Loop:
    """Dual loop crossing every horizontal bond of column ``x``."""
    lattice._check_cell(x, 0)
    return Loop(tuple(lattice.h(x, y) for y in range(lattice.ly)), DUAL, oriented=True)


def plaquette_loop(lattice: TorusLattice, x: int, y: int) -> Loop:
    return Loop(plaquette_bonds(lattice, x, y), DIRECT, PLAQUETTE_SIGNS, oriented=True)


def star_loop(lattice: TorusLattice, x: int, y: int) -> Loop:
    return Loop(star_bonds(lattice, x, y), DUAL, STAR_SIGNS, oriented=True)


def _pairing(loop: Loop, cell: Sequence[int], cell_signs: Sequence[int]) -> int:
    coeff = loop.coefficients()
    return sum(coeff[b] * s for b, s in zip(cell, cell_signs) if b in coeff)


def is_closed(lattice: TorusLattice, loop: Loop) -> bool:
    """Closed-loop test: every star (direct) or plaquette (dual) pairs to zero.

    Oriented loops must balance exactly, unoriented ones mod 2.
    """
    for b in loop.bonds:
        lattice.check_bond(b)
    if loop.kind == DIRECT:
        cells, signs = (star_bonds(lattice, x, y) for x, y in _cells(lattice)), STAR_SIGNS
    else:
        cells, signs = (plaquette_bonds(lattice, x, y) for x, y in _cells(lattice)), PLAQUETTE_SIGNS
    for cell in cells:
        total = _pairing(loop, cell, signs)
        if (total != 0) if loop.oriented else (total % 2 != 0):
            return False
    return True


def _cells(lattice: TorusLattice):
    return ((x, y) for y in range(lattice.ly) for x in range(lattice.lx))


def homology_class(lattice: TorusLattice, loop: Loop, modulus: int | None = None) -> tuple[int, int]:
    """Winding numbers ``(wx, wy)`` of a closed loop.

    Direct loops count signed crossings of the cuts ``x = lx - 1/2`` and
    ``y = ly - 1/2``.  Dual loops count signed crossings of the lattice lines
    ``x = 0`` and ``y = 0``.  Unoriented loops are reduced mod 2.
    """
    if not is_closed(lattice, loop):
        raise InvalidLoopError("loop is not closed")
    coeff = loop.coefficients()
    if loop.kind == DIRECT:
        wx = sum(coeff.get(lattice.h(lattice.lx - 1, y), 0) for y in range(lattice.ly))
        wy = sum(coeff.get(lattice.v(x, lattice.ly - 1), 0) for x in range(lattice.lx))
    else:
        wx = sum(coeff.get(lattice.v(0, y), 0) for y in range(lattice.ly))
        wy = sum(coeff.get(lattice.h(x, 0), 0) for x in range(lattice.lx))
    if not loop.oriented:
        # unoriented loops only carry parity information
        modulus = 2
    if modulus is not None:
        wx, wy = wx % modulus, wy % modulus
    return wx, wy


def orient_loop(lattice: TorusLattice, bonds: Iterable[int], kind: str) -> Loop:
    """Trace a simple closed cycle and assign orientation signs.

    The direction is chosen so the first nonzero winding number is positive.
    Raises ``InvalidLoopError`` when the bonds do not form one simple cycle.
    """
    bonds = tuple(int(b) for b in bonds)
    if not bonds:
        raise InvalidLoopError("empty loop")
    ends = lattice._vertex_ends if kind == DIRECT else lattice._plaquette_ends
    incident: dict[tuple[int, int], list[int]] = {}
    for b in bonds:
        lattice.check_bond(b)
        for node in ends(b):
            incident.setdefault(node, []).append(b)
    if any(len(bs) != 2 for bs in incident.values()):
        raise InvalidLoopError("bonds do not form a simple cycle (a node has degree != 2)")

    signs: dict[int, int] = {}
    current, (tail, head) = bonds[0], ends(bonds[0])
    signs[current] = 1
    node = head
    while len(signs) < len(bonds):
        a, b = incident[node]
        nxt = b if a == current else a
        if nxt in signs:
            break
        tail, head = ends(nxt)
        if tail == node:
            signs[nxt], node = 1, head
        else:
            signs[nxt], node = -1, tail
        current = nxt
    if len(signs) != len(bonds):
        raise InvalidLoopError("bonds form more than one cycle")

    loop = Loop(bonds, kind, tuple(signs[b] for b in bonds), oriented=True)
    wx, wy = homology_class(lattice, loop)
    first = wx if wx != 0 else wy
    if first < 0:
        loop = loop.reversed()
    return loop


def loop_from_bonds(lattice: TorusLattice, bonds: Iterable[int], kind: str, modulus: int = 2) -> Loop:
    """Build a loop from a plain bond list; orientation is traced when M > 2."""
    bonds = tuple(int(b) for b in bonds)
    if modulus > 2:
        return orient_loop(lattice, bonds, kind)
    return Loop(bonds, kind)


def deform(loop: Loop, cell: Loop) -> Loop:
    """Multiply ``loop`` by a plaquette (direct) or star (dual) so shared bonds cancel."""
    if loop.kind != cell.kind:
        raise InvalidLoopError("can only deform by a cell of the same kind")
    base, other = loop.coefficients(), cell.coefficients()
    shared = base.keys() & other.keys()
    if not shared:
        raise InvalidLoopError("cell does not touch the loop")
    b0 = min(shared)
    eps = -base[b0] * other[b0]
    combined = dict(base)
    for b, s in other.items():
        combined[b] = combined.get(b, 0) + eps * s
    if loop.oriented:
        kept = {b: s for b, s in combined.items() if s != 0}
        if any(abs(s) != 1 for s in kept.values()):
            raise InvalidLoopError("deformation retraces a bond")
    else:
        kept = {b: 1 for b, s in combined.items() if s % 2 != 0}
    order = sorted(kept)
    return Loop(tuple(order), loop.kind, tuple(kept[b] for b in order), loop.oriented)


@dataclass(frozen=True)
class GameInstance:
    """One verifier choice: team loops, the dual loop and the modulus.

    ``direction`` is ``"vertical"`` for the standard game (teams wind in y, the
    dual loop in x) and ``"horizontal"`` for its reflection.
    """

    lattice: TorusLattice
    modulus: int
    teams: tuple[Loop, ...]
    dual_loop: Loop
    direction: str = VERTICAL_GAME

    def __post_init__(self):
        object.__setattr__(self, "teams", tuple(self.teams))

    @property
    def n_teams(self) -> int:
        return len(self.teams)

    @property
    def is_nonlocal(self) -> bool:
        return self.n_teams >= 3

    @property
    def intersections(self) -> list[int]:
        out = []
        dual = self.dual_loop.bond_set
        for i, team in enumerate(self.teams):
            shared = team.bond_set & dual
            if len(shared) != 1:
                raise InvalidLoopError(f"team {i} meets the dual loop in {len(shared)} bonds")
            out.append(next(iter(shared)))
        return out

    def key(self) -> tuple:
        return (
            self.direction,
            self.modulus,
            tuple(sorted(tuple(sorted(t.bonds)) for t in self.teams)),
            tuple(sorted(self.dual_loop.bonds)),
        )


def _expected_classes(direction: str) -> tuple[tuple[int, int], tuple[int, int]]:
    if direction == VERTICAL_GAME:
        return (0, 1), (1, 0)
    return (1, 0), (0, 1)


def _matches_class(found: tuple[int, int], unit: tuple[int, int], modulus: int) -> bool:
    found = (found[0] % modulus, found[1] % modulus)
    plus = (unit[0] % modulus, unit[1] % modulus)
    minus = (-unit[0] % modulus, -unit[1] % modulus)
    return found in (plus, minus)


def validate_instance(instance: GameInstance) -> list[str]:
    """Every violated instance invariant; an empty list means the instance is valid."""
    violations = []
    lat, M = instance.lattice, instance.modulus
    if not isinstance(M, int) or M < 2:
        violations.append(f"modulus must be an integer >= 2, got {M!r}")
        M = 2
    if instance.direction not in (VERTICAL_GAME, HORIZONTAL_GAME):
        violations.append(f"unknown direction {instance.direction!r}")
        return violations
    if instance.n_teams < 2:
        violations.append(f"need at least 2 teams, got {instance.n_teams}")

    team_class, dual_class = _expected_classes(instance.direction)
    loops = [(f"team {i}", t, DIRECT, team_class) for i, t in enumerate(instance.teams)]
    loops.append(("dual loop", instance.dual_loop, DUAL, dual_class))
    for name, loop, kind, unit in loops:
        bad = [b for b in loop.bonds if not 0 <= b < lat.n_bonds]
        if bad:
            violations.append(f"{name} has bond ids out of range: {bad}")
            continue
        if loop.kind != kind:
            violations.append(f"{name} must be a {kind} loop, got {loop.kind}")
        if M > 2 and not loop.oriented:
            violations.append(f"{name} needs orientation signs for M = {M}")
        if not is_closed(lat, loop):
            violations.append(f"{name} is not a closed loop")
            continue
        found = homology_class(lat, loop)
        if not _matches_class(found, unit, M if loop.oriented else 2):
            violations.append(f"{name} has homology class {found}, expected ±{unit}")

    for (i, a), (j, b) in itertools.combinations(enumerate(instance.teams), 2):
        common = a.bond_set & b.bond_set
        if common:
            violations.append(f"teams not disjoint: teams {i} and {j} share bonds {sorted(common)}")

    dual = instance.dual_loop.bond_set
    for i, team in enumerate(instance.teams):
        n = len(team.bond_set & dual)
        if n != 1:
            violations.append(f"intersection count ≠ 1: team {i} meets the dual loop in {n} bonds")
    return violations


def straight_instance(
    lattice: TorusLattice,
    lines: Sequence[int],
    dual_index: int,
    modulus: int = 2,
    direction: str = VERTICAL_GAME,
) -> GameInstance:
    """Straight teams on columns ``lines`` and the straight dual loop at ``dual_index``.

    For ``direction="horizontal"`` teams sit on rows and the dual loop on a column.
    """
    if direction == VERTICAL_GAME:
        teams = tuple(column_loop(lattice, x) for x in lines)
        dual = row_dual_loop(lattice, dual_index)
    else:
        teams = tuple(row_wilson_loop(lattice, y) for y in lines)
        dual = column_dual_loop(lattice, dual_index)
    return GameInstance(lattice, modulus, teams, dual, direction)


def enumerate_instances(
    lattice: TorusLattice,
    T: int,
    deformations: bool = False,
    modulus: int = 2,
) -> list[GameInstance]:
    """Straight instances with ``T`` column teams, optionally with single-cell deformations.

    A deformed instance differs from a straight one by moving the dual loop
    across one star or one team across one plaquette.  Only deformations that
    keep every instance invariant are emitted.
    """
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    if T > lattice.lx:
        raise NotEnoughColumnsError(f"cannot place {T} disjoint column teams on {lattice.lx} columns")
    out: list[GameInstance] = []
    seen: set[tuple] = set()

    def emit(inst: GameInstance) -> None:
        key = inst.key()
        if key not in seen and not validate_instance(inst):
            seen.add(key)
            out.append(inst)

    straight = [
        straight_instance(lattice, cols, y, modulus)
        for cols in itertools.combinations(range(lattice.lx), T)
        for y in range(lattice.ly)
    ]
    for inst in straight:
        emit(inst)
    if not deformations:
        return out

    for inst in straight:
        for x, y in _cells(lattice):
            star = star_loop(lattice, x, y)
            if star.bond_set & inst.dual_loop.bond_set:
                emit(GameInstance(lattice, modulus, inst.teams, deform(inst.dual_loop, star)))
        for i, team in enumerate(inst.teams):
            for x, y in _cells(lattice):
                plaq = plaquette_loop(lattice, x, y)
                if not plaq.bond_set & team.bond_set:
                    continue
                teams = list(inst.teams)
                teams[i] = deform(team, plaq)
                emit(GameInstance(lattice, modulus, tuple(teams), inst.dual_loop))
    return out


def instance_family(lattice: TorusLattice, deformations: bool = True, modulus: int = 2) -> list[GameInstance]:
    """All instances from ``enumerate_instances`` for every team count 2..lx."""
    family = []
    for T in range(2, lattice.lx + 1):
        family.extend(enumerate_instances(lattice, T, deformations, modulus))
    return family


def instance_to_json(instance: GameInstance) -> dict:
    data = {
        "lx": instance.lattice.lx,
        "ly": instance.lattice.ly,
        "M": instance.modulus,
        "teams": [list(t.bonds) for t in instance.teams],
        "dual_loop": list(instance.dual_loop.bonds),
    }
    if instance.direction != VERTICAL_GAME:
        data["direction"] = instance.direction
    return data


def instance_from_json(data: dict) -> GameInstance:
    """Parse the instance schema ``{"lx", "ly", "M", "teams", "dual_loop"}``.

    Raises ``ValueError`` on malformed input; call ``validate_instance`` for
    the game invariants.
    """
    try:
        lattice = TorusLattice(int(data["lx"]), int(data["ly"]))
        M = int(data.get("M", 2))
        teams_raw = data["teams"]
        dual_raw = data["dual_loop"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance JSON: {exc}") from exc
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    teams = tuple(loop_from_bonds(lattice, t, DIRECT, M) for t in teams_raw)
    dual = loop_from_bonds(lattice, dual_raw, DUAL, M)
    return GameInstance(lattice, M, teams, dual, data.get("direction", VERTICAL_GAME))
