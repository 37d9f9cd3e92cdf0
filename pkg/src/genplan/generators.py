"""Instance generators for Blocksworld, grid navigation and sliding puzzles,
plus the exhaustive/sampled families used to check the bundled examples.

Initial-state distributions
---------------------------
* ``blocksworld(n, seed)``: a uniformly random permutation of the blocks is
  cut into towers at random positions (each gap is a cut with probability 1/2).
  The arm is always empty.
* ``q_on(n, seed)`` / ``q_tower(n, seed)``: rejection sampling over
  ``blocksworld`` until the family condition holds.
* ``sliding_puzzle``: a uniformly random placement of tiles and blank.
  Every placement is solvable for a single-tile goal on grids of at least 2x2.
"""
from __future__ import annotations

import itertools
import random
from functools import lru_cache

from .strips import Atom, GroundAction, Instance, InstanceError

BLOCK_NAMES = "abcdefghijklmnopqrstuvw"


class InvalidParamsError(InstanceError):
    pass


# ------------------------------------------------------------- blocksworld

@lru_cache(maxsize=None)
def blocksworld_actions(blocks: tuple[str, ...]) -> tuple[GroundAction, ...]:
    """Stack/Unstack/Pickup/Putdown grounded over distinct blocks.

    Cached so that instances over the same blocks share one action tuple.
    """
    acts = []
    for x, y in itertools.permutations(blocks, 2):
        acts.append(GroundAction(
            "unstack", (x, y),
            frozenset({Atom("on", (x, y)), Atom("clear", (x,)), Atom("armempty")}),
            frozenset({Atom("holding", (x,)), Atom("clear", (y,))}),
            frozenset({Atom("on", (x, y)), Atom("clear", (x,)), Atom("armempty")})))
    for x, y in itertools.permutations(blocks, 2):
        acts.append(GroundAction(
            "stack", (x, y),
            frozenset({Atom("holding", (x,)), Atom("clear", (y,))}),
            frozenset({Atom("on", (x, y)), Atom("clear", (x,)), Atom("armempty")}),
            frozenset({Atom("holding", (x,)), Atom("clear", (y,))})))
    for x in blocks:
        acts.append(GroundAction(
            "pickup", (x,),
            frozenset({Atom("ontable", (x,)), Atom("clear", (x,)), Atom("armempty")}),
            frozenset({Atom("holding", (x,))}),
            frozenset({Atom("ontable", (x,)), Atom("clear", (x,)), Atom("armempty")})))
    for x in blocks:
        acts.append(GroundAction(
            "putdown", (x,),
            frozenset({Atom("holding", (x,))}),
            frozenset({Atom("ontable", (x,)), Atom("clear", (x,)), Atom("armempty")}),
            frozenset({Atom("holding", (x,))})))
    return tuple(acts)


def towers_state(towers, held: str | None = None) -> frozenset[Atom]:
    """State for ``towers`` (each listed bottom to top) and an optional held block."""
    atoms = set()
    for tower in towers:
        if not tower:
            continue
        atoms.add(Atom("ontable", (tower[0],)))
        for below, above in zip(tower, tower[1:]):
            atoms.add(Atom("on", (above, below)))
        atoms.add(Atom("clear", (tower[-1],)))
    atoms.add(Atom("holding", (held,)) if held else Atom("armempty"))
    return frozenset(atoms)


def state_towers(s: frozenset[Atom]) -> list[list[str]]:
    """Inverse of :func:`towers_state` for well-formed states (held block ignored)."""
    above = {a.args[1]: a.args[0] for a in s if a.pred == "on"}
    towers = []
    for base in sorted(a.args[0] for a in s if a.pred == "ontable"):
        tower = [base]
        while tower[-1] in above:
            tower.append(above[tower[-1]])
        towers.append(tower)
    return towers


def tower_configurations(blocks):
    """Every arm-empty configuration of ``blocks`` as a sorted list of towers."""
    blocks = tuple(blocks)
    if not blocks:
        yield []
        return
    first, rest = blocks[0], blocks[1:]
    for config in tower_configurations(rest):
        # first block alone
        yield sorted([[first]] + [list(t) for t in config])
        # or inserted at any height of an existing tower
        for i, tower in enumerate(config):
            for pos in range(len(tower) + 1):
                new = [list(t) for t in config]
                new[i] = tower[:pos] + [first] + tower[pos:]
                yield sorted(new)


def blocksworld_instance(towers, goal, *, name="", params=(), goal_test=None, blocks=None) -> Instance:
    blocks = tuple(sorted(blocks or [b for t in towers for b in t]))
    return Instance(frozenset(blocks), towers_state(towers), frozenset(goal),
                    blocksworld_actions(blocks), "blocksworld", name, tuple(params), goal_test)


def random_towers(blocks, rng: random.Random) -> list[list[str]]:
    order = list(blocks)
    rng.shuffle(order)
    towers = [[order[0]]]
    for b in order[1:]:
        if rng.random() < 0.5:
            towers.append([b])
        else:
            towers[-1].append(b)
    return sorted(towers)


def blocksworld(n: int, seed: int = 0, goal=None) -> Instance:
    if n < 1:
        raise InvalidParamsError("blocksworld needs at least one block")
    rng = random.Random(seed)
    blocks = BLOCK_NAMES[:n]
    towers = random_towers(blocks, rng)
    if goal is None:
        goal = [Atom("clear", (rng.choice(blocks),))]
    return blocksworld_instance(towers, goal, name=f"bw-{n}-s{seed}")


def _tower_of(towers, b):
    for t in towers:
        if b in t:
            return t
    raise KeyError(b)


def q_on_condition(towers, x, y) -> bool:
    tx, ty = _tower_of(towers, x), _tower_of(towers, y)
    return tx is not ty and tx[-1] != x and ty[-1] != y


def q_tower_condition(towers, x) -> bool:
    tx = _tower_of(towers, x)
    return len(towers) > 1 and tx[0] != x and tx[-1] != x


def q_on(n: int, seed: int = 0) -> Instance:
    if n < 4:
        raise InvalidParamsError("q_on instances need at least 4 blocks")
    rng = random.Random(seed)
    blocks = BLOCK_NAMES[:n]
    while True:
        towers = random_towers(blocks, rng)
        x, y = rng.sample(blocks, 2)
        if q_on_condition(towers, x, y):
            return blocksworld_instance(towers, [Atom("on", (x, y))], name=f"qon-{n}-s{seed}")


def q_tower(n: int, seed: int = 0, x_at_bottom: bool = False) -> Instance:
    if n < 4:
        raise InvalidParamsError("q_tower instances need at least 4 blocks")
    rng = random.Random(seed)
    blocks = BLOCK_NAMES[:n]
    while True:
        towers = random_towers(blocks, rng)
        x = rng.choice(blocks)
        if q_tower_condition(towers, x):
            return _tower_instance(towers, x, x_at_bottom, f"qtower-{n}-s{seed}")


def _tower_instance(towers, x, x_at_bottom, name):
    goal = [Atom("armempty")]
    if x_at_bottom:
        goal.append(Atom("ontable", (x,)))
    return blocksworld_instance(towers, goal, name=name, params=[("x", x)],
                                goal_test="single-tower")


# ------------------------------------------------------------------- grids

def grid(n: int, m: int, start=(0, 0), goal=None) -> Instance:
    """Agent on an ``n`` x ``m`` grid (x in [0,n), y in [0,m)) with atoms at(x,y)."""
    if n < 1 or m < 1:
        raise InvalidParamsError("grid dimensions must be >= 1")
    goal = goal if goal is not None else (n - 1, m - 1)
    for (px, py) in (start, goal):
        if not (0 <= px < n and 0 <= py < m):
            raise InvalidParamsError(f"cell {(px, py)} outside {n}x{m} grid")
    coords = tuple(str(i) for i in range(max(n, m)))
    return Instance(frozenset(coords), frozenset({Atom("at", (str(start[0]), str(start[1])))}),
                    frozenset({Atom("at", (str(goal[0]), str(goal[1])))}),
                    grid_actions(n, m), "grid",
                    f"grid-{n}x{m}-{start[0]}.{start[1]}-{goal[0]}.{goal[1]}")


def _adjacent_pairs(n, m):
    for x in range(n):
        for y in range(m):
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                u, v = x + dx, y + dy
                if 0 <= u < n and 0 <= v < m:
                    yield (x, y), (u, v)


@lru_cache(maxsize=None)
def grid_actions(n: int, m: int) -> tuple[GroundAction, ...]:
    acts = []
    for (x, y), (u, v) in _adjacent_pairs(n, m):
        src, dst = Atom("at", (str(x), str(y))), Atom("at", (str(u), str(v)))
        acts.append(GroundAction("move", (str(x), str(y), str(u), str(v)),
                                 frozenset({src}), frozenset({dst}), frozenset({src})))
    return tuple(acts)


# --------------------------------------------------------- sliding puzzles

def tile_names(n: int, m: int) -> tuple[str, ...]:
    return tuple(f"t{i}" for i in range(1, n * m))


@lru_cache(maxsize=None)
def puzzle_actions(n: int, m: int) -> tuple[GroundAction, ...]:
    acts = []
    for t in tile_names(n, m):
        for (x, y), (u, v) in _adjacent_pairs(n, m):
            cx, cy, bx, by = str(x), str(y), str(u), str(v)
            acts.append(GroundAction(
                "move", (t, cx, cy, bx, by),
                frozenset({Atom("at", (t, cx, cy)), Atom("atB", (bx, by))}),
                frozenset({Atom("at", (t, bx, by)), Atom("atB", (cx, cy))}),
                frozenset({Atom("at", (t, cx, cy)), Atom("atB", (bx, by))})))
    return tuple(acts)


def puzzle_instance(n, m, placement, tile, target, name="") -> Instance:
    """``placement`` lists the occupant of each cell in row-major (y, x) order; None is the blank."""
    cells = [(x, y) for y in range(m) for x in range(n)]
    atoms = set()
    for (x, y), occ in zip(cells, placement):
        if occ is None:
            atoms.add(Atom("atB", (str(x), str(y))))
        else:
            atoms.add(Atom("at", (occ, str(x), str(y))))
    objects = frozenset(tile_names(n, m)) | {str(i) for i in range(max(n, m))}
    goal = frozenset({Atom("at", (tile, str(target[0]), str(target[1])))})
    return Instance(objects, frozenset(atoms), goal, puzzle_actions(n, m), "slide", name)


def sliding_puzzle(n: int = 3, m: int = 3, seed: int = 0, tile=None, target=None) -> Instance:
    if n < 2 or m < 2:
        raise InvalidParamsError("sliding puzzles need at least a 2x2 board")
    rng = random.Random(seed)
    occupants = list(tile_names(n, m)) + [None]
    rng.shuffle(occupants)
    tile = tile or rng.choice(tile_names(n, m))
    target = target or (rng.randrange(n), rng.randrange(m))
    if tile not in tile_names(n, m) or not (0 <= target[0] < n and 0 <= target[1] < m):
        raise InvalidParamsError("tile or target outside the board")
    return puzzle_instance(n, m, occupants, tile, target, name=f"slide-{n}x{m}-s{seed}")


# ---------------------------------------------------------------- dispatch

GENERATORS = {
    "blocksworld": blocksworld,
    "q_on": q_on,
    "q_tower": q_tower,
    "grid": grid,
    "slide": sliding_puzzle,
}


def generate_instance(domain: str, **params) -> Instance:
    try:
        gen = GENERATORS[domain]
    except KeyError:
        raise InvalidParamsError(f"unknown domain {domain!r}; known: {sorted(GENERATORS)}") from None
    try:
        return gen(**params)
    except TypeError as exc:
        raise InvalidParamsError(str(exc)) from None


# ---------------------------------------------------------------- families

def qclear_family(max_blocks: int = 4, *, require_above: bool = True) -> list[Instance]:
    """Arm-empty Blocksworld instances with goal clear(x), every configuration and target."""
    out = []
    for n in range(1, max_blocks + 1):
        blocks = BLOCK_NAMES[:n]
        for towers in tower_configurations(blocks):
            for x in blocks:
                if require_above and _tower_of(towers, x)[-1] == x:
                    continue
                out.append(blocksworld_instance(
                    towers, [Atom("clear", (x,))], blocks=blocks,
                    name=f"qclear-{_config_tag(towers)}-x{x}"))
    return out


def qon_family(max_blocks: int = 5) -> list[Instance]:
    out = []
    for n in range(4, max_blocks + 1):
        blocks = BLOCK_NAMES[:n]
        for towers in tower_configurations(blocks):
            for x, y in itertools.permutations(blocks, 2):
                if q_on_condition(towers, x, y):
                    out.append(blocksworld_instance(
                        towers, [Atom("on", (x, y))], blocks=blocks,
                        name=f"qon-{_config_tag(towers)}-{x}{y}"))
    return out


def qtower_family(max_blocks: int = 5, x_at_bottom: bool = False) -> list[Instance]:
    out = []
    for n in range(4, max_blocks + 1):
        blocks = BLOCK_NAMES[:n]
        for towers in tower_configurations(blocks):
            for x in blocks:
                if q_tower_condition(towers, x):
                    tag = "qtowerb" if x_at_bottom else "qtower"
                    out.append(_tower_instance(towers, x, x_at_bottom,
                                               f"{tag}-{_config_tag(towers)}-x{x}"))
    return out


def qmove_family(max_n: int = 6, max_m: int | None = None) -> list[Instance]:
    max_m = max_n if max_m is None else max_m
    out = []
    for n in range(1, max_n + 1):
        for m in range(1, max_m + 1):
            cells = [(x, y) for x in range(n) for y in range(m)]
            for start in cells:
                for goal in cells:
                    out.append(grid(n, m, start, goal))
    return out


def qslide_exhaustive_family(boards=((2, 2), (2, 3), (3, 2))) -> list[Instance]:
    """Small boards: every (tile, target) pair from one fixed initial placement.

    All placements of the same parity share one reachable set, so a single
    initial placement per board covers every reachable state of that parity.
    """
    out = []
    for n, m in boards:
        tiles = tile_names(n, m)
        placement = list(tiles) + [None]
        for tile in tiles:
            for target in [(x, y) for y in range(m) for x in range(n)]:
                out.append(puzzle_instance(n, m, placement, tile, target,
                                           name=f"slide-{n}x{m}-{tile}-{target[0]}.{target[1]}"))
    return out


def qslide_sampled_family(count: int = 500, n: int = 3, m: int = 3, seed: int = 0) -> list[Instance]:
    rng = random.Random(seed)
    return [sliding_puzzle(n, m, seed=rng.randrange(2 ** 31)) for _ in range(count)]


def _config_tag(towers) -> str:
    return "_".join("".join(t) for t in towers)
