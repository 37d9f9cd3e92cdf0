"""Ground STRIPS instances: atoms, actions, parsing, successor function and
breadth-first reachability.

States are plain ``frozenset`` objects of :class:`Atom`.
"""
from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Iterator, NamedTuple

DEFAULT_CAP = 200_000


class InstanceError(ValueError):
    pass


class ParseError(InstanceError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}" if line else message)


class UndeclaredObjectError(InstanceError):
    pass


class UndeclaredPredicateError(InstanceError):
    pass


class InconsistentActionError(InstanceError):
    pass


class InapplicableActionError(InstanceError):
    pass


class Atom(NamedTuple):
    pred: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.pred}({','.join(self.args)})" if self.args else self.pred


State = frozenset  # frozenset[Atom]


def atom(pred: str, *args: str) -> Atom:
    return Atom(pred, tuple(args))


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: frozenset[Atom]
    add: frozenset[Atom]
    delete: frozenset[Atom]

    def __post_init__(self):
        clash = self.add & self.delete
        if clash:
            raise InconsistentActionError(
                f"{self}: atoms both added and deleted: {sorted(map(str, clash))}")
        # hashing dominates search loops; compute once
        object.__setattr__(self, "_hash", hash((self.name, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.args)})"


@dataclass(frozen=True)
class Instance:
    objects: frozenset[str]
    init: frozenset[Atom]
    goal: frozenset[Atom]
    actions: tuple[GroundAction, ...]
    domain_tag: str = "unknown"
    name: str = ""
    params: tuple[tuple[str, str], ...] = ()
    goal_test: str | None = None

    def __post_init__(self):
        _validate(self)

    @cached_property
    def _by_pre(self) -> tuple[dict[Atom, list[GroundAction]], list[GroundAction]]:
        # each action indexed under one precondition atom; empty-pre actions kept aside
        index: dict[Atom, list[GroundAction]] = {}
        always = []
        for a in self.actions:
            if a.pre:
                index.setdefault(min(a.pre), []).append(a)
            else:
                always.append(a)
        return index, always

    @cached_property
    def _order(self) -> dict[GroundAction, int]:
        return {a: i for i, a in enumerate(self.actions)}

    def __str__(self) -> str:
        return self.name or f"{self.domain_tag}-instance"


def _validate(inst: Instance) -> None:
    objs = inst.objects
    known_preds = {a.pred for a in inst.init}
    for act in inst.actions:
        for at in itertools.chain(act.pre, act.add, act.delete):
            known_preds.add(at.pred)
            for arg in at.args:
                if arg not in objs:
                    raise UndeclaredObjectError(f"action {act}: undeclared object {arg!r}")
    for where, atoms in (("init", inst.init), ("goal", inst.goal)):
        for at in atoms:
            for arg in at.args:
                if arg not in objs:
                    raise UndeclaredObjectError(f"{where} atom {at}: undeclared object {arg!r}")
    for at in inst.goal:
        if at.pred not in known_preds:
            raise UndeclaredPredicateError(f"goal atom {at}: predicate {at.pred!r} appears nowhere else")
    for key, value in inst.params:
        if value not in objs:
            raise UndeclaredObjectError(f"param {key}: undeclared object {value!r}")
    if inst.goal_test is not None and inst.goal_test not in GOAL_TESTS:
        raise InstanceError(f"unknown goal test {inst.goal_test!r}")


def _single_tower(s: frozenset[Atom]) -> bool:
    return (Atom("armempty") in s
            and sum(1 for a in s if a.pred == "ontable") == 1)


GOAL_TESTS: dict[str, Callable[[frozenset[Atom]], bool]] = {
    "single-tower": _single_tower,
}


def is_goal(inst: Instance, s: frozenset[Atom]) -> bool:
    if not inst.goal <= s:
        return False
    return inst.goal_test is None or GOAL_TESTS[inst.goal_test](s)


def applicable(inst: Instance, s: frozenset[Atom]) -> list[GroundAction]:
    """Actions whose preconditions hold in ``s``, in declaration order."""
    index, always = inst._by_pre
    found = [a for a in always]
    for at in s:
        for a in index.get(at, ()):
            if a.pre <= s:
                found.append(a)
    order = inst._order
    found.sort(key=order.__getitem__)
    return found


def apply(inst: Instance, s: frozenset[Atom], a: GroundAction) -> frozenset[Atom]:
    if not a.pre <= s:
        missing = sorted(map(str, a.pre - s))
        raise InapplicableActionError(f"{a} not applicable: missing {missing}")
    return (s - a.delete) | a.add


def successors(inst: Instance, s: frozenset[Atom]) -> Iterator[tuple[GroundAction, frozenset[Atom]]]:
    for a in applicable(inst, s):
        yield a, (s - a.delete) | a.add


@dataclass(frozen=True)
class ReachableSet:
    states: frozenset
    truncated: bool
    cap: int

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s) -> bool:
        return s in self.states


def reachable_states(inst: Instance, cap: int = DEFAULT_CAP) -> ReachableSet:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    seen = {inst.init}
    queue = deque([inst.init])
    truncated = False
    while queue and not truncated:
        s = queue.popleft()
        for _, t in successors(inst, s):
            if t in seen:
                continue
            if len(seen) >= cap:
                truncated = True
                break
            seen.add(t)
            queue.append(t)
    return ReachableSet(frozenset(seen), truncated, cap)


def goal_distances(inst: Instance, cap: int = DEFAULT_CAP) -> tuple[dict, bool]:
    """Optimal number of steps to a goal state for every reachable state.

    States that cannot reach the goal are absent from the returned map.
    """
    reach = reachable_states(inst, cap)
    preds: dict[frozenset, list[frozenset]] = {s: [] for s in reach.states}
    frontier = deque()
    dist = {}
    for s in reach.states:
        if is_goal(inst, s):
            dist[s] = 0
            frontier.append(s)
        for _, t in successors(inst, s):
            if t in preds:
                preds[t].append(s)
    while frontier:
        t = frontier.popleft()
        for s in preds[t]:
            if s not in dist:
                dist[s] = dist[t] + 1
                frontier.append(s)
    return dist, reach.truncated


# ---------------------------------------------------------------- parsing

_SYM = r"[A-Za-z0-9_][\w\-]*"
_ATOM_RE = re.compile(rf"({_SYM})(?:\(([^()]*)\))?")


def _parse_atoms(text: str, lineno: int, offset: int) -> list[Atom]:
    atoms = []
    pos = 0
    while True:
        while pos < len(text) and text[pos] in " \t":
            pos += 1
        if pos >= len(text):
            return atoms
        m = _ATOM_RE.match(text, pos)
        if not m:
            raise ParseError(f"expected atom near {text[pos:pos + 12]!r}", lineno, offset + pos + 1)
        args = ()
        if m.group(2) is not None and m.group(2).strip():
            args = tuple(x.strip() for x in m.group(2).split(","))
            if any(not re.fullmatch(_SYM + r"|\?" + _SYM, x) for x in args):
                raise ParseError(f"bad argument list in {m.group(0)!r}", lineno, offset + pos + 1)
        atoms.append(Atom(m.group(1), args))
        pos = m.end()


_ACTION_RE = re.compile(
    rf"^(action|schema)\s+({_SYM})\(([^()]*)\)\s*"
    r"pre:(?P<pre>.*?)\s*add:(?P<add>.*?)\s*del:(?P<del>.*)$")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_instance(text: str) -> Instance:
    """Parse the line-oriented instance format; schemas are grounded here.

    Schema parameters are bound to pairwise-distinct objects.
    """
    domain = "unknown"
    name = ""
    objects: list[str] = []
    init: list[Atom] = []
    goal: list[Atom] = []
    params: list[tuple[str, str]] = []
    goal_test = None
    ground: list[GroundAction] = []
    schemas = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        line = line.strip()
        head, _, rest = line.partition(" ")
        body_col = indent + len(head) + 2
        if head == "domain":
            domain = rest.strip()
        elif head == "name":
            name = rest.strip()
        elif head == "objects":
            objects.extend(rest.split())
        elif head == "init":
            init.extend(_parse_atoms(rest, lineno, body_col - 1))
        elif head == "goal":
            goal.extend(_parse_atoms(rest, lineno, body_col - 1))
        elif head == "goal-test":
            goal_test = rest.strip()
        elif head == "param":
            parts = rest.split()
            if len(parts) != 2:
                raise ParseError("param expects '<name> <object>'", lineno, body_col)
            params.append((parts[0], parts[1]))
        elif head in ("action", "schema"):
            m = _ACTION_RE.match(line)
            if not m:
                raise ParseError(f"malformed {head}; expected '{head} name(args) pre: ... add: ... del: ...'",
                                 lineno, indent + 1)
            args = tuple(x.strip() for x in m.group(3).split(",") if x.strip())
            parts = {}
            for key in ("pre", "add", "del"):
                parts[key] = _parse_atoms(m.group(key), lineno, indent + m.start(key))
            if head == "action":
                try:
                    ground.append(GroundAction(m.group(2), args, frozenset(parts["pre"]),
                                               frozenset(parts["add"]), frozenset(parts["del"])))
                except InconsistentActionError as exc:
                    raise InconsistentActionError(f"line {lineno}: {exc}") from None
            else:
                schemas.append((lineno, m.group(2), args, parts))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, indent + 1)

    if len(set(objects)) != len(objects):
        dupes = sorted({o for o in objects if objects.count(o) > 1})
        raise ParseError(f"duplicate objects: {dupes}")
    ordered_objects = list(dict.fromkeys(objects))
    for lineno, sname, variables, parts in schemas:
        ground.extend(_ground_schema(sname, variables, parts, ordered_objects, lineno))
    return Instance(frozenset(objects), frozenset(init), frozenset(goal), tuple(ground),
                    domain, name, tuple(params), goal_test)


def _ground_schema(name, variables, parts, objects, lineno) -> list[GroundAction]:
    out = []
    for combo in itertools.permutations(objects, len(variables)):
        sub = dict(zip(variables, combo))

        def inst(atoms):
            return frozenset(Atom(a.pred, tuple(sub.get(x, x) for x in a.args)) for a in atoms)

        add, dele = inst(parts["add"]), inst(parts["del"])
        try:
            out.append(GroundAction(name, combo, inst(parts["pre"]), add, dele))
        except InconsistentActionError as exc:
            raise InconsistentActionError(f"line {lineno}: {exc}") from None
    return out


def _fmt_atoms(atoms: Iterable[Atom]) -> str:
    return " ".join(str(a) for a in sorted(atoms))


def format_instance(inst: Instance) -> str:
    """Inverse of :func:`parse_instance` (actions are written ground)."""
    lines = [f"domain {inst.domain_tag}"]
    if inst.name:
        lines.append(f"name {inst.name}")
    lines.append("objects " + " ".join(sorted(inst.objects)))
    lines.append("init " + _fmt_atoms(inst.init))
    if inst.goal:
        lines.append("goal " + _fmt_atoms(inst.goal))
    if inst.goal_test:
        lines.append(f"goal-test {inst.goal_test}")
    for k, v in inst.params:
        lines.append(f"param {k} {v}")
    for a in inst.actions:
        lines.append(f"action {a.name}({','.join(a.args)}) pre: {_fmt_atoms(a.pre)} "
                     f"add: {_fmt_atoms(a.add)} del: {_fmt_atoms(a.delete)}")
    return "\n".join(lines) + "\n"


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def format_state(s: frozenset[Atom]) -> str:
    return "{" + ", ".join(str(a) for a in sorted(s)) + "}"
