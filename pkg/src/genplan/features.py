"""Boolean and numerical features over concrete states.

Feature expressions come from a small closed library::

    atom(P)              bool   pattern P holds (ground after binding)
    exists(P)            bool   some atom matches P
    count(P)             num    number of atoms matching P
    count-above($x)      num    blocks (transitively) above x
    count-other($x)      num    blocks neither held nor in x's tower
    axis-dist(P, $v)     num    |c - v| for the single capture c (``*``) in P
    manhattan(P, $a, $b) num    |c1 - a| + |c2 - b| for the two captures in P
    blank-detour($t, $x, $y)  num   blank moves needed before tile t can move
                                    one step closer to (x, y)

Pattern arguments are object symbols, ``$param``, ``_`` (anything),
``~sym``/``~$param`` (anything but) and ``*`` (capture, integer valued).
"""
from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from .strips import Atom, Instance, State


class FeatureError(ValueError):
    pass


class BindingError(FeatureError):
    pass


class EvaluatorDomainError(FeatureError):
    pass


Binding = Mapping[str, str]


# ------------------------------------------------------------ expressions

@dataclass(frozen=True)
class Pattern:
    pred: str
    args: tuple[str, ...]

    def params(self) -> set[str]:
        return {a.lstrip("~")[1:] for a in self.args if a.lstrip("~").startswith("$")}

    def __str__(self):
        return f"{self.pred}({','.join(self.args)})"


@dataclass(frozen=True)
class Expr:
    fn: str
    args: tuple  # Pattern | str

    def params(self) -> list[str]:
        out = []
        for a in self.args:
            names = a.params() if isinstance(a, Pattern) else ({a[1:]} if a.startswith("$") else set())
            for n in sorted(names):
                if n not in out:
                    out.append(n)
        return out

    def __str__(self):
        return f"{self.fn}({', '.join(map(str, self.args))})"


_BOOL_FNS = {"atom", "exists"}
_NUM_FNS = {"count", "count-above", "count-other", "axis-dist", "manhattan", "blank-detour"}
_TOKEN = re.compile(r"\s*([A-Za-z_][\w\-]*|\$[A-Za-z_]\w*|~\$?[\w\-]+|[0-9][\w\-]*|\*|_|[(),])")


def parse_expr(text: str) -> Expr:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FeatureError(f"bad feature expression near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    tokens.append(None)
    i = 0

    def expect(tok):
        nonlocal i
        if tokens[i] != tok:
            raise FeatureError(f"expected {tok!r} in {text!r}, got {tokens[i]!r}")
        i += 1

    def term():
        nonlocal i
        tok = tokens[i]
        if tok is None or tok in "(),":
            raise FeatureError(f"unexpected {tok!r} in {text!r}")
        i += 1
        if tokens[i] != "(":
            return tok
        i += 1
        args = []
        while tokens[i] != ")":
            args.append(term())
            if tokens[i] == ",":
                i += 1
        expect(")")
        return (tok, args)

    fn, args = term() if tokens[1] == "(" else (None, None)
    if fn is None or tokens[i] is not None:
        raise FeatureError(f"malformed feature expression {text!r}")
    if fn not in _BOOL_FNS | _NUM_FNS:
        raise FeatureError(f"unknown feature function {fn!r}")
    conv = []
    for a in args:
        if isinstance(a, tuple):
            pred, pargs = a
            if any(isinstance(p, tuple) for p in pargs):
                raise FeatureError(f"nested pattern in {text!r}")
            conv.append(Pattern(pred, tuple(pargs)))
        else:
            conv.append(a)
    return Expr(fn, tuple(conv))


# -------------------------------------------------------------- features

@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "bool" | "num"
    expr: Expr
    params: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("bool", "num"):
            raise FeatureError(f"feature {self.name}: kind must be bool or num")
        want = _BOOL_FNS if self.kind == "bool" else _NUM_FNS
        if self.expr.fn not in want:
            raise FeatureError(f"feature {self.name}: {self.expr.fn} does not yield a {self.kind}")
        if not self.params:
            object.__setattr__(self, "params", tuple(self.expr.params()))

    @property
    def numeric(self) -> bool:
        return self.kind == "num"


@dataclass(frozen=True)
class FeatureSet:
    booleans: tuple[Feature, ...] = ()
    numericals: tuple[Feature, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.all]
        if len(set(names)) != len(names):
            raise FeatureError(f"duplicate feature names in {names}")
        if any(f.kind != "bool" for f in self.booleans) or any(f.kind != "num" for f in self.numericals):
            raise FeatureError("feature kinds do not match their lists")

    @property
    def all(self) -> tuple[Feature, ...]:
        return self.booleans + self.numericals

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.all]

    def __getitem__(self, name: str) -> Feature:
        for f in self.all:
            if f.name == name:
                return f
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(f.name == name for f in self.all)

    def kind(self, name: str) -> str:
        return self[name].kind

    @property
    def params(self) -> list[str]:
        return sorted({p for f in self.all for p in f.params})


def parse_features(text: str) -> FeatureSet:
    """``feature <name> bool|num <expr>`` lines; ``#`` comments."""
    bools, nums = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 3)
        if len(parts) < 4 or parts[0] != "feature":
            raise FeatureError(f"line {lineno}: expected 'feature <name> bool|num <expr>'")
        _, name, kind, expr = parts
        try:
            f = Feature(name, kind, parse_expr(expr))
        except FeatureError as exc:
            raise FeatureError(f"line {lineno}: {exc}") from None
        (bools if kind == "bool" else nums).append(f)
    return FeatureSet(tuple(bools), tuple(nums))


def format_features(fs: FeatureSet) -> str:
    return "".join(f"feature {f.name} {f.kind} {f.expr}\n" for f in fs.all)


# --------------------------------------------------------------- binding

def _unify(pattern: Atom, fact: Atom, sub: dict) -> dict | None:
    if pattern.pred != fact.pred or len(pattern.args) != len(fact.args):
        return None
    sub = dict(sub)
    for p, v in zip(pattern.args, fact.args):
        if p.startswith("$"):
            key = p[1:]
            if sub.setdefault(key, v) != v:
                return None
        elif p != v:
            return None
    return sub


def bind_goal_parameters(pattern, inst: Instance) -> dict[str, str]:
    """Match the generic goal ``pattern`` (atoms with ``$x`` args) against the goal of ``inst``.

    Bindings fixed by the instance's ``param`` lines are applied first.
    """
    pattern = [Atom(a.pred, tuple(a.args)) for a in pattern]
    start = dict(inst.params)
    goal = sorted(inst.goal)
    subs = [start]
    for pat in pattern:
        nxt = []
        for sub in subs:
            for fact in goal:
                res = _unify(pat, fact, sub)
                if res is not None:
                    nxt.append(res)
        subs = nxt
    unique = {tuple(sorted(s.items())) for s in subs}
    if not unique:
        raise BindingError(f"goal of {inst} does not match pattern {[str(p) for p in pattern]}")
    if len(unique) > 1:
        raise BindingError(f"goal of {inst} matches pattern in {len(unique)} ways")
    return dict(unique.pop())


_PATTERN_ATOM = re.compile(r"([A-Za-z_][\w\-]*)(?:\(([^()]*)\))?")


def parse_pattern(text: str) -> list[Atom]:
    """Goal pattern such as ``on($x,$y)``; whitespace separates atoms."""
    out = []
    for tok in text.split():
        m = _PATTERN_ATOM.fullmatch(tok)
        if not m:
            raise FeatureError(f"bad goal pattern atom {tok!r}")
        args = tuple(a.strip() for a in (m.group(2) or "").split(",") if a.strip())
        out.append(Atom(m.group(1), args))
    return out


# ------------------------------------------------------------ evaluation

def _resolve(arg: str, b: Binding):
    """Returns (mode, value): mode in {'eq', 'ne', 'any', 'cap'}."""
    if arg == "_":
        return "any", None
    if arg == "*":
        return "cap", None
    neg = arg.startswith("~")
    sym = arg[1:] if neg else arg
    if sym.startswith("$"):
        try:
            sym = b[sym[1:]]
        except KeyError:
            raise BindingError(f"parameter {sym} is unbound") from None
    return ("ne" if neg else "eq"), sym


def _matches(pat: Pattern, s: State, b: Binding):
    resolved = [_resolve(a, b) for a in pat.args]
    for at in s:
        if at.pred != pat.pred or len(at.args) != len(resolved):
            continue
        caps = []
        for (mode, val), v in zip(resolved, at.args):
            if mode == "eq" and v != val or mode == "ne" and v == val:
                break
            if mode == "cap":
                caps.append(v)
        else:
            yield at, caps


def _value(arg, b: Binding) -> str:
    return _resolve(arg, b)[1]


def _blocks_above(s: State, x: str) -> int:
    above = {a.args[1]: a.args[0] for a in s if a.pred == "on"}
    n = 0
    while x in above:
        x = above[x]
        n += 1
    return n


def _blocks_other(s: State, x: str) -> int:
    held = {a.args[0] for a in s if a.pred == "holding"}
    blocks = set()
    above, below = {}, {}
    for a in s:
        if a.pred == "on":
            above[a.args[1]] = a.args[0]
            below[a.args[0]] = a.args[1]
            blocks.update(a.args)
        elif a.pred in ("ontable", "clear", "holding"):
            blocks.add(a.args[0])
    tower = {x}
    if x not in held:
        for rel in (above, below):
            y = x
            while y in rel:
                y = rel[y]
                tower.add(y)
    return len(blocks - held - tower)


def _capture(pat: Pattern, s: State, b: Binding, want: int) -> list[int]:
    found = list(_matches(pat, s, b))
    if len(found) != 1:
        raise EvaluatorDomainError(f"{pat} matches {len(found)} atoms; expected exactly one")
    caps = found[0][1]
    if len(caps) != want:
        raise EvaluatorDomainError(f"{pat} must have exactly {want} '*' captures")
    try:
        return [int(c) for c in caps]
    except ValueError:
        raise EvaluatorDomainError(f"non-integer coordinate in {found[0][0]}") from None


_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def blank_detour(s: State, tile: str, tx: int, ty: int) -> int:
    """Blank moves, avoiding the tile's cell, before ``tile`` can step toward (tx, ty).

    With the tile already on its target, the distance is to the nearest cell
    not adjacent to the tile, so that the value is positive right after the
    tile's last move.
    """
    cells, blank, pos = set(), None, None
    for a in s:
        if a.pred == "at":
            c = (int(a.args[1]), int(a.args[2]))
            cells.add(c)
            if a.args[0] == tile:
                pos = c
        elif a.pred == "atB":
            blank = (int(a.args[0]), int(a.args[1]))
            cells.add(blank)
    if blank is None or pos is None:
        raise EvaluatorDomainError("state has no blank or no designated tile")
    px, py = pos
    if (px, py) != (tx, ty):
        dist0 = abs(px - tx) + abs(py - ty)
        targets = set()
        for dx, dy in _STEPS:
            c = (px + dx, py + dy)
            if c in cells and abs(c[0] - tx) + abs(c[1] - ty) < dist0:
                targets.add(c)
    else:
        near = {(px + dx, py + dy) for dx, dy in _STEPS}
        targets = cells - near - {pos}
    seen = {blank: 0}
    queue = deque([blank])
    while queue:
        c = queue.popleft()
        if c in targets:
            return seen[c]
        for dx, dy in _STEPS:
            d = (c[0] + dx, c[1] + dy)
            if d in cells and d != pos and d not in seen:
                seen[d] = seen[c] + 1
                queue.append(d)
    raise EvaluatorDomainError(f"blank cannot reach a useful cell for {tile}")


def evaluate(f: Feature, inst: Instance | None, s: State, b: Binding):
    e = f.expr
    fn, args = e.fn, e.args
    if fn == "atom":
        resolved = [_resolve(a, b) for a in args[0].args]
        if any(m != "eq" for m, _ in resolved):
            return any(True for _ in _matches(args[0], s, b))
        return Atom(args[0].pred, tuple(v for _, v in resolved)) in s
    if fn == "exists":
        return any(True for _ in _matches(args[0], s, b))
    if fn == "count":
        return sum(1 for _ in _matches(args[0], s, b))
    if fn == "count-above":
        return _blocks_above(s, _value(args[0], b))
    if fn == "count-other":
        return _blocks_other(s, _value(args[0], b))
    if fn == "axis-dist":
        (c,) = _capture(args[0], s, b, 1)
        return abs(c - int(_value(args[1], b)))
    if fn == "manhattan":
        c1, c2 = _capture(args[0], s, b, 2)
        return abs(c1 - int(_value(args[1], b))) + abs(c2 - int(_value(args[2], b)))
    if fn == "blank-detour":
        return blank_detour(s, _value(args[0], b), int(_value(args[1], b)), int(_value(args[2], b)))
    raise FeatureError(f"unknown feature function {fn}")


# A valuation is a tuple aligned with FeatureSet.all: bools for boolean
# features, ints (feature valuation) or bools "is zero" (boolean valuation).

def feature_valuation(fs: FeatureSet, inst: Instance | None, s: State, b: Binding) -> tuple:
    return tuple(evaluate(f, inst, s, b) for f in fs.all)


def to_boolean(fs: FeatureSet, values: tuple) -> tuple[bool, ...]:
    """Project a feature valuation onto its boolean valuation (numericals -> ``n=0``)."""
    nb = len(fs.booleans)
    return tuple(bool(v) for v in values[:nb]) + tuple(v == 0 for v in values[nb:])


def boolean_valuation(fs: FeatureSet, inst: Instance | None, s: State, b: Binding) -> tuple[bool, ...]:
    return to_boolean(fs, feature_valuation(fs, inst, s, b))


def format_boolean_valuation(fs: FeatureSet, val: tuple[bool, ...]) -> str:
    parts = []
    for f, v in zip(fs.all, val):
        if f.numeric:
            parts.append(f"{f.name}=0" if v else f"{f.name}>0")
        else:
            parts.append(f.name if v else f"!{f.name}")
    return " ".join(parts)


def all_boolean_valuations(fs: FeatureSet):
    return itertools.product((False, True), repeat=len(fs.all))
