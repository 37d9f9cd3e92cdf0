"""Abstract actions over features, the *represents* relation, and bounded
soundness/completeness checks by exhaustive enumeration of reachable states.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .features import FeatureSet, bind_goal_parameters, feature_valuation
from .strips import DEFAULT_CAP, GroundAction, Instance, State, applicable

# literal forms
TRUE, FALSE, ZERO, POS = "true", "false", "zero", "pos"
# effect kinds
SET_TRUE, SET_FALSE, INC, DEC = "set-true", "set-false", "inc", "dec"

_BOOL_FORMS = {TRUE, FALSE}
_NUM_FORMS = {ZERO, POS}
_BOOL_EFFECTS = {SET_TRUE, SET_FALSE}
_NUM_EFFECTS = {INC, DEC}


class AbstractionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class AbstractLiteral:
    feature: str
    form: str

    @property
    def numeric(self) -> bool:
        return self.form in _NUM_FORMS

    def holds(self, value) -> bool:
        """``value`` is a bool for boolean features and an int or an ``n=0`` flag otherwise."""
        if self.form == TRUE:
            return bool(value)
        if self.form == FALSE:
            return not value
        # numeric literal against a boolean valuation entry (True means n=0)
        is_zero = value is True or (value is not False and value == 0)
        return is_zero if self.form == ZERO else not is_zero

    def negate(self) -> "AbstractLiteral":
        return AbstractLiteral(self.feature, {TRUE: FALSE, FALSE: TRUE, ZERO: POS, POS: ZERO}[self.form])

    def __str__(self):
        return {TRUE: "{}", FALSE: "!{}", ZERO: "{}=0", POS: "{}>0"}[self.form].format(self.feature)


@dataclass(frozen=True, order=True)
class AbstractEffect:
    feature: str
    effect: str

    @property
    def numeric(self) -> bool:
        return self.effect in _NUM_EFFECTS

    def __str__(self):
        return {SET_TRUE: "{}", SET_FALSE: "!{}", INC: "{}++", DEC: "{}--"}[self.effect].format(self.feature)


@dataclass(frozen=True)
class AbstractAction:
    name: str
    pre: frozenset[AbstractLiteral] = frozenset()
    eff: frozenset[AbstractEffect] = frozenset()

    def pre_holds(self, fs: FeatureSet, values: tuple) -> bool:
        idx = {n: i for i, n in enumerate(fs.names)}
        return all(lit.holds(values[idx[lit.feature]]) for lit in self.pre)

    def effect_on(self, feature: str) -> str | None:
        for e in self.eff:
            if e.feature == feature:
                return e.effect
        return None

    def __str__(self):
        return format_abstract_action(self)


def lit(text: str) -> AbstractLiteral:
    """Parse ``p``, ``!p``, ``n=0`` or ``n>0``."""
    text = text.strip()
    if text.endswith("=0"):
        return AbstractLiteral(text[:-2], ZERO)
    if text.endswith(">0"):
        return AbstractLiteral(text[:-2], POS)
    if text.startswith("!"):
        return AbstractLiteral(text[1:], FALSE)
    if not text:
        raise AbstractionError("empty literal")
    return AbstractLiteral(text, TRUE)


def eff(text: str) -> AbstractEffect:
    """Parse ``p``, ``!p``, ``n++`` or ``n--``."""
    text = text.strip()
    if text.endswith("++"):
        return AbstractEffect(text[:-2], INC)
    if text.endswith("--"):
        return AbstractEffect(text[:-2], DEC)
    if text.startswith("!"):
        return AbstractEffect(text[1:], SET_FALSE)
    if not text:
        raise AbstractionError("empty effect")
    return AbstractEffect(text, SET_TRUE)


def make_action(name: str, pre: str, effects: str) -> AbstractAction:
    return AbstractAction(name, frozenset(lit(t) for t in pre.split()),
                          frozenset(eff(t) for t in effects.split()))


_ABSTRACT_RE = re.compile(r"^abstract\s+(\S+)\s+pre:(.*?)\s*eff:(.*)$")


def parse_abstract_line(line: str) -> AbstractAction:
    m = _ABSTRACT_RE.match(line.strip())
    if not m:
        raise AbstractionError(f"malformed abstract action line: {line.strip()!r}")
    return make_action(m.group(1), m.group(2), m.group(3))


def parse_abstract_actions(text: str) -> list[AbstractAction]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_abstract_line(line))
        except AbstractionError as exc:
            raise AbstractionError(f"line {lineno}: {exc}") from None
    return out


def format_abstract_action(a: AbstractAction) -> str:
    pre = " ".join(str(x) for x in sorted(a.pre))
    effs = " ".join(str(x) for x in sorted(a.eff))
    return f"abstract {a.name} pre: {pre} eff: {effs}".replace("  ", " ")


def validate_abstract_action(a: AbstractAction, features: FeatureSet | None = None) -> list[str]:
    """Well-formedness violations (empty list when the action is well formed)."""
    problems = []
    kinds: dict[str, str] = {}
    for x in a.pre:
        k = "num" if x.numeric else "bool"
        if kinds.setdefault(x.feature, k) != k:
            problems.append(f"{x.feature}: used both as boolean and numerical")
    for e in a.eff:
        k = "num" if e.numeric else "bool"
        if kinds.setdefault(e.feature, k) != k:
            problems.append(f"{e.feature}: used both as boolean and numerical")
    pre_feats = [x.feature for x in a.pre]
    eff_feats = [e.feature for e in a.eff]
    for name in sorted({f for f in pre_feats if pre_feats.count(f) > 1}):
        problems.append(f"{name}: more than one precondition literal")
    for name in sorted({f for f in eff_feats if eff_feats.count(f) > 1}):
        problems.append(f"{name}: more than one effect")
    if features is not None:
        for name, k in sorted(kinds.items()):
            if name not in features:
                problems.append(f"{name}: unknown feature")
            elif features.kind(name) != k:
                problems.append(f"{name}: is a {features.kind(name)} feature but used as {k}")
    for e in sorted(a.eff):
        if e.effect == DEC and AbstractLiteral(e.feature, POS) not in a.pre:
            problems.append(f"{e.feature}--: requires {e.feature}>0 in the precondition")
    return problems


# ------------------------------------------------------------ represents

def _represents_values(a_bar: AbstractAction, fs: FeatureSet, before: tuple, after: tuple) -> bool:
    """Effect agreement between an abstract action and a transition ``before -> after``."""
    for i, f in enumerate(fs.all):
        declared = a_bar.effect_on(f.name)
        u, v = before[i], after[i]
        if f.numeric:
            if (declared == DEC) != (v < u) or (declared == INC) != (v > u):
                return False
        else:
            if u != v and declared != (SET_TRUE if v else SET_FALSE):
                return False
            if declared == SET_TRUE and not v or declared == SET_FALSE and v:
                return False
    return True


def represents(a_bar: AbstractAction, a: GroundAction, inst: Instance, s: State,
               features: FeatureSet, binding) -> bool:
    if not a.pre <= s:
        return False
    before = feature_valuation(features, inst, s, binding)
    if not a_bar.pre_holds(features, before):
        return False
    after = feature_valuation(features, inst, (s - a.delete) | a.add, binding)
    return _represents_values(a_bar, features, before, after)


def effect_signature(fs: FeatureSet, before: tuple, after: tuple) -> frozenset[AbstractEffect]:
    """Boolean flips and numerical sign changes of a transition."""
    sig = set()
    for f, u, v in zip(fs.all, before, after):
        if f.numeric:
            if v < u:
                sig.add(AbstractEffect(f.name, DEC))
            elif v > u:
                sig.add(AbstractEffect(f.name, INC))
        elif u != v:
            sig.add(AbstractEffect(f.name, SET_TRUE if v else SET_FALSE))
    return frozenset(sig)


# --------------------------------------------------------------- verdicts

VERIFIED, REFUTED, INCONCLUSIVE = "verified", "refuted", "inconclusive-truncated"


@dataclass(frozen=True)
class Witness:
    instance: str
    state: State
    action: GroundAction | None = None
    abstract: str | None = None


@dataclass
class Verdict:
    status: str
    witnesses: list[Witness] = field(default_factory=list)
    instances: int = 0
    states: int = 0
    truncated: bool = False
    subject: str = ""

    @property
    def ok(self) -> bool:
        return self.status == VERIFIED

    def merge(self, other: "Verdict") -> "Verdict":
        witnesses = self.witnesses + other.witnesses
        truncated = self.truncated or other.truncated
        return Verdict(_status(witnesses, truncated), witnesses,
                       self.instances + other.instances, self.states + other.states,
                       truncated, self.subject or other.subject)


def _status(witnesses, truncated) -> str:
    if witnesses:
        return REFUTED
    return INCONCLUSIVE if truncated else VERIFIED


class FamilyEnumerator:
    """Reachable states and feature valuations of a family, shared across checks.

    Instances built over the same action tuple share successor lists and
    per-state valuations; a (state, binding) pair already examined for an
    instance with the same actions is examined only once per check.
    """

    def __init__(self, family, features: FeatureSet, pattern, cap: int):
        self.family = list(family)
        self.features = features
        self.pattern = pattern
        self.cap = cap
        self._trans: dict = {}
        self._succ: dict = {}
        self._items = None

    def __iter__(self):
        if self._items is None:
            self._items = []
            for inst in self.family:
                binding = bind_goal_parameters(self.pattern, inst)
                states, truncated = self._reach(inst)
                key = (id(inst.actions), tuple(sorted(binding.items())))
                self._items.append((inst, binding, key, states, truncated))
        return iter(self._items)

    def _successors(self, inst: Instance, s: State):
        key = (id(inst.actions), s)
        hit = self._succ.get(key)
        if hit is None:
            hit = self._succ[key] = [(a, (s - a.delete) | a.add) for a in applicable(inst, s)]
        return hit

    def _reach(self, inst: Instance):
        """Same contract as ``strips.reachable_states``, through the shared successor cache."""
        seen = {inst.init}
        order = [inst.init]
        i = 0
        truncated = False
        while i < len(order) and not truncated:
            for _, t in self._successors(inst, order[i]):
                if t in seen:
                    continue
                if len(seen) >= self.cap:
                    truncated = True
                    break
                seen.add(t)
                order.append(t)
            i += 1
        return sorted(order, key=_state_key), truncated

    def transitions(self, inst: Instance, s: State, binding, key=None):
        """``(values(s), [(a, values(f(a,s))) ...])`` for the applicable actions."""
        key = (key or (id(inst.actions), tuple(sorted(binding.items())))) + (s,)
        hit = self._trans.get(key)
        if hit is None:
            fs = self.features
            before = feature_valuation(fs, inst, s, binding)
            outs = [(a, feature_valuation(fs, inst, t, binding)) for a, t in self._successors(inst, s)]
            hit = self._trans[key] = (before, outs)
        return hit


def check_soundness(a_bar: AbstractAction, family, features: FeatureSet, pattern,
                    cap: int = DEFAULT_CAP, *, max_witnesses: int = 5,
                    _enum: FamilyEnumerator | None = None) -> Verdict:
    """Sound up to the family: wherever Pre holds on a reachable state, some
    applicable concrete action is represented."""
    enum = _enum or FamilyEnumerator(family, features, pattern, cap)
    witnesses, truncated = [], False
    n_inst = n_states = 0
    done = set()
    for inst, binding, key, states, trunc in enum:
        n_inst += 1
        truncated |= trunc
        n_states += len(states)
        for s in states:
            if (key, s) in done:
                continue
            done.add((key, s))
            before, outs = enum.transitions(inst, s, binding, key)
            if not a_bar.pre_holds(features, before):
                continue
            if not any(_represents_values(a_bar, features, before, after) for _, after in outs):
                witnesses.append(Witness(str(inst), s, None, a_bar.name))
                if len(witnesses) >= max_witnesses:
                    break
        if len(witnesses) >= max_witnesses:
            break
    return Verdict(_status(witnesses, truncated), witnesses, n_inst, n_states, truncated, a_bar.name)


def check_completeness(actions, family, features: FeatureSet, pattern,
                       cap: int = DEFAULT_CAP, *, max_witnesses: int = 5,
                       _enum: FamilyEnumerator | None = None) -> Verdict:
    """Every applicable concrete action on every reachable state is represented by some member."""
    actions = list(actions)
    enum = _enum or FamilyEnumerator(family, features, pattern, cap)
    witnesses, truncated = [], False
    n_inst = n_states = 0
    done = set()
    for inst, binding, key, states, trunc in enum:
        n_inst += 1
        truncated |= trunc
        n_states += len(states)
        for s in states:
            if (key, s) in done:
                continue
            done.add((key, s))
            before, outs = enum.transitions(inst, s, binding, key)
            usable = [ab for ab in actions if ab.pre_holds(features, before)]
            for a, after in outs:
                if not any(_represents_values(ab, features, before, after) for ab in usable):
                    witnesses.append(Witness(str(inst), s, a))
                    if len(witnesses) >= max_witnesses:
                        break
            if len(witnesses) >= max_witnesses:
                break
        if len(witnesses) >= max_witnesses:
            break
    return Verdict(_status(witnesses, truncated), witnesses, n_inst, n_states, truncated,
                   ",".join(a.name for a in actions))


def check_all(actions, family, features: FeatureSet, pattern, cap: int = DEFAULT_CAP,
              enum: FamilyEnumerator | None = None):
    """Soundness of each action plus completeness of the set, sharing one enumeration."""
    enum = enum or FamilyEnumerator(family, features, pattern, cap)
    sound = {a.name: check_soundness(a, None, features, pattern, cap, _enum=enum) for a in actions}
    return sound, check_completeness(actions, None, features, pattern, cap, _enum=enum)


def signature_closure(family, features: FeatureSet, pattern, cap: int = DEFAULT_CAP) -> list[AbstractAction]:
    """One ``<n>0 for decs ; signature>`` action per distinct effect signature seen in the family."""
    enum = FamilyEnumerator(family, features, pattern, cap)
    sigs = set()
    for inst, binding, key, states, _ in enum:
        for s in states:
            before, outs = enum.transitions(inst, s, binding, key)
            for _, after in outs:
                sigs.add(effect_signature(features, before, after))
    out = []
    for i, sig in enumerate(sorted(sigs, key=lambda x: sorted(map(str, x)))):
        pre = frozenset(AbstractLiteral(e.feature, POS) for e in sig if e.effect == DEC)
        out.append(AbstractAction(f"sig{i}", pre, sig))
    return out


def _state_key(s: State):
    return sorted(s)
