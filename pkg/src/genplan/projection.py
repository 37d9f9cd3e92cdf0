"""Numerical projection (QNP) of a generalized problem and its boolean FOND
projection.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .abstraction import (DEC, FALSE, INC, POS, SET_FALSE, SET_TRUE, TRUE, ZERO,
                          AbstractAction, AbstractLiteral, FamilyEnumerator, Verdict, Witness, _status, lit,
                          parse_abstract_line, format_abstract_action, validate_abstract_action)
from .features import FeatureSet, to_boolean
from .strips import DEFAULT_CAP, is_goal


class ProjectionError(ValueError):
    pass


# ---------------------------------------------------------------- formulas

@dataclass(frozen=True)
class Formula:
    """DNF: a disjunction of consistent conjunctive terms."""
    terms: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.terms:
            raise ProjectionError("a formula needs at least one term")
        for t in self.terms:
            for x in t:
                if x.negate() in t:
                    raise ProjectionError(f"inconsistent term: contains {x} and its negation")

    @classmethod
    def parse(cls, text: str) -> "Formula":
        terms = [frozenset(lit(tok) for tok in chunk.split()) for chunk in text.split("|")]
        return cls(tuple(terms))

    @property
    def features(self) -> set[str]:
        return {x.feature for t in self.terms for x in t}

    def holds(self, fs: FeatureSet, values: tuple) -> bool:
        idx = {n: i for i, n in enumerate(fs.names)}
        return any(all(x.holds(values[idx[x.feature]]) for x in t) for t in self.terms)

    def __str__(self):
        return " | ".join(" ".join(str(x) for x in sorted(t)) for t in self.terms)


def full_dnf(fs: FeatureSet) -> Formula:
    """Tautology listing every boolean valuation over ``fs``."""
    terms = []
    for vals in itertools.product((True, False), repeat=len(fs.all)):
        term = []
        for f, v in zip(fs.all, vals):
            if f.numeric:
                term.append(AbstractLiteral(f.name, ZERO if v else POS))
            else:
                term.append(AbstractLiteral(f.name, TRUE if v else FALSE))
        terms.append(frozenset(term))
    return Formula(tuple(terms))


# ----------------------------------------------------------------- QNP

@dataclass(frozen=True)
class QnpProblem:
    name: str
    features: FeatureSet
    init: Formula
    goal: Formula
    actions: tuple[AbstractAction, ...]

    def action(self, name: str) -> AbstractAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)


def build_projection(features: FeatureSet, actions, init: Formula, goal: Formula,
                     name: str = "qnp") -> QnpProblem:
    known = set(features.names)
    for where, fm in (("init", init), ("goal", goal)):
        unknown = fm.features - known
        if unknown:
            raise ProjectionError(f"{where} mentions unknown features {sorted(unknown)}")
    for a in actions:
        bad = validate_abstract_action(a, features)
        if bad:
            raise ProjectionError(f"abstract action {a.name}: {'; '.join(bad)}")
    return QnpProblem(name, features, init, goal, tuple(actions))


def qnp_successors(qnp: QnpProblem, values: tuple, a: AbstractAction, delta_cap: int = 3,
                   counter_cap: int | None = None) -> set[tuple]:
    """Successor feature valuations with increments/decrements of 1..delta_cap.

    Decrements below zero are not generated; neither are increments past
    ``counter_cap`` when one is given.
    """
    fs = qnp.features
    if not a.pre_holds(fs, values):
        raise ProjectionError(f"{a.name} is not applicable at {values}")
    choices = []
    for f, v in zip(fs.all, values):
        e = a.effect_on(f.name)
        if e == SET_TRUE:
            choices.append((True,))
        elif e == SET_FALSE:
            choices.append((False,))
        elif e == INC:
            hi = v + delta_cap if counter_cap is None else min(v + delta_cap, counter_cap)
            choices.append(tuple(range(v + 1, hi + 1)))
        elif e == DEC:
            choices.append(tuple(range(max(v - delta_cap, 0), v)))
        else:
            choices.append((v,))
    return set(itertools.product(*choices))


def verify_interface_soundness(init: Formula, goal: Formula, family, features: FeatureSet,
                               pattern, cap: int = DEFAULT_CAP, max_witnesses: int = 5,
                               enum: FamilyEnumerator | None = None) -> Verdict:
    """(a) every initial state satisfies ``init``; (b) every reachable state
    satisfying ``goal`` is a goal state of its instance."""
    enum = enum or FamilyEnumerator(family, features, pattern, cap)
    witnesses, truncated = [], False
    n_inst = n_states = 0
    done = set()
    for inst, binding, key, states, trunc in enum:
        n_inst += 1
        truncated |= trunc
        n_states += len(states)
        val = to_boolean(features, enum.transitions(inst, inst.init, binding, key)[0])
        if not init.holds(features, val):
            witnesses.append(Witness(str(inst), inst.init, None, "init"))
        goal_key = (key, inst.goal, inst.goal_test)
        for s in states:
            if (goal_key, s) in done:
                continue
            done.add((goal_key, s))
            val = to_boolean(features, enum.transitions(inst, s, binding, key)[0])
            if goal.holds(features, val) and not is_goal(inst, s):
                witnesses.append(Witness(str(inst), s, None, "goal"))
                break
        if len(witnesses) >= max_witnesses:
            break
    return Verdict(_status(witnesses, truncated), witnesses[:max_witnesses], n_inst, n_states,
                   truncated, "interface")


# ---------------------------------------------------------- FOND problems

Lit = tuple  # (prop, bool)


def zero_prop(feature: str) -> str:
    return f"{feature}=0"


def lit_to_prop(x: AbstractLiteral) -> Lit:
    if x.form in (ZERO, POS):
        return (zero_prop(x.feature), x.form == ZERO)
    return (x.feature, x.form == TRUE)


def format_lit(prop: str, value: bool) -> str:
    if prop.endswith("=0"):
        return prop if value else prop[:-2] + ">0"
    return prop if value else "!" + prop


def parse_lit(text: str) -> Lit:
    x = lit(text)
    return lit_to_prop(x)


@dataclass(frozen=True)
class FondAction:
    name: str
    pre: frozenset  # of Lit
    effects: tuple  # components; each a tuple of 1 or 2 outcomes; each outcome a frozenset of Lit
    incs: frozenset = frozenset()  # numerical features incremented
    decs: frozenset = frozenset()  # numerical features decremented (two-outcome components)
    source: AbstractAction | None = field(default=None, compare=False)

    def __post_init__(self):
        for comp in self.effects:
            if len(comp) not in (1, 2):
                raise ProjectionError(f"{self.name}: effect components need 1 or 2 outcomes")

    def outcomes(self) -> list[frozenset]:
        """Cartesian product of the components, as merged literal sets."""
        return [frozenset().union(*combo) for combo in itertools.product(*self.effects)]


@dataclass(frozen=True)
class FondProblem:
    name: str
    props: tuple[str, ...]
    init: "PropFormula"
    goal: "PropFormula"
    actions: tuple[FondAction, ...]
    numeric: frozenset = frozenset()  # features whose zero-props appear in ``props``

    def action(self, name: str) -> FondAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)


@dataclass(frozen=True)
class PropFormula:
    """DNF over propositional literals ``(prop, value)``."""
    terms: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.terms:
            raise ProjectionError("a formula needs at least one term")
        for t in self.terms:
            props = [p for p, _ in t]
            if len(set(props)) != len(props):
                raise ProjectionError(f"inconsistent term {sorted(t)}")

    def holds(self, props: tuple[str, ...], state: tuple[bool, ...]) -> bool:
        idx = {p: i for i, p in enumerate(props)}
        return any(all(state[idx[p]] == v for p, v in t) for t in self.terms)

    def __str__(self):
        return " | ".join(" ".join(format_lit(p, v) for p, v in sorted(t)) for t in self.terms)


def _prop_formula(fm: Formula) -> PropFormula:
    return PropFormula(tuple(frozenset(lit_to_prop(x) for x in t) for t in fm.terms))


def booleanize(qnp: QnpProblem) -> FondProblem:
    """Boolean projection: n -> symbol ``n=0``; n++ -> ``n>0``; n-- -> ``n>0 | n=0``."""
    fs = qnp.features
    props = tuple(f.name for f in fs.booleans) + tuple(zero_prop(f.name) for f in fs.numericals)
    actions = []
    for a in qnp.actions:
        pre = frozenset(lit_to_prop(x) for x in a.pre)
        det, comps, incs, decs = set(), [], set(), set()
        for e in sorted(a.eff):
            if e.effect == SET_TRUE:
                det.add((e.feature, True))
            elif e.effect == SET_FALSE:
                det.add((e.feature, False))
            elif e.effect == INC:
                det.add((zero_prop(e.feature), False))
                incs.add(e.feature)
            else:
                p = zero_prop(e.feature)
                comps.append((frozenset({(p, False)}), frozenset({(p, True)})))
                decs.add(e.feature)
        effects = ((frozenset(det),),) + tuple(comps) if det or not comps else tuple(comps)
        actions.append(FondAction(a.name, pre, effects, frozenset(incs), frozenset(decs), a))
    return FondProblem(qnp.name, props, _prop_formula(qnp.init), _prop_formula(qnp.goal),
                       tuple(actions), frozenset(f.name for f in fs.numericals))


# ---------------------------------------------------------------- Q+ test

@dataclass
class QplusResult:
    identity: bool
    evidence: list[str]


def check_qplus_condition(qnp: QnpProblem) -> QplusResult:
    """Whether the boolean projection can serve directly as the qualitative FOND problem.

    Holds when no numerical variable is both decreased and increased, or when
    every increment of it comes with effects that entail a goal term.
    """
    evidence = []
    identity = True
    decreased = {e.feature for a in qnp.actions for e in a.eff if e.effect == DEC}
    for f in qnp.features.numericals:
        incs = [a for a in qnp.actions if a.effect_on(f.name) == INC]
        if not incs:
            evidence.append(f"{f.name}: never incremented")
            continue
        if f.name not in decreased:
            evidence.append(f"{f.name}: never decremented")
            continue
        for a in incs:
            if _achieves_goal(a, qnp.goal):
                evidence.append(f"{f.name}: incremented by {a.name}, which achieves the goal")
            else:
                identity = False
                evidence.append(f"{f.name}: incremented by {a.name} and decremented elsewhere")
    return QplusResult(identity, evidence)


def _achieves_goal(a: AbstractAction, goal: Formula) -> bool:
    """Some goal term is entailed by the action's effects plus preconditions it leaves untouched."""
    after = {}
    for x in a.pre:
        after[x.feature] = x
    for e in a.eff:
        if e.effect == SET_TRUE:
            after[e.feature] = AbstractLiteral(e.feature, TRUE)
        elif e.effect == SET_FALSE:
            after[e.feature] = AbstractLiteral(e.feature, FALSE)
        elif e.effect == INC:
            after[e.feature] = AbstractLiteral(e.feature, POS)
        else:
            after.pop(e.feature, None)
    return any(all(after.get(x.feature) == x for x in t) for t in goal.terms)


# -------------------------------------------------------------- DNF pass

GOAL_PROP = "_goal"


def initial_states(fond: FondProblem) -> list[tuple[bool, ...]]:
    """Every full assignment satisfying the init formula, in lexicographic order."""
    out = set()
    idx = {p: i for i, p in enumerate(fond.props)}
    for t in fond.init.terms:
        fixed = {idx[p]: v for p, v in t}
        free = [i for i in range(len(fond.props)) if i not in fixed]
        for vals in itertools.product((False, True), repeat=len(free)):
            s = [False] * len(fond.props)
            for i, v in fixed.items():
                s[i] = v
            for i, v in zip(free, vals):
                s[i] = v
            out.add(tuple(s))
    return sorted(out)


def compile_dnf(fond: FondProblem) -> FondProblem:
    """Planner-ready form: one full initial state per term, single goal atom.

    The goal atom is reached through one auxiliary action per goal term.
    Single-term problems are returned unchanged.
    """
    if len(fond.init.terms) == 1 and len(fond.goal.terms) == 1:
        return fond
    props = fond.props
    actions = list(fond.actions)
    goal = fond.goal
    if len(fond.goal.terms) > 1:
        props = props + (GOAL_PROP,)
        for i, term in enumerate(fond.goal.terms):
            actions.append(FondAction(f"_reach-goal-{i}", frozenset(term) | {(GOAL_PROP, False)},
                                      ((frozenset({(GOAL_PROP, True)}),),)))
        goal = PropFormula((frozenset({(GOAL_PROP, True)}),))
    base = FondProblem(fond.name, fond.props, fond.init, fond.goal, (), fond.numeric)
    inits = []
    for s in initial_states(base):
        vals = list(zip(fond.props, s))
        if GOAL_PROP in props:
            vals.append((GOAL_PROP, False))
        inits.append(frozenset(vals))
    return FondProblem(fond.name, props, PropFormula(tuple(inits)), goal, tuple(actions), fond.numeric)


# ------------------------------------------------------------ text formats

def parse_qnp(text: str, features: FeatureSet | None = None) -> QnpProblem:
    """``qnp``/``bool``/``num``/``init``/``goal``/``abstract`` lines.

    ``bool``/``num`` declare variable names; when a FeatureSet is supplied
    its evaluators are attached by name.
    """
    name = "qnp"
    bools, nums = [], []
    init = goal = None
    actions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "qnp":
                name = rest.strip()
            elif head == "bool":
                bools.extend(rest.split())
            elif head == "num":
                nums.extend(rest.split())
            elif head == "init":
                init = Formula.parse(rest)
            elif head == "goal":
                goal = Formula.parse(rest)
            elif head == "abstract":
                actions.append(parse_abstract_line(line))
            else:
                raise ProjectionError(f"unknown directive {head!r}")
        except ValueError as exc:
            raise ProjectionError(f"line {lineno}: {exc}") from None
    if init is None or goal is None:
        raise ProjectionError("qnp needs both init and goal lines")
    if features is not None:
        declared = bools + nums
        if declared and declared != [f.name for f in features.booleans] + [f.name for f in features.numericals]:
            missing = set(declared) ^ set(features.names)
            if missing:
                raise ProjectionError(f"declared variables differ from the feature set: {sorted(missing)}")
        fs = features
    else:
        fs = _opaque_features(bools, nums)
    return build_projection(fs, actions, init, goal, name)


def _opaque_features(bools, nums) -> FeatureSet:
    """Variables without concrete evaluators (enough for planning)."""
    from .features import Expr, Feature, Pattern
    b = tuple(Feature(n, "bool", Expr("atom", (Pattern("_opaque", ()),)), ()) for n in bools)
    m = tuple(Feature(n, "num", Expr("count", (Pattern("_opaque", ()),)), ()) for n in nums)
    return FeatureSet(b, m)


def format_qnp(qnp: QnpProblem) -> str:
    lines = [f"qnp {qnp.name}"]
    if qnp.features.booleans:
        lines.append("bool " + " ".join(f.name for f in qnp.features.booleans))
    if qnp.features.numericals:
        lines.append("num " + " ".join(f.name for f in qnp.features.numericals))
    lines.append(f"init {qnp.init}")
    lines.append(f"goal {qnp.goal}")
    lines.extend(format_abstract_action(a) for a in qnp.actions)
    return "\n".join(lines) + "\n"


def format_fond(fond: FondProblem) -> str:
    lines = [f"fond {fond.name}", "props " + " ".join(fond.props),
             f"init {fond.init}", f"goal {fond.goal}"]
    for a in fond.actions:
        pre = " ".join(format_lit(p, v) for p, v in sorted(a.pre))
        lines.append(f"action {a.name} pre: {pre}".rstrip())
        for comp in a.effects:
            lines.append("  effect " + " | ".join(
                " ".join(format_lit(p, v) for p, v in sorted(out)) for out in comp))
    return "\n".join(lines) + "\n"


def parse_fond(text: str) -> FondProblem:
    name, props = "fond", ()
    init = goal = None
    actions: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "fond":
            name = rest.strip()
        elif head == "props":
            props = tuple(rest.split())
        elif head in ("init", "goal"):
            fm = PropFormula(tuple(frozenset(parse_lit(t) for t in chunk.split())
                                   for chunk in rest.split("|")))
            if head == "init":
                init = fm
            else:
                goal = fm
        elif head == "action":
            aname, _, pre = rest.partition("pre:")
            actions.append([aname.strip(), frozenset(parse_lit(t) for t in pre.split()), []])
        elif head == "effect":
            if not actions:
                raise ProjectionError(f"line {lineno}: effect before any action")
            actions[-1][2].append(tuple(frozenset(parse_lit(t) for t in chunk.split())
                                        for chunk in rest.split("|")))
        else:
            raise ProjectionError(f"line {lineno}: unknown directive {head!r}")
    if init is None or goal is None:
        raise ProjectionError("fond problem needs init and goal")
    out = []
    for aname, pre, comps in actions:
        incs = {p[:-2] for c in comps if len(c) == 1 for p, v in c[0] if p.endswith("=0") and not v}
        decs = {p[:-2] for c in comps if len(c) == 2 for out_ in c for p, _ in out_ if p.endswith("=0")}
        out.append(FondAction(aname, pre, tuple(comps), frozenset(incs), frozenset(decs)))
    numeric = frozenset(p[:-2] for p in props if p.endswith("=0"))
    return FondProblem(name, props, init, goal, tuple(out), numeric)
