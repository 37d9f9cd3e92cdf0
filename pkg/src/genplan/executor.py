"""Run abstract policies on concrete instances.

A policy maps boolean feature valuations to abstract actions; at each step
one of the concrete actions the abstract action represents is chosen by a
strategy (``first``, ``random:<seed>`` or ``adversarial``).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .abstraction import AbstractAction, represents
from .features import FeatureSet, bind_goal_parameters, boolean_valuation, format_boolean_valuation
from .fond import PolicyTable, outcome_states, strongly_connected_components
from .strips import (DEFAULT_CAP, GroundAction, Instance, apply, applicable, goal_distances, is_goal,
                     reachable_states)

GOAL_REACHED = "goal-reached"
UNDEFINED = "policy-undefined"
INAPPLICABLE = "inapplicable"
STEP_CAP = "step-cap"


@dataclass(frozen=True)
class Strategy:
    kind: str  # first | random | adversarial
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        if text in ("first", "adversarial"):
            return cls(text)
        if text.startswith("random"):
            _, _, seed = text.partition(":")
            try:
                return cls("random", int(seed or 0))
            except ValueError:
                raise ValueError(f"bad random seed in {text!r}") from None
        raise ValueError(f"unknown strategy {text!r}")

    def __str__(self):
        return f"random:{self.seed}" if self.kind == "random" else self.kind


@dataclass
class Step:
    state: frozenset
    valuation: tuple
    abstract: str
    action: GroundAction


@dataclass
class Trajectory:
    instance: str
    strategy: str
    steps: list[Step]
    outcome: str
    final: frozenset
    tracking_errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.outcome == GOAL_REACHED and not self.tracking_errors

    def format(self, features: FeatureSet) -> str:
        lines = [f"step {i}: {format_boolean_valuation(features, st.valuation)} | {st.abstract} -> {st.action}"
                 for i, st in enumerate(self.steps)]
        lines += [f"tracking: {e}" for e in self.tracking_errors]
        lines.append(f"outcome: {self.outcome}")
        return "\n".join(lines) + "\n"


def instantiate(a_bar: AbstractAction, inst: Instance, s, features: FeatureSet, binding) -> list[GroundAction]:
    """Applicable concrete actions represented by ``a_bar`` at ``s``, in declaration order."""
    return [a for a in applicable(inst, s) if represents(a_bar, a, inst, s, features, binding)]


def default_step_cap(cap: int = DEFAULT_CAP) -> int:
    return 10 * cap


class _Distances:
    """Goal distances shared by instances with the same actions and goal."""

    def __init__(self):
        self._cache = {}

    def get(self, inst: Instance, s) -> tuple[dict, frozenset]:
        key = (id(inst.actions), inst.goal, inst.goal_test)
        hit = self._cache.get(key)
        if hit is None or s not in hit[1]:
            dist, _ = goal_distances(inst)
            hit = self._cache[key] = (dist, reachable_states(inst).states)
        return hit


_DISTANCES = _Distances()


def _choose(cands, strategy: Strategy, rng, inst, s):
    if strategy.kind == "first":
        return cands[0]
    if strategy.kind == "random":
        return cands[rng.randrange(len(cands))]
    dist, states = _DISTANCES.get(inst, s)
    best, best_d = None, -1.0
    for a in cands:
        t = apply(inst, s, a)
        if t not in states:
            dist, states = _DISTANCES.get(inst, t)
        d = dist.get(t, math.inf)
        if d > best_d:
            best, best_d = a, d
    return best


def run_policy(policy: PolicyTable, inst: Instance, features: FeatureSet, binding,
               strategy: Strategy | str = "first", step_cap: int | None = None,
               track: bool = True) -> Trajectory:
    if isinstance(strategy, str):
        strategy = Strategy.parse(strategy)
    if step_cap is None:
        step_cap = default_step_cap()
    if step_cap < 1:
        raise ValueError("step_cap must be >= 1")
    rng = random.Random(strategy.seed)
    idx = {p: i for i, p in enumerate(policy.props)}
    pad = (False,) * (len(policy.props) - len(features.all))
    s = inst.init
    steps, errors = [], []
    outcome = STEP_CAP
    val = boolean_valuation(features, inst, s, binding)
    for _ in range(step_cap + 1):
        if is_goal(inst, s):
            outcome = GOAL_REACHED
            break
        if len(steps) >= step_cap:
            break
        key = val + pad
        name = policy.lookup(key)
        if name is None or name.startswith("_"):
            outcome = UNDEFINED
            break
        fa = policy.actions[name]
        cands = instantiate(fa.source, inst, s, features, binding)
        if not cands:
            outcome = INAPPLICABLE
            break
        a = _choose(cands, strategy, rng, inst, s)
        steps.append(Step(s, val, name, a))
        s = apply(inst, s, a)
        nxt = boolean_valuation(features, inst, s, binding)
        if track and nxt + pad not in outcome_states(fa, key, idx):
            errors.append(f"step {len(steps) - 1}: {name} led to "
                          f"{format_boolean_valuation(features, nxt)}, not a projected outcome")
        val = nxt
    return Trajectory(str(inst), str(strategy), steps, outcome, s, errors)


@dataclass
class GeneralizationReport:
    runs: int = 0
    reached: int = 0
    outcomes: dict = field(default_factory=dict)
    by_strategy: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)  # Trajectory objects, capped
    failure_count: int = 0
    instances: int = 0

    @property
    def ok(self) -> bool:
        return self.failure_count == 0

    def merge(self, other: "GeneralizationReport") -> "GeneralizationReport":
        out = GeneralizationReport(self.runs + other.runs, self.reached + other.reached)
        for src in (self.outcomes, other.outcomes):
            for k, v in src.items():
                out.outcomes[k] = out.outcomes.get(k, 0) + v
        for src in (self.by_strategy, other.by_strategy):
            for k, (r, g) in src.items():
                r0, g0 = out.by_strategy.get(k, (0, 0))
                out.by_strategy[k] = (r0 + r, g0 + g)
        out.failures = self.failures + other.failures
        out.failure_count = self.failure_count + other.failure_count
        out.instances = self.instances + other.instances
        return out

    def summary_lines(self) -> list[str]:
        lines = [f"instances: {self.instances}", f"runs: {self.runs}", f"goal_reached: {self.reached}",
                 f"failures: {self.failure_count}"]
        for k in sorted(self.outcomes):
            lines.append(f"outcome.{k}: {self.outcomes[k]}")
        for k in sorted(self.by_strategy):
            r, g = self.by_strategy[k]
            lines.append(f"strategy.{k}: {g}/{r}")
        return lines


def verify_generalized(policy: PolicyTable, family, features: FeatureSet, pattern,
                       strategies=("first",), trials: int = 1, step_cap: int | None = None,
                       max_failures: int = 5, check=None) -> GeneralizationReport:
    """Run ``policy`` on every instance under every strategy.

    ``random`` strategies are repeated ``trials`` times with consecutive
    seeds; deterministic strategies run once. ``check`` is an optional extra
    predicate on the final state of goal-reaching runs.
    """
    report = GeneralizationReport()
    strategies = [Strategy.parse(x) if isinstance(x, str) else x for x in strategies]
    for inst in family:
        report.instances += 1
        binding = bind_goal_parameters(pattern, inst)
        for strat in strategies:
            variants = [Strategy("random", strat.seed + k) for k in range(trials)] \
                if strat.kind == "random" else [strat]
            for v in variants:
                tr = run_policy(policy, inst, features, binding, v, step_cap)
                good = tr.ok and (check is None or check(inst, tr))
                report.runs += 1
                report.outcomes[tr.outcome] = report.outcomes.get(tr.outcome, 0) + 1
                r, g = report.by_strategy.get(strat.kind, (0, 0))
                report.by_strategy[strat.kind] = (r + 1, g + good)
                if good:
                    report.reached += 1
                else:
                    report.failure_count += 1
                    if len(report.failures) < max_failures:
                        report.failures.append(tr)
    return report


@dataclass
class ClosureResult:
    """Every state reachable under a policy when any represented action may be chosen."""
    instance: str
    states: int
    failures: list = field(default_factory=list)
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures and not self.truncated


def policy_closure(policy: PolicyTable, inst: Instance, features: FeatureSet, binding,
                   goal_formula=None, cap: int = DEFAULT_CAP, max_failures: int = 5) -> ClosureResult:
    """Exhaustive form of the execution check on one instance.

    Explores all concretization choices, so it covers every trajectory the
    policy can induce: reports reachable non-goal states where the policy is
    undefined or its action represents nothing, states satisfying
    ``goal_formula`` that are not goal states, and cycles (infinite runs).
    """
    pad = (False,) * (len(policy.props) - len(features.all))
    succ, failures = {}, []
    queue = [inst.init]
    seen = {inst.init}
    truncated = False
    while queue and len(failures) < max_failures:
        s = queue.pop()
        val = boolean_valuation(features, inst, s, binding)
        goal = is_goal(inst, s)
        if goal_formula is not None and not goal and goal_formula.holds(features, val):
            failures.append(f"goal formula holds at a non-goal state {_fmt(s)}")
        if goal:
            continue
        name = policy.lookup(val + pad)
        if name is None or name.startswith("_"):
            failures.append(f"{UNDEFINED} at {_fmt(s)}")
            continue
        cands = instantiate(policy.actions[name].source, inst, s, features, binding)
        if not cands:
            failures.append(f"{INAPPLICABLE}: {name} at {_fmt(s)}")
            continue
        succ[s] = [apply(inst, s, a) for a in cands]
        for t in succ[s]:
            if t not in seen:
                if len(seen) >= cap:
                    truncated = True
                    continue
                seen.add(t)
                queue.append(t)
    if not failures:
        for comp in strongly_connected_components(list(succ), succ):
            if len(comp) > 1 or comp[0] in succ.get(comp[0], ()):
                failures.append(f"cycle through {len(comp)} state(s), e.g. {_fmt(comp[0])}")
                break
    return ClosureResult(str(inst), len(seen), failures[:max_failures], truncated)


def _fmt(s) -> str:
    return "{" + ", ".join(sorted(map(str, s))) + "}"
