"""Explicit-state strong-cyclic planning over boolean FOND problems, the
termination sieve, and the search for terminating (qualitative) policies.
"""
from __future__ import annotations

import hashlib
import itertools
import time
from collections import deque
from dataclasses import dataclass, field

from .abstraction import INC
from .features import to_boolean
from .projection import (FondAction, FondProblem, QnpProblem, format_lit, initial_states,
                         parse_lit, qnp_successors)

FondState = tuple  # tuple[bool, ...] aligned with FondProblem.props


class UnsolvableError(Exception):
    def __init__(self, message: str, core=()):
        super().__init__(message)
        self.core = list(core)


class PolicyError(ValueError):
    pass


# ------------------------------------------------------------- semantics

def _index(fond: FondProblem) -> dict[str, int]:
    return {p: i for i, p in enumerate(fond.props)}


def applicable_in(a: FondAction, s: FondState, idx) -> bool:
    return all(s[idx[p]] == v for p, v in a.pre)


def outcome_states(a: FondAction, s: FondState, idx) -> list[FondState]:
    """Successors in outcome order (cartesian product of the effect components)."""
    out = []
    for lits in a.outcomes():
        t = list(s)
        for p, v in lits:
            t[idx[p]] = v
        t = tuple(t)
        if t not in out:
            out.append(t)
    return out


def format_state(props, s: FondState) -> str:
    return " ".join(format_lit(p, v) for p, v in zip(props, s))


# ----------------------------------------------------------------- policy

@dataclass
class PolicyTable:
    props: tuple[str, ...]
    entries: dict  # FondState -> action name
    actions: dict  # name -> FondAction
    problem: str = ""
    problem_hash: str = ""
    stats: dict = field(default_factory=dict)

    def lookup(self, s: FondState) -> str | None:
        return self.entries.get(tuple(s))

    def __len__(self):
        return len(self.entries)

    def rules(self) -> list[tuple[frozenset, str]]:
        return [(frozenset(zip(self.props, s)), a) for s, a in sorted(self.entries.items())]

    def compact_rules(self) -> list[tuple[frozenset, str]]:
        """Merge rules for the same action differing in one literal; covers exactly the same states."""
        rules = [(dict(zip(self.props, s)), a) for s, a in sorted(self.entries.items())]
        changed = True
        while changed:
            changed = False
            for i, j in itertools.combinations(range(len(rules)), 2):
                (li, ai), (lj, aj) = rules[i], rules[j]
                if ai != aj or li.keys() != lj.keys():
                    continue
                diff = [p for p in li if li[p] != lj[p]]
                if len(diff) == 1:
                    merged = {p: v for p, v in li.items() if p != diff[0]}
                    rules = rules[:i] + [(merged, ai)] + rules[i + 1:j] + rules[j + 1:]
                    changed = True
                    break
        return [(frozenset(l.items()), a) for l, a in rules]

    def format(self, compact: bool = False) -> str:
        order = {p: i for i, p in enumerate(self.props)}
        lines = []
        for lits, a in (self.compact_rules() if compact else self.rules()):
            body = " ".join(format_lit(p, v) for p, v in sorted(lits, key=lambda x: order[x[0]]))
            lines.append(f"when {body} do {a}")
        return "\n".join(lines) + ("\n" if lines else "")


def parse_policy(text: str, fond: FondProblem) -> PolicyTable:
    """Read ``when <lits> do <action>`` lines; partial rules expand to every matching state."""
    idx = _index(fond)
    actions = {a.name: a for a in fond.actions}
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("when ") or " do " not in line:
            raise PolicyError(f"line {lineno}: expected 'when <lits> do <action>'")
        body, _, name = line[5:].rpartition(" do ")
        name = name.strip()
        if name not in actions:
            raise PolicyError(f"line {lineno}: unknown action {name!r}")
        lits = [parse_lit(t) for t in body.split()]
        for p, _ in lits:
            if p not in idx:
                raise PolicyError(f"line {lineno}: unknown proposition {p!r}")
        fixed = dict(lits)
        free = [p for p in fond.props if p not in fixed]
        for vals in itertools.product((False, True), repeat=len(free)):
            full = dict(fixed, **dict(zip(free, vals)))
            s = tuple(full[p] for p in fond.props)
            if entries.setdefault(s, name) != name:
                raise PolicyError(f"line {lineno}: conflicting rules for {format_state(fond.props, s)}")
    return PolicyTable(fond.props, entries, actions, fond.name, problem_hash(fond))


def problem_hash(fond: FondProblem) -> str:
    from .projection import format_fond
    return hashlib.sha256(format_fond(fond).encode()).hexdigest()[:16]


# ------------------------------------------------------ strong cyclic solve

@dataclass
class _Space:
    fond: FondProblem
    inits: list
    goal: set
    trans: dict  # state -> list[(action index, [successors])]


def _explore(fond: FondProblem) -> _Space:
    idx = _index(fond)
    inits = initial_states(fond)
    goal = set()
    trans = {}
    queue = deque(inits)
    seen = set(inits)
    while queue:
        s = queue.popleft()
        if fond.goal.holds(fond.props, s):
            goal.add(s)
            continue
        moves = []
        for i, a in enumerate(fond.actions):
            if applicable_in(a, s, idx):
                succ = outcome_states(a, s, idx)
                moves.append((i, succ))
                for t in succ:
                    if t not in seen:
                        seen.add(t)
                        queue.append(t)
        trans[s] = moves
    return _Space(fond, inits, goal, trans)


def strong_cyclic_solve(fond: FondProblem, forbidden=frozenset()) -> PolicyTable:
    """Strong-cyclic policy over the states reachable from every initial state.

    ``forbidden`` holds (state, action name) pairs the policy may not use.
    Raises :class:`UnsolvableError` when some initial state cannot be covered.
    """
    t0 = time.perf_counter()
    space = _explore(fond)
    names = [a.name for a in fond.actions]
    pairs = {s: [(i, succ) for i, succ in moves if (s, names[i]) not in forbidden]
             for s, moves in space.trans.items()}
    goal = space.goal
    iterations = 0
    while True:
        iterations += 1
        # keep only pairs whose outcomes all stay inside the candidate region
        pruned = True
        while pruned:
            pruned = False
            for s in sorted(pairs):
                keep = [(i, succ) for i, succ in pairs[s]
                        if all(t in goal or pairs.get(t) for t in succ)]
                if len(keep) != len(pairs[s]):
                    pairs[s] = keep
                    pruned = True
        dist = _goal_layers(pairs, goal)
        dropped = [s for s in pairs if pairs[s] and s not in dist]
        for s in dropped:
            pairs[s] = []
        if not dropped:
            break

    core = [s for s in space.inits if s not in goal and not pairs.get(s)]
    if core:
        raise UnsolvableError(f"{len(core)} initial state(s) cannot reach the goal", core)

    chosen = {}
    for s in sorted(pairs):
        if not pairs[s]:
            continue
        best = None
        for i, succ in pairs[s]:  # declaration order
            d = min(dist[t] for t in succ)
            if d == dist[s] - 1:
                best = i
                break
        chosen[s] = best

    # restrict to states reachable from the initial states under the policy
    entries = {}
    queue = deque(s for s in space.inits if s not in goal)
    seen = set(queue)
    idx = _index(fond)
    while queue:
        s = queue.popleft()
        a = fond.actions[chosen[s]]
        entries[s] = a.name
        for t in outcome_states(a, s, idx):
            if t not in goal and t not in seen:
                seen.add(t)
                queue.append(t)
    stats = {"states": len(space.trans) + len(goal), "iterations": iterations,
             "wall_ms": round((time.perf_counter() - t0) * 1000, 3)}
    return PolicyTable(fond.props, dict(sorted(entries.items())), {a.name: a for a in fond.actions},
                       fond.name, problem_hash(fond), stats)


def _goal_layers(pairs, goal) -> dict:
    dist = {g: 0 for g in goal}
    level = 0
    frontier = True
    while frontier:
        level += 1
        frontier = []
        for s in sorted(pairs):
            if s in dist:
                continue
            if any(any(t in dist and dist[t] == level - 1 for t in succ) for _, succ in pairs[s]):
                frontier.append(s)
        for s in frontier:
            dist[s] = level
    return dist


# ------------------------------------------------------------- termination

@dataclass(frozen=True)
class Edge:
    src: FondState
    action: str
    outcome: int
    dst: FondState
    incs: frozenset
    decs: frozenset


@dataclass
class PolicyGraph:
    nodes: list
    edges: list
    inits: list


def policy_graph(policy: PolicyTable, fond: FondProblem) -> PolicyGraph:
    idx = _index(fond)
    inits = [s for s in initial_states(fond)]
    nodes, edges = [], []
    seen = set()
    queue = deque(inits)
    seen.update(inits)
    while queue:
        s = queue.popleft()
        nodes.append(s)
        if fond.goal.holds(fond.props, s):
            continue
        name = policy.lookup(s)
        if name is None:
            continue
        a = policy.actions[name]
        if not applicable_in(a, s, idx):
            raise PolicyError(f"{name} is not applicable at {format_state(fond.props, s)}")
        for k, t in enumerate(outcome_states(a, s, idx)):
            edges.append(Edge(s, name, k, t, a.incs, a.decs))
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return PolicyGraph(sorted(nodes), edges, inits)


def strongly_connected_components(nodes, succ) -> list[list]:
    """Tarjan's algorithm, iterative. ``succ`` maps a node to its successors."""
    index, low, on_stack = {}, {}, set()
    stack, out = [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


@dataclass
class Lasso:
    prefix: list  # edges from an initial state into the loop
    cycle: list   # closed walk over every remaining edge of the stuck component

    def format(self, props) -> str:
        def fmt(e):
            return f"[{format_state(props, e.src)}] --{e.action}#{e.outcome}--> [{format_state(props, e.dst)}]"
        lines = ["prefix:"] + ["  " + fmt(e) for e in self.prefix]
        lines += ["cycle:"] + ["  " + fmt(e) for e in self.cycle]
        return "\n".join(lines)


@dataclass
class TerminationResult:
    terminating: bool
    certificate: list  # (component states, feature) in deletion order
    lasso: Lasso | None = None
    culprit: tuple | None = None  # (state, action) pair incrementing a looping variable


def check_termination(policy: PolicyTable, fond: FondProblem) -> TerminationResult:
    """Sieve: repeatedly drop, inside each cyclic component, the edges that
    decrement a variable the component never increments."""
    graph = policy_graph(policy, fond)
    edges = list(graph.edges)
    certificate = []
    while True:
        succ = {}
        for e in edges:
            succ.setdefault(e.src, []).append(e.dst)
        comps = strongly_connected_components(graph.nodes, succ)
        member = {s: i for i, c in enumerate(comps) for s in c}
        inner = {}
        for e in edges:
            if member[e.src] == member[e.dst]:
                inner.setdefault(member[e.src], []).append(e)
        if not inner:
            return TerminationResult(True, certificate)
        removed = set()
        for ci in sorted(inner, key=lambda i: comps[i]):
            ce = inner[ci]
            decs = set().union(*(e.decs for e in ce))
            incs = set().union(*(e.incs for e in ce))
            free = sorted(decs - incs)
            if not free:
                return _nontermination(graph, comps[ci], ce, decs, certificate)
            for n in free:
                certificate.append((tuple(comps[ci]), n))
            removed.update(id(e) for e in ce if e.decs & set(free))
        edges = [e for e in edges if id(e) not in removed]


def _nontermination(graph: PolicyGraph, comp, comp_edges, decs, certificate) -> TerminationResult:
    comp_set = set(comp)
    # prefix: BFS over the full policy graph from the initial states
    out = {}
    for e in graph.edges:
        out.setdefault(e.src, []).append(e)
    parent = {s: None for s in graph.inits}
    queue = deque(graph.inits)
    entry = next((s for s in graph.inits if s in comp_set), None)
    while queue and entry is None:
        s = queue.popleft()
        for e in out.get(s, ()):
            if e.dst not in parent:
                parent[e.dst] = e
                if e.dst in comp_set:
                    entry = e.dst
                    break
                queue.append(e.dst)
    prefix = []
    node = entry
    while parent.get(node) is not None:
        prefix.append(parent[node])
        node = parent[node].src
    prefix.reverse()

    # cycle: closed walk from ``entry`` covering every component edge
    inner_out = {}
    for e in comp_edges:
        inner_out.setdefault(e.src, []).append(e)

    def path(a, b):
        if a == b:
            return []
        prev = {a: None}
        q = deque([a])
        while q:
            s = q.popleft()
            for e in inner_out.get(s, ()):
                if e.dst not in prev:
                    prev[e.dst] = e
                    if e.dst == b:
                        walk, n = [], b
                        while prev[n] is not None:
                            walk.append(prev[n])
                            n = prev[n].src
                        return walk[::-1]
                    q.append(e.dst)
        raise AssertionError("component is not strongly connected")

    cycle, here = [], entry
    for e in comp_edges:
        cycle += path(here, e.src) + [e]
        here = e.dst
    cycle += path(here, entry)

    culprit_edge = next(e for e in sorted(comp_edges, key=lambda e: (e.src, e.action, e.outcome))
                        if e.incs & decs)
    return TerminationResult(False, certificate, Lasso(prefix, cycle),
                             (culprit_edge.src, culprit_edge.action))


# ---------------------------------------------------------- qualitative

def qualitative_solve(fond: FondProblem, max_iterations: int | None = None) -> PolicyTable:
    """Strong-cyclic policy that also passes the termination sieve.

    Each rejected candidate contributes one forbidden (state, action) pair:
    an edge of the stuck loop that increments a variable the loop decrements.
    """
    t0 = time.perf_counter()
    if max_iterations is None:
        max_iterations = (2 ** len(fond.props)) * max(1, len(fond.actions)) + 1
    forbidden = set()
    rejected = 0
    for _ in range(max_iterations):
        policy = strong_cyclic_solve(fond, frozenset(forbidden))
        result = check_termination(policy, fond)
        if result.terminating:
            policy.stats.update(rejected=rejected, sieve_steps=len(result.certificate),
                                wall_ms=round((time.perf_counter() - t0) * 1000, 3))
            policy.stats["certificate"] = result.certificate
            return policy
        rejected += 1
        forbidden.add(result.culprit)
    raise UnsolvableError(f"no terminating strong-cyclic policy within {max_iterations} candidates")


def check_policy_structure(policy: PolicyTable, fond: FondProblem) -> list[str]:
    """Closedness, properness and precondition checks; empty list when all hold."""
    idx = _index(fond)
    problems = []
    graph_nodes = set()
    queue = deque(initial_states(fond))
    graph_nodes.update(queue)
    succ = {}
    while queue:
        s = queue.popleft()
        if fond.goal.holds(fond.props, s):
            continue
        name = policy.lookup(s)
        if name is None:
            problems.append(f"undefined at reachable state [{format_state(fond.props, s)}]")
            continue
        a = policy.actions[name]
        if not applicable_in(a, s, idx):
            problems.append(f"{name} inapplicable at [{format_state(fond.props, s)}]")
            continue
        succ[s] = outcome_states(a, s, idx)
        for t in succ[s]:
            if t not in graph_nodes:
                graph_nodes.add(t)
                queue.append(t)
    for s, name in policy.entries.items():
        if fond.goal.holds(fond.props, s):
            problems.append(f"entry at goal state [{format_state(fond.props, s)}]")
    # properness: backward reachability of the goal inside the policy graph
    good = {s for s in graph_nodes if fond.goal.holds(fond.props, s)}
    changed = True
    while changed:
        changed = False
        for s, ts in succ.items():
            if s not in good and any(t in good for t in ts):
                good.add(s)
                changed = True
    for s in sorted(graph_nodes - good):
        problems.append(f"goal unreachable from [{format_state(fond.props, s)}]")
    return problems


# ------------------------------------------------------ bounded simulation

@dataclass
class SimulationResult:
    initial: int
    states: int
    capped: int  # states whose increments were clipped by the counter cap
    longest: int
    bound: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.longest <= self.bound


def bounded_qnp_check(policy: PolicyTable, qnp: QnpProblem, delta_cap: int = 3,
                      counter_cap: int = 10, max_failures: int = 5) -> SimulationResult:
    """Run the policy on the numerical projection itself.

    Every initial valuation with counters in ``[0, counter_cap]`` is
    expanded with increments and decrements of 1..``delta_cap``. A reachable
    non-goal cycle is a run that never reaches the goal although every
    decremented counter is also incremented inside it, so it is fair; any
    such cycle, an undefined entry or an inapplicable action is a failure.
    """
    fs = qnp.features
    pad = (False,) * (len(policy.props) - len(fs.all))
    domains = [range(counter_cap + 1) if f.numeric else (False, True) for f in fs.all]
    inits = [v for v in itertools.product(*domains) if qnp.init.holds(fs, v)]
    succ, failures = {}, []
    capped = 0
    queue = deque(inits)
    seen = set(inits)
    while queue:
        v = queue.popleft()
        if qnp.goal.holds(fs, v):
            continue
        name = policy.lookup(to_boolean(fs, v) + pad)
        if name is None or name.startswith("_"):
            failures.append(f"undefined at {v}")
            continue
        a = qnp.action(name)
        if not a.pre_holds(fs, v):
            failures.append(f"{name} inapplicable at {v}")
            continue
        if any(a.effect_on(f.name) == INC and x + delta_cap > counter_cap for f, x in zip(fs.all, v)):
            capped += 1
        succ[v] = sorted(qnp_successors(qnp, v, a, delta_cap, counter_cap))
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    nodes = sorted(seen)
    for comp in strongly_connected_components(nodes, succ):
        if len(comp) > 1 or comp[0] in succ.get(comp[0], ()):
            failures.append(f"fair non-goal cycle through {comp[0]}")
    longest = 0
    if not any(f.startswith("fair") for f in failures):
        depth = {}
        for v in reversed(_topological(nodes, succ)):
            depth[v] = 1 + max((depth[w] for w in succ.get(v, ())), default=-1) if v in succ else 0
        longest = max((depth[v] for v in inits), default=0)
    bound = (2 ** len(fs.all)) * (counter_cap + 1) * max(1, len(fs.numericals))
    return SimulationResult(len(inits), len(seen), capped, longest, bound, failures[:max_failures])


def _topological(nodes, succ) -> list:
    order, state = [], {}
    for root in nodes:
        if root in state:
            continue
        stack = [(root, iter(succ.get(root, ())))]
        state[root] = 1
        while stack:
            v, it = stack[-1]
            for w in it:
                if w not in state:
                    state[w] = 1
                    stack.append((w, iter(succ.get(w, ()))))
                    break
            else:
                stack.pop()
                order.append(v)
    return order[::-1]
