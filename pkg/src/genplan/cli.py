"""Command-line front end: ``genplan <command> [options]``.

Exit status: 0 verified/solved, 1 refuted/unsolvable/failed runs,
2 usage or parse errors.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

from . import examples as ex
from .abstraction import VERIFIED, FamilyEnumerator, check_all, parse_abstract_actions
from .executor import Strategy, policy_closure, run_policy, verify_generalized
from .features import (FeatureError, bind_goal_parameters, boolean_valuation, parse_features,
                       parse_pattern)
from .fond import (PolicyError, UnsolvableError, bounded_qnp_check, check_termination, parse_policy,
                   qualitative_solve, strong_cyclic_solve)
from .projection import (ProjectionError, booleanize, check_qplus_condition, compile_dnf, format_fond,
                         format_qnp, parse_fond, parse_qnp, verify_interface_soundness)
from .strips import DEFAULT_CAP, InstanceError, format_state, load_instance

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ report

class Report:
    """Line-oriented ``key: value`` report grouped under ``[section]`` headers."""

    ORDER = ("command", "inputs", "verdicts", "projection", "planner", "policy", "termination",
             "simulation", "execution", "witnesses", "timings")

    def __init__(self, command: str, argv):
        self.sections: dict[str, list[tuple[str, str]]] = {}
        self.add("command", "name", command)
        self.add("command", "argv", " ".join(argv))
        self.timings: list[tuple[str, float]] = []

    def add(self, section: str, key: str, value) -> None:
        self.sections.setdefault(section, []).append((key, str(value)))

    def text(self, section: str, body: str) -> None:
        for line in body.splitlines():
            self.add(section, "line", line)

    def input(self, label: str, content: str) -> None:
        self.add("inputs", label, hashlib.sha256(content.encode()).hexdigest())

    def timed(self, label: str, t0: float) -> None:
        self.timings.append((label, round((time.perf_counter() - t0) * 1000, 3)))

    def render(self, timings: bool = False) -> str:
        out = []
        names = [s for s in self.ORDER if s in self.sections] + \
            [s for s in self.sections if s not in self.ORDER]
        for name in names:
            out.append(f"[{name}]")
            out.extend(f"{k}: {v}" for k, v in self.sections[name])
        if timings and self.timings:
            out.append("[timings]")
            out.extend(f"{k}_ms: {v}" for k, v in self.timings)
        return "\n".join(out) + "\n"


# ----------------------------------------------------------------- inputs

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _example(args) -> ex.Example | None:
    if getattr(args, "example", None) is None:
        return None
    try:
        return ex.EXAMPLES[args.example]
    except KeyError:
        raise UsageError(f"unknown example {args.example!r}; known: {sorted(ex.EXAMPLES)}") from None


def _features(args, report):
    e = _example(args)
    if args.features:
        text = _read(args.features)
    elif e is not None:
        text = ex.data_text(e.features_file)
    else:
        raise UsageError("need --example or --features")
    report.input("features", text)
    return parse_features(text)


def _pattern(args):
    e = _example(args)
    if args.pattern is not None:
        return parse_pattern(args.pattern)
    return e.goal_pattern if e is not None else []


def _qnp(args, report, features=None):
    e = _example(args)
    if getattr(args, "qnp", None):
        text = _read(args.qnp)
    elif getattr(args, "problem", None):
        if args.problem not in ex.PROBLEMS:
            raise UsageError(f"unknown problem {args.problem!r}; known: {sorted(ex.PROBLEMS)}")
        text = ex.data_text(ex.PROBLEMS[args.problem])
        if args.problem in ex.EXAMPLES and features is None:
            features = ex.EXAMPLES[args.problem].features
    elif e is not None:
        text = ex.data_text(e.qnp_file)
        features = features or e.features
    else:
        raise UsageError("need --example, --problem or --qnp")
    report.input("qnp", text)
    return parse_qnp(text, features)


def _family(args, default: str | None):
    name = args.family or default
    instances = []
    for path in getattr(args, "instance", None) or []:
        instances.append(load_instance(path))
    if instances and not args.family:
        return "files", instances
    if name is None:
        raise UsageError("need --family or --instance")
    try:
        return name, instances + ex.family(name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _action_set(args, report):
    """Abstract actions, features and goal pattern for the check commands."""
    e = _example(args)
    if args.actions:
        if args.actions in ex.ACTION_SETS:
            actions_file, features_file, pattern = ex.ACTION_SETS[args.actions]
            text = ex.data_text(actions_file)
            ftext = _read(args.features) if args.features else ex.data_text(features_file)
            pat = parse_pattern(args.pattern if args.pattern is not None else pattern)
        else:
            text = _read(args.actions)
            if not args.features:
                raise UsageError("an actions file needs --features")
            ftext = _read(args.features)
            pat = _pattern(args)
        report.input("actions", text)
        report.input("features", ftext)
        return parse_abstract_actions(text), parse_features(ftext), pat, "qclear_le4"
    if e is not None:
        fs = _features(args, report)
        qnp = _qnp(args, report, fs)
        return list(qnp.actions), fs, _pattern(args), e.check_family
    raise UsageError("need --actions or --example")


def _fond(args, report):
    if getattr(args, "fond", None):
        text = _read(args.fond)
        report.input("fond", text)
        return None, parse_fond(text)
    features = _features(args, report) if (args.features or _example(args)) and not args.problem else None
    qnp = _qnp(args, report, features)
    return qnp, booleanize(qnp)


def _strategies(args, default=("first",)):
    try:
        return [Strategy.parse(s) for s in (args.strategy or default)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _witness_lines(verdict) -> list[str]:
    out = []
    for w in verdict.witnesses:
        action = f" action={w.action}" if w.action is not None else ""
        out.append(f"{verdict.subject}: instance={w.instance}{action} state={format_state(w.state)}")
    return out


# --------------------------------------------------------------- commands

def _check(args, report, which: str) -> int:
    actions, fs, pattern, default_family = _action_set(args, report)
    fam_name, family = _family(args, default_family)
    report.add("inputs", "family", f"{fam_name} ({len(family)} instances)")
    t0 = time.perf_counter()
    sound, complete = check_all(actions, family, fs, pattern, args.cap)
    report.timed("enumeration", t0)
    verdicts = list(sound.values()) if which == "sound" else [complete]
    for v in verdicts:
        key = f"sound.{v.subject}" if which == "sound" else "complete"
        report.add("verdicts", key, f"{v.status} instances={v.instances} states={v.states}")
        for line in _witness_lines(v):
            report.add("witnesses", "witness", line)
    return EXIT_OK if all(v.status == VERIFIED for v in verdicts) else EXIT_FAIL


def cmd_check_sound(args, report):
    return _check(args, report, "sound")


def cmd_check_complete(args, report):
    return _check(args, report, "complete")


def cmd_check_interface(args, report):
    e = _example(args)
    fs = _features(args, report)
    qnp = _qnp(args, report, fs)
    fam_name, family = _family(args, e.check_family if e else None)
    report.add("inputs", "family", f"{fam_name} ({len(family)} instances)")
    v = verify_interface_soundness(qnp.init, qnp.goal, family, fs, _pattern(args), args.cap)
    report.add("verdicts", "interface", f"{v.status} instances={v.instances} states={v.states}")
    for line in _witness_lines(v):
        report.add("witnesses", "witness", line)
    return EXIT_OK if v.status == VERIFIED else EXIT_FAIL


def cmd_project(args, report):
    fs = _features(args, report) if (args.features or _example(args)) and not args.problem else None
    qnp = _qnp(args, report, fs)
    print(format_qnp(qnp), end="")
    report.add("projection", "features", " ".join(qnp.features.names))
    report.add("projection", "actions", len(qnp.actions))
    return EXIT_OK


def cmd_booleanize(args, report):
    qnp, fond = _fond(args, report)
    if args.compile:
        fond = compile_dnf(fond)
    print(format_fond(fond), end="")
    if qnp is not None:
        q = check_qplus_condition(qnp)
        report.add("projection", "qplus_identity", str(q.identity).lower())
    report.add("projection", "props", " ".join(fond.props))
    return EXIT_OK


def _solve(args, report):
    qnp, fond = _fond(args, report)
    compiled = compile_dnf(fond)
    if qnp is not None:
        q = check_qplus_condition(qnp)
        report.add("projection", "qplus_identity", str(q.identity).lower())
        for line in q.evidence:
            report.add("projection", "qplus_evidence", line)
    report.add("projection", "props", " ".join(compiled.props))
    report.add("projection", "initial_terms", len(compiled.init.terms))
    t0 = time.perf_counter()
    try:
        if args.strong_cyclic_only:
            policy = strong_cyclic_solve(compiled)
        else:
            policy = qualitative_solve(compiled)
    except UnsolvableError as exc:
        report.timed("planner", t0)
        report.add("planner", "status", "unsolvable")
        report.add("planner", "reason", exc)
        for s in exc.core:
            report.add("witnesses", "core", " ".join(f"{p}={int(v)}" for p, v in zip(compiled.props, s)))
        return qnp, compiled, None
    report.timed("planner", t0)
    report.add("planner", "status", "solved")
    report.add("planner", "states_expanded", policy.stats.get("states"))
    report.add("planner", "iterations", policy.stats.get("iterations"))
    report.add("planner", "rejected_candidates", policy.stats.get("rejected", 0))
    report.add("planner", "problem_hash", policy.problem_hash)
    report.add("policy", "entries", len(policy))
    report.text("policy", policy.format())
    report.add("policy", "compact_rules", len(policy.compact_rules()))
    report.text("policy", policy.format(compact=True))
    term = check_termination(policy, compiled)
    report.add("termination", "terminating", str(term.terminating).lower())
    for comp, n in term.certificate:
        report.add("termination", "delete", f"{n} in component of size {len(comp)}")
    if term.lasso is not None:
        report.text("witnesses", term.lasso.format(compiled.props))
    return qnp, compiled, policy


def _emit_policy(args, policy):
    text = policy.format()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")


def cmd_solve(args, report):
    _, _, policy = _solve(args, report)
    if policy is None:
        return EXIT_FAIL
    _emit_policy(args, policy)
    return EXIT_OK


def _policy_for(args, report, e):
    features = e.features if e else _features(args, report)
    if args.features:
        features = _features(args, report)
    qnp = _qnp(args, report, features)
    fond = compile_dnf(booleanize(qnp))
    if args.policy:
        text = _read(args.policy)
        report.input("policy", text)
        return features, qnp, fond, parse_policy(text, fond)
    return features, qnp, fond, qualitative_solve(fond)


def cmd_run(args, report):
    e = _example(args)
    features, _, _, policy = _policy_for(args, report, e)
    fam_name, family = _family(args, e.run_family if e else None)
    if args.limit:
        family = family[:args.limit]
    pattern = _pattern(args)
    status = EXIT_OK
    step_cap = args.step_cap
    for strat in _strategies(args):
        for inst in family:
            tr = run_policy(policy, inst, features, bind_goal_parameters(pattern, inst), strat, step_cap)
            print(f"# {inst} strategy={strat}")
            print(tr.format(features), end="")
            report.add("execution", f"{inst}.{strat}", f"{tr.outcome} steps={len(tr.steps)}")
            if not tr.ok:
                status = EXIT_FAIL
    return status


def _verify(args, report, e, features, policy):
    fam_name, family = _family(args, e.run_family if e else None)
    report.add("inputs", "run_family", f"{fam_name} ({len(family)} instances)")
    strategies = _strategies(args, e.strategies if e else ("first",))
    trials = args.trials or (e.trials if e else 1)
    t0 = time.perf_counter()
    rep = verify_generalized(policy, family, features, _pattern(args), strategies, trials,
                             args.step_cap, check=e.final_check if e else None)
    report.timed("execution", t0)
    report.add("execution", "strategies", " ".join(str(s) for s in strategies))
    report.add("execution", "trials", trials)
    for line in rep.summary_lines():
        k, _, v = line.partition(": ")
        report.add("execution", k, v)
    for tr in rep.failures:
        report.add("witnesses", "failed_run", f"{tr.instance} strategy={tr.strategy} outcome={tr.outcome}")
        report.text("witnesses", tr.format(features))
    return rep


def _closure(args, report, e, features, qnp, policy) -> bool:
    """Initial formula on every run instance, then the exhaustive policy closure."""
    fam_name, family = _family(args, e.run_family)
    pattern = _pattern(args)
    t0 = time.perf_counter()
    bad_init, bad, states, truncated = [], [], 0, False
    for inst in family:
        binding = bind_goal_parameters(pattern, inst)
        if not qnp.init.holds(features, boolean_valuation(features, inst, inst.init, binding)):
            bad_init.append(str(inst))
        res = policy_closure(policy, inst, features, binding, qnp.goal, args.cap)
        states += res.states
        truncated |= res.truncated
        if res.failures:
            bad.append(res)
    report.timed("closure", t0)
    status = "refuted" if bad_init else "verified"
    report.add("verdicts", "policy.initial", f"{status} instances={len(family)}")
    status = "refuted" if bad else ("inconclusive-truncated" if truncated else "verified")
    report.add("verdicts", "policy.closure", f"{status} instances={len(family)} states={states}")
    for name in bad_init[:5]:
        report.add("witnesses", "initial", name)
    for res in bad[:5]:
        report.add("witnesses", "closure", f"{res.instance}: {res.failures[0]}")
    return not bad_init and not bad and not truncated


def cmd_verify(args, report):
    e = _example(args)
    features, _, _, policy = _policy_for(args, report, e)
    rep = _verify(args, report, e, features, policy)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_demo(args, report):
    args.example = args.name
    e = _example(args)
    args.problem = None
    args.fond = None
    args.strong_cyclic_only = False
    features = e.features
    pattern = e.goal_pattern
    qnp = e.qnp
    check_family = ex.family(e.check_family)
    report.add("inputs", "check_family", f"{e.check_family} ({len(check_family)} instances)")
    # verdicts over every reachable state (informational: the demo's exit
    # status rests on the policy-scoped checks below)
    t0 = time.perf_counter()
    enum = FamilyEnumerator(check_family, features, pattern, args.cap)
    sound, _ = check_all(qnp.actions, check_family, features, pattern, args.cap, enum=enum)
    for name, v in sound.items():
        report.add("verdicts", f"sound.{name}", f"{v.status} instances={v.instances} states={v.states}")
        for line in _witness_lines(v):
            report.add("witnesses", "witness", line)
    iv = verify_interface_soundness(qnp.init, qnp.goal, check_family, features, pattern, args.cap,
                                    enum=enum)
    report.add("verdicts", "interface", f"{iv.status} instances={iv.instances} states={iv.states}")
    for line in _witness_lines(iv):
        report.add("witnesses", "witness", line)
    report.timed("checks", t0)

    _, compiled, policy = _solve(args, report)
    if policy is None:
        return EXIT_FAIL
    t0 = time.perf_counter()
    sim = bounded_qnp_check(policy, qnp, args.delta_cap, args.counter_cap)
    report.timed("simulation", t0)
    report.add("simulation", "delta_cap", args.delta_cap)
    report.add("simulation", "counter_cap", args.counter_cap)
    report.add("simulation", "initial_valuations", sim.initial)
    report.add("simulation", "states", sim.states)
    report.add("simulation", "capped", sim.capped)
    report.add("simulation", "longest_run", sim.longest)
    report.add("simulation", "bound", sim.bound)
    report.add("simulation", "ok", str(sim.ok).lower())
    for f in sim.failures:
        report.add("witnesses", "simulation", f)
    ok = sim.ok
    ok &= _closure(args, report, e, features, qnp, policy)
    rep = _verify(args, report, e, features, policy)
    ok &= rep.ok
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{e.name}.policy").write_text(policy.format())
    else:
        print(policy.format(), end="")
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genplan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, inputs=True):
        if inputs:
            sp.add_argument("--example", help=f"bundled example: {', '.join(ex.EXAMPLES)}")
            sp.add_argument("--features", help="feature file")
            sp.add_argument("--qnp", help="projection file (qnp format)")
            sp.add_argument("--problem", help=f"bundled problem: {', '.join(ex.PROBLEMS)}")
            sp.add_argument("--pattern", help="generic goal pattern, e.g. 'on($x,$y)'")
        sp.add_argument("--family", help="instance family name or glob")
        sp.add_argument("--instance", action="append", help="instance file (repeatable)")
        sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="reachable-state cap per instance")
        sp.add_argument("--delta-cap", type=int, default=3)
        sp.add_argument("--counter-cap", type=int, default=10)
        sp.add_argument("--strategy", action="append", help="first | random:<seed> | adversarial")
        sp.add_argument("--trials", type=int, default=0, help="repetitions of random strategies")
        sp.add_argument("--step-cap", type=int, default=None)
        sp.add_argument("--report", help="write the run report here")
        sp.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
        sp.add_argument("--out", help="write the policy here")
        sp.add_argument("--policy", help="policy file to execute instead of solving")
        sp.add_argument("--fond", help="FOND problem file (solve/booleanize)")
        sp.add_argument("--compile", action="store_true", help="apply DNF compilation before printing")
        sp.add_argument("--strong-cyclic-only", action="store_true", help="skip the termination search")
        sp.add_argument("--limit", type=int, default=0, help="run: only the first N instances")
        return sp

    for name, helptext in (("check-sound", "soundness of abstract actions over a family"),
                           ("check-complete", "completeness of an abstract action set"),
                           ("check-interface", "initial/goal formula soundness"),
                           ("project", "print the numerical projection"),
                           ("booleanize", "print the boolean FOND projection"),
                           ("solve", "compute a qualitative policy"),
                           ("run", "execute a policy and dump trajectories"),
                           ("verify", "execute a policy over a family")):
        sp = common(sub.add_parser(name, help=helptext))
        if name.startswith("check-"):
            sp.add_argument("--actions", help="bundled action set or actions file")
    demo = common(sub.add_parser("demo", help="run a bundled example end to end"), inputs=False)
    demo.add_argument("name", help=", ".join(ex.EXAMPLES))
    demo.add_argument("--out-dir", help="directory for the policy file")
    demo.set_defaults(features=None, qnp=None, pattern=None)
    return p


COMMANDS = {
    "check-sound": cmd_check_sound,
    "check-complete": cmd_check_complete,
    "check-interface": cmd_check_interface,
    "project": cmd_project,
    "booleanize": cmd_booleanize,
    "solve": cmd_solve,
    "run": cmd_run,
    "verify": cmd_verify,
    "demo": cmd_demo,
}


_OUTPUT_FLAGS = ("--report", "--out", "--out-dir")


def _portable_argv(argv) -> list[str]:
    """argv without output locations, so reports do not depend on where they are written."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in _OUTPUT_FLAGS:
            skip = True
            continue
        if tok.split("=", 1)[0] in _OUTPUT_FLAGS:
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    report = Report(args.command, _portable_argv(argv))
    try:
        status = COMMANDS[args.command](args, report)
    except (UsageError, ProjectionError, PolicyError, FeatureError, InstanceError, ValueError) as exc:
        print(f"genplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report.add("command", "exit", status)
    text = report.render(args.timings)
    if args.report:
        Path(args.report).write_text(text)
    else:
        print(text, end="", file=sys.stderr)
    if not args.timings:
        for label, ms in report.timings:
            print(f"timing {label}: {ms} ms", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
