import pytest
from hypothesis import given, strategies as st

from conftest import solved
from genplan import examples as ex
from genplan import generators as gen
from genplan.abstraction import make_action
from genplan.executor import (GOAL_REACHED, INAPPLICABLE, STEP_CAP, UNDEFINED, GeneralizationReport,
                              Strategy, instantiate, policy_closure, run_policy, verify_generalized)
from genplan.features import bind_goal_parameters
from genplan.fond import PolicyTable, parse_policy
from genplan.projection import FondAction, Formula, QnpProblem, booleanize, compile_dnf
from genplan.strips import Atom, apply

PICK = make_action("pick-above-x", "!held_any above_x>0", "held_any above_x--")
ASIDE = make_action("put-aside", "held_any", "!held_any")


def clear_instance(towers, x):
    return gen.blocksworld_instance(towers, [Atom("clear", (x,))])


def custom_policy(actions, rules):
    """Policy over Q_clear's features with arbitrary (possibly unsound) abstract actions."""
    e = ex.EXAMPLES["qclear"]
    qnp = QnpProblem("custom", e.features, Formula.parse("!held_any"), Formula.parse("above_x=0"),
                     tuple(actions))
    return parse_policy(rules, compile_dnf(booleanize(qnp)))


@pytest.fixture
def qclear(solve_example):
    e, _, _, policy = solve_example("qclear")
    return e, policy


# ------------------------------------------------------------- instantiate

def test_instantiate_put_aside():
    inst = clear_instance([["a", "b", "c"], ["d"]], "a")
    fs = ex.EXAMPLES["qclear"].features
    s = apply(inst, inst.init, next(a for a in inst.actions if str(a) == "unstack(c,b)"))
    assert {str(a) for a in instantiate(ASIDE, inst, s, fs, {"x": "a"})} == {"putdown(c)", "stack(c,d)"}


def test_instantiate_pick_top_of_tower():
    inst = clear_instance([["a", "b", "c", "d"], ["e"]], "a")
    fs = ex.EXAMPLES["qclear"].features
    assert [str(a) for a in instantiate(PICK, inst, inst.init, fs, {"x": "a"})] == ["unstack(d,c)"]
    # precondition false: nothing
    assert instantiate(ASIDE, inst, inst.init, fs, {"x": "a"}) == []


# ---------------------------------------------------------------- run

def test_clear_five_blocks_three_above(qclear):
    e, policy = qclear
    inst = clear_instance([["a", "b", "c", "d"], ["e"]], "a")
    tr = run_policy(policy, inst, e.features, {"x": "a"}, "first")
    assert tr.outcome == GOAL_REACHED and tr.ok
    # x is clear as soon as the last block above it is lifted: two pick/put pairs, then a pick
    assert [s.abstract for s in tr.steps] == ["pick-above-x", "put-aside"] * 2 + ["pick-above-x"]
    assert Atom("holding", ("b",)) in tr.final


def test_already_clear_is_empty_trajectory(qclear):
    e, policy = qclear
    inst = clear_instance([["a", "b"]], "b")
    tr = run_policy(policy, inst, e.features, {"x": "b"})
    assert tr.steps == [] and tr.outcome == GOAL_REACHED
    assert tr.format(e.features) == "outcome: goal-reached\n"


def test_trajectory_format(qclear):
    e, policy = qclear
    inst = clear_instance([["a", "b", "c"]], "a")
    text = run_policy(policy, inst, e.features, {"x": "a"}).format(e.features)
    assert text.splitlines() == [
        "step 0: !held_any above_x>0 | pick-above-x -> unstack(c,b)",
        "step 1: held_any above_x>0 | put-aside -> putdown(c)",
        "step 2: !held_any above_x>0 | pick-above-x -> unstack(b,a)",
        "outcome: goal-reached",
    ]


def test_consecutive_states_follow_apply(qclear):
    e, policy = qclear
    inst = clear_instance([["a", "b", "c"], ["d", "e"]], "a")
    tr = run_policy(policy, inst, e.features, {"x": "a"}, "random:3")
    states = [st.state for st in tr.steps] + [tr.final]
    for st_, nxt in zip(tr.steps, states[1:]):
        assert apply(inst, st_.state, st_.action) == nxt


def test_strategy_parsing():
    assert Strategy.parse("first") == Strategy("first")
    assert Strategy.parse("random:7") == Strategy("random", 7)
    assert str(Strategy.parse("random")) == "random:0"
    for bad in ("greedy", "random:x"):
        with pytest.raises(ValueError):
            Strategy.parse(bad)


def test_step_cap_validation(qclear):
    e, policy = qclear
    inst = clear_instance([["a", "b", "c"]], "a")
    with pytest.raises(ValueError):
        run_policy(policy, inst, e.features, {"x": "a"}, step_cap=0)
    tr = run_policy(policy, inst, e.features, {"x": "a"}, step_cap=1)
    assert tr.outcome == STEP_CAP and len(tr.steps) == 1


def test_on_adversarial_reaches_goal(solve_example):
    e, _, _, policy = solve_example("qon")
    for seed in range(5):
        inst = gen.q_on(5, seed)
        b = bind_goal_parameters(e.goal_pattern, inst)
        tr = run_policy(policy, inst, e.features, b, "adversarial")
        assert tr.ok, tr.format(e.features)


@given(st.integers(0, 10 ** 6))
def test_first_strategy_deterministic(seed):
    e = ex.EXAMPLES["qon"]
    policy = solved("qon")[3]
    inst = gen.q_on(5, seed)
    b = bind_goal_parameters(e.goal_pattern, inst)
    one = run_policy(policy, inst, e.features, b, "first")
    two = run_policy(policy, inst, e.features, b, "first")
    assert one.format(e.features) == two.format(e.features)
    assert one.ok


# --------------------------------------------------- failure outcomes

def test_unsound_action_gives_inapplicable():
    loose = make_action("loose", "!held_any", "held_any above_x--")  # no above_x>0
    policy = custom_policy([loose, ASIDE], "when !held_any do loose\nwhen held_any do put-aside\n")
    e = ex.EXAMPLES["qclear"]
    # the goal also asks for on(a,b), so reaching clear(a) is not enough
    inst = gen.blocksworld_instance([["a"], ["b"]], [Atom("clear", ("a",)), Atom("on", ("a", "b"))])
    report = verify_generalized(policy, [inst], e.features, e.goal_pattern, ("first", "adversarial"))
    assert not report.ok
    assert report.outcomes == {INAPPLICABLE: 2}
    assert report.failures[0].steps == []


def test_undefined_entry():
    policy = custom_policy([PICK, ASIDE], "when !held_any above_x>0 do pick-above-x\n")
    e = ex.EXAMPLES["qclear"]
    tr = run_policy(policy, clear_instance([["a", "b", "c"]], "a"), e.features, {"x": "a"})
    assert tr.outcome == UNDEFINED and len(tr.steps) == 1


def test_looping_policy_hits_step_cap_and_closure_finds_cycle():
    shuffle = make_action("shuffle", "!held_any", "held_any")
    policy = custom_policy([shuffle, ASIDE], "when !held_any do shuffle\nwhen held_any do put-aside\n")
    e = ex.EXAMPLES["qclear"]
    inst = clear_instance([["a", "b"], ["d"]], "a")
    tr = run_policy(policy, inst, e.features, {"x": "a"}, step_cap=10)
    assert tr.outcome == STEP_CAP and len(tr.steps) == 10
    closure = policy_closure(policy, inst, e.features, {"x": "a"})
    assert not closure.ok and "cycle" in closure.failures[0]


def test_tracking_detects_wrong_projection(qclear):
    e, good = qclear
    props = good.props
    pick = good.actions["pick-above-x"]
    # claim the decrement never reaches zero
    wrong = FondAction(pick.name, pick.pre, ((frozenset({("held_any", True), ("above_x=0", False)}),),),
                       source=pick.source)
    actions = dict(good.actions, **{"pick-above-x": wrong})
    policy = PolicyTable(props, dict(good.entries), actions)
    tr = run_policy(policy, clear_instance([["a", "b"]], "a"), e.features, {"x": "a"})
    assert tr.outcome == GOAL_REACHED and not tr.ok
    assert "not a projected outcome" in tr.tracking_errors[0]


# ------------------------------------------------------------ reports

def test_verify_clear_family(qclear):
    e, policy = qclear
    fam = gen.qclear_family(4)
    rep = verify_generalized(policy, fam, e.features, e.goal_pattern, e.strategies, trials=2)
    assert rep.ok and rep.instances == len(fam)
    assert rep.runs == len(fam) * 4 and rep.reached == rep.runs
    assert rep.by_strategy["random"] == (2 * len(fam), 2 * len(fam))


def test_report_merge_associative(qclear):
    e, policy = qclear
    fam = gen.qclear_family(3)
    parts = [verify_generalized(policy, fam[i::3], e.features, e.goal_pattern, ("first", "random:1"))
             for i in range(3)]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    whole = verify_generalized(policy, fam, e.features, e.goal_pattern, ("first", "random:1"))
    for r in (left, right):
        assert r.summary_lines() == whole.summary_lines()
    assert GeneralizationReport().merge(whole).summary_lines() == whole.summary_lines()


def test_closure_on_bundled_run_families(solve_example):
    for name in ("qclear", "qon"):
        e, _, _, policy = solve_example(name)
        for inst in ex.family(e.run_family)[::25]:
            b = bind_goal_parameters(e.goal_pattern, inst)
            res = policy_closure(policy, inst, e.features, b, e.qnp.goal)
            assert res.ok, res.failures
