"""Bundled generalized problems: feature files, projections, goal patterns
and the instance families used to check and execute them.
"""
from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import generators as gen
from .abstraction import parse_abstract_actions
from .features import FeatureSet, parse_features, parse_pattern
from .projection import QnpProblem, parse_qnp
from .strips import Atom, Instance


def data_text(name: str) -> str:
    return resources.files("genplan").joinpath("data", name).read_text()


# ---------------------------------------------------------------- families

def _final_single_tower(x_at_bottom: bool):
    def check(inst: Instance, trajectory) -> bool:
        s = trajectory.final
        towers = gen.state_towers(s)
        if len(towers) != 1 or Atom("armempty") not in s:
            return False
        x = dict(inst.params)["x"]
        return not x_at_bottom or towers[0][0] == x
    return check


FAMILIES = {
    "qclear_le4": lambda: gen.qclear_family(4),
    "qclear_le3": lambda: gen.qclear_family(3),
    "qon_le5": lambda: gen.qon_family(5),
    "qon_le4": lambda: gen.qon_family(4),
    "qtower_le5": lambda: gen.qtower_family(5),
    "qtower_le4": lambda: gen.qtower_family(4),
    "qtower_bottom_le5": lambda: gen.qtower_family(5, x_at_bottom=True),
    "qtower_bottom_le4": lambda: gen.qtower_family(4, x_at_bottom=True),
    "qmove_le6": lambda: gen.qmove_family(6),
    "qmove_le3": lambda: gen.qmove_family(3),
    "qslide_small": lambda: gen.qslide_exhaustive_family(),
    "qslide_3x3_500": lambda: gen.qslide_sampled_family(500, 3, 3, seed=0),
}


def family(name: str) -> list[Instance]:
    """Instances of one named family, or the union of all names matching a glob."""
    if name in FAMILIES:
        return _family_cached(name)
    names = sorted(n for n in FAMILIES if fnmatch.fnmatch(n, name))
    if not names:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    return [inst for n in names for inst in _family_cached(n)]


@lru_cache(maxsize=None)
def _family_cached(name: str) -> list[Instance]:
    return FAMILIES[name]()


# ---------------------------------------------------------------- examples

@dataclass(frozen=True)
class Example:
    name: str
    features_file: str
    qnp_file: str
    pattern: str                   # generic goal, e.g. "on($x,$y)"; "" when params bind everything
    check_family: str              # exhaustive family for soundness and interface checks
    run_family: str                # family for execution
    strategies: tuple = ("first", "random:0", "adversarial")
    trials: int = 1
    final_check: object = field(default=None, compare=False)

    @property
    def features(self) -> FeatureSet:
        return parse_features(data_text(self.features_file))

    @property
    def qnp(self) -> QnpProblem:
        return parse_qnp(data_text(self.qnp_file), self.features)

    @property
    def goal_pattern(self):
        return parse_pattern(self.pattern) if self.pattern else []


EXAMPLES = {
    "qclear": Example("qclear", "qclear.features", "qclear.qnp", "clear($x)",
                      "qclear_le4", "qclear_le4", trials=3),
    "qmove": Example("qmove", "qmove.features", "qmove.qnp", "at($gx,$gy)",
                     "qmove_le6", "qmove_le6"),
    "qslide": Example("qslide", "qslide.features", "qslide.qnp", "at($t,$tx,$ty)",
                      "qslide_small", "qslide_3x3_500", strategies=("first", "random:0")),
    "qon": Example("qon", "qon.features", "qon.qnp", "on($x,$y)",
                   "qon_le5", "qon_le5", trials=3),
    "qtower": Example("qtower", "blocks_rich.features", "qtower.qnp", "",
                      "qtower_le5", "qtower_le5", trials=3,
                      final_check=_final_single_tower(False)),
    "qtower_bottom": Example("qtower_bottom", "blocks_rich.features", "qtower_bottom.qnp", "",
                             "qtower_bottom_le5", "qtower_bottom_le5", trials=3,
                             final_check=_final_single_tower(True)),
}

# abstract action sets over feature files, for the soundness/completeness commands
ACTION_SETS = {
    "two_action_set": ("two_action_set.actions", "qclear.features", "clear($x)"),
    "a_f_prime": ("a_f_prime.actions", "blocks_rich.features", "clear($x)"),
}

PROBLEMS = {
    "empty_goal_true": "empty_goal_true.qnp",
    **{name: ex.qnp_file for name, ex in EXAMPLES.items()},
}


def action_set(name: str):
    actions_file, features_file, pattern = ACTION_SETS[name]
    fs = parse_features(data_text(features_file))
    return parse_abstract_actions(data_text(actions_file)), fs, parse_pattern(pattern)


def problem(name: str) -> QnpProblem:
    if name in EXAMPLES:
        return EXAMPLES[name].qnp
    return parse_qnp(data_text(PROBLEMS[name]))
