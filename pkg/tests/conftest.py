from functools import lru_cache

import pytest
from hypothesis import settings

from genplan import examples as ex
from genplan.fond import qualitative_solve
from genplan.projection import booleanize, compile_dnf

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# acceptance criteria record one line each here; printed in the terminal summary
CRITERIA: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


@lru_cache(maxsize=None)
def solved(name: str):
    """(example, qnp, compiled fond, policy) for a bundled example."""
    e = ex.EXAMPLES[name]
    qnp = e.qnp
    fond = compile_dnf(booleanize(qnp))
    return e, qnp, fond, qualitative_solve(fond)


@pytest.fixture
def solve_example():
    return solved
