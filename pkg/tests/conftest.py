import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lcmdp.automata import compile_spec  # noqa: E402
from lcmdp.lp import INFEASIBLE  # noqa: E402
from lcmdp.model import STAY, from_rows  # noqa: E402
from lcmdp.product import build_product  # noqa: E402
from lcmdp.prune import InfeasibleStructure, prune  # noqa: E402
from lcmdp.synth import StructurallyInfeasible, SynthesisProblem, synthesize  # noqa: E402

MISSION_REGEX = "(A+B+C)*D(D+C)*"


def chain_model(length=2, accept=True):
    """Deterministic chain 0 -> 1 -> ... -> length (absorbing), unit cost per step."""
    n = length + 1
    transitions = [(s, 0, [(s + 1, 1.0)]) for s in range(length)] + [(length, STAY, [(length, 1.0)])]
    costs = [[1.0] * length + [0.0], [1.0] * length + [0.0]]
    labels = [0] * length + [1 if accept else 0]
    return from_rows(["g"], labels, {0: 1.0}, transitions, costs, [False] * length + [True])


def two_action_model():
    """State 0 chooses risky-short or safe-long.

    risky (a=0): cost 1, reaches the labeled goal 2 or the unlabeled goal 3 with 1/2 each.
    safe (a=1): cost 3, reaches goal 2 surely.
    """
    transitions = [
        (0, 0, [(2, 0.5), (3, 0.5)]),
        (0, 1, [(2, 1.0)]),
        (1, 0, [(2, 1.0)]),
        (2, STAY, [(2, 1.0)]),
        (3, STAY, [(3, 1.0)]),
    ]
    costs = [[1.0, 3.0, 0.0, 0.0, 0.0]]
    return from_rows(["g"], [0, 0, 1, 0], {0: 1.0}, transitions, costs, [False, False, True, True])


def eventually_g():
    return compile_spec("F g", ["g"], kind="scltl")


@pytest.fixture
def chain():
    return chain_model()


@pytest.fixture
def two_action_product():
    return build_product(two_action_model(), eventually_g())


def lp_outcome(prod, p_l, bounds):
    """``(status, objective)``, counting structural infeasibility as infeasible."""
    try:
        res = synthesize(SynthesisProblem(prod, p_l, bounds), evaluate=False)
    except (StructurallyInfeasible, InfeasibleStructure):
        return INFEASIBLE, None
    return res.status, res.solution.objective if res.ok else None


def pruned_outcome(prod, mode, p_l, bounds):
    try:
        small, _ = prune(prod, mode)
    except InfeasibleStructure:
        return INFEASIBLE, None
    return lp_outcome(small, p_l, bounds)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
