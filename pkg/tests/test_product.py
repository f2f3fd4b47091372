import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import MISSION_REGEX
from oracles import random_dfa, random_model

from lcmdp import gridworld as gw
from lcmdp import model as mdl
from lcmdp.automata import Dfa, compile_spec
from lcmdp.model import ModelError, from_rows
from lcmdp.product import build_product, load_product, save_product


def test_two_by_three_is_six():
    m = from_rows(["p"], [0, 1], [1.0, 0.0], [(0, 0, [(1, 1.0)]), (1, 4, [(1, 1.0)])],
                  [[1.0, 0.0]], [False, True])
    d = Dfa(["p"], [[0, 1], [1, 2], [2, 2]], 0, [False, True, False])
    prod = build_product(m, d)
    assert prod.n_states == 6
    assert mdl.validate(prod.model) == []


def test_one_by_one():
    m = from_rows(["p"], [0], [1.0], [(0, 0, [(0, 1.0)])], [[0.0]], [False])
    d = Dfa(["p"], [[0, 0]], 0, [True])
    prod = build_product(m, d)
    assert prod.n_states == 1
    assert prod.model.successors(0) == [(0, 1.0)]


def test_ap_mismatch():
    m = from_rows(["p"], [0], [1.0], [(0, 0, [(0, 1.0)])], [[0.0]], [False])
    with pytest.raises(ModelError, match="mismatch"):
        build_product(m, Dfa(["q"], [[0, 0]], 0, [True]))


def test_initial_label_is_read():
    # start state labeled d: the DFA for F d has already accepted at time 0
    m = from_rows(["d"], [1, 0], [1.0, 0.0], [(0, 0, [(1, 1.0)]), (1, 4, [(1, 1.0)])],
                  [[1.0, 0.0]], [False, True])
    dfa = compile_spec("F d", ["d"], kind="scltl")
    prod = build_product(m, dfa)
    x0 = int(np.flatnonzero(prod.model.beta)[0])
    assert prod.provenance(x0) == (0, dfa.step(dfa.initial, 1))
    assert prod.model.accepting[x0]


def test_grid_rows_sum_to_one():
    elev, risk, cfg = gw.synthetic_instance(5)
    m = gw.build_grid_lcmdp(elev, risk, cfg)
    dfa = compile_spec(MISSION_REGEX, m.ap)
    prod = build_product(m, dfa)
    assert prod.n_states == 25 * dfa.n_states
    sums = np.asarray(prod.model.trans.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert mdl.validate(prod.model) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 50), st.integers(1, 8))
def test_random_sizes_and_structure(seed, nl, nd):
    rng = np.random.default_rng(seed)
    m = random_model(rng, n_states=nl, n_ap=2)
    d = random_dfa(rng, m.ap, n_states=nd)
    prod = build_product(m, d)
    pm = prod.model
    assert prod.n_states == nl * nd
    assert mdl.validate(pm) == []
    # costs copied per automaton state
    for x in range(pm.n_states):
        s, q = prod.provenance(x)
        assert prod.index(s, q) == x
        base = m.choices(s)
        np.testing.assert_array_equal(pm.costs[:, list(pm.choices(x))], m.costs[:, list(base)])
        # label determinism: each base successor maps to exactly one automaton state
        for kb, kp in zip(base, pm.choices(x)):
            got = pm.successors(kp)
            want = m.successors(kb)
            if m.absorbing[s]:
                assert got == [(x, 1.0)]
                continue
            exp = sorted((t * nd + int(d.table[q, m.labels[t]]), p) for t, p in want)
            assert got == exp
    np.testing.assert_array_equal(prod.goal, m.absorbing[prod.mdp_state])
    np.testing.assert_array_equal(pm.accepting, d.accepting[prod.dfa_state])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_preserves_base_trajectories(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, n_states=8, n_ap=2)
    d = random_dfa(rng, m.ap, n_states=3)
    prod = build_product(m, d)
    pm = prod.model
    x = int(rng.choice(np.flatnonzero(pm.beta)))
    q = d.step(d.initial, int(m.labels[prod.mdp_state[x]]))
    for _ in range(20):
        s = int(prod.mdp_state[x])
        assert int(prod.dfa_state[x]) == q
        if m.absorbing[s]:
            break
        j = int(rng.integers(len(pm.choices(x))))
        kp, kb = pm.choices(x)[j], m.choices(s)[j]
        assert pm.choice_action[kp] == m.choice_action[kb]
        np.testing.assert_array_equal(pm.costs[:, kp], m.costs[:, kb])
        succ = pm.successors(kp)
        x = succ[int(rng.integers(len(succ)))][0]
        s2 = int(prod.mdp_state[x])
        assert s2 in dict(m.successors(kb))
        q = d.step(q, int(m.labels[s2]))


def test_restrict_reachable_drops_unreachable():
    elev, risk, cfg = gw.synthetic_instance(6)
    m = gw.build_grid_lcmdp(elev, risk, cfg)
    dfa = compile_spec(MISSION_REGEX, m.ap)
    small = build_product(m, dfa, restrict_reachable=True)
    assert small.n_states < 36 * dfa.n_states
    assert mdl.validate(small.model) == []


def test_product_round_trip(tmp_path):
    elev, risk, cfg = gw.synthetic_instance(5)
    m = gw.build_grid_lcmdp(elev, risk, cfg)
    prod = build_product(m, compile_spec(MISSION_REGEX, m.ap))
    save_product(prod, tmp_path / "p.json")
    back = load_product(tmp_path / "p.json")
    assert back.model == prod.model
    np.testing.assert_array_equal(back.goal, prod.goal)
    np.testing.assert_array_equal(back.dfa_state, prod.dfa_state)
    assert back.dfa.same_table(prod.dfa)
