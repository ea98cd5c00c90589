import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from classmatch.audit import (
    audit,
    check_cef1,
    check_class_envy_free,
    check_mcef1,
    check_non_wasteful,
    check_per_agent_envy_free,
)
from classmatch.core_graph import Instance, Matching
from classmatch.mechanisms import (
    GreedyHouseFailure,
    greedy_house_allocation,
    max_weight_mechanism,
    round_robin,
)
from conftest import random_instance

MAX_WEIGHT_T1 = Matching(((0, 0), (1, 3), (2, 1), (3, 2)))
ROUND_ROBIN_T1 = Matching(((0, 0), (1, 1), (2, 3), (3, 2)))


def test_table1_max_weight_envy(table1):
    ok, rep = check_class_envy_free(table1, MAX_WEIGHT_T1)
    assert not ok
    assert rep.witnesses["class_ef"] == {"p": 1, "q": 0, "item": None}
    e = rep.pairwise_envy[1][0]
    assert e.utility == 3 and e.value_of_other == 4 and e.envies
    assert not rep.pairwise_envy[0][1].envies


def test_table1_round_robin_fair(table1):
    assert check_class_envy_free(table1, ROUND_ROBIN_T1)[0]
    assert check_non_wasteful(table1, ROUND_ROBIN_T1)[0]


def test_table1_max_weight_cef1(table1):
    ok, rep = check_cef1(table1, MAX_WEIGHT_T1, alpha=1.0)
    assert ok and rep.alpha == 1.0
    with pytest.raises(ValueError):
        check_cef1(table1, MAX_WEIGHT_T1, alpha=0.0)
    with pytest.raises(ValueError):
        check_cef1(table1, MAX_WEIGHT_T1, alpha=1.5)


def test_all_zero_empty_matching():
    inst = Instance((2, 2), np.zeros((4, 3)))
    empty = Matching()
    assert check_class_envy_free(inst, empty)[0]
    assert check_non_wasteful(inst, empty)[0]
    assert check_mcef1(inst, empty)[0]


def test_mcef1_single_class_and_counterexample():
    inst = Instance((3,), np.random.default_rng(0).random((3, 4)))
    assert check_mcef1(inst, Matching(((0, 1),)))[0]
    # class 1 holds nothing, class 2 holds both items class 1 values at 1
    u = np.array([[1.0, 1.0], [1.0, 1.0], [0.5, 0.5], [0.5, 0.5]])
    inst = Instance((2, 2), u)
    ok, rep = check_mcef1(inst, Matching(((2, 0), (3, 1))))
    assert not ok
    assert rep.witnesses["mcef1"]["p"] == 0 and rep.witnesses["mcef1"]["q"] == 1


def test_non_wasteful_unallocated_item():
    inst = Instance((1,), np.array([[0.9, 0.8]]))
    ok, rep = check_non_wasteful(inst, Matching(((0, 1),)))
    assert not ok
    assert rep.witnesses["non_wasteful"] == {"p": 0, "q": None, "item": 0, "condition": "a"}


def test_non_wasteful_other_class_wants_free_item():
    u = np.array([[0.9, 0.1, 0.0], [0.0, 0.7, 0.0]])
    inst = Instance((1, 1), u)
    # item 1 is free and class 2 would gain 0.7 from it
    ok, rep = check_non_wasteful(inst, Matching(((0, 0),)))
    assert not ok and rep.witnesses["non_wasteful"]["condition"] == "a"
    assert rep.witnesses["non_wasteful"]["p"] == 1
    # item 2 stays free but nobody values it
    assert check_non_wasteful(inst, Matching(((0, 0), (1, 1))))[0]


def test_non_wasteful_condition_b():
    # class 1's second agent holds item 2, worth 0 to it, while class 2 values it
    u = np.array([[0.9, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.2, 0.8]])
    inst = Instance((2, 1), u)
    ok, rep = check_non_wasteful(inst, Matching(((0, 0), (1, 2), (2, 1))))
    assert not ok
    assert rep.witnesses["non_wasteful"] == {"p": 1, "q": 0, "item": 2, "condition": "b"}


def test_per_agent_envy():
    u = np.array([[0.9, 0.1], [0.2, 0.8]])
    inst = Instance((1, 1), u)
    assert check_per_agent_envy_free(inst, Matching(((0, 0), (1, 1))))
    rep = audit(inst, Matching(((0, 1), (1, 0))), predicates=("per_agent_ef",))
    assert rep.verdicts["per_agent_ef"] is False
    assert rep.witnesses["per_agent_ef"] == {"agent": 0, "envied": 1, "item": 0}
    with pytest.raises(ValueError):
        check_per_agent_envy_free(inst, Matching(((0, 0),)))


def test_malformed_matching(table1):
    with pytest.raises(ValueError):
        audit(table1, Matching(((0, 7),)))
    with pytest.raises(ValueError):
        audit(table1, Matching(((9, 0),)))
    with pytest.raises(ValueError):
        audit(table1, ROUND_ROBIN_T1, predicates=("pareto",))


def test_report_serialises(table1):
    rep = audit(table1, MAX_WEIGHT_T1)
    d = json.loads(json.dumps(rep.to_json()))
    assert d["verdicts"] == {"class_ef": False, "cef1": True, "mcef1": True, "non_wasteful": True}


def test_per_agent_ef_implies_class_ef_on_greedy_outputs():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(1000):
        inst = random_instance(rng, (2, 3, 1), 20)
        try:
            m = greedy_house_allocation(inst)
        except GreedyHouseFailure:
            continue
        rep = audit(inst, m, alpha=1.0, predicates=("per_agent_ef", "class_ef", "cef1"))
        if rep.verdicts["per_agent_ef"]:
            checked += 1
            assert rep.verdicts["class_ef"] and rep.verdicts["cef1"]
    assert checked > 900


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["max-weight", "round-robin", "arbitrary"]))
def test_implication_chain_and_alpha_monotonicity(seed, kind):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, (2, 2), 5)
    if kind == "max-weight":
        m = max_weight_mechanism(inst)
    elif kind == "round-robin":
        m = round_robin(inst)[0]
    else:
        items = rng.permutation(5)[:4]
        m = Matching(tuple((a, int(j)) for a, j in enumerate(items) if rng.random() < 0.8))
    ef = check_class_envy_free(inst, m)[0]
    verdicts = [check_cef1(inst, m, alpha=a)[0] for a in (1.0, 0.75, 0.5, 0.25)]
    if ef:
        assert all(verdicts)
    for hi, lo in zip(verdicts, verdicts[1:]):
        assert lo or not hi


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relabelling_invariance(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, (2, 2), 5)
    m = round_robin(inst)[0]
    base = audit(inst, m).verdicts
    # permute agents inside each class and permute items
    agent_perm = np.concatenate([rng.permutation([0, 1]), 2 + rng.permutation([0, 1])])
    item_perm = rng.permutation(5)
    inv_item = np.argsort(item_perm)
    u2 = inst.utilities[agent_perm][:, item_perm]
    inst2 = Instance(inst.class_sizes, u2)
    inv_agent = np.argsort(agent_perm)
    m2 = Matching(tuple((int(inv_agent[a]), int(inv_item[j])) for a, j in m.pairs))
    assert audit(inst2, m2).verdicts == base
