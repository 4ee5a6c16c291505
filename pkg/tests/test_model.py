import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secgame.model import (
    AdditiveSetFunction,
    AttackerSpace,
    ModelError,
    SetFunction,
    UtilityProfile,
    adjacency,
    common_utilities,
    is_additive,
    mask_of,
    members,
    mobius_transform,
    network_value,
    network_value_benefits,
    parse_edge_list,
    submasks,
    zero_sum_complete,
    zeta_transform,
)

# targets in these tests are 0-based: "{1,2}" in a comment is mask_of([0, 1])
T1, T2, T3 = 1, 2, 4


def _down_closure(masks):
    out = set()
    for m in masks:
        out.update(submasks(m))
    out.discard(0)
    return sorted(out)


def test_mask_helpers():
    assert mask_of([0, 2]) == 5
    assert members(5) == [0, 2]
    assert sorted(submasks(5)) == [0, 1, 4, 5]
    with pytest.raises(ModelError):
        mask_of([-1])


def test_mobius_pair_example():
    f = SetFunction({T1: 5, T2: 3, T1 | T2: 10})
    g = mobius_transform(f, [T1, T2, T1 | T2])
    assert g(T1) == 5 and g(T2) == 3 and g(T1 | T2) == 2
    assert zeta_transform(g, T1 | T2) == 10


def test_mobius_of_additive_vanishes_on_pairs():
    vals = [2.0, -1.5, 4.0]
    f = SetFunction({m: sum(vals[i] for i in members(m)) for m in range(1, 8)})
    g = mobius_transform(f, range(1, 8))
    assert all(g(m) == 0 for m in range(1, 8) if bin(m).count("1") > 1)


def test_zero_and_empty():
    g = mobius_transform(SetFunction({}), [1, 2, 3])
    assert g.entries == {}
    assert zeta_transform(g, 3) == 0
    assert zeta_transform(SetFunction({1: 4.0}), 0) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.data())
def test_round_trip_integer(n, data):
    masks = data.draw(st.lists(st.integers(1, (1 << n) - 1), min_size=1, max_size=20, unique=True))
    vals = data.draw(st.lists(st.integers(-50, 50), min_size=len(masks), max_size=len(masks)))
    dom = _down_closure(masks)
    f = SetFunction(dict(zip(masks, vals)))
    g = mobius_transform(f, dom)
    for U in dom:
        assert zeta_transform(g, U) == f(U)


def test_support_and_additivity():
    prof = zero_sum_complete(SetFunction({T1: 3, T2: 3, T3: 1, T1 | T2: 7, T1 | T3: 4, T2 | T3: 4}), SetFunction({}), 3, 2)
    assert not is_additive(prof)
    c = common_utilities(prof)
    assert c.benefit_attacker(T1 | T2) == 1
    add = zero_sum_complete(AdditiveSetFunction((1, 2)), AdditiveSetFunction((0, 0)), 2, 2)
    assert is_additive(add)
    single = zero_sum_complete(AdditiveSetFunction((1,)), AdditiveSetFunction((0,)), 1, 1)
    assert is_additive(single)
    # an explicit table that happens to be additive is detected too
    tab = zero_sum_complete(SetFunction({T1: 1, T2: 2, T1 | T2: 3}), SetFunction({}), 2, 2)
    assert is_additive(tab)


def test_zero_sum_complete_signs():
    p = zero_sum_complete(SetFunction({T1: 3}), SetFunction({T1: -1}), 1, 1)
    assert p.benefit_defender(T1) == 1 and p.loss_defender(T1) == -3
    p = zero_sum_complete(SetFunction({T1: 10, T2: 5, T1 | T2: 10}), SetFunction({}), 2, 2)
    assert p.loss_defender(T1 | T2) == -10
    with pytest.raises(ModelError):
        zero_sum_complete(SetFunction({}), SetFunction({}), 1, 1)


def test_profile_validation():
    with pytest.raises(ModelError):  # pair entry beyond budget 1
        zero_sum_complete(SetFunction({T1: 1, T2: 1, T1 | T2: 3}), SetFunction({}), 2, 1)
    with pytest.raises(ModelError):  # not zero-sum
        UtilityProfile(SetFunction({T1: 1}), SetFunction({}), SetFunction({T1: 1}),
                       SetFunction({T1: -2}), 1, 1, zero_sum=True)
    with pytest.raises(ModelError):
        SetFunction({0: 1.0})


def test_attacker_space():
    sp = AttackerSpace(3, 2)
    assert sp.size == 7 and len(list(sp)) == 7
    assert list(sp)[0] == 0


def test_network_values():
    path = adjacency([(0, 1), (1, 2)])
    assert network_value(path) == 9
    assert network_value_benefits(path, [T2])(T2) == 7
    tri = adjacency([(0, 1), (1, 2), (0, 2)])
    assert network_value_benefits(tri, [T1])(T1) == 5
    assert network_value_benefits(tri, [0]).entries == {}


def test_parse_edge_list_errors():
    assert parse_edge_list("# c\n0 1\n\n1 2 # x\n") == [(0, 1), (1, 2)]
    with pytest.raises(ModelError, match="line 2"):
        parse_edge_list("0 1\n1\n")
    with pytest.raises(ModelError, match="line 1"):
        parse_edge_list("a b\n")


def test_network_value_matches_bruteforce_components():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = 7
        edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < 0.3]
        adj = adjacency(edges, n)
        removed = int(rng.integers(0, 1 << n))
        # union-find count of component sizes
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        for u, v in edges:
            if not (removed >> u & 1 or removed >> v & 1):
                parent[find(u)] = find(v)
        sizes = {}
        for v in range(n):
            if not removed >> v & 1:
                sizes[find(v)] = sizes.get(find(v), 0) + 1
        assert network_value(adj, removed) == sum(s * s for s in sizes.values())
