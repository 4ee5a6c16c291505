import numpy as np
import pytest

from secgame.compact import (
    SupportSet,
    attacker_vertex,
    build_weights,
    compact_payoff,
    coverage_marginals,
    defender_vertex,
    direct_payoff,
    marginals_to_distribution,
    project_attacker,
    project_defender,
    support_set,
    vertex_to_strategy,
)
from secgame.model import (
    AdditiveSetFunction,
    ModelError,
    SetFunction,
    common_utilities,
    zero_sum_complete,
)
from secgame.verify import random_game

T1, T2, T3 = 1, 2, 4
S4 = SupportSet(3, (T1, T2, T3, T1 | T2))


def _pair_profile():
    # B_a common utility 2 on {1,2}, n = 3
    return zero_sum_complete(SetFunction({T1: 1, T2: 1, T3: 1, T1 | T2: 4, T1 | T3: 2, T2 | T3: 2}), SetFunction({}), 3, 2)


def test_support_set_examples():
    c = common_utilities(_pair_profile())
    assert support_set(c, 3).members == (T1, T2, T3, T1 | T2)
    add = zero_sum_complete(AdditiveSetFunction((1, 2, 3, 4)), AdditiveSetFunction((0,) * 4), 4, 2)
    S = support_set(common_utilities(add), 4)
    assert S.members == (1, 2, 4, 8)
    one = zero_sum_complete(AdditiveSetFunction((1,)), AdditiveSetFunction((0,)), 1, 1)
    assert support_set(common_utilities(one), 1).members == (1,)


def test_build_weights():
    prof = zero_sum_complete(SetFunction({T1: 0.5, T2: 0.5, T1 | T2: 3}), SetFunction({}), 2, 2)
    c = common_utilities(prof)
    S = support_set(c, 2)
    w = build_weights(c, S)
    assert np.allclose(w.benefit["attacker"], [0.5, 0.5, 2])
    assert np.allclose(w.loss["defender"], [-0.5, -0.5, -2])
    assert np.allclose(w.benefit["defender"], 0)


def test_attacker_vertex():
    assert attacker_vertex(T1 | T2, S4).coords.tolist() == [1, 1, 0, 1]
    assert attacker_vertex(0, S4).coords.tolist() == [0, 0, 0, 0]
    assert attacker_vertex(T3, S4).coords.tolist() == [0, 0, 1, 0]
    with pytest.raises(ModelError):
        attacker_vertex(7, S4, budget=2)


def test_defender_vertex_and_round_trip():
    v = defender_vertex(T2, S4)
    assert v.v1.tolist() == [1, 0, 1, 0] and v.v2.tolist() == [0, 1, 0, 0]
    full = defender_vertex(7, S4)
    assert not full.v1.any() and full.v2.all()
    empty = defender_vertex(0, S4)
    assert empty.v1.all() and not empty.v2.any()
    for D in range(8):
        assert vertex_to_strategy(defender_vertex(D, S4), 3, S4) == D


def test_vertex_to_strategy_rejects_fractional():
    v = defender_vertex(T2, S4)
    half = type(v)(0.5 * v.v1 + 0.5 * empty_v1(), v.v2)
    with pytest.raises(ModelError):
        vertex_to_strategy(half, 3, S4)


def empty_v1():
    return defender_vertex(0, S4).v1


def test_projections():
    assert np.array_equal(project_attacker({T1 | T2: 1.0}, S4), attacker_vertex(T1 | T2, S4).coords)
    S = SupportSet(3, (T1, T2, T3))
    assert np.allclose(project_attacker({T1: 0.5, T2: 0.5}, S), [0.5, 0.5, 0])
    assert np.allclose(project_attacker({T1: 1 / 3, T2: 1 / 3, T3: 1 / 3}, S), 1 / 3)
    q1, q2 = project_defender({T2: 1.0}, S4)
    v = defender_vertex(T2, S4)
    assert np.array_equal(q1, v.v1) and np.array_equal(q2, v.v2)
    S2 = SupportSet(2, (T1, T2))
    q1, q2 = project_defender({T1: 0.5, T2: 0.5}, S2)
    assert q1[0] == 0.5 and q2[0] == 0.5
    rng = np.random.default_rng(0)
    q = dict(zip(range(8), rng.dirichlet(np.ones(8))))
    q1, q2 = project_defender(q, S4)
    assert np.allclose(q1[:3] + q2[:3], 1)
    with pytest.raises(ModelError):
        project_defender({T1: 0.7}, S4)


def test_compact_payoff_examples():
    prof = zero_sum_complete(AdditiveSetFunction((3, 2)), AdditiveSetFunction((-1, -0.5)), 2, 1)
    c = common_utilities(prof)
    S = support_set(c, 2)
    w = build_weights(c, S)
    a = attacker_vertex(T1, S).coords
    v1 = defender_vertex(T1, S)
    v2 = defender_vertex(T2, S)
    assert compact_payoff(a, (v1.v1, v1.v2), w, "attacker") == pytest.approx(-1)
    assert compact_payoff(a, (v2.v1, v2.v2), w, "attacker") == pytest.approx(3)
    zero = build_weights(common_utilities(prof), S)
    zero = type(zero)({k: 0 * x for k, x in zero.benefit.items()}, {k: 0 * x for k, x in zero.loss.items()})
    assert compact_payoff(a, (v1.v1, v1.v2), zero, "defender") == 0
    with pytest.raises(ValueError):
        compact_payoff(a[:1], (v1.v1, v1.v2), w, "attacker")


def test_direct_payoff_cases():
    prof = _pair_profile()
    assert direct_payoff(T1 | T2, T2, prof, "attacker") == prof.benefit_attacker(T1) + prof.loss_attacker(T2)
    assert direct_payoff(T1 | T2, T1 | T2, prof, "attacker") == prof.loss_attacker(T1 | T2)
    assert direct_payoff(T1 | T2, T3, prof, "defender") == prof.loss_defender(T1 | T2)


def test_compact_equals_direct_random():
    for seed in range(5):
        g = random_game(seed, 5, 2, "matroid", zero_sum=False)
        c = common_utilities(g.utilities)
        S = support_set(c, 5)
        w = build_weights(c, S)
        for A in g.attacker_space:
            a = attacker_vertex(A, S).coords
            for D in range(32):
                v = defender_vertex(D, S)
                for who in ("attacker", "defender"):
                    assert compact_payoff(a, (v.v1, v.v2), w, who) == pytest.approx(
                        direct_payoff(A, D, g.utilities, who), abs=1e-9)


def test_coverage_marginals():
    assert coverage_marginals({T1 | T3: 1.0}, 3).tolist() == [1, 0, 1]
    assert coverage_marginals({T1: 0.5, T2: 0.5}, 3).tolist() == [0.5, 0.5, 0]
    assert coverage_marginals({0: 1.0}, 3).tolist() == [0, 0, 0]


@pytest.mark.parametrize("seed", range(10))
def test_marginals_to_distribution(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, 7)
    a[rng.integers(7)] = 1.0
    dist = marginals_to_distribution(a)
    assert sum(dist.values()) == pytest.approx(1)
    assert np.allclose(coverage_marginals(dist, 7), a, atol=1e-12)
    sizes = {bin(m).count("1") for m in dist}
    assert sizes <= {int(np.floor(a.sum())), int(np.ceil(a.sum()))}
