import numpy as np
import pytest

from secgame.compact import SupportSet, defender_coords
from secgame.model import ModelError, mask_of
from secgame.oracles import (
    MAX,
    MIN,
    Bipartite,
    Budget,
    Explicit,
    OracleError,
    PseudoBooleanObjective,
    Separable,
    UniformMatroid,
    dop_linear,
    enumerate_system,
    oracle_solve,
    spec_from_doc,
    to_pseudo_boolean,
)
from secgame.verify import random_defender

T1, T2, T3 = 1, 2, 4


def linear(values):
    return PseudoBooleanObjective({1 << i: float(v) for i, v in enumerate(values)}, len(values))


def test_to_pseudo_boolean_examples():
    a, b = 2.5, -1.0
    obj = to_pseudo_boolean([a], [b], SupportSet(1, (T1,)))
    assert obj.terms == {0: a, T1: b - a}
    S = SupportSet(2, (T1, T2, T1 | T2))
    obj = to_pseudo_boolean([1, 2, 3], [4, 5, 6], S)
    assert obj.terms == {0: 6, T1 | T2: 9}
    assert to_pseudo_boolean([0, 0, 0], [0, 0, 0], S).terms == {}


def test_pseudo_boolean_matches_vertex_product():
    rng = np.random.default_rng(0)
    S = SupportSet(4, (1, 2, 4, 8, 3, 12, 7))
    for _ in range(20):
        w = rng.normal(size=14)
        obj = to_pseudo_boolean(w[:7], w[7:], S)
        for D in range(16):
            assert obj.evaluate(D) == pytest.approx(defender_coords(D, S) @ w, abs=1e-12)


def test_oracle_solve_examples():
    ans = oracle_solve(UniformMatroid(3, 2), linear([5, 1, 3]), MAX)
    assert (ans.strategy, ans.objective_value) == (T1 | T3, 8)
    ans = oracle_solve(Budget(3, (2, 3, 4), 5), linear([3, 4, 5]), MAX)
    assert (ans.strategy, ans.objective_value) == (T1 | T2, 7)
    ans = oracle_solve(Bipartite(3, (T1 | T2, T2 | T3)), linear([1, 5, 2]), MAX)
    assert (ans.strategy, ans.objective_value) == (T2 | T3, 7)


def test_dop_linear_examples():
    S = SupportSet(3, (T1, T2, T3))
    ans = dop_linear(UniformMatroid(3, 2), np.zeros(6), S, MAX)
    assert ans.objective_value == 0
    w = np.concatenate([np.zeros(3), np.ones(3)])
    ans = dop_linear(UniformMatroid(3, 2), w, S, MAX)
    assert ans.objective_value == 2 and bin(ans.strategy).count("1") == 2
    rng = np.random.default_rng(1)
    spec = Explicit(3, (T1, T2 | T3))
    for _ in range(10):
        w = rng.normal(size=6)
        best = max(defender_coords(D, S) @ w for D in spec.sets)
        assert dop_linear(spec, w, S, MAX).objective_value == pytest.approx(best)


def test_enumerate_system_examples():
    assert enumerate_system(UniformMatroid(3, 1)) == [0, 1, 2, 4]
    assert enumerate_system(Explicit(3, (T2, T1, T2))) == [T2, T1]
    assert sorted(enumerate_system(Budget(2, (1, 1), 1))) == [0, 1, 2]
    with pytest.raises(OracleError):
        enumerate_system(UniformMatroid(30, 15), cap=1000)


def test_non_singleton_terms_need_enumeration():
    S = SupportSet(30, tuple(1 << i for i in range(30)) + (3,))
    w = np.zeros(62)
    w[31 + 30] = 1.0  # cover-side weight on {0,1}
    with pytest.raises(OracleError, match="enumerable"):
        dop_linear(UniformMatroid(30, 15), w, S, MAX, cap=1000)


def test_separable_straddling_term_rejected():
    spec = Separable(4, (T1 | T2, T3 | 8))
    obj = PseudoBooleanObjective({T2 | T3: 1.0}, 4)
    with pytest.raises(OracleError):
        oracle_solve(spec, obj, MAX)


def test_budget_fractional_costs():
    spec = Budget(3, (0.5, 0.25, 0.3), 0.55)
    got = enumerate_system(spec)
    assert sorted(got) == [0, 1, 2, 4, T2 | T3]
    ans = oracle_solve(spec, linear([1, 0.6, 0.6]), MAX)
    assert ans.strategy == T2 | T3


def test_spec_from_doc():
    assert spec_from_doc({"type": "matroid", "k": 2}, 4) == UniformMatroid(4, 2)
    assert spec_from_doc({"type": "explicit", "sets": [[0], [1, 2]]}, 3).sets == (T1, T2 | T3)
    assert spec_from_doc({"type": "separable", "components": [[0, 1], [2]], "caps": [1, 1]}, 3).caps == (1, 1)
    with pytest.raises(ModelError):
        spec_from_doc({"type": "matroid"}, 3)
    with pytest.raises(ModelError):
        spec_from_doc({"type": "nope"}, 3)


@pytest.mark.parametrize("kind", ["matroid", "budget", "bipartite", "separable", "explicit"])
@pytest.mark.parametrize("sense", [MAX, MIN])
def test_linear_oracle_ties_pick_smallest_mask(kind, sense):
    rng = np.random.default_rng(7)
    for _ in range(30):
        spec = random_defender(rng, 6, kind)
        w = rng.integers(-2, 3, 6).astype(float)  # integer weights create ties
        masks = enumerate_system(spec)
        vals = np.array([sum(w[i] for i in range(6) if m >> i & 1) for m in masks])
        top = vals.max() if sense == MAX else vals.min()
        expect = min(m for m, v in zip(masks, vals) if abs(v - top) < 1e-12)
        ans = oracle_solve(spec, linear(w), sense)
        assert ans.objective_value == pytest.approx(top)
        assert ans.strategy == expect


def test_bipartite_feasibility():
    spec = Bipartite(3, (T1 | T2, T1 | T2))
    assert spec.feasible(T1 | T2) and not spec.feasible(T3) and not spec.feasible(7)
    assert sorted(enumerate_system(spec)) == [0, 1, 2, 3]
    assert mask_of([0, 1]) == 3
