import numpy as np
import pytest

from secgame.compact import (
    SupportSet,
    attacker_matrix,
    build_weights,
    defender_coords,
    support_set,
)
from secgame.lpengine import (
    LPStatus,
    SolverConfig,
    VertexPool,
    attacker_rows,
    caratheodory_reduce,
    convex_decompose,
    lp_solve_dense,
    membership,
    separation_compact_lp,
    solve_compact_lp,
    u0_bound,
)
from secgame.model import AdditiveSetFunction, AttackerSpace, common_utilities, zero_sum_complete
from secgame.oracles import Explicit, UniformMatroid, enumerate_system
from secgame.verify import brute_minimax, expand_normal_form, random_game

T1, T2, T3 = 1, 2, 4


def _setup(game):
    c = common_utilities(game.utilities)
    S = support_set(c, game.n)
    return S, build_weights(c, S)


def _sym_game(k=1, n=2):
    prof = zero_sum_complete(AdditiveSetFunction((1.0,) * n), AdditiveSetFunction((0.0,) * n), n, 1)
    from secgame.model import GameInstance
    return GameInstance(AttackerSpace(n, 1), UniformMatroid(n, k), prof)


def test_lp_solve_dense_examples():
    r = lp_solve_dense([1.0], [[1.0]], [3.0], sense="max")
    assert r.ok and r.value == pytest.approx(3)
    # min u s.t. u >= 1 - t, u >= t, 0 <= t <= 1 ; variables (t, u)
    r = lp_solve_dense([0, 1], [[-1, -1], [1, -1]], [-1, 0], bounds=[(0, 1), (None, None)])
    assert r.value == pytest.approx(0.5) and r.x[0] == pytest.approx(0.5)
    r = lp_solve_dense([1.0], [[1.0], [-1.0]], [0.0, -1.0])
    assert r.status is LPStatus.INFEASIBLE
    r = lp_solve_dense([1.0], bounds=[(None, None)])
    assert r.status is LPStatus.UNBOUNDED


def test_lp_duals_are_rhs_derivatives():
    # min x + y s.t. x + 2y >= 4  (as -x - 2y <= -4), x, y >= 0 -> optimum 2 at y = 2
    r = lp_solve_dense([1, 1], [[-1, -2]], [-4.0])
    r2 = lp_solve_dense([1, 1], [[-1, -2]], [-4.0 + 1e-3])
    assert (r2.value - r.value) / 1e-3 == pytest.approx(r.dual_ub[0], abs=1e-6)


def test_membership_cases():
    S = SupportSet(3, (T1, T2, T3, T1 | T2))
    spec = UniformMatroid(3, 2)
    cfg = SolverConfig()
    for D in enumerate_system(spec):
        assert membership(defender_coords(D, S), spec, S, cfg).inside
    mid = 0.5 * (defender_coords(T1, S) + defender_coords(T2 | T3, S))
    m = membership(mid, spec, S, cfg)
    assert m.inside
    V = np.array([defender_coords(D, S) for D in m.lam])
    assert np.allclose(np.array(list(m.lam.values())) @ V, mid, atol=1e-9)
    bad = defender_coords(T1, S).copy()
    bad[S.position(T1)] = 0.5  # q1 + q2 = 1.5 on target 0
    m = membership(bad, spec, S, cfg)
    assert not m.inside and m.separates(bad)
    for D in enumerate_system(spec):
        assert m.coeff @ defender_coords(D, S) <= m.offset + 1e-9


def test_membership_outside_matroid():
    S = SupportSet(3, (T1, T2, T3))
    pt = defender_coords(7, S)  # covering all three exceeds k = 2
    m = membership(pt, UniformMatroid(3, 2), S)
    assert not m.inside and m.separates(pt)


def test_separation_compact_lp_cases():
    g = random_game(2, 4, 2, "matroid", k=2)
    S, w = _setup(g)
    attacks = g.attacker_space.enumerate()
    rows = attacker_rows(w, S, attacks)
    q = defender_coords(T1 | T3, S)
    k = len(S)
    r = separation_compact_lp(q[:k], q[k:], 1e6, w, attacks, g.defender, S)
    assert r.inside
    top = float((rows @ q).max())
    r = separation_compact_lp(q[:k], q[k:], top - 0.1, w, attacks, g.defender, S)
    assert r.kind == "attacker" and not r.inside
    x = np.concatenate([q, [top - 0.1]])
    assert r.separates(x)
    out = defender_coords(7, S)
    r = separation_compact_lp(out[:k], out[k:], 1e6, w, attacks, g.defender, S)
    assert not r.inside and r.kind == "membership" and r.coeff[-1] == 0


def test_u0_bound_formula():
    from secgame.compact import CompactWeights
    w = CompactWeights({"attacker": np.array([2.0, -1, 0]), "defender": np.zeros(3)},
                       {"attacker": np.array([1.0, 0, -0.5]), "defender": np.zeros(3)})
    S = SupportSet(2, (T1, T2, T1 | T2))
    assert u0_bound(w, S) == 11
    zero = CompactWeights({"attacker": np.zeros(3), "defender": np.zeros(3)},
                          {"attacker": np.zeros(3), "defender": np.zeros(3)})
    assert u0_bound(zero, S) == 2


@pytest.mark.parametrize("backend", ["colgen", "ellipsoid"])
def test_compact_lp_examples(backend):
    cfg = SolverConfig(backend=backend)
    g = _sym_game()
    S, w = _setup(g)
    r = solve_compact_lp(w, g.defender, S, cfg, g.attacker_space.enumerate())
    assert r.u == pytest.approx(0.5, abs=1e-7)
    g = _sym_game(k=3, n=3)  # full coverage, L_a = 0
    S, w = _setup(g)
    r = solve_compact_lp(w, g.defender, S, cfg, g.attacker_space.enumerate())
    assert r.u == pytest.approx(0, abs=1e-7)
    r = solve_compact_lp(w, g.defender, S, cfg, [0])  # only the empty attack
    assert r.u == pytest.approx(0, abs=1e-7)


@pytest.mark.parametrize("seed", range(4))
def test_compact_lp_matches_bruteforce(seed):
    g = random_game(seed, 5, 2, "matroid", k=2)
    S, w = _setup(g)
    value, _, _ = brute_minimax(expand_normal_form(g))
    for backend in ("colgen", "ellipsoid"):
        r = solve_compact_lp(w, g.defender, S, SolverConfig(backend=backend), g.attacker_space.enumerate())
        assert r.u == pytest.approx(value, abs=1e-6)
        q = np.concatenate([r.q1, r.q2])
        assert np.allclose(r.master.lam @ np.array([v.stacked for v in r.master.generated_vertices]), q)


def test_convex_decompose_examples():
    S = SupportSet(4, (1, 2, 4, 8))
    spec = UniformMatroid(4, 2)
    v = defender_coords(T1 | T3, S)
    lam, verts = convex_decompose(v, spec, S)
    assert len(verts) == 1 and lam[0] == pytest.approx(1)
    assert verts[0].source == T1 | T3
    x = 0.3 * defender_coords(T1, S) + 0.7 * defender_coords(T2 | T3, S)
    lam, verts = convex_decompose(x, spec, S)
    assert np.abs(lam @ np.array([u.stacked for u in verts]) - x).max() < 1e-7
    assert sorted(np.round(lam, 9)) == [0.3, 0.7]
    pts = [defender_coords(D, S) for D in (T1, T2, T3 | 8, T1 | T2)]
    x = np.mean(pts, axis=0)
    lam, verts = convex_decompose(x, spec, S)
    assert len(verts) <= 2 * len(S) + 1
    assert np.abs(lam @ np.array([u.stacked for u in verts]) - x).max() < 1e-7
    with pytest.raises(ValueError):
        convex_decompose(defender_coords(7, S), spec, S)


def test_caratheodory_reduce_keeps_point():
    rng = np.random.default_rng(0)
    V = rng.integers(0, 2, (12, 4)).astype(float)
    lam = rng.dirichlet(np.ones(12))
    keep, mu = caratheodory_reduce(V, lam)
    assert len(keep) <= 5
    assert np.allclose(mu @ V[keep], lam @ V)
    assert np.all(mu >= 0) and mu.sum() == pytest.approx(1)


def test_vertex_pool_dedup():
    S = SupportSet(2, (T1, T2))
    pool = VertexPool(S)
    pool.add(T1, defender_coords(T1, S))
    pool.add(T1, defender_coords(T1, S))
    assert len(pool) == 1


def test_explicit_defender_columns():
    g = random_game(5, 4, 2, "explicit")
    S, w = _setup(g)
    value, _, _ = brute_minimax(expand_normal_form(g))
    r = solve_compact_lp(w, g.defender, S, SolverConfig(), g.attacker_space.enumerate())
    assert r.u == pytest.approx(value, abs=1e-6)
    assert set(r.master.masks) <= set(g.defender.sets)
    assert attacker_matrix([0], S).sum() == 0
    assert isinstance(g.defender, Explicit)


def test_ellipsoid_converges_without_polishing(monkeypatch):
    from secgame import lpengine
    monkeypatch.setattr(lpengine, "POLISH_EVERY", 10**9)
    g = random_game(1, 3, 2, "matroid", k=1)
    S, w = _setup(g)
    value, _, _ = brute_minimax(expand_normal_form(g))
    r = solve_compact_lp(w, g.defender, S, SolverConfig(backend="ellipsoid"), g.attacker_space.enumerate())
    assert r.diagnostics["iterations"] > 100
    assert r.diagnostics["best_center_u"] == pytest.approx(value, abs=1e-5)
    assert r.u == pytest.approx(value, abs=1e-6)
