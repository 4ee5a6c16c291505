"""Brute-force ground truth on the explicit normal form, plus equilibrium checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .compact import (
    ATTACKER,
    DEFENDER,
    as_distribution,
    build_weights,
    direct_payoff,
    project_attacker,
    support_set,
)
from .lpengine import SolverError, lp_solve_dense
from .model import (
    AdditiveSetFunction,
    AttackerSpace,
    GameInstance,
    ModelError,
    SetFunction,
    UtilityProfile,
    common_utilities,
    mask_of,
    popcount,
    zero_sum_complete,
)
from .oracles import (
    MAX,
    Bipartite,
    Budget,
    Explicit,
    OracleError,
    Separable,
    UniformMatroid,
    dop_linear,
    enumerate_system,
)

NF_CAP = 10_000_000


@dataclass
class NormalForm:
    attacker_strategies: list[int]
    defender_strategies: list[int]
    M_a: np.ndarray
    M_d: np.ndarray


def expand_normal_form(game: GameInstance, cap: int = NF_CAP) -> NormalForm:
    attacks = game.attacker_space.enumerate()
    defends = enumerate_system(game.defender)
    if len(attacks) * len(defends) > cap:
        raise ModelError(f"normal form would have {len(attacks) * len(defends)} cells (cap {cap})")
    u = game.utilities
    M_a = np.array([[direct_payoff(A, D, u, ATTACKER) for D in defends] for A in attacks])
    M_d = np.array([[direct_payoff(A, D, u, DEFENDER) for D in defends] for A in attacks])
    return NormalForm(attacks, defends, M_a, M_d)


def brute_minimax(nf: NormalForm):
    """Value min_q max_p p.M_a.q with both optimal strategies (as dicts)."""
    if not np.allclose(nf.M_a, -nf.M_d, atol=1e-9):
        raise ModelError("brute_minimax needs a zero-sum normal form")
    m, k = nf.M_a.shape
    c = np.concatenate([np.zeros(k), [1.0]])
    A_ub = np.hstack([nf.M_a, -np.ones((m, 1))])
    A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    res = lp_solve_dense(c, A_ub, np.zeros(m), A_eq, [1.0], [(0, None)] * k + [(None, None)])
    if not res.ok:
        raise SolverError(f"minimax LP {res.status.value}")
    q = {D: float(x) for D, x in zip(nf.defender_strategies, res.x[:k]) if x > 1e-12}
    p = {A: float(-y) for A, y in zip(nf.attacker_strategies, res.dual_ub) if -y > 1e-12}
    tp = sum(p.values())
    return res.value, {A: v / tp for A, v in p.items()}, q


def minimax_dual_value(nf: NormalForm) -> float:
    """max_p min_q p.M_a.q solved directly (for the strong duality check)."""
    m, k = nf.M_a.shape
    c = np.concatenate([np.zeros(m), [1.0]])
    A_ub = np.hstack([-nf.M_a.T, np.ones((k, 1))])
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    res = lp_solve_dense(c, A_ub, np.zeros(k), A_eq, [1.0], [(0, None)] * m + [(None, None)], sense="max")
    if not res.ok:
        raise SolverError(f"dual minimax LP {res.status.value}")
    return res.value


def brute_sse(game: GameInstance, nf: NormalForm | None = None):
    """(defender value, q, attack) of the strong Stackelberg equilibrium, one LP per attack."""
    nf = nf if nf is not None else expand_normal_form(game)
    m, k = nf.M_a.shape
    best = None
    for i in range(m):
        A_ub = nf.M_a - nf.M_a[i]
        res = lp_solve_dense(nf.M_d[i], A_ub, np.full(m, 1e-12), np.ones((1, k)), [1.0], (0, None), sense="max")
        if res.ok and (best is None or res.value > best[0] + 1e-12):
            best = (res.value, i, res.x)
    if best is None:
        raise SolverError("no attacker strategy is inducible")
    value, i, x = best
    q = {D: float(v) for D, v in zip(nf.defender_strategies, x) if v > 1e-12}
    return value, q, nf.attacker_strategies[i]


# ---------------------------------------------------------------------------
# equilibrium checks


@dataclass
class CheckReport:
    name: str
    passed: bool
    attacker_violation: float
    defender_violation: float
    details: dict = field(default_factory=dict)

    @property
    def max_violation(self) -> float:
        return max(self.attacker_violation, self.defender_violation)


def _expected(p: dict, q: dict, profile, player) -> float:
    return sum(pa * qd * direct_payoff(A, D, profile, player)
               for A, pa in p.items() for D, qd in q.items())


def _attacker_regret(p, q, game):
    u = game.utilities
    current = _expected(p, q, u, ATTACKER)
    best_A, best = None, -np.inf
    for A in game.attacker_space.enumerate():
        v = sum(qd * direct_payoff(A, D, u, ATTACKER) for D, qd in q.items())
        if v > best + 1e-15:
            best_A, best = A, v
    return best - current, best_A, current


def check_ne(p, q, game: GameInstance, eps: float = 1e-6) -> CheckReport:
    """Max gain from a pure deviation for either player, against eps."""
    p, q = as_distribution(p), as_distribution(q)
    u = game.utilities
    att_viol, best_A, ua = _attacker_regret(p, q, game)
    ud = _expected(p, q, u, DEFENDER)
    # defender: one oracle call on weights induced by p, then enumeration when possible
    common = common_utilities(u)
    S = support_set(common, game.n)
    w = build_weights(common, S)
    c1, c2 = w.coefficients(DEFENDER)
    pbar = project_attacker(p, S)
    ans = dop_linear(game.defender, np.concatenate([pbar * c1, pbar * c2]), S, MAX)
    best_D, best_d = ans.strategy, ans.objective_value
    method = "oracle"
    try:
        for D in enumerate_system(game.defender):
            v = sum(pa * direct_payoff(A, D, u, DEFENDER) for A, pa in p.items())
            if v > best_d + 1e-15:
                best_D, best_d = D, v
        method = "oracle+enumeration"
    except OracleError:
        pass
    def_viol = best_d - ud
    passed = max(att_viol, def_viol) <= eps
    return CheckReport("ne", passed, float(att_viol), float(def_viol),
                       {"attacker_payoff": ua, "defender_payoff": ud, "best_attack": best_A,
                        "best_defense": best_D, "defender_check": method})


def check_sse(p, q, game: GameInstance, eps: float = 1e-6) -> CheckReport:
    """p must best-respond to q, and q's induced defender value must match brute_sse."""
    p, q = as_distribution(p), as_distribution(q)
    att_viol, _, _ = _attacker_regret(p, q, game)
    ud = _expected(p, q, game.utilities, DEFENDER)
    ref, _, ref_A = brute_sse(game)
    def_viol = ref - ud
    passed = max(att_viol, def_viol) <= eps
    return CheckReport("sse", passed, float(att_viol), float(def_viol),
                       {"defender_payoff": ud, "reference_value": ref, "reference_attack": ref_A})


# ---------------------------------------------------------------------------
# random instances


def _random_gaps(rng, n):
    loss = rng.uniform(-2.0, 0.0, n)
    return loss + rng.uniform(0.5, 3.0, n), loss


def _synergy_sets(rng, n, c, count):
    if c < 2 or n < 2:
        return []
    pool = [m for m in AttackerSpace(n, c) if popcount(m) >= 2]
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return [pool[i] for i in sorted(idx)]


def _explicit(base, syn, space):
    out = {}
    for A in space:
        if A:
            v = sum(base[i] for i in range(space.n) if A >> i & 1)
            v += sum(s for U, s in syn.items() if U & ~A == 0)
            out[A] = float(v)
    return SetFunction(out)


def random_profile(rng, n: int, c: int, zero_sum: bool = True, additive: bool = False,
                   synergies: int = 3) -> UtilityProfile:
    """Random utilities with benefit > loss by construction.

    Per target, L ~ U[-2, 0] and B = L + U(0.5, 3). Non-additive profiles add
    a few random synergy terms on subsets of size >= 2; a synergy never
    shrinks a set's benefit-loss gap by more than 0.2.
    """
    space = AttackerSpace(n, c)
    b_a, l_a = _random_gaps(rng, n)
    if additive:
        fa = (AdditiveSetFunction(tuple(b_a)), AdditiveSetFunction(tuple(l_a)))
    else:
        sets = _synergy_sets(rng, n, c, synergies)
        sl = {U: rng.uniform(-0.5, 0.5) for U in sets}
        sb = {U: sl[U] + rng.uniform(-0.2, 0.5) for U in sets}
        fa = (_explicit(b_a, sb, space), _explicit(l_a, sl, space))
    if zero_sum:
        return zero_sum_complete(fa[0], fa[1], n, c)
    b_d, l_d = _random_gaps(rng, n)
    if additive:
        fd = (AdditiveSetFunction(tuple(b_d)), AdditiveSetFunction(tuple(l_d)))
    else:
        sets = _synergy_sets(rng, n, c, synergies)
        sl = {U: rng.uniform(-0.5, 0.5) for U in sets}
        sb = {U: sl[U] + rng.uniform(-0.2, 0.5) for U in sets}
        fd = (_explicit(b_d, sb, space), _explicit(l_d, sl, space))
    return UtilityProfile(fa[0], fa[1], fd[0], fd[1], n, c, zero_sum=False)


def random_defender(rng, n: int, kind: str = "matroid", k: int | None = None):
    if kind == "matroid":
        return UniformMatroid(n, int(k if k is not None else rng.integers(1, min(3, n) + 1)))
    if kind == "budget":
        costs = tuple(float(x) for x in rng.integers(1, 6, n))
        return Budget(n, costs, float(rng.integers(3, 9)))
    if kind == "explicit":
        sets = {int(x) for x in rng.integers(0, 1 << n, size=min(6, 1 << n))}
        return Explicit(n, tuple(sorted(sets)))
    if kind == "bipartite":
        r = int(k if k is not None else rng.integers(1, min(3, n) + 1))
        res = tuple(int(x) for x in rng.integers(1, 1 << n, size=r))
        return Bipartite(n, res)
    if kind == "separable":
        labels = rng.integers(0, 3, n)
        comps = tuple(mask_of(np.flatnonzero(labels == j)) for j in range(3) if np.any(labels == j))
        caps = tuple(int(rng.integers(1, bin(c).count("1") + 1)) for c in comps)
        return Separable(n, comps, caps)
    raise ValueError(f"unknown defender kind {kind!r}")


def random_game(seed: int, n: int, c: int, defender: str = "matroid", zero_sum: bool = True,
                additive: bool = False, k: int | None = None) -> GameInstance:
    rng = np.random.default_rng(seed)
    profile = random_profile(rng, n, c, zero_sum=zero_sum, additive=additive)
    return GameInstance(AttackerSpace(n, c), random_defender(rng, n, defender, k), profile)


def all_pure_pairs(game: GameInstance):
    return itertools.product(game.attacker_space.enumerate(), enumerate_system(game.defender))
