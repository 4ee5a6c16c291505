"""Equilibrium solvers built on the compact representation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .compact import (
    ATTACKER,
    DEFENDER,
    DefenderVertex,
    SupportSet,
    as_distribution,
    build_weights,
    coverage_marginals,
    defender_vertex,
    marginals_to_distribution,
    project_defender,
    support_set,
    vertex_to_strategy,
)
from .lpengine import (
    MasterBlock,
    SolverConfig,
    SolverError,
    VertexPool,
    attacker_rows,
    caratheodory_reduce,
    column_generation,
    dop_pricer,
    lp_solve_dense,
    solve_compact_lp,
)
from .model import GameInstance, ModelError, common_utilities, is_additive
from .oracles import MAX, MIN, dop_linear, linear_oracle

NE, SSE = "NE", "SSE"


@dataclass
class EquilibriumResult:
    defender_mixed: list[tuple[int, float]]
    attacker_mixed: list[tuple[int, float]]
    defender_value: float
    attacker_value: float
    coverage: np.ndarray
    concept: str
    diagnostics: dict = field(default_factory=dict)
    attacker_marginals: np.ndarray | None = None

    @property
    def defender_distribution(self) -> dict[int, float]:
        return dict(self.defender_mixed)

    @property
    def attacker_distribution(self) -> dict[int, float]:
        return dict(self.attacker_mixed)


def _sparse(dist: Mapping[int, float], tol: float = 1e-12) -> list[tuple[int, float]]:
    items = [(int(m), float(p)) for m, p in dist.items() if p > tol]
    total = sum(p for _, p in items)
    return sorted(((m, p / total) for m, p in items), key=lambda mp: mp[0])


def _compact_setup(game: GameInstance):
    common = common_utilities(game.utilities)
    S = support_set(common, game.n)
    return common, S, build_weights(common, S)


def _decompose_and_map(masks: Sequence[int], lam: np.ndarray, pool: VertexPool, S: SupportSet, n: int):
    """Reduce a convex combination to affinely independent vertices and map them to strategies."""
    V = pool.vectors(masks)
    keep, lam = caratheodory_reduce(V, np.asarray(lam, dtype=float))
    k = len(S)
    dist: dict[int, float] = {}
    for i, l in zip(keep, lam):
        v = V[i]
        D = vertex_to_strategy(DefenderVertex(v[:k], v[k:]), n, S)
        dist[D] = dist.get(D, 0.0) + float(l)
    return _sparse(dist)


# ---------------------------------------------------------------------------
# zero-sum Nash equilibrium


def solve_zero_sum(game: GameInstance, cfg: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Minimax equilibrium of a zero-sum game via the compact LP.

    Solve the compact LP, take the master's convex combination as the
    decomposition, and map each vertex back to a pure strategy.
    """
    if not game.utilities.zero_sum:
        raise ModelError("solve_zero_sum needs a zero-sum game; use solve_sse or solve_ne_additive")
    _, S, w = _compact_setup(game)
    attacks = game.attacker_space.enumerate()
    pool = VertexPool(S)
    res = solve_compact_lp(w, game.defender, S, cfg, attacks, pool)
    defender = _decompose_and_map(res.master.masks, res.master.lam, pool, S, game.n)
    attacker = _sparse({A: p for A, p in zip(attacks, res.attacker_weights)})
    diag = dict(res.diagnostics, support_size=len(S), attacker_strategies=len(attacks))
    return EquilibriumResult(defender, attacker, -res.u, res.u,
                             coverage_marginals(dict(defender), game.n), NE, diag)


# ---------------------------------------------------------------------------
# strong Stackelberg equilibrium


def solve_sse(game: GameInstance, cfg: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Strong Stackelberg equilibrium by one compact LP per attacker pure strategy.

    For each attack A: first minimise the largest regret s of A against the
    other attacks (A is inducible iff s ~ 0), then maximise the defender's
    payoff at A while keeping A a best response. Attacks whose defender
    payoff cannot beat the incumbent even without the best-response rows are
    pruned with one oracle call.
    """
    _, S, w = _compact_setup(game)
    attacks = game.attacker_space.enumerate()
    rows_a = attacker_rows(w, S, attacks, ATTACKER)
    rows_d = attacker_rows(w, S, attacks, DEFENDER)
    pool = VertexPool(S)
    dim = 2 * len(S)
    m = len(attacks)
    price = dop_pricer(game.defender, S)
    mask0, vec0, _ = price(-rows_a.mean(axis=0))
    pool.add(mask0, vec0)
    cap = cfg.iteration_cap(len(S))
    best = None
    skipped = pruned = 0
    iters = 0
    for j, A in enumerate(attacks):
        ub_ans = dop_linear(game.defender, rows_d[j], S, MAX)
        pool.add(ub_ans.strategy, ub_ans.vertex.stacked)
        if best is not None and ub_ans.objective_value <= best[0] + cfg.opt_tol * 1e-3:
            pruned += 1
            continue
        G = rows_a - rows_a[j]
        ph1 = column_generation(pool, price, np.zeros(dim), MasterBlock(G, np.zeros(m), -np.ones((m, 1)), np.zeros(m)),
                                MasterBlock.empty(dim, 1), np.array([1.0]), [(None, None)],
                                list(pool.masks), cap, cfg.price_tol)
        iters += ph1.iterations
        if not ph1.converged:
            raise SolverError(f"SSE feasibility LP for attack {A} hit the iteration cap")
        s1 = max(ph1.value, 0.0)
        if s1 > cfg.feas_tol:
            skipped += 1
            continue
        ph2 = column_generation(pool, price, -rows_d[j], MasterBlock(G, np.zeros(m), np.zeros((m, 0)),
                                                                    np.full(m, s1 + 1e-9)),
                                MasterBlock.empty(dim, 0), np.zeros(0), [], ph1.columns, cap, cfg.price_tol)
        iters += ph2.iterations
        if not ph2.converged:
            raise SolverError(f"SSE LP for attack {A} hit the iteration cap")
        value = -ph2.value
        if best is None or value > best[0] + cfg.opt_tol * 1e-3:
            best = (value, j, ph2)
    if best is None:
        raise SolverError("no attacker strategy is inducible; this indicates a numerical failure")
    value, j, ph2 = best
    lam = ph2.lam / ph2.lam.sum()
    defender = _decompose_and_map(ph2.columns, lam, pool, S, game.n)
    q = lam @ pool.vectors(ph2.columns)
    diag = {"backend": "colgen", "iterations": iters, "lps_skipped": skipped, "lps_pruned": pruned,
            "support_size": len(S), "attacker_strategies": m}
    return EquilibriumResult(defender, [(attacks[j], 1.0)], value, float(rows_a[j] @ q),
                             coverage_marginals(dict(defender), game.n), SSE, diag)



# ---------------------------------------------------------------------------
# additive non-zero-sum Nash equilibrium


@dataclass(frozen=True)
class SaddleTransform:
    """Per-target ratio of the defender's and attacker's benefit-loss gaps."""

    scale: np.ndarray

    @staticmethod
    def from_gaps(gap_attacker, gap_defender) -> "SaddleTransform":
        ga = np.asarray(gap_attacker, dtype=float)
        gd = np.asarray(gap_defender, dtype=float)
        if np.any(ga <= 0) or np.any(gd <= 0):
            raise ModelError("benefit must exceed loss on every target for the saddle transform")
        return SaddleTransform(gd / ga)


def apply_h(a, t: SaddleTransform, direction: str = "forward") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if direction == "forward":
        return t.scale * a
    if direction == "inverse":
        return a / t.scale
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


@dataclass(frozen=True)
class AdditiveGame:
    """Per-target utilities of an additive game."""

    b_a: np.ndarray
    l_a: np.ndarray
    b_d: np.ndarray
    l_d: np.ndarray
    budget: int

    @staticmethod
    def from_game(game: GameInstance) -> "AdditiveGame":
        u = game.utilities
        if not is_additive(u):
            raise ModelError("solve_ne_additive needs additive utilities")
        vals = [np.array([f(1 << i) for i in range(game.n)], dtype=float) for f in u.functions()]
        ag = AdditiveGame(*vals, budget=game.budget)
        if np.any(ag.gap_a <= 0):
            i = int(np.argmin(ag.gap_a))
            raise ModelError(f"attacker benefit equals loss on target {i}; the saddle transform is undefined")
        return ag

    @property
    def gap_a(self) -> np.ndarray:
        return self.b_a - self.l_a

    @property
    def gap_d(self) -> np.ndarray:
        return self.b_d - self.l_d

    def target_values(self, t) -> np.ndarray:
        """Attacker's expected payoff of each target under coverage t."""
        return self.b_a - self.gap_a * np.asarray(t, dtype=float)

    def attacker_payoff(self, a, t) -> float:
        return float(np.asarray(a) @ self.target_values(t))

    def defender_payoff(self, a, t) -> float:
        return float(np.asarray(a) @ (self.l_d + self.gap_d * np.asarray(t, dtype=float)))

    def best_attack(self, t) -> tuple[int, float]:
        """Greedy best response: up to c targets with the largest positive value."""
        u = self.target_values(t)
        order = sorted((i for i in range(len(u)) if u[i] > 0), key=lambda i: (-u[i], i))
        chosen = order[: self.budget]
        return sum(1 << i for i in chosen), float(sum(u[i] for i in chosen))


def _indicator(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=float)


def _coverage_pricer(spec, n: int):
    def price(w):
        if not np.any(w):
            w = 1e-12 * np.arange(1, n + 1, dtype=float)
        mask, _ = linear_oracle(spec, w, MIN)
        x = _indicator(mask, n)
        return mask, x, float(x @ w)
    return price


def solve_ne_additive(game: GameInstance, cfg: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Nash equilibrium of an additive (possibly non-zero-sum) game.

    1. Solve min over coverage t of the attacker's best-response payoff,
       generating defender columns with the n-dimensional oracle and attacker
       rows with the greedy best response.
    2. Start from the transformed attacker marginals h^-1(beta) of that
       saddle point and look for attack marginals alpha that best-respond to
       t and make t a defender best response (an LP whose defender rows are
       generated by the oracle).
    3. If no such alpha exists, the saddle coverage is not an equilibrium
       strategy. Fall back to a search over the attacker's threshold value
       (see ``_threshold_search``), which always ends at an equilibrium.
    4. Post-verify both best-response conditions.
    """
    ag = AdditiveGame.from_game(game)
    h = SaddleTransform.from_gaps(ag.gap_a, ag.gap_d)
    n, c = game.n, game.budget
    spec = game.defender
    price = _coverage_pricer(spec, n)
    pool = VertexPool(None)
    cap = cfg.iteration_cap(n)

    columns, lam, t, saddle_value, beta, info = _saddle_coverage(ag, pool, price, cap, cfg.price_tol)
    alpha, repair = _repair_attacker(ag, spec, t, apply_h(beta, h, "inverse"), c)
    method = "saddle transform"
    if repair["status"] != "ok":
        columns, lam, t, alpha0, search = _threshold_search(ag, pool, price, spec, c, cap, cfg.price_tol)
        alpha, repair = _repair_attacker(ag, spec, t, alpha0, c)
        repair.update(search)
        method = "threshold search"

    defender = _decompose_additive(columns, lam, pool, n)
    t_real = coverage_marginals(dict(defender), n)
    att_val = ag.attacker_payoff(alpha, t_real)
    def_val = ag.defender_payoff(alpha, t_real)
    _, br_val = ag.best_attack(t_real)
    _, d_best = linear_oracle(spec, alpha * ag.gap_d, MAX)
    viol_a = float(br_val - att_val)
    viol_d = float(d_best - alpha @ (ag.gap_d * t_real))
    verified = max(viol_a, viol_d) <= cfg.opt_tol
    diag = dict(info, backend="colgen", method=method, saddle_value=saddle_value,
                attacker_strategy="realized from marginals", repair=repair,
                attacker_regret=viol_a, defender_regret=viol_d, verified=bool(verified))
    attacker = _sparse(marginals_to_distribution(alpha))
    return EquilibriumResult(defender, attacker, def_val, att_val, t_real, NE, diag, alpha)


def _saddle_coverage(ag: AdditiveGame, pool, price, cap, tol):
    """min over t in H_d' of max over attack marginals of the attacker's payoff."""
    n = len(ag.b_a)
    m0, x0, _ = price(-ag.gap_a)
    pool.add(m0, x0)
    rows: list[int] = [0]
    a_first, _ = ag.best_attack(x0)
    if a_first not in rows:
        rows.append(a_first)
    outer = inner = 0
    while True:
        outer += 1
        R = np.array([_indicator(A, n) for A in rows])
        ub = MasterBlock(-(R * ag.gap_a), R @ ag.b_a, -np.ones((len(rows), 1)), np.zeros(len(rows)))
        res = column_generation(pool, price, np.zeros(n), ub, MasterBlock.empty(n, 1), np.array([1.0]),
                                [(None, None)], list(pool.masks), cap, tol)
        inner += res.iterations
        lam = res.lam / res.lam.sum()
        t = lam @ pool.vectors(res.columns)
        u = float(res.extra[0])
        A_new, v_new = ag.best_attack(t)
        if v_new <= u + tol * (1 + abs(u)) or A_new in rows or outer >= cap:
            break
        rows.append(A_new)
    p = np.clip(-res.dual_ub, 0.0, None)
    beta = (p / p.sum()) @ R if p.sum() > 0 else np.zeros(n)
    return res.columns, lam, t, u, beta, {"iterations": inner, "attacker_rows": len(rows)}


def _threshold_lp(ag: AdditiveGame, pool, price, theta: float, cap, tol):
    """min over t in H_d' of sum_i rho_i (U_i(t) - theta)^+.

    The duals y of the rows s_i >= U_i(t) - theta give attack marginals
    a = y / rho that pay 1 above the threshold, 0 below and anything in
    between at it, and t maximises sum a_i (B_d - L_d)_i t_i. Returns the
    optimum, a, the slope sum(y) of the optimum in theta, and the master.
    """
    n = len(ag.b_a)
    rho = ag.gap_d / ag.gap_a
    ub = MasterBlock(-np.diag(ag.gap_a), np.zeros(n), -np.eye(n), theta - ag.b_a)
    res = column_generation(pool, price, np.zeros(n), ub, MasterBlock.empty(n, n), rho,
                            [(0, None)] * n, list(pool.masks), cap, tol)
    y = np.clip(-res.dual_ub, 0.0, None)
    lam = res.lam / res.lam.sum()
    t = lam @ pool.vectors(res.columns)
    return res.value, np.minimum(y / rho, 1.0), float(y.sum()), res.columns, lam, t


def _threshold_search(ag: AdditiveGame, pool, price, spec, c: int, cap, tol, max_steps: int = 200):
    """Find the attacker threshold theta at which the attack marginals sum to c.

    The optimum of the threshold LP is convex and piecewise linear in theta.
    Bisection brackets the breakpoint where the marginal mass crosses c;
    the breakpoint itself is the intersection of the two bracketing linear
    pieces, and both pieces' duals are optimal there. At theta = 0 any mass
    up to c is allowed.
    """
    phi0, a0, _, cols, lam, t = _threshold_lp(ag, pool, price, 0.0, cap, tol)
    if a0.sum() <= c + 1e-9:
        _, ok = _repair_attacker(ag, spec, t, a0, c)
        if ok["status"] == "ok":
            return cols, lam, t, a0, {"theta": 0.0, "search_steps": 0}
    lo, hi = 0.0, float(ag.b_a.max()) + 1.0
    lo_piece = (0.0, phi0, _threshold_lp(ag, pool, price, 0.0, cap, tol)[2])
    hi_piece = (hi, 0.0, 0.0)
    best = (cols, lam, t, a0)
    for step in range(1, max_steps + 1):
        mid = 0.5 * (lo + hi)
        phi, a, slope, cols, lam, t = _threshold_lp(ag, pool, price, mid, cap, tol)
        mass = a.sum()
        if abs(mass - c) <= 1e-9:
            _, ok = _repair_attacker(ag, spec, t, a, c)
            if ok["status"] == "ok":
                return cols, lam, t, a, {"theta": mid, "search_steps": step}
        if mass > c:
            lo, lo_piece = mid, (mid, phi, slope)
        else:
            hi, hi_piece = mid, (mid, phi, slope)
        best = (cols, lam, t, a)
        (x1, f1, s1), (x2, f2, s2) = lo_piece, hi_piece
        if s1 - s2 > 1e-12:
            theta = (f1 - f2 + s1 * x1 - s2 * x2) / (s1 - s2)
            if lo - 1e-12 <= theta <= hi + 1e-12:
                phi, a, slope, cols, lam, t = _threshold_lp(ag, pool, price, theta, cap, tol)
                _, ok = _repair_attacker(ag, spec, t, a, c)
                if ok["status"] == "ok":
                    return cols, lam, t, a, {"theta": theta, "search_steps": step}
        if hi - lo <= 1e-13 * (1 + hi):
            break
    cols, lam, t, a = best
    return cols, lam, t, a, {"theta": 0.5 * (lo + hi), "search_steps": step, "search": "exhausted"}


def _repair_attacker(ag: AdditiveGame, spec, t, alpha0, c: int):
    """Attack marginals closest (L1) to alpha0 forming an equilibrium with coverage t."""
    n = len(t)
    u = ag.target_values(t)
    _, vstar = ag.best_attack(t)
    face_tol = 1e-9 * (1 + abs(vstar))
    gd = ag.gap_d
    cuts: list[np.ndarray] = []
    # variables: alpha (n), e (n) with e >= |alpha - alpha0|
    cost = np.concatenate([np.zeros(n), np.ones(n)])
    I = np.eye(n)
    base_ub = [
        (np.concatenate([np.ones(n), np.zeros(n)]), float(c)),
        (np.concatenate([-u, np.zeros(n)]), -(vstar - face_tol)),
    ]
    base_ub += [(np.concatenate([I[i], -I[i]]), alpha0[i]) for i in range(n)]
    base_ub += [(np.concatenate([-I[i], -I[i]]), -alpha0[i]) for i in range(n)]
    bounds = [(0, 1)] * n + [(0, None)] * n
    for it in range(1, 10 * n + 50):
        rows = base_ub + [(np.concatenate([gd * (x - t), np.zeros(n)]), 0.0) for x in cuts]
        A = np.array([r for r, _ in rows])
        b = np.array([v for _, v in rows])
        res = lp_solve_dense(cost, A, b, bounds=bounds)
        if not res.ok:
            return np.clip(alpha0, 0, 1), {"status": "infeasible", "cuts": len(cuts)}
        alpha = res.x[:n]
        mask, best = linear_oracle(spec, alpha * gd, MAX)
        if best <= alpha @ (gd * t) + 1e-10 * (1 + abs(best)):
            return np.clip(alpha, 0.0, 1.0), {"status": "ok", "cuts": len(cuts), "distance": float(res.value)}
        cuts.append(_indicator(mask, n))
    return np.clip(alpha, 0.0, 1.0), {"status": "cut limit", "cuts": len(cuts)}


def _decompose_additive(masks, lam, pool: VertexPool, n: int):
    V = pool.vectors(masks)
    keep, lam = caratheodory_reduce(V, np.asarray(lam, dtype=float))
    singles = SupportSet(n, tuple(1 << i for i in range(n)))
    dist: dict[int, float] = {}
    for i, l in zip(keep, lam):
        D = vertex_to_strategy(defender_vertex(masks[i], singles), n, singles)
        dist[D] = dist.get(D, 0.0) + float(l)
    return _sparse(dist)


# ---------------------------------------------------------------------------
# best responses


def attacker_best_response(q_or_t, game: GameInstance, concept: str = NE) -> tuple[int, float]:
    """Attacker best response to a defender mixed strategy or coverage vector.

    Ties go to the smallest mask; under SSE they first go to the attack that
    is best for the defender.
    """
    if not isinstance(q_or_t, Mapping) and is_additive(game.utilities):
        return AdditiveGame.from_game(game).best_attack(q_or_t)
    if not isinstance(q_or_t, Mapping):
        raise ModelError("a coverage vector determines payoffs only for additive utilities")
    _, S, w = _compact_setup(game)
    attacks = game.attacker_space.enumerate()
    q = np.concatenate(project_defender(as_distribution(q_or_t), S))
    va = attacker_rows(w, S, attacks, ATTACKER) @ q
    top = float(va.max())
    tol = 1e-9 * (1 + abs(top))
    cand = [j for j in range(len(attacks)) if va[j] >= top - tol]
    if concept == SSE:
        vd = attacker_rows(w, S, [attacks[j] for j in cand], DEFENDER) @ q
        dtop = float(vd.max())
        cand = [j for j, v in zip(cand, vd) if v >= dtop - 1e-9 * (1 + abs(dtop))]
    j = min(cand, key=lambda j: attacks[j])
    return attacks[j], float(va[j])
