"""Linear optimisation over the defender polytope.

The polytope H_d is the convex hull of defender vertices and is only known
through the defender oracle. Everything here works by pricing: a restricted
master LP over the vertices generated so far, plus an oracle call that
either proves optimality or produces an improving vertex.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .compact import ATTACKER, CompactWeights, DefenderVertex, SupportSet, attacker_matrix, defender_vertex
from .oracles import MIN, dop_linear

# ---------------------------------------------------------------------------
# configuration, errors, dense kernel


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-6
    max_iters: int | None = None
    backend: str = "colgen"
    seed: int = 0

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.opt_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.backend not in ("colgen", "ellipsoid"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def iteration_cap(self, n_support: int, backend: str | None = None) -> int:
        if self.max_iters is not None:
            return self.max_iters
        if (backend or self.backend) == "ellipsoid":
            return 10 * (2 * n_support + 1) ** 2
        return 500

    @property
    def price_tol(self) -> float:
        return max(self.opt_tol * 1e-3, 1e-10)


class SolverError(RuntimeError):
    def __init__(self, message: str, incumbent=None, diagnostics=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.diagnostics = diagnostics or {}


class IterationLimitError(SolverError):
    pass


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"


@dataclass
class LPResult:
    status: LPStatus
    value: float = math.nan
    x: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is LPStatus.OPTIMAL


_STATUS = {0: LPStatus.OPTIMAL, 2: LPStatus.INFEASIBLE, 3: LPStatus.UNBOUNDED}


def lp_solve_dense(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None),
                   sense: str = "min") -> LPResult:
    """Solve a small dense LP with HiGHS.

    Duals are derivatives of the reported optimum with respect to the
    right-hand sides (so for a min problem the inequality duals are <= 0).
    """
    c = np.asarray(c, dtype=float)
    sign = 1.0 if sense == "min" else -1.0
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    status = _STATUS.get(res.status, LPStatus.FAILED)
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, message=res.message)
    dual_ub = sign * np.asarray(res.ineqlin.marginals) if A_ub is not None else np.zeros(0)
    dual_eq = sign * np.asarray(res.eqlin.marginals) if A_eq is not None else np.zeros(0)
    return LPResult(status, sign * float(res.fun), np.asarray(res.x), dual_ub, dual_eq, res.message)


# ---------------------------------------------------------------------------
# column generation


class VertexPool:
    """Defender vertices discovered so far, shared between related solves."""

    def __init__(self, S: SupportSet):
        self.S = S
        self.masks: list[int] = []
        self.rows: list[np.ndarray] = []
        self._pos: dict[int, int] = {}

    def add(self, mask: int, vec: np.ndarray | None = None) -> int:
        if mask in self._pos:
            return self._pos[mask]
        if vec is None:
            vec = defender_vertex(mask, self.S).stacked
        self._pos[mask] = len(self.masks)
        self.masks.append(mask)
        self.rows.append(np.asarray(vec, dtype=float))
        return self._pos[mask]

    def __contains__(self, mask: int) -> bool:
        return mask in self._pos

    def __len__(self) -> int:
        return len(self.masks)

    def vectors(self, masks: Sequence[int] | None = None) -> np.ndarray:
        """Stacked vertex vectors of the given strategies (all when omitted)."""
        if masks is None:
            return np.array(self.rows)
        return np.array([self.rows[self._pos[m]] for m in masks])


def dop_pricer(spec, S: SupportSet) -> Callable[[np.ndarray], tuple[int, np.ndarray, float]]:
    def price(w):
        if not np.any(w):
            # degenerate duals: a tiny lexicographic tilt keeps pricing deterministic
            w = 1e-12 * np.arange(1, len(w) + 1, dtype=float)
        ans = dop_linear(spec, w, S, MIN)
        vec = ans.vertex.stacked
        return ans.strategy, vec, float(vec @ w)
    return price


@dataclass
class MasterBlock:
    """Rows of the form G (sum_j lam_j v_j) + h + X x_extra  (<= or ==)  b."""

    G: np.ndarray
    h: np.ndarray
    X: np.ndarray
    b: np.ndarray

    @staticmethod
    def empty(dim: int, n_extra: int) -> "MasterBlock":
        return MasterBlock(np.zeros((0, dim)), np.zeros(0), np.zeros((0, n_extra)), np.zeros(0))


@dataclass
class ColGenResult:
    value: float
    columns: list[int]
    lam: np.ndarray
    extra: np.ndarray
    dual_ub: np.ndarray
    dual_eq: np.ndarray
    iterations: int
    converged: bool
    reduced_cost: float


def column_generation(pool: VertexPool, price, g: np.ndarray, ub: MasterBlock, eq: MasterBlock,
                      extra_cost: np.ndarray, extra_bounds, columns: list[int], cap: int,
                      tol: float) -> ColGenResult:
    """Minimise g.(sum lam v) + extra_cost.x over generated vertices, pricing new ones.

    A convexity row sum lam = 1 is appended to the equality block. Raises
    SolverError when a restricted master is infeasible.
    """
    dim = len(g)
    n_extra = len(extra_cost)
    columns = list(dict.fromkeys(columns))
    it = 0
    best_rc = -math.inf
    while True:
        it += 1
        V = pool.vectors(columns)  # (k, dim)
        k = len(columns)
        c = np.concatenate([V @ g, extra_cost])
        A_ub = np.hstack([(ub.G @ V.T) + ub.h[:, None], ub.X]) if len(ub.b) else None
        A_eq = np.vstack([
            np.hstack([(eq.G @ V.T) + eq.h[:, None], eq.X]) if len(eq.b) else np.zeros((0, k + n_extra)),
            np.concatenate([np.ones(k), np.zeros(n_extra)])[None, :],
        ])
        b_eq = np.concatenate([eq.b, [1.0]])
        bounds = [(0, None)] * k + list(extra_bounds)
        res = lp_solve_dense(c, A_ub, ub.b if A_ub is not None else None, A_eq, b_eq, bounds)
        if not res.ok:
            raise SolverError(f"restricted master LP {res.status.value}: {res.message}")
        y_ub, y_eq = res.dual_ub, res.dual_eq
        w = g.copy()
        if len(ub.b):
            w -= ub.G.T @ y_ub
        if len(eq.b):
            w -= eq.G.T @ y_eq[:-1]
        const = (y_ub @ ub.h if len(ub.b) else 0.0) + (y_eq[:-1] @ eq.h if len(eq.b) else 0.0) + y_eq[-1]
        mask, vec, wv = price(w)
        rc = wv - const
        best_rc = rc
        scale = 1.0 + abs(res.value)
        done = rc >= -tol * scale or mask in columns
        if done or it >= cap:
            lam = np.clip(res.x[:k], 0.0, None)
            return ColGenResult(res.value, columns, lam, res.x[k:], y_ub, y_eq, it, done, best_rc)
        pool.add(mask, vec)
        columns.append(mask)


# ---------------------------------------------------------------------------
# membership and separation


@dataclass
class SeparationResult:
    inside: bool
    coeff: np.ndarray | None = None
    offset: float = 0.0
    violation: float = 0.0
    kind: str = "membership"
    lam: dict[int, float] = field(default_factory=dict)

    def separates(self, x) -> bool:
        return (not self.inside) and float(self.coeff @ np.asarray(x)) > self.offset


def membership(point, spec, S: SupportSet, cfg: SolverConfig = SolverConfig(),
               pool: VertexPool | None = None) -> SeparationResult:
    """Decide point in conv(defender vertices); otherwise return a separating hyperplane.

    Solves min sum |slack| s.t. sum lam v + slack = point by column
    generation. At the optimum the equality duals pi satisfy pi.v <= rho
    for every vertex and pi.point > rho, which is the reported cut.
    """
    x = np.asarray(point, dtype=float)
    dim = 2 * len(S)
    if len(x) != dim:
        raise ValueError(f"point has length {len(x)}, expected {dim}")
    pool = pool if pool is not None else VertexPool(S)
    price = dop_pricer(spec, S)
    if not len(pool):
        mask, vec, _ = price(-x + 0.5)
        pool.add(mask, vec)
    I = np.eye(dim)
    eq = MasterBlock(I, np.zeros(dim), np.hstack([I, -I]), x)
    ub = MasterBlock.empty(dim, 2 * dim)
    cap = max(cfg.iteration_cap(len(S), "colgen"), 4 * dim)
    res = column_generation(pool, price, np.zeros(dim), ub, eq, np.ones(2 * dim),
                            [(0, None)] * (2 * dim), list(pool.masks), cap, cfg.price_tol)
    if not res.converged:
        raise IterationLimitError(f"membership did not converge in {cap} iterations "
                                  f"(best violation {res.value:.3g})", incumbent=res.value)
    if res.value <= cfg.feas_tol:
        lam = {m: float(l) for m, l in zip(res.columns, res.lam) if l > 0}
        return SeparationResult(True, violation=res.value, lam=lam)
    pi = res.dual_eq[:-1]
    rho = -res.dual_eq[-1]
    norm = float(np.abs(pi).max())
    return SeparationResult(False, pi / norm, rho / norm, res.value)


def u0_bound(w: CompactWeights, S: SupportSet, player: str = ATTACKER) -> float:
    c1, c2 = w.coefficients(player)
    top = lambda v: float(np.abs(v).max()) if len(v) else 0.0
    return len(S) * (top(c1) + top(c2)) + 2.0


def attacker_rows(w: CompactWeights, S: SupportSet, attacks: Sequence[int], player: str = ATTACKER) -> np.ndarray:
    """Row r gives the payoff of attack r against a defender point as row.(q1,q2)."""
    E = attacker_matrix(attacks, S)
    c1, c2 = w.coefficients(player)
    return np.hstack([E * c1, E * c2])


def separation_compact_lp(q1, q2, u, w: CompactWeights, attacks: Sequence[int], spec, S: SupportSet,
                          cfg: SolverConfig = SolverConfig(), pool: VertexPool | None = None,
                          rows: np.ndarray | None = None) -> SeparationResult:
    """Separate (q1, q2, u) from {u >= every attack payoff, (q1, q2) in H_d}.

    Hyperplanes live in (q1, q2, u) space. Attacker inequalities are checked
    first; the most violated one is returned.
    """
    q = np.concatenate([np.asarray(q1, float), np.asarray(q2, float)])
    rows = attacker_rows(w, S, attacks) if rows is None else rows
    vals = rows @ q
    j = int(np.argmax(vals))
    if vals[j] > u + cfg.feas_tol:
        coeff = np.concatenate([rows[j], [-1.0]])
        norm = float(np.abs(coeff).max())
        return SeparationResult(False, coeff / norm, 0.0, float(vals[j] - u), kind="attacker")
    m = membership(q, spec, S, cfg, pool)
    if m.inside:
        return m
    return SeparationResult(False, np.concatenate([m.coeff, [0.0]]), m.offset, m.violation)


# ---------------------------------------------------------------------------
# compact minimax LP


@dataclass
class RestrictedMaster:
    generated_vertices: list[DefenderVertex]
    lam: np.ndarray
    duals: np.ndarray
    masks: list[int]


@dataclass
class CompactLPResult:
    q1: np.ndarray
    q2: np.ndarray
    u: float
    master: RestrictedMaster
    attacks: list[int]
    attacker_weights: np.ndarray
    diagnostics: dict


def _zero_sum_master(pool, price, rows, columns, cap, tol):
    m, dim = rows.shape
    ub = MasterBlock(rows, np.zeros(m), -np.ones((m, 1)), np.zeros(m))
    eq = MasterBlock.empty(dim, 1)
    return column_generation(pool, price, np.zeros(dim), ub, eq, np.array([1.0]),
                             [(None, None)], columns, cap, tol)


def _result_from_master(res: ColGenResult, pool: VertexPool, S: SupportSet, attacks, diagnostics):
    lam = res.lam / res.lam.sum()
    keep = lam > 1e-12
    masks = [m for m, k in zip(res.columns, keep) if k]
    lam = lam[keep] / lam[keep].sum()
    V = pool.vectors(masks)
    q = lam @ V
    k = len(S)
    p = np.clip(-res.dual_ub, 0.0, None)
    p = p / p.sum() if p.sum() > 0 else p
    verts = [DefenderVertex(v[:k].copy(), v[k:].copy(), mm) for v, mm in zip(V, masks)]
    master = RestrictedMaster(verts, lam, res.dual_ub, masks)
    return CompactLPResult(q[:k], q[k:], float(res.extra[0]), master, list(attacks), p, diagnostics)


def solve_compact_lp(w: CompactWeights, spec, S: SupportSet, cfg: SolverConfig = SolverConfig(),
                     attacks: Sequence[int] | None = None, pool: VertexPool | None = None) -> CompactLPResult:
    """min u s.t. every attacker vertex payoff <= u, (q1, q2) in H_d."""
    if attacks is None:
        raise ValueError("attacks (the attacker pure strategies) are required")
    attacks = list(attacks)
    rows = attacker_rows(w, S, attacks)
    pool = pool if pool is not None else VertexPool(S)
    price = dop_pricer(spec, S)
    if cfg.backend == "ellipsoid":
        return _solve_ellipsoid(rows, w, spec, S, cfg, attacks, pool, price)
    if not len(pool):
        mask, vec, _ = price(-rows.mean(axis=0))
        pool.add(mask, vec)
    cap = cfg.iteration_cap(len(S))
    res = _zero_sum_master(pool, price, rows, list(pool.masks), cap, cfg.price_tol)
    diag = {"backend": "colgen", "iterations": res.iterations, "columns": len(res.columns),
            "reduced_cost": res.reduced_cost}
    out = _result_from_master(res, pool, S, attacks, diag)
    if not res.converged:
        raise IterationLimitError(f"column generation hit the iteration cap {cap}",
                                  incumbent=out, diagnostics=diag)
    return out


def affine_hull(spec, S: SupportSet, pool: VertexPool, tol: float = 1e-9):
    """Affine hull of H_d found with oracle calls: (anchor, orthonormal basis columns)."""
    dim = 2 * len(S)
    price = dop_pricer(spec, S)
    m0, x0, _ = price(np.ones(dim))
    pool.add(m0, x0)
    basis: list[np.ndarray] = []
    normals: list[np.ndarray] = []
    for e in np.eye(dim):
        d = e.copy()
        for b in basis + normals:
            d -= (d @ b) * b
        if np.linalg.norm(d) < 1e-8:
            continue
        d /= np.linalg.norm(d)
        found = None
        for sgn in (1.0, -1.0):
            m, v, _ = price(sgn * d)
            pool.add(m, v)
            if abs(d @ (v - x0)) > tol:
                found = v
                break
        if found is None:
            normals.append(d)
            continue
        r = found - x0
        for b in basis:
            r -= (r @ b) * b
        basis.append(r / np.linalg.norm(r))
    B = np.array(basis).T if basis else np.zeros((dim, 0))
    return x0, B


# restricted-master polishing interval of the ellipsoid backend (None: automatic)
POLISH_EVERY: int | None = None


def _solve_ellipsoid(rows, w, spec, S, cfg, attacks, pool, price) -> CompactLPResult:
    """Central-cut ellipsoid over (reduced q, u), polished by restricted masters.

    The defender polytope is usually not full-dimensional, so the search
    runs in coordinates of its affine hull. Every few iterations the
    vertices seen so far are pooled into a restricted master whose optimum
    is certified by a single oracle call on the master's duals.
    """
    x0, B = affine_hull(spec, S, pool)
    r = B.shape[1]
    dim = r + 1
    u0 = u0_bound(w, S)
    R = math.sqrt(2 * len(S)) + u0
    cap = cfg.iteration_cap(len(S), "ellipsoid")
    polish_every = POLISH_EVERY or max(5, 2 * dim)
    diag = {"backend": "ellipsoid", "affine_dim": r, "radius": R}

    def polish():
        res = _zero_sum_master(pool, lambda wv: (pool.masks[0], pool.rows[0], 0.0), rows,
                               list(pool.masks), 1, cfg.price_tol)
        mask, vec, wv = price(-(rows.T @ res.dual_ub))
        gap = res.value - wv  # value minus the lower bound from the master's duals
        return res, gap

    if r == 0:
        res, gap = polish()
        diag.update(iterations=0, certified=gap <= cfg.opt_tol * 0.1 * (1 + abs(res.value)), gap=gap)
        return _result_from_master(res, pool, S, attacks, diag)

    c = np.zeros(dim)
    P = np.eye(dim) * R * R
    best_u = math.inf
    res, gap = None, math.inf
    it = 0
    for it in range(1, cap + 1):
        y, u = c[:r], c[r]
        q = x0 + B @ y
        sep = separation_compact_lp(q[: len(S)], q[len(S):], u, w, attacks, spec, S, cfg, pool, rows)
        if sep.inside:
            best_u = min(best_u, u)
            a = np.zeros(dim)
            a[r] = 1.0
        else:
            a = np.concatenate([B.T @ sep.coeff[:-1], [sep.coeff[-1]]])
        Pa = P @ a
        denom = float(a @ Pa)
        if denom <= 1e-300:
            break
        b = Pa / math.sqrt(denom)
        if dim == 1:
            c = c - b / 2
            P = P / 4
        else:
            c = c - b / (dim + 1)
            P = dim * dim / (dim * dim - 1.0) * (P - 2.0 / (dim + 1) * np.outer(b, b))
            P = (P + P.T) / 2
        if it % polish_every == 0:
            res, gap = polish()
            if gap <= cfg.opt_tol * 0.1 * (1 + abs(res.value)):
                break
    if res is None or it % polish_every:
        res, gap = polish()
    diag.update(iterations=it, certified=bool(gap <= cfg.opt_tol * 0.1 * (1 + abs(res.value))),
                gap=float(gap), vertices_seen=len(pool), best_center_u=best_u)
    return _result_from_master(res, pool, S, attacks, diag)


# ---------------------------------------------------------------------------
# convex decomposition


def caratheodory_reduce(V: np.ndarray, lam: np.ndarray, tol: float = 1e-12):
    """Drop vertices until the remaining ones are affinely independent.

    V has one vertex per row. Returns (indices kept, weights).
    """
    idx = np.flatnonzero(lam > tol)
    lam = lam[idx].astype(float)
    while len(idx) > 1:
        M = np.vstack([V[idx].T, np.ones(len(idx))])
        _, s, vt = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-9 * max(1.0, s[0])))
        if rank >= len(idx):
            break
        z = vt[-1]
        if z.max() <= 0:
            z = -z
        pos = z > 1e-15
        theta = float(np.min(lam[pos] / z[pos]))
        lam = lam - theta * z
        keep = lam > tol
        keep[np.argmin(np.where(pos, lam, np.inf))] = False
        idx, lam = idx[keep], lam[keep]
    lam = np.clip(lam, 0.0, None)
    return idx, lam / lam.sum()


def convex_decompose(point, spec, S: SupportSet, cfg: SolverConfig = SolverConfig(),
                     pool: VertexPool | None = None):
    """Write a point of H_d as a convex combination of at most 2|S|+1 vertices."""
    pool = pool if pool is not None else VertexPool(S)
    x = np.asarray(point, dtype=float)
    m = membership(x, spec, S, cfg, pool)
    if not m.inside:
        raise ValueError(f"point is not in the defender polytope (violation {m.violation:.3g})")
    masks = list(m.lam)
    lam = np.array([m.lam[k] for k in masks])
    V = pool.vectors(masks)
    keep, lam = caratheodory_reduce(V, lam)
    masks = [masks[i] for i in keep]
    V = V[keep]
    resid = float(np.abs(lam @ V - x).max())
    if resid > cfg.feas_tol:
        raise SolverError(f"decomposition residual {resid:.3g} exceeds feas_tol")
    k = len(S)
    return lam, [DefenderVertex(v[:k].copy(), v[k:].copy(), mm) for v, mm in zip(V, masks)]
