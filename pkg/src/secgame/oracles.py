"""Defender oracles: optimise over the defender's feasible pure strategies.

A defender system describes which target subsets the defender may cover.
Every backend can maximise a linear (singleton-only) objective with a
specialised algorithm; objectives with higher-order terms fall back to
enumeration of the system.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .compact import DefenderVertex, SupportSet, defender_coords, defender_vertex
from .model import ModelError, canonical_key, fmt_set, mask_of, members, popcount, submasks

ENUM_CAP = 1 << 20
COMPONENT_CAP = 25
DP_SCALE = 1000
DP_MAX_CELLS = 50_000_000
MAX, MIN = "max", "min"


class OracleError(RuntimeError):
    pass


def _tie_tol(scale: float) -> float:
    return 1e-12 * (1.0 + scale)


# ---------------------------------------------------------------------------
# set systems

@dataclass(frozen=True)
class UniformMatroid:
    """Any subset of at most ``k`` targets."""

    n: int
    k: int

    def feasible(self, mask: int) -> bool:
        return mask >> self.n == 0 and popcount(mask) <= self.k

    def count(self) -> int:
        return sum(math.comb(self.n, i) for i in range(min(self.k, self.n) + 1))

    def _enumerate(self):
        for r in range(min(self.k, self.n) + 1):
            for combo in itertools.combinations(range(self.n), r):
                yield mask_of(combo)

    def max_linear(self, w: np.ndarray, allowed: int) -> int:
        order = sorted((i for i in range(self.n) if w[i] > 0 and allowed >> i & 1),
                       key=lambda i: (-w[i], i))
        return mask_of(order[: self.k])

    def to_doc(self):
        return {"type": "matroid", "k": self.k}


@dataclass(frozen=True)
class Explicit:
    """An explicit list of allowed pure strategies."""

    n: int
    sets: tuple[int, ...]

    def __post_init__(self):
        if not self.sets:
            raise ModelError("explicit defender system needs at least one strategy")
        seen = []
        for m in self.sets:
            if m < 0 or m >> self.n:
                raise ModelError(f"explicit strategy {fmt_set(m)} outside 0..{self.n - 1}")
            if m not in seen:
                seen.append(m)
        object.__setattr__(self, "sets", tuple(seen))

    def feasible(self, mask: int) -> bool:
        return mask in self.sets

    def count(self) -> int:
        return len(self.sets)

    def _enumerate(self):
        return iter(self.sets)

    max_linear = None

    def to_doc(self):
        return {"type": "explicit", "sets": [members(m) for m in self.sets]}


@dataclass(frozen=True)
class Bipartite:
    """Each resource covers one target from its coverable set."""

    n: int
    resources: tuple[int, ...]

    def __post_init__(self):
        for r in self.resources:
            if r < 0 or r >> self.n:
                raise ModelError(f"resource set {fmt_set(r)} outside 0..{self.n - 1}")

    def feasible(self, mask: int) -> bool:
        if mask >> self.n:
            return False
        match: dict[int, int] = {}

        def augment(i, seen):
            for r, cover in enumerate(self.resources):
                if cover >> i & 1 and r not in seen:
                    seen.add(r)
                    if r not in match or augment(match[r], seen):
                        match[r] = i
                        return True
            return False

        return all(augment(i, set()) for i in members(mask))

    def count(self) -> int:
        reach = 0
        for r in self.resources:
            reach |= r
        return 1 << popcount(reach)  # upper bound

    def _enumerate(self):
        reach = 0
        for r in self.resources:
            reach |= r
        for m in sorted(submasks(reach), key=canonical_key):
            if popcount(m) <= len(self.resources) and self.feasible(m):
                yield m

    def _solve_restricted(self, w: np.ndarray, allowed: int) -> int:
        rows = [i for i in range(self.n) if w[i] > 0 and allowed >> i & 1]
        if not rows or not self.resources:
            return 0
        weight = np.zeros((len(rows), len(self.resources)))
        for a, i in enumerate(rows):
            for r, cover in enumerate(self.resources):
                if cover >> i & 1:
                    weight[a, r] = w[i]
        ri, ci = linear_sum_assignment(weight, maximize=True)
        return mask_of(rows[a] for a, r in zip(ri, ci) if weight[a, r] > 0)

    def max_linear(self, w: np.ndarray, allowed: int) -> int:
        return _canonical(lambda al: self._solve_restricted(w, al), w, allowed, self.n)

    def to_doc(self):
        return {"type": "bipartite", "resources": [members(r) for r in self.resources]}


@dataclass(frozen=True)
class Budget:
    """Subsets whose total cost fits the budget.

    Costs are scaled by 1000 and rounded before comparing with the (scaled,
    floored) budget; feasibility everywhere uses these integers.
    """

    n: int
    costs: tuple[float, ...]
    budget: float

    def __post_init__(self):
        if len(self.costs) != self.n:
            raise ModelError(f"budget system needs {self.n} costs, got {len(self.costs)}")
        if any(c < 0 for c in self.costs):
            raise ModelError("budget costs must be nonnegative")
        icost = [int(round(c * DP_SCALE)) for c in self.costs]
        cap = math.floor(self.budget * DP_SCALE + 1e-9)
        g = functools.reduce(math.gcd, [c for c in icost if c] + [max(cap, 0)], 0) or 1
        object.__setattr__(self, "_icost", tuple(c // g for c in icost))
        object.__setattr__(self, "_cap", cap // g if cap >= 0 else -1)

    def feasible(self, mask: int) -> bool:
        return mask >> self.n == 0 and sum(self._icost[i] for i in members(mask)) <= self._cap

    def count(self) -> int:
        return 1 << self.n  # upper bound

    def _enumerate(self):
        for r in range(self.n + 1):
            for combo in itertools.combinations(range(self.n), r):
                m = mask_of(combo)
                if self.feasible(m):
                    yield m

    def _solve_restricted(self, w: np.ndarray, allowed: int) -> int:
        if self._cap < 0:
            raise OracleError("budget system is infeasible (negative budget)")
        items = [i for i in range(self.n) if w[i] > 0 and allowed >> i & 1]
        W = self._cap
        if len(items) * (W + 1) > DP_MAX_CELLS:
            raise OracleError(
                f"knapsack DP scale overflow: {len(items)} items x capacity {W}")
        best = np.zeros(W + 1)
        take = np.zeros((len(items), W + 1), dtype=bool)
        for a, i in enumerate(items):
            c = self._icost[i]
            if c > W:
                continue
            cand = np.full(W + 1, -np.inf)
            cand[c:] = best[: W + 1 - c] + w[i]
            better = cand > best
            take[a] = better
            best = np.where(better, cand, best)
        chosen, cap = 0, W
        for a in range(len(items) - 1, -1, -1):
            if take[a, cap]:
                chosen |= 1 << items[a]
                cap -= self._icost[items[a]]
        return chosen

    def max_linear(self, w: np.ndarray, allowed: int) -> int:
        return _canonical(lambda al: self._solve_restricted(w, al), w, allowed, self.n)

    def to_doc(self):
        return {"type": "budget", "costs": list(self.costs), "budget": self.budget}


@dataclass(frozen=True)
class Separable:
    """Independent choices inside disjoint components.

    The defender may cover any subset of a component (at most ``caps[j]``
    targets of component j when caps are given); targets outside every
    component cannot be covered.
    """

    n: int
    components: tuple[int, ...]
    caps: tuple[int, ...] | None = None

    def __post_init__(self):
        seen = 0
        for c in self.components:
            if c < 0 or c >> self.n:
                raise ModelError(f"component {fmt_set(c)} outside 0..{self.n - 1}")
            if c & seen:
                raise ModelError("separable components must be pairwise disjoint")
            if popcount(c) > COMPONENT_CAP:
                raise ModelError(f"component {fmt_set(c)} larger than {COMPONENT_CAP} targets")
            seen |= c
        if self.caps is not None and len(self.caps) != len(self.components):
            raise ModelError("one cap per component required")

    def _cap(self, j: int) -> int:
        return popcount(self.components[j]) if self.caps is None else self.caps[j]

    def feasible(self, mask: int) -> bool:
        rest = mask
        for j, c in enumerate(self.components):
            if popcount(mask & c) > self._cap(j):
                return False
            rest &= ~c
        return rest == 0

    def count(self) -> int:
        total = 1
        for j, c in enumerate(self.components):
            total *= sum(math.comb(popcount(c), r) for r in range(min(self._cap(j), popcount(c)) + 1))
        return total

    def component_choices(self, j: int) -> list[int]:
        c, cap = self.components[j], self._cap(j)
        return sorted((m for m in submasks(c) if popcount(m) <= cap), key=canonical_key)

    def _enumerate(self):
        parts = [self.component_choices(j) for j in range(len(self.components))]
        out = [sum(p) for p in itertools.product(*parts)]
        return iter(sorted(out, key=canonical_key))

    def max_linear(self, w: np.ndarray, allowed: int) -> int:
        chosen = 0
        for j in range(len(self.components)):
            best, best_m = 0.0, 0
            for m in self.component_choices(j):
                if m & ~allowed:
                    continue
                v = sum(w[i] for i in members(m))
                if v > best + _tie_tol(abs(best)) or (abs(v - best) <= _tie_tol(abs(best)) and m < best_m):
                    best, best_m = v, m
            chosen |= best_m
        return chosen

    def to_doc(self):
        doc = {"type": "separable", "components": [members(c) for c in self.components]}
        if self.caps is not None:
            doc["caps"] = list(self.caps)
        return doc


DefenderOracleSpec = UniformMatroid | Explicit | Bipartite | Budget | Separable


def _canonical(solve, w: np.ndarray, allowed: int, n: int) -> int:
    """Smallest-mask optimum of a linear objective given an optimiser over subsets.

    ``solve(allowed)`` must return an optimal feasible set using only
    targets in ``allowed``. Targets are dropped from the high bit down
    whenever the optimum survives without them.
    """
    allowed &= mask_of(i for i in range(n) if w[i] > 0)
    best_mask = solve(allowed)
    best = float(sum(w[i] for i in members(best_mask)))
    tol = _tie_tol(float(np.abs(w).sum()))
    for i in range(n - 1, -1, -1):
        if not allowed >> i & 1:
            continue
        trial = solve(allowed & ~(1 << i))
        if sum(w[j] for j in members(trial)) >= best - tol:
            allowed &= ~(1 << i)
            best_mask = trial
    return best_mask


def spec_from_doc(doc: Mapping, n: int) -> DefenderOracleSpec:
    kind = doc.get("type")
    try:
        if kind == "matroid":
            return UniformMatroid(n, int(doc["k"]))
        if kind == "explicit":
            return Explicit(n, tuple(mask_of(s) for s in doc["sets"]))
        if kind == "bipartite":
            return Bipartite(n, tuple(mask_of(s) for s in doc["resources"]))
        if kind == "budget":
            return Budget(n, tuple(float(c) for c in doc["costs"]), float(doc["budget"]))
        if kind == "separable":
            caps = doc.get("caps")
            return Separable(n, tuple(mask_of(s) for s in doc["components"]),
                             None if caps is None else tuple(int(c) for c in caps))
    except KeyError as e:
        raise ModelError(f"defender_system {kind!r} is missing field {e}") from None
    raise ModelError(f"unknown defender_system type {kind!r}")


# ---------------------------------------------------------------------------
# enumeration

def enumerate_system(spec: DefenderOracleSpec, cap: int = ENUM_CAP) -> list[int]:
    return list(_enumerated(spec, cap))


@functools.lru_cache(maxsize=128)
def _enumerated(spec, cap: int) -> tuple[int, ...]:
    bound = spec.count()
    if isinstance(spec, (UniformMatroid, Explicit, Separable)) and bound > cap:
        raise OracleError(f"set system has {bound} members, above the enumeration cap {cap}")
    out = []
    for m in spec._enumerate():
        out.append(m)
        if len(out) > cap:
            raise OracleError(f"set system has more than {cap} members (bound {bound})")
    return tuple(out)


@functools.lru_cache(maxsize=64)
def _vertex_table(spec, S: SupportSet, cap: int) -> tuple[np.ndarray, np.ndarray]:
    masks = enumerate_system(spec, cap)
    table = np.array([defender_coords(m, S) for m in masks])
    return np.array(masks, dtype=object), table


# ---------------------------------------------------------------------------
# pseudo-Boolean objectives

@dataclass(frozen=True)
class PseudoBooleanObjective:
    """sum over T of terms[T] * prod_{i in T} x_i; terms[0] is the constant."""

    terms: Mapping[int, float]
    n: int
    support: SupportSet | None = field(default=None, compare=False)

    @property
    def constant(self) -> float:
        return self.terms.get(0, 0.0)

    @property
    def singleton_only(self) -> bool:
        return all(popcount(m) <= 1 for m in self.terms)

    def linear_part(self) -> np.ndarray:
        w = np.zeros(self.n)
        for m, v in self.terms.items():
            if m:
                w[m.bit_length() - 1] = v
        return w

    def evaluate(self, mask: int) -> float:
        return math.fsum(v for m, v in self.terms.items() if m & ~mask == 0)

    def evaluate_many(self, masks) -> np.ndarray:
        arr = np.array(list(masks), dtype=np.uint64)
        out = np.full(len(arr), self.constant)
        for m, v in self.terms.items():
            if m:
                t = np.uint64(m)
                out += v * ((arr & t) == t)
        return out


def to_pseudo_boolean(w1, w2, S: SupportSet) -> PseudoBooleanObjective:
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if len(w1) != len(S) or len(w2) != len(S):
        raise ValueError("weight vectors must match the support set size")
    terms: dict[int, float] = {}
    for k, V in enumerate(S.members):
        if w2[k]:
            terms[V] = terms.get(V, 0.0) + float(w2[k])
        if w1[k]:
            # prod over V of (1 - x_i) expands to sum over T within V of (-1)^|T| x_T
            for T in submasks(V):
                sign = -1.0 if popcount(T) & 1 else 1.0
                terms[T] = terms.get(T, 0.0) + sign * float(w1[k])
    scale = 1.0 + float(np.abs(w1).sum() + np.abs(w2).sum())
    terms = {m: v for m, v in terms.items() if abs(v) > 1e-13 * scale}
    return PseudoBooleanObjective(terms, S.n, S)


@dataclass(frozen=True)
class OracleAnswer:
    strategy: int
    objective_value: float
    vertex: DefenderVertex | None = None


def _best_of(masks, values: np.ndarray, sense: str) -> tuple[int, float]:
    vals = values if sense == MAX else -values
    top = float(vals.max())
    near = np.flatnonzero(vals >= top - _tie_tol(abs(top)))
    k = min(near, key=lambda j: int(masks[j]))
    return int(masks[k]), float(values[k])


def oracle_solve(spec: DefenderOracleSpec, obj: PseudoBooleanObjective, sense: str = MAX,
                 cap: int = ENUM_CAP) -> OracleAnswer:
    if obj.n != spec.n:
        raise ValueError(f"objective over {obj.n} targets, system over {spec.n}")
    if sense not in (MAX, MIN):
        raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
    if obj.singleton_only and spec.max_linear is not None:
        w = obj.linear_part()
        mask = spec.max_linear(w if sense == MAX else -w, (1 << spec.n) - 1)
        value = obj.evaluate(mask)
    elif isinstance(spec, Separable):
        mask, value = _separable_pb(spec, obj, sense)
    else:
        try:
            masks = enumerate_system(spec, cap)
        except OracleError as e:
            raise OracleError(f"objective with non-singleton terms requires enumerable set system: {e}") from None
        mask, value = _best_of(masks, obj.evaluate_many(masks), sense)
    vertex = defender_vertex(mask, obj.support) if obj.support is not None else None
    return OracleAnswer(mask, value, vertex)


def _separable_pb(spec: Separable, obj: PseudoBooleanObjective, sense: str) -> tuple[int, float]:
    owner = {}
    for m in obj.terms:
        if not m:
            continue
        js = [j for j, c in enumerate(spec.components) if m & c]
        if len(js) > 1:
            raise OracleError(f"term {fmt_set(m)} straddles separable components")
        owner[m] = js[0] if js else None
    chosen, value = 0, obj.constant
    for j in range(len(spec.components)):
        sub = PseudoBooleanObjective({m: v for m, v in obj.terms.items() if owner.get(m) == j}, obj.n)
        choices = spec.component_choices(j)
        m, v = _best_of(choices, sub.evaluate_many(choices), sense)
        chosen |= m
        value += v
    return chosen, obj.evaluate(chosen)


def dop_linear(spec: DefenderOracleSpec, w, S: SupportSet, sense: str = MIN,
               cap: int = ENUM_CAP) -> OracleAnswer:
    """Optimise w . (v1, v2) over the defender vertices of a support set."""
    w = np.asarray(w, dtype=float)
    k = len(S)
    if len(w) != 2 * k:
        raise ValueError(f"weight vector has length {len(w)}, expected {2 * k}")
    obj = to_pseudo_boolean(w[:k], w[k:], S)
    if (obj.singleton_only and spec.max_linear is not None) or isinstance(spec, Separable):
        return oracle_solve(spec, obj, sense, cap)
    try:
        masks, table = _vertex_table(spec, S, cap)
    except OracleError as e:
        raise OracleError(f"objective with non-singleton terms requires enumerable set system: {e}") from None
    mask, value = _best_of(masks, table @ w, sense)
    return OracleAnswer(mask, value, defender_vertex(mask, S))


def linear_oracle(spec: DefenderOracleSpec, w, sense: str = MAX) -> tuple[int, float]:
    """Best feasible strategy for a per-target linear objective w . x."""
    w = np.asarray(w, dtype=float)
    obj = PseudoBooleanObjective({1 << i: float(v) for i, v in enumerate(w) if v}, spec.n)
    ans = oracle_solve(spec, obj, sense)
    return ans.strategy, ans.objective_value
