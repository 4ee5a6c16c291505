"""Compact representation: support sets, weight vectors and vertex maps.

Every vector here is indexed by the members of a :class:`SupportSet` in
canonical order. The exponential 0/1 matrices relating pure strategies to
these coordinates are never built; entries are evaluated as subset tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .model import (
    CommonUtilityProfile,
    ModelError,
    UtilityProfile,
    canonical_key,
    fmt_set,
    full_mask,
    popcount,
)

ATTACKER = "attacker"
DEFENDER = "defender"
PROB_TOL = 1e-9


@dataclass(frozen=True)
class SupportSet:
    n: int
    members: tuple[int, ...]
    index: Mapping[int, int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {m: k for k, m in enumerate(self.members)})
        object.__setattr__(self, "masks", np.array(self.members, dtype=np.uint64))
        object.__setattr__(self, "singleton_pos",
                           np.array([self.index[1 << i] for i in range(self.n)], dtype=np.intp))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def position(self, mask: int) -> int:
        return self.index[mask]


def support_set(common: CommonUtilityProfile, n: int) -> SupportSet:
    masks = {1 << i for i in range(n)}
    for g in common.functions():
        masks.update(m for m, v in g.entries.items() if v != 0.0)
    masks.discard(0)
    return SupportSet(n, tuple(sorted(masks, key=canonical_key)))


@dataclass(frozen=True)
class CompactWeights:
    """Common utilities laid out along a support set.

    ``benefit[p]`` / ``loss[p]`` hold B^c_p(V), L^c_p(V) for player p.
    """

    benefit: Mapping[str, np.ndarray]
    loss: Mapping[str, np.ndarray]

    def coefficients(self, player: str) -> tuple[np.ndarray, np.ndarray]:
        """Weights on the (complement-side, cover-side) coordinates (q1, q2).

        The attacker gains its benefit on sets that avoid the defended targets
        and its loss on defended ones; the defender gains its benefit on
        defended sets and its loss on undefended ones.
        """
        if player == ATTACKER:
            return self.benefit[ATTACKER], self.loss[ATTACKER]
        if player == DEFENDER:
            return self.loss[DEFENDER], self.benefit[DEFENDER]
        raise ValueError(f"unknown player {player!r}")

    @property
    def size(self) -> int:
        return len(self.benefit[ATTACKER])


def build_weights(common: CommonUtilityProfile, S: SupportSet) -> CompactWeights:
    def lay(g):
        return np.array([g(m) for m in S.members], dtype=float)

    return CompactWeights(
        benefit={ATTACKER: lay(common.benefit_attacker), DEFENDER: lay(common.benefit_defender)},
        loss={ATTACKER: lay(common.loss_attacker), DEFENDER: lay(common.loss_defender)},
    )


# ---------------------------------------------------------------------------
# vertices

@dataclass(frozen=True)
class AttackerVertex:
    coords: np.ndarray
    source: int


@dataclass(frozen=True)
class DefenderVertex:
    v1: np.ndarray
    v2: np.ndarray
    source: int | None = None

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.v1, self.v2])


def attacker_coords(A: int, S: SupportSet) -> np.ndarray:
    a = np.uint64(A)
    return ((S.masks & a) == S.masks).astype(float)


def attacker_vertex(A: int, S: SupportSet, budget: int | None = None) -> AttackerVertex:
    if budget is not None and popcount(A) > budget:
        raise ModelError(f"attack {fmt_set(A)} exceeds budget {budget}")
    return AttackerVertex(attacker_coords(A, S), A)


def defender_coords(D: int, S: SupportSet) -> np.ndarray:
    """Stacked (v1, v2) of a defender pure strategy as one float vector."""
    d = np.uint64(D)
    hit = S.masks & d
    return np.concatenate([(hit == 0), (hit == S.masks)]).astype(float)


def defender_vertex(D: int, S: SupportSet) -> DefenderVertex:
    x = defender_coords(D, S)
    k = len(S)
    return DefenderVertex(x[:k], x[k:], D)


def vertex_to_strategy(v: DefenderVertex, n: int, S: SupportSet, tol: float = 1e-9) -> int:
    """Recover the pure strategy of a vertex from its singleton coordinates."""
    pos = S.singleton_pos
    s1 = np.asarray(v.v1)[pos]
    s2 = np.asarray(v.v2)[pos]
    if np.any(np.minimum(np.abs(s1), np.abs(s1 - 1)) > tol):
        raise ModelError("vertex has non-binary singleton coordinates; decompose it first")
    if np.any(np.abs(s1 + s2 - 1) > tol):
        raise ModelError("vertex violates singleton complementarity")
    uncovered = 0
    for i in range(n):
        if s1[i] > 0.5:
            uncovered |= 1 << i
    return full_mask(n) & ~uncovered


# ---------------------------------------------------------------------------
# mixed strategies

def as_distribution(dist, tol: float = PROB_TOL) -> dict[int, float]:
    """Normalise a mapping or (mask, prob) pairs into a validated dict."""
    items = dist.items() if isinstance(dist, Mapping) else dist
    out: dict[int, float] = {}
    for m, p in items:
        out[int(m)] = out.get(int(m), 0.0) + float(p)
    if any(p < -tol for p in out.values()):
        raise ModelError("distribution has negative probabilities")
    total = sum(out.values())
    if abs(total - 1.0) > tol:
        raise ModelError(f"distribution sums to {total!r}, not 1")
    return out


def project_attacker(p, S: SupportSet) -> np.ndarray:
    p = as_distribution(p)
    out = np.zeros(len(S))
    for A, prob in p.items():
        if prob:
            out += prob * attacker_coords(A, S)
    return out


def project_defender(q, S: SupportSet) -> tuple[np.ndarray, np.ndarray]:
    q = as_distribution(q)
    out = np.zeros(2 * len(S))
    for D, prob in q.items():
        if prob:
            out += prob * defender_coords(D, S)
    k = len(S)
    return out[:k], out[k:]


def compact_payoff(pbar, qpt, w: CompactWeights, player: str) -> float:
    pbar = np.asarray(pbar, dtype=float)
    q1, q2 = (np.asarray(x, dtype=float) for x in qpt)
    if not (len(pbar) == len(q1) == len(q2) == w.size):
        raise ValueError("dimension mismatch between compact points and weights")
    c1, c2 = w.coefficients(player)
    return float(pbar @ (c1 * q1 + c2 * q2))


def direct_payoff(A: int, D: int, profile: UtilityProfile, player: str) -> float:
    hit, miss = A & D, A & ~D
    if player == ATTACKER:
        return profile.benefit_attacker(miss) + profile.loss_attacker(hit)
    if player == DEFENDER:
        return profile.benefit_defender(hit) + profile.loss_defender(miss)
    raise ValueError(f"unknown player {player!r}")


def coverage_marginals(q, n: int) -> np.ndarray:
    q = as_distribution(q)
    t = np.zeros(n)
    for D, prob in q.items():
        for i in range(n):
            if D >> i & 1:
                t[i] += prob
    return t


def attacker_matrix(attacks: Iterable[int], S: SupportSet) -> np.ndarray:
    """Rows are the attacker vertices of the given pure attacks."""
    attacks = np.array(list(attacks), dtype=np.uint64)
    return ((S.masks[None, :] & attacks[:, None]) == S.masks[None, :]).astype(float)


def marginals_to_distribution(a, tol: float = 1e-12) -> dict[int, float]:
    """A distribution over subsets whose inclusion marginals equal ``a``.

    Systematic sampling: lay the marginals end to end on [0, sum a) and read
    off, for each offset u in [0, 1), the items hit by u, u+1, u+2, ...
    Every set in the support has floor or ceil of sum(a) elements.
    """
    a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
    F = np.concatenate([[0.0], np.cumsum(a)])
    cuts = np.unique(np.concatenate([[0.0, 1.0], np.mod(F, 1.0)]))
    out: dict[int, float] = {}
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= tol:
            continue
        u = 0.5 * (lo + hi)
        mask = 0
        for i in range(len(a)):
            # item i is hit when some u + j falls in [F[i], F[i+1])
            j = math.ceil(F[i] - u)
            if u + j < F[i + 1]:
                mask |= 1 << i
        out[mask] = out.get(mask, 0.0) + float(hi - lo)
    return out
