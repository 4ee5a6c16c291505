"""Targets, pure-strategy spaces and utility set functions.

Subsets of the targets ``0..n-1`` are plain ``int`` bitmasks throughout the
package: bit ``i`` set means target ``i`` is in the set.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

MAX_TARGETS = 64
ZERO_TOL = 1e-12
DENSE_BITS = 16  # largest span handled by the dense subset transform


class ModelError(ValueError):
    """Invalid game data (bad masks, violated utility assumptions, ...)."""


# ---------------------------------------------------------------------------
# subset algebra

def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        i = int(i)
        if not 0 <= i < MAX_TARGETS:
            raise ModelError(f"target index {i} out of range")
        m |= 1 << i
    return m


def members(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def full_mask(n: int) -> int:
    return (1 << n) - 1


def submasks(mask: int) -> Iterator[int]:
    """All subsets of ``mask``, including ``mask`` itself and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def canonical_key(mask: int) -> tuple[int, int]:
    """Sort key: cardinality first, then the mask value."""
    return (popcount(mask), mask)


def check_mask(mask: int, n: int) -> int:
    if mask < 0 or mask >> n:
        raise ModelError(f"mask {mask:#x} has bits outside targets 0..{n - 1}")
    return mask


def fmt_set(mask: int) -> str:
    return "{" + ",".join(str(i) for i in members(mask)) + "}"


# ---------------------------------------------------------------------------
# set functions

@dataclass(frozen=True)
class SetFunction:
    """Sparse real-valued set function; absent subsets evaluate to 0."""

    entries: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for m, v in self.entries.items():
            if m < 0:
                raise ModelError(f"negative mask {m}")
            v = float(v)
            if m == 0:
                if v != 0.0:
                    raise ModelError("set functions must vanish on the empty set")
                continue
            if v != 0.0:
                clean[int(m)] = v
        object.__setattr__(self, "entries", clean)

    def __call__(self, mask: int) -> float:
        return self.entries.get(mask, 0.0)

    def support(self) -> list[int]:
        return sorted(self.entries, key=canonical_key)

    def singleton(self, i: int) -> float:
        return self(1 << i)

    @property
    def is_additive_form(self) -> bool:
        return False

    def __neg__(self) -> "SetFunction":
        return SetFunction({m: -v for m, v in self.entries.items()})


@dataclass(frozen=True)
class AdditiveSetFunction:
    """f(U) = sum of per-target values over U. Never materialised as a table."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __call__(self, mask: int) -> float:
        return math.fsum(self.values[i] for i in members(mask))

    def support(self) -> list[int]:
        return [1 << i for i, v in enumerate(self.values) if v != 0.0]

    def singleton(self, i: int) -> float:
        return self.values[i]

    @property
    def is_additive_form(self) -> bool:
        return True

    def __neg__(self) -> "AdditiveSetFunction":
        return AdditiveSetFunction(tuple(-v for v in self.values))


def mobius_transform(f: Callable[[int], float], domain: Iterable[int]) -> SetFunction:
    """Möbius transform of ``f`` restricted to a downward-closed ``domain``.

    g(U) = sum over V subset of U of (-1)^{|U \\ V|} f(V).
    """
    dom = set(int(m) for m in domain) | {0}  # f(empty) = 0 is always defined
    span = 0
    for m in dom:
        span |= m
    m_bits = span.bit_length()
    dense = m_bits <= DENSE_BITS and len(dom) > 64
    missing = _missing_subset_dense(dom, m_bits) if dense else _missing_subset(dom)
    if missing is not None:
        raise ModelError(f"domain is not downward-closed: {fmt_set(missing[0])} missing "
                         f"(subset of {fmt_set(missing[1])})")
    if dense:
        return _mobius_dense(f, dom, m_bits)
    out = {}
    for u in dom:
        if u == 0:
            continue
        pu = popcount(u)
        total = math.fsum(
            (-1.0 if (pu - popcount(v)) & 1 else 1.0) * f(v) for v in submasks(u)
        )
        if total != 0.0:
            out[u] = total
    return SetFunction(out)


def _missing_subset(dom: set[int]):
    for m in dom:
        rest = m
        while rest:
            low = rest & -rest
            if m ^ low not in dom:
                return m ^ low, m
            rest ^= low
    return None


def _missing_subset_dense(dom: set[int], m: int):
    arr = np.fromiter(dom, dtype=np.int64, count=len(dom))
    inside = np.zeros(1 << m, dtype=bool)
    inside[arr] = True
    for i in range(m):
        top = arr[(arr >> i) & 1 == 1]
        bad = ~inside[top ^ (1 << i)]
        if bad.any():
            u = int(top[np.argmax(bad)])
            return u ^ (1 << i), u
    return None


def _subset_sums(a: np.ndarray, m: int, sign: float) -> np.ndarray:
    """In-place sum (sign=+1) or difference (sign=-1) over subsets, one bit at a time."""
    for i in range(m):
        view = a.reshape(-1, 2, 1 << i)
        view[:, 1, :] += sign * view[:, 0, :]
    return a


def _mobius_dense(f, dom: set[int], m: int) -> SetFunction:
    # values off the domain never reach a domain entry: a downward-closed
    # domain holds every subset of its members
    a = np.zeros(1 << m)
    for u in dom:
        if u:
            a[u] = f(u)
    _subset_sums(a, m, -1.0)
    keep = np.zeros(1 << m, dtype=bool)
    keep[np.fromiter(dom, dtype=np.int64, count=len(dom))] = True
    keep[0] = False
    nz = np.flatnonzero(keep & (a != 0.0))
    return SetFunction(dict(zip(nz.tolist(), a[nz].tolist())))


def zeta_many(g: SetFunction, masks: Iterable[int]) -> np.ndarray:
    """zeta_transform of g at each mask, computed together."""
    masks = [int(u) for u in masks]
    span = 0
    for u in masks:
        span |= u
    for u in g.entries:
        span |= u
    m = span.bit_length()
    if m > DENSE_BITS:
        return np.array([zeta_transform(g, u) for u in masks])
    a = np.zeros(1 << m)
    for u, v in g.entries.items():
        a[u] = v
    _subset_sums(a, m, 1.0)
    return a[masks] if masks else np.zeros(0)


def zeta_transform(g: Callable[[int], float] | SetFunction, mask: int) -> float:
    """Sum of g(V) over all V contained in ``mask``."""
    if isinstance(g, SetFunction):
        return math.fsum(v for m, v in g.entries.items() if m & ~mask == 0)
    return math.fsum(g(v) for v in submasks(mask))


# ---------------------------------------------------------------------------
# strategy spaces and profiles

@dataclass(frozen=True)
class AttackerSpace:
    """All subsets of ``n`` targets with at most ``c`` elements."""

    n: int
    c: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_TARGETS:
            raise ModelError(f"n must be in 1..{MAX_TARGETS}, got {self.n}")
        if self.c < 0:
            raise ModelError("attacker budget must be nonnegative")

    @property
    def size(self) -> int:
        return sum(math.comb(self.n, i) for i in range(min(self.c, self.n) + 1))

    def __iter__(self) -> Iterator[int]:
        for k in range(min(self.c, self.n) + 1):
            for combo in itertools.combinations(range(self.n), k):
                yield mask_of(combo)

    def enumerate(self, cap: int = 1 << 20) -> list[int]:
        if self.size > cap:
            raise ModelError(f"attacker space has {self.size} strategies (cap {cap})")
        return list(self)

    def __contains__(self, mask: int) -> bool:
        return mask >= 0 and mask >> self.n == 0 and popcount(mask) <= self.c


@dataclass(frozen=True)
class UtilityProfile:
    """The four utility set functions of a game on ``n`` targets.

    ``budget`` is the attacker budget c; utilities only matter on subsets of
    size at most c.
    """

    benefit_attacker: SetFunction | AdditiveSetFunction
    loss_attacker: SetFunction | AdditiveSetFunction
    benefit_defender: SetFunction | AdditiveSetFunction
    loss_defender: SetFunction | AdditiveSetFunction
    n: int
    budget: int
    zero_sum: bool = False

    def __post_init__(self):
        space = AttackerSpace(self.n, self.budget)
        for f in self.functions():
            if f.is_additive_form:
                if len(f.values) != self.n:
                    raise ModelError(f"additive utility has {len(f.values)} values, n={self.n}")
                continue
            for m in f.entries:
                check_mask(m, self.n)
                if m not in space:
                    raise ModelError(
                        f"utility entry {fmt_set(m)} exceeds attacker budget {self.budget}"
                    )
        self._check_benefit_exceeds_loss(space)
        if self.zero_sum:
            for name, b, l in (("B_a/L_d", self.benefit_attacker, self.loss_defender),
                               ("B_d/L_a", self.benefit_defender, self.loss_attacker)):
                for m in _stored_masks(b, l):
                    if abs(b(m) + l(m)) > 1e-9 * max(1.0, abs(b(m))):
                        raise ModelError(f"zero-sum violated for {name} at {fmt_set(m)}")

    def functions(self):
        return (self.benefit_attacker, self.loss_attacker,
                self.benefit_defender, self.loss_defender)

    @property
    def all_additive_form(self) -> bool:
        return all(f.is_additive_form for f in self.functions())

    def _check_benefit_exceeds_loss(self, space: AttackerSpace) -> None:
        pairs = (("attacker", self.benefit_attacker, self.loss_attacker),
                 ("defender", self.benefit_defender, self.loss_defender))
        for who, b, l in pairs:
            if b.is_additive_form and l.is_additive_form:
                # sums of positive per-target gaps are positive on every nonempty set
                for i in range(self.n):
                    if not b.values[i] > l.values[i]:
                        raise ModelError(
                            f"{who} benefit must exceed loss on {fmt_set(1 << i)}")
                continue
            for m in space.enumerate():
                if m and not b(m) > l(m):
                    raise ModelError(f"{who} benefit must exceed loss on {fmt_set(m)}")


def _stored_masks(*fs) -> set[int]:
    out = set()
    for f in fs:
        out.update(f.support())
    return out


def zero_sum_complete(benefit_attacker, loss_attacker, n: int, budget: int) -> UtilityProfile:
    """Fill in the defender's utilities as the negated attacker utilities."""
    return UtilityProfile(
        benefit_attacker=benefit_attacker,
        loss_attacker=loss_attacker,
        benefit_defender=-loss_attacker,
        loss_defender=-benefit_attacker,
        n=n,
        budget=budget,
        zero_sum=True,
    )


@dataclass(frozen=True)
class CommonUtilityProfile:
    """Möbius transforms of the four utilities (sparse, near-zeros dropped)."""

    benefit_attacker: SetFunction
    loss_attacker: SetFunction
    benefit_defender: SetFunction
    loss_defender: SetFunction

    def functions(self):
        return (self.benefit_attacker, self.loss_attacker,
                self.benefit_defender, self.loss_defender)


def _common_of(f, space: AttackerSpace, domain: list[int] | None) -> SetFunction:
    if f.is_additive_form:
        return SetFunction({1 << i: v for i, v in enumerate(f.values)})
    g = mobius_transform(f, domain)
    scale = max([1.0] + [abs(v) for v in f.entries.values()])
    return SetFunction({m: v for m, v in g.entries.items() if abs(v) > ZERO_TOL * scale})


def common_utilities(profile: UtilityProfile) -> CommonUtilityProfile:
    space = AttackerSpace(profile.n, profile.budget)
    domain = None if profile.all_additive_form else space.enumerate()
    return CommonUtilityProfile(*(_common_of(f, space, domain) for f in profile.functions()))


def is_additive(profile: UtilityProfile) -> bool:
    """True iff every common utility vanishes on subsets of two or more targets."""
    if profile.all_additive_form:
        return True
    common = common_utilities(profile)
    return all(popcount(m) <= 1 or abs(v) <= ZERO_TOL
               for g in common.functions() for m, v in g.entries.items())


# ---------------------------------------------------------------------------
# network value utilities

def parse_edge_list(text: str) -> list[tuple[int, int]]:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ModelError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ModelError(f"line {lineno}: non-integer node in {raw!r}") from None
        if u < 0 or v < 0:
            raise ModelError(f"line {lineno}: negative node index")
        edges.append((u, v))
    return edges


def adjacency(edges: Iterable[tuple[int, int]], n_nodes: int | None = None) -> list[list[int]]:
    edges = list(edges)
    if n_nodes is None:
        n_nodes = 1 + max((max(e) for e in edges), default=-1)
    adj: list[set[int]] = [set() for _ in range(n_nodes)]
    for u, v in edges:
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise ModelError(f"edge ({u},{v}) references a node outside 0..{n_nodes - 1}")
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return [sorted(a) for a in adj]


def network_value(adj: Sequence[Sequence[int]], removed: int = 0) -> int:
    """Sum of squared connected-component sizes after deleting ``removed``."""
    seen = removed
    total = 0
    for s in range(len(adj)):
        if seen >> s & 1:
            continue
        seen |= 1 << s
        stack, size = [s], 0
        while stack:
            u = stack.pop()
            size += 1
            for v in adj[u]:
                if not seen >> v & 1:
                    seen |= 1 << v
                    stack.append(v)
        total += size * size
    return total


def network_value_benefits(adj: Sequence[Sequence[int]], candidate_sets: Iterable[int]) -> SetFunction:
    """f(U) = val(G) - val(G without U) with val = sum of squared component sizes."""
    n_nodes = len(adj)
    base = network_value(adj)
    out = {}
    for m in candidate_sets:
        if m < 0 or m >> n_nodes:
            raise ModelError(f"candidate set {fmt_set(m)} has nodes outside 0..{n_nodes - 1}")
        if m:
            out[m] = float(base - network_value(adj, m))
    return SetFunction(out)


def as_array(f, n: int) -> np.ndarray:
    """Per-target singleton values of a set function."""
    return np.array([f.singleton(i) for i in range(n)], dtype=float)


@dataclass(frozen=True)
class GameInstance:
    attacker_space: AttackerSpace
    defender: object  # a DefenderOracleSpec from secgame.oracles
    utilities: UtilityProfile

    def __post_init__(self):
        u = self.utilities
        if (u.n, u.budget) != (self.attacker_space.n, self.attacker_space.c):
            raise ModelError("utility profile and attacker space disagree on n or budget")
        if getattr(self.defender, "n", u.n) != u.n:
            raise ModelError("defender system and game disagree on n")

    @property
    def n(self) -> int:
        return self.attacker_space.n

    @property
    def budget(self) -> int:
        return self.attacker_space.c
