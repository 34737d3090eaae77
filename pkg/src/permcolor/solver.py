"""Exact decision, counting and weighting of permuted colorings.

The search is plain backtracking with forward checking.  Every vertex keeps a
bitmask of still-allowed colors; assigning a color strikes the forbidden image
from each unassigned neighbor and fails as soon as a mask empties.  The next
vertex is the one with fewest remaining colors; ties go to the vertex with
the most constraints into unassigned vertices, then to the lowest index.

A self-loop ``(v, v, pi)`` never interacts with other vertices, so it is
applied once up front: ``v`` loses every fixed point of ``pi``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from permcolor.errors import BudgetExhausted, CapExceeded, InvalidParameter, PreconditionViolation
from permcolor.graph_model import DecoratedGraph

__all__ = [
    "Coloring",
    "SolveResult",
    "DEFAULT_ENUMERATION_CAP",
    "is_proper",
    "decide",
    "count_colorings",
    "iter_colorings",
    "available_colors",
    "weight",
    "z_weight",
    "z_weight_float",
    "colorings_table",
    "result_to_dict",
]

Coloring = Sequence[int]

# k**n limit for count_colorings / z_weight
DEFAULT_ENUMERATION_CAP = 2**24

COLORABLE = "colorable"
UNCOLORABLE = "uncolorable"


@dataclass
class SolveResult:
    status: str
    witness: tuple[int, ...] | None = None
    count: int | None = None
    nodes_expanded: int = 0

    @property
    def colorable(self) -> bool:
        return self.status == COLORABLE


def result_to_dict(res: SolveResult) -> dict:
    out: dict = {"status": res.status}
    if res.witness is not None:
        out["witness"] = list(res.witness)
    if res.count is not None:
        out["count"] = str(res.count)
    out["nodes"] = res.nodes_expanded
    return out


def _check_coloring(g: DecoratedGraph, s: Coloring) -> None:
    if len(s) != g.n:
        raise InvalidParameter(f"coloring has length {len(s)}, graph has n={g.n}")
    for c in s:
        if not 0 <= c < g.k:
            raise InvalidParameter(f"color {c} out of range for k={g.k}")


def is_proper(g: DecoratedGraph, s: Coloring) -> bool:
    """True iff ``s(v) != pi(s(u))`` for every edge ``(u, v, pi)``."""
    _check_coloring(g, s)
    return all(s[e.v] != e.pi.image[s[e.u]] for e in g.edges)


class _Search:
    """Backtracking state for one instance."""

    def __init__(self, g: DecoratedGraph, budget: int | None):
        if sys.getrecursionlimit() < 2 * g.n + 200:
            sys.setrecursionlimit(2 * g.n + 200)
        k = g.k
        self.n = g.n
        self.k = k
        self.full = (1 << k) - 1
        self.budget = budget
        self.nodes = 0
        dom = [self.full] * g.n
        # nbrs[x] = list of (y, table) with table[color of x] = color forbidden at y
        nbrs: list[list[tuple[int, tuple[int, ...]]]] = [[] for _ in range(g.n)]
        for e in g.edges:
            img = e.pi.image
            if e.u == e.v:
                for c in range(k):
                    if img[c] == c:
                        dom[e.u] &= ~(1 << c)
                continue
            inv = [0] * k
            for c, i in enumerate(img):
                inv[i] = c
            nbrs[e.u].append((e.v, img))
            nbrs[e.v].append((e.u, tuple(inv)))
        self.dom = dom
        self.nbrs = nbrs
        self.colors = [-1] * g.n

    def _tick(self):
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise BudgetExhausted(f"node budget {self.budget} exhausted")

    def _pick(self, unassigned: list[int]) -> int:
        # fewest remaining colors, then most unassigned constraints, then lowest index
        dom, colors, nbrs = self.dom, self.colors, self.nbrs
        best, best_key = -1, None
        for x in unassigned:
            size = dom[x].bit_count()
            if size == 0:
                return x
            key = (size, -sum(1 for y, _ in nbrs[x] if colors[y] < 0))
            if best_key is None or key < best_key:
                best, best_key = x, key
        return best

    def _assign(self, x: int, c: int, trail: list[tuple[int, int]]) -> bool:
        dom, colors = self.dom, self.colors
        for y, table in self.nbrs[x]:
            if colors[y] >= 0:
                if colors[y] == table[c]:
                    return False
                continue
            bit = 1 << table[c]
            if dom[y] & bit:
                trail.append((y, dom[y]))
                dom[y] &= ~bit
                if not dom[y]:
                    return False
        return True

    def _undo(self, trail: list[tuple[int, int]]) -> None:
        dom = self.dom
        for y, old in reversed(trail):
            dom[y] = old

    def run(self, vertices: list[int], counting: bool) -> int:
        """Count (or find one, when not counting) completions over ``vertices``."""
        if not vertices:
            return 1
        self._tick()
        x = self._pick(vertices)
        rest = [y for y in vertices if y != x]
        total = 0
        mask = self.dom[x]
        while mask:
            low = mask & -mask
            c = low.bit_length() - 1
            mask ^= low
            trail: list[tuple[int, int]] = []
            self.colors[x] = c
            if self._assign(x, c, trail):
                sub = self.run(rest, counting)
                if sub and not counting:
                    self._undo(trail)
                    return sub
                total += sub
            self.colors[x] = -1
            self._undo(trail)
        return total


def _components(g: DecoratedGraph) -> list[list[int]]:
    adj: list[set[int]] = [set() for _ in range(g.n)]
    for e in g.edges:
        if e.u != e.v:
            adj[e.u].add(e.v)
            adj[e.v].add(e.u)
    seen = [False] * g.n
    comps = []
    for r in range(g.n):
        if seen[r]:
            continue
        seen[r] = True
        stack, comp = [r], []
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def decide(g: DecoratedGraph, budget: int | None = None) -> SolveResult:
    """Decide colorability exactly; raises ``BudgetExhausted`` past ``budget`` nodes."""
    search = _Search(g, budget)
    # smallest components first: an uncolorable fragment is found before the
    # giant component is explored
    for comp in sorted(_components(g), key=len):
        if not search.run(comp, counting=False):
            return SolveResult(UNCOLORABLE, nodes_expanded=search.nodes)
    witness = tuple(search.colors)
    assert is_proper(g, witness)
    return SolveResult(COLORABLE, witness=witness, nodes_expanded=search.nodes)


def _check_cap(g: DecoratedGraph, cap: int | None) -> None:
    cap = DEFAULT_ENUMERATION_CAP if cap is None else cap
    if g.n * math.log(g.k) > math.log(cap) + 1e-9:
        raise CapExceeded(f"k^n = {g.k}^{g.n} exceeds the enumeration cap {cap}")


def count_colorings(g: DecoratedGraph, cap: int | None = None) -> int:
    """Exact number of permuted colorings, as a product over components."""
    _check_cap(g, cap)
    search = _Search(g, None)
    total = 1
    for comp in _components(g):
        total *= search.run(comp, counting=True)
        if total == 0:
            break
    return total


def iter_colorings(g: DecoratedGraph) -> Iterator[tuple[int, ...]]:
    """Yield every permuted coloring (uncapped; caller bounds the size)."""
    search = _Search(g, None)
    order = list(range(g.n))

    def rec(vertices):
        if not vertices:
            yield tuple(search.colors)
            return
        x = search._pick(vertices)
        rest = [y for y in vertices if y != x]
        mask = search.dom[x]
        while mask:
            low = mask & -mask
            c = low.bit_length() - 1
            mask ^= low
            trail: list[tuple[int, int]] = []
            search.colors[x] = c
            if search._assign(x, c, trail):
                yield from rec(rest)
            search.colors[x] = -1
            search._undo(trail)

    yield from rec(order)


def _forbidden_sets(g: DecoratedGraph, s: Coloring) -> list[set[int]]:
    forb: list[set[int]] = [set() for _ in range(g.n)]
    for e in g.edges:
        img = e.pi.image
        if e.u == e.v:
            c = s[e.v]
            forb[e.v].add(img[c])
            forb[e.v].add(img.index(c))
        else:
            forb[e.v].add(img[s[e.u]])
            forb[e.u].add(img.index(s[e.v]))
    return forb


def available_colors(g: DecoratedGraph, s: Coloring, v: int) -> int:
    """Number of colors ``v`` could take with every other vertex fixed.

    A self-loop denies both ``pi(s(v))`` and ``pi^-1(s(v))``.
    """
    if not 0 <= v < g.n:
        raise InvalidParameter(f"vertex {v} out of range for n={g.n}")
    if not is_proper(g, s):
        raise PreconditionViolation("available_colors needs a proper coloring")
    return g.k - len(_forbidden_sets(g, s)[v])


def weight(g: DecoratedGraph, s: Coloring) -> Fraction:
    """``prod_v 1/c(s, v)`` for proper ``s``, else 0."""
    if not is_proper(g, s):
        return Fraction(0)
    denom = 1
    for f in _forbidden_sets(g, s):
        denom *= g.k - len(f)
    return Fraction(1, denom)


def z_weight(g: DecoratedGraph, cap: int | None = None) -> Fraction:
    """Exact sum of ``weight`` over all permuted colorings."""
    _check_cap(g, cap)
    by_denom: dict[int, int] = {}
    k = g.k
    for s in iter_colorings(g):
        denom = 1
        for f in _forbidden_sets(g, s):
            denom *= k - len(f)
        by_denom[denom] = by_denom.get(denom, 0) + 1
    return sum((Fraction(cnt, d) for d, cnt in by_denom.items()), Fraction(0))


@lru_cache(maxsize=32)
def colorings_table(n: int, k: int) -> np.ndarray:
    """All ``k**n`` colorings as an ``(k**n, n)`` array, vertex 0 fastest."""
    idx = np.arange(k**n, dtype=np.int64)
    table = np.empty((k**n, n), dtype=np.int64)
    for v in range(n):
        table[:, v] = idx % k
        idx //= k
    table.setflags(write=False)
    return table


_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << 12)], dtype=np.int64)


def _proper_and_available(g: DecoratedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized over all colorings: properness mask and available-color counts."""
    if g.k > 12:
        raise InvalidParameter("vectorized path supports k <= 12")
    table = colorings_table(g.n, g.k)
    proper = np.ones(len(table), dtype=bool)
    forb = np.zeros_like(table)
    for e in g.edges:
        img = np.asarray(e.pi.image, dtype=np.int64)
        inv = np.argsort(img)
        cu, cv = table[:, e.u], table[:, e.v]
        proper &= cv != img[cu]
        forb[:, e.v] |= 1 << img[cu]
        forb[:, e.u] |= 1 << inv[cv]
    return proper, g.k - _POPCOUNT[forb]


def z_weight_float(g: DecoratedGraph, cap: int | None = None) -> tuple[int, float]:
    """``(X, Z)`` by vectorized enumeration; Z in floating point."""
    _check_cap(g, cap)
    proper, avail = _proper_and_available(g)
    x = int(proper.sum())
    if x == 0:
        return 0, 0.0
    logw = -np.log(avail[proper]).sum(axis=1)
    return x, float(np.exp(logw).sum())
