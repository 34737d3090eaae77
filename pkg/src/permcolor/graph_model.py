"""Decorated random multigraphs and the permutation gauge.

An instance is a multigraph on ``n`` vertices whose every oriented edge
``(u, v)`` carries a permutation ``pi`` of the colors ``0..k-1``.  Traversing
the edge backwards uses ``pi`` inverted; the inverse is never stored.

Random instances follow the with-replacement model: each of the ``m`` edges
draws ``u`` uniformly, then ``v`` uniformly, then a uniform permutation (a
Fisher-Yates shuffle of the identity), in that order.  Self-loops and parallel
edges are kept.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from permcolor.errors import InvalidParameter, NotAForest

__all__ = [
    "Permutation",
    "DecoratedEdge",
    "DecoratedGraph",
    "ModelParams",
    "make_rng",
    "sample_perm",
    "apply_perm",
    "invert_perm",
    "compose_perm",
    "identity_perm",
    "sample_graph",
    "degree_sequence",
    "is_simple",
    "unwind_tree",
    "conjugate_edge",
    "coboundary_graph",
    "graph_to_dict",
    "graph_from_dict",
    "dumps",
    "loads",
    "save",
    "load",
]


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Return a PCG64 generator; an existing generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``0..k-1``; ``image[c]`` is the image of color ``c``."""

    image: tuple[int, ...]

    def __post_init__(self):
        image = tuple(int(c) for c in self.image)
        k = len(image)
        if k == 0 or sorted(image) != list(range(k)):
            raise InvalidParameter(f"not a permutation of 0..{k - 1}: {image}")
        object.__setattr__(self, "image", image)

    @property
    def k(self) -> int:
        return len(self.image)

    def __call__(self, c: int) -> int:
        return apply_perm(self, c)

    def __len__(self) -> int:
        return len(self.image)

    def is_identity(self) -> bool:
        return all(i == c for i, c in enumerate(self.image))

    def fixed_points(self) -> list[int]:
        return [c for c, i in enumerate(self.image) if i == c]


def identity_perm(k: int) -> Permutation:
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    return Permutation(tuple(range(k)))


def sample_perm(k: int, rng: np.random.Generator) -> Permutation:
    """Uniform random element of S_k."""
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    return Permutation(tuple(rng.permutation(k).tolist()))


def apply_perm(p: Permutation, c: int) -> int:
    if not 0 <= c < len(p.image):
        raise InvalidParameter(f"color {c} out of range for k={len(p.image)}")
    return p.image[c]


def invert_perm(p: Permutation) -> Permutation:
    inv = [0] * len(p.image)
    for c, img in enumerate(p.image):
        inv[img] = c
    return Permutation(tuple(inv))


def compose_perm(p: Permutation, q: Permutation) -> Permutation:
    """The permutation ``c -> p(q(c))``."""
    if len(p.image) != len(q.image):
        raise InvalidParameter(f"cannot compose k={len(p.image)} with k={len(q.image)}")
    return Permutation(tuple(p.image[q.image[c]] for c in range(len(q.image))))


@dataclass(frozen=True)
class DecoratedEdge:
    u: int
    v: int
    pi: Permutation

    @property
    def is_loop(self) -> bool:
        return self.u == self.v


@dataclass(frozen=True)
class DecoratedGraph:
    n: int
    k: int
    edges: tuple[DecoratedEdge, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter(f"n must be >= 1, got {self.n}")
        if self.k < 2:
            raise InvalidParameter(f"k must be >= 2, got {self.k}")
        edges = tuple(self.edges)
        for e in edges:
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise InvalidParameter(f"edge ({e.u}, {e.v}) out of range for n={self.n}")
            if e.pi.k != self.k:
                raise InvalidParameter(f"edge permutation has k={e.pi.k}, graph has k={self.k}")
        object.__setattr__(self, "edges", edges)

    @property
    def m(self) -> int:
        return len(self.edges)

    @classmethod
    def from_triples(cls, n: int, k: int, triples: Iterable[tuple[int, int, Sequence[int]]]):
        """Build from ``(u, v, image)`` triples."""
        return cls(n, k, tuple(DecoratedEdge(u, v, Permutation(tuple(img))) for u, v, img in triples))

    @classmethod
    def with_identity(cls, n: int, k: int, pairs: Iterable[tuple[int, int]]):
        ident = identity_perm(k)
        return cls(n, k, tuple(DecoratedEdge(u, v, ident) for u, v in pairs))


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the with-replacement model; ``d = 2m/n``."""

    n: int
    m: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter(f"n must be >= 1, got {self.n}")
        if self.m < 0:
            raise InvalidParameter(f"m must be >= 0, got {self.m}")
        if self.k < 2:
            raise InvalidParameter(f"k must be >= 2, got {self.k}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must be an unsigned 64-bit integer")

    @property
    def d(self) -> float:
        return 2.0 * self.m / self.n

    @staticmethod
    def edges_for_degree(n: int, d: float) -> int:
        """``m = floor(d*n/2 + 1/2)``, i.e. d*n/2 rounded half up."""
        if d < 0:
            raise InvalidParameter(f"d must be >= 0, got {d}")
        return int(math.floor(d * n / 2 + 0.5))

    @classmethod
    def from_degree(cls, n: int, d: float, k: int, seed: int = 0) -> "ModelParams":
        return cls(n, cls.edges_for_degree(n, d), k, seed)


def sample_graph(params: ModelParams, rng: np.random.Generator | int | None = None) -> DecoratedGraph:
    """Draw from the with-replacement model.

    If ``rng`` is omitted the generator is seeded with ``params.seed``.
    """
    rng = make_rng(params.seed if rng is None else rng)
    n, k = params.n, params.k
    edges = []
    for _ in range(params.m):
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        edges.append(DecoratedEdge(u, v, sample_perm(k, rng)))
    return DecoratedGraph(n, k, tuple(edges))


def degree_sequence(g: DecoratedGraph) -> list[int]:
    """Vertex degrees; a self-loop counts twice."""
    deg = [0] * g.n
    for e in g.edges:
        deg[e.u] += 1
        deg[e.v] += 1
    return deg


def is_simple(g: DecoratedGraph) -> bool:
    seen = set()
    for e in g.edges:
        if e.u == e.v:
            return False
        key = (min(e.u, e.v), max(e.u, e.v))
        if key in seen:
            return False
        seen.add(key)
    return True


def conjugate_edge(rho_u: Permutation, pi: Permutation, rho_v: Permutation) -> Permutation:
    """Edge permutation seen after relabeling colors by ``rho`` at both ends.

    With ``tau(x) = rho_x(sigma(x))`` the constraint ``sigma(v) != pi(sigma(u))``
    becomes ``tau(v) != (rho_v . pi . rho_u^-1)(tau(u))``.
    """
    return compose_perm(rho_v, compose_perm(pi, invert_perm(rho_u)))


def _check_forest(g: DecoratedGraph) -> None:
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        if e.u == e.v:
            raise NotAForest(f"self-loop at vertex {e.u}")
        ru, rv = find(e.u), find(e.v)
        if ru == rv:
            raise NotAForest(f"edge ({e.u}, {e.v}) closes a cycle")
        parent[max(ru, rv)] = min(ru, rv)


def unwind_tree(g: DecoratedGraph) -> list[Permutation]:
    """Per-vertex relabelings that turn every edge permutation into the identity.

    Each tree component is rooted at its lowest-index vertex (relabeling =
    identity) and the relabelings propagate breadth first.  Returns ``rho``
    with ``conjugate_edge(rho[u], pi, rho[v])`` the identity on every edge, so
    ``sigma`` is a permuted coloring iff ``v -> rho[v](sigma(v))`` is a proper
    coloring of the underlying forest.
    """
    _check_forest(g)
    adj: list[list[tuple[int, Permutation, bool]]] = [[] for _ in range(g.n)]
    for e in g.edges:
        adj[e.u].append((e.v, e.pi, True))
        adj[e.v].append((e.u, e.pi, False))

    rho: list[Permutation | None] = [None] * g.n
    for root in range(g.n):
        if rho[root] is not None:
            continue
        rho[root] = identity_perm(g.k)
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y, pi, forward in adj[x]:
                if rho[y] is not None:
                    continue
                if forward:
                    # edge x -> y: rho_y . pi . rho_x^-1 = id
                    rho[y] = compose_perm(rho[x], invert_perm(pi))
                else:
                    # edge y -> x: rho_x . pi . rho_y^-1 = id
                    rho[y] = compose_perm(rho[x], pi)
                queue.append(y)
    return rho  # type: ignore[return-value]


def coboundary_graph(
    skeleton: Sequence[tuple[int, int]],
    k: int,
    rng: np.random.Generator | int | None,
    n: int | None = None,
) -> DecoratedGraph:
    """Decorate ``skeleton`` with a coboundary of uniform vertex permutations.

    Draws ``pi_x`` uniformly for every vertex and sets the edge permutation
    to ``c -> pi_v(pi_u^-1(c))``.  Relabeling each vertex by ``pi_x^-1`` maps
    permuted colorings one-to-one onto proper colorings of the skeleton.
    """
    rng = make_rng(rng)
    if n is None:
        n = 1 + max((max(u, v) for u, v in skeleton), default=0)
    for u, v in skeleton:
        if not (0 <= u < n and 0 <= v < n):
            raise InvalidParameter(f"skeleton edge ({u}, {v}) out of range for n={n}")
    vertex_perms = [sample_perm(k, rng) for _ in range(n)]
    edges = tuple(
        DecoratedEdge(u, v, compose_perm(vertex_perms[v], invert_perm(vertex_perms[u])))
        for u, v in skeleton
    )
    return DecoratedGraph(n, k, edges)


def graph_to_dict(g: DecoratedGraph) -> dict:
    return {
        "n": g.n,
        "k": g.k,
        "edges": [{"u": e.u, "v": e.v, "pi": list(e.pi.image)} for e in g.edges],
    }


def graph_from_dict(data: dict) -> DecoratedGraph:
    try:
        return DecoratedGraph.from_triples(
            int(data["n"]), int(data["k"]), ((e["u"], e["v"], e["pi"]) for e in data["edges"])
        )
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"malformed instance: {exc}") from exc


def dumps(g: DecoratedGraph) -> str:
    return json.dumps(graph_to_dict(g), separators=(",", ":"))


def loads(text: str) -> DecoratedGraph:
    return graph_from_dict(json.loads(text))


def save(g: DecoratedGraph, path: str | Path) -> None:
    Path(path).write_text(dumps(g) + "\n")


def load(path: str | Path) -> DecoratedGraph:
    return loads(Path(path).read_text())
