"""Brute-force reference implementations used only by the tests.

Nothing here calls into the search code it is checking: colorings are
enumerated with itertools and weights are recomputed from first principles.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from permcolor.graph_model import DecoratedEdge, DecoratedGraph, Permutation


def all_colorings(n, k):
    return itertools.product(range(k), repeat=n)


def proper(g, s):
    return all(s[e.v] != e.pi.image[s[e.u]] for e in g.edges)


def brute_count(g):
    return sum(1 for s in all_colorings(g.n, g.k) if proper(g, s))


def brute_available(g, s, v):
    """Colors x such that recoloring v to x keeps every edge at v satisfied,
    except that a self-loop blocks pi(s(v)) and pi^-1(s(v)) instead."""
    blocked = set()
    for e in g.edges:
        img = list(e.pi.image)
        if e.u == e.v == v:
            blocked.add(img[s[v]])
            blocked.add(img.index(s[v]))
        elif e.v == v:
            blocked.add(img[s[e.u]])
        elif e.u == v:
            blocked.add(img.index(s[e.v]))
    return g.k - len(blocked)


def brute_z(g):
    total = Fraction(0)
    for s in all_colorings(g.n, g.k):
        if proper(g, s):
            denom = 1
            for v in range(g.n):
                denom *= brute_available(g, s, v)
            total += Fraction(1, denom)
    return total


def random_instance(rng, n_max=6, k_max=4, m_max=8, k_min=2):
    """Random decorated multigraph; self-loops and parallel edges are common."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(k_min, k_max + 1))
    m = int(rng.integers(0, m_max + 1))
    edges = []
    for _ in range(m):
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if edges and rng.random() < 0.2:
            u, v = edges[int(rng.integers(len(edges)))][:2]
        edges.append((u, v, rng.permutation(k).tolist()))
    return DecoratedGraph.from_triples(n, k, edges)


def random_tree(rng, n, k):
    edges = []
    for v in range(1, n):
        u = int(rng.integers(v))
        a, b = (u, v) if rng.random() < 0.5 else (v, u)
        edges.append(DecoratedEdge(a, b, Permutation(tuple(rng.permutation(k).tolist()))))
    order = rng.permutation(len(edges))
    return DecoratedGraph(n, k, tuple(edges[i] for i in order))


def proper_standard_count(n, k, pairs):
    return sum(1 for s in all_colorings(n, k) if all(s[u] != s[v] for u, v in pairs))


def pair_edge_prob(sigma, tau, k):
    """P[random (u, v) with replacement and random pi satisfies both colorings]."""
    n = len(sigma)
    perms = list(itertools.permutations(range(k)))
    good = 0
    for u in range(n):
        for v in range(n):
            for p in perms:
                if sigma[v] != p[sigma[u]] and tau[v] != p[tau[u]]:
                    good += 1
    return Fraction(good, n * n * len(perms))


def brute_second_moment(n, m, k):
    """E[X^2] by summing P[both proper] over every ordered pair of colorings."""
    cols = list(all_colorings(n, k))
    return sum((pair_edge_prob(s, t, k) ** m for s in cols for t in cols), Fraction(0))


def brute_Q(b, k, c):
    """Enumerate all (k-1)^b ball placements."""
    bins = k - 1
    hits = 0
    for placement in itertools.product(range(bins), repeat=b):
        if bins - len(set(placement)) == c - 1:
            hits += 1
    return Fraction(hits, bins**b)
