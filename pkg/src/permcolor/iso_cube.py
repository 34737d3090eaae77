"""Weighted isoperimetric inequality on the cube ``[k]^n``.

A subset ``S`` is stored as a boolean indicator over all ``k**n`` cells.  The
cell of ``sigma = (s_1, ..., s_n)`` has index ``sum_i s_i * k**(i-1)``, so
axis 1 is least significant.  Reshaped in C order the indicator has shape
``(k,) * n`` with axis ``v`` (1-based) at numpy position ``n - v``.

All weights are exact.  ``Z(S)`` has denominator dividing
``lcm(1..k)**n``, so batches are evaluated as integer numerators over that
common denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from permcolor.errors import CapExceeded, InvalidParameter, PreconditionViolation

__all__ = [
    "CubeSubset",
    "MAX_CELLS",
    "EXHAUSTIVE_MAX_CELLS",
    "cell_index",
    "cell_of",
    "neighbor_count",
    "subset_z",
    "cylinder_thicken",
    "verify_monotone",
    "thickening_chain",
    "exhaustive_check",
    "random_check",
    "boolean_cube_sum",
]

MAX_CELLS = 2**20
EXHAUSTIVE_MAX_CELLS = 16


@dataclass(frozen=True, eq=False)
class CubeSubset:
    k: int
    n: int
    membership: np.ndarray

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise InvalidParameter("k and n must be positive")
        if self.k**self.n > MAX_CELLS:
            raise CapExceeded(f"k^n = {self.k}^{self.n} exceeds {MAX_CELLS}")
        mem = np.asarray(self.membership, dtype=bool).reshape(-1)
        if mem.size != self.k**self.n:
            raise InvalidParameter(f"indicator has {mem.size} cells, expected {self.k**self.n}")
        mem = mem.copy()
        mem.setflags(write=False)
        object.__setattr__(self, "membership", mem)

    @classmethod
    def from_cells(cls, k: int, n: int, cells: Iterable[Sequence[int]]) -> "CubeSubset":
        mem = np.zeros(k**n, dtype=bool)
        for sigma in cells:
            mem[cell_index(k, sigma)] = True
        return cls(k, n, mem)

    @classmethod
    def full(cls, k: int, n: int) -> "CubeSubset":
        return cls(k, n, np.ones(k**n, dtype=bool))

    def __contains__(self, sigma: Sequence[int]) -> bool:
        return bool(self.membership[cell_index(self.k, sigma)])

    def __eq__(self, other) -> bool:
        return (isinstance(other, CubeSubset) and (self.k, self.n) == (other.k, other.n)
                and bool(np.array_equal(self.membership, other.membership)))

    def __len__(self) -> int:
        return int(self.membership.sum())

    def cells(self) -> list[tuple[int, ...]]:
        return [cell_of(self.k, self.n, i) for i in np.flatnonzero(self.membership)]


def cell_index(k: int, sigma: Sequence[int]) -> int:
    idx = 0
    for s in reversed(sigma):
        if not 0 <= s < k:
            raise InvalidParameter(f"coordinate {s} out of range for k={k}")
        idx = idx * k + int(s)
    return idx


def cell_of(k: int, n: int, index: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        index, r = divmod(int(index), k)
        out.append(r)
    return tuple(out)


def _check_axis(n: int, v: int) -> None:
    if not 1 <= v <= n:
        raise InvalidParameter(f"axis {v} out of range 1..{n}")


def neighbor_count(S: CubeSubset, sigma: Sequence[int], v: int) -> int:
    """Cells of ``S`` agreeing with ``sigma`` off axis ``v`` (``sigma`` included)."""
    _check_axis(S.n, v)
    if sigma not in S:
        raise PreconditionViolation(f"{tuple(sigma)} is not in S")
    total = 0
    cell = list(sigma)
    for c in range(S.k):
        cell[v - 1] = c
        total += bool(S.membership[cell_index(S.k, cell)])
    return total


def _axis_counts(members: np.ndarray, k: int, n: int) -> np.ndarray:
    """Per-cell product of line counts ``prod_v c_S(sigma, v)`` for a batch.

    ``members`` has shape ``(B, k**n)``; the result has the same shape and is
    meaningful only on member cells.
    """
    B = members.shape[0]
    cube = members.reshape((B,) + (k,) * n).astype(np.int64)
    prod = np.ones_like(cube)
    for ax in range(1, n + 1):
        prod *= cube.sum(axis=ax, keepdims=True)
    return prod.reshape(B, -1)


def _common_denominator(k: int, n: int) -> int:
    return math.lcm(*range(1, k + 1)) ** n


def _z_numerators(members: np.ndarray, k: int, n: int) -> tuple[list[int], int]:
    """Exact ``Z`` of each row as ``numerator / D`` with a shared ``D``."""
    D = _common_denominator(k, n)
    prods = _axis_counts(members, k, n)
    if D * k**n < 2**62:
        safe = np.where(members, prods, 1)
        nums = np.where(members, D // safe, 0).sum(axis=1)
        return [int(x) for x in nums], D
    out = []
    for row, prow in zip(members, prods):
        vals, counts = np.unique(prow[row], return_counts=True)
        out.append(sum(int(c) * (D // int(p)) for p, c in zip(vals, counts)))
    return out, D


def subset_z(S: CubeSubset) -> Fraction:
    """``Z(S) = sum over sigma in S of prod_v 1/c_S(sigma, v)``."""
    nums, D = _z_numerators(S.membership[None, :], S.k, S.n)
    return Fraction(nums[0], D)


def _thicken(members: np.ndarray, k: int, n: int, v: int) -> np.ndarray:
    B = members.shape[0]
    cube = members.reshape((B,) + (k,) * n)
    ax = 1 + n - v
    line = cube.any(axis=ax, keepdims=True)
    return np.broadcast_to(line, cube.shape).reshape(B, -1)


def cylinder_thicken(S: CubeSubset, v: int) -> CubeSubset:
    """Union of the axis-``v`` lines through every cell of ``S``."""
    _check_axis(S.n, v)
    return CubeSubset(S.k, S.n, _thicken(S.membership[None, :], S.k, S.n, v)[0])


def verify_monotone(S: CubeSubset, v: int) -> bool:
    """``Z(Cyl_v(S)) <= Z(S)``, compared exactly."""
    if not S.membership.any():
        raise InvalidParameter("S must be nonempty")
    return subset_z(cylinder_thicken(S, v)) <= subset_z(S)


def thickening_chain(S: CubeSubset) -> list[Fraction]:
    """``Z(T_0), ..., Z(T_n)`` with ``T_0 = S`` and ``T_v = Cyl_v(T_{v-1})``."""
    out = [subset_z(S)]
    T = S
    for v in range(1, S.n + 1):
        T = cylinder_thicken(T, v)
        out.append(subset_z(T))
    return out


def _batch_report(members: np.ndarray, k: int, n: int) -> dict:
    """Check ``Z >= 1`` and per-axis monotonicity on a batch of nonempty subsets."""
    nums, D = _z_numerators(members, k, n)
    nums_arr = np.array(nums, dtype=object)
    monotone = np.ones(len(nums), dtype=bool)
    chain_ok = np.ones(len(nums), dtype=bool)
    T = members
    prev = nums_arr
    for v in range(1, n + 1):
        thick, _ = _z_numerators(_thicken(members, k, n, v), k, n)
        monotone &= np.array(thick, dtype=object) <= nums_arr
        T = _thicken(T, k, n, v)
        cur = np.array(_z_numerators(T, k, n)[0], dtype=object)
        chain_ok &= cur <= prev
        prev = cur
    chain_ok &= prev == D
    i_min = int(np.argmin(nums_arr)) if len(nums) else -1
    return {
        "nums": nums_arr, "D": D, "i_min": i_min,
        "monotone": bool(monotone.all()), "chain": bool(chain_ok.all()),
    }


def _subsets_from_bits(bits: np.ndarray, cells: int) -> np.ndarray:
    return ((bits[:, None] >> np.arange(cells, dtype=np.int64)) & 1).astype(bool)


def exhaustive_check(k: int, n: int, chunk: int = 1 << 14) -> dict:
    """Evaluate ``Z`` on every nonempty subset of ``[k]^n`` (``k**n <= 16``).

    Subset ``b`` (1-based bitmask) contains cell ``i`` iff bit ``i`` of ``b`` is set.
    """
    cells = k**n
    if cells > EXHAUSTIVE_MAX_CELLS:
        raise CapExceeded(f"k^n = {cells} > {EXHAUSTIVE_MAX_CELLS}; use the random check")
    total = (1 << cells) - 1
    best_num, best_bits, D = None, None, _common_denominator(k, n)
    all_ge, monotone, chain = True, True, True
    for start in range(1, total + 1, chunk):
        bits = np.arange(start, min(start + chunk, total + 1), dtype=np.int64)
        rep = _batch_report(_subsets_from_bits(bits, cells), k, n)
        all_ge &= bool((rep["nums"] >= D).all())
        monotone &= rep["monotone"]
        chain &= rep["chain"]
        num = rep["nums"][rep["i_min"]]
        if best_num is None or num < best_num:
            best_num, best_bits = num, int(bits[rep["i_min"]])
    min_z = Fraction(int(best_num), D)
    argmin = [cell_of(k, n, i) for i in range(cells) if best_bits >> i & 1]
    return {
        "k": k, "n": n, "mode": "exhaustive", "subsets": total,
        "min_Z": min_z, "argmin": argmin, "all_ge_one": all_ge,
        "monotone": monotone, "chain_ok": chain,
    }


def _structured_subsets(k: int, n: int) -> np.ndarray:
    """Subcubes (products of coordinate intervals) and diagonal-type sets."""
    table = np.array([cell_of(k, n, i) for i in range(k**n)])
    rows = []
    for width in range(1, k + 1):
        for lo in range(0, k - width + 1):
            rows.append(np.all((table >= lo) & (table < lo + width), axis=1))
    for shift in range(k):
        rows.append(np.all(table == (table[:, :1] + shift * np.arange(n)) % k, axis=1))
        rows.append((table.sum(axis=1) % k) == shift)
    for v in range(n):
        rows.append(table[:, v] == 0)
    return np.array([r for r in rows if r.any()])


def random_check(k: int, n: int, trials: int, seed: int = 0,
                 densities: Sequence[float] = (0.1, 0.3, 0.5, 0.9), chunk: int = 4096) -> dict:
    """Randomized version of ``exhaustive_check`` for larger cubes.

    Subsets include each cell independently, cycling through ``densities``;
    empty draws are redrawn.  The structured families are always checked too.
    """
    cells = k**n
    if cells > MAX_CELLS:
        raise CapExceeded(f"k^n = {cells} exceeds {MAX_CELLS}")
    rng = np.random.default_rng(seed)
    D = _common_denominator(k, n)
    best_num, best_row = None, None
    all_ge, monotone, chain = True, True, True
    checked = 0

    def consume(members):
        nonlocal best_num, best_row, all_ge, monotone, chain, checked
        rep = _batch_report(members, k, n)
        all_ge &= bool((rep["nums"] >= D).all())
        monotone &= rep["monotone"]
        chain &= rep["chain"]
        checked += len(members)
        num = rep["nums"][rep["i_min"]]
        if best_num is None or num < best_num:
            best_num, best_row = num, members[rep["i_min"]].copy()

    consume(_structured_subsets(k, n))
    dens = np.asarray(densities, dtype=float)
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        p = dens[(done + np.arange(size)) % len(dens)]
        members = rng.random((size, cells)) < p[:, None]
        empty = ~members.any(axis=1)
        while empty.any():
            members[empty] = rng.random((int(empty.sum()), cells)) < p[empty][:, None]
            empty = ~members.any(axis=1)
        consume(members)
        done += size
    return {
        "k": k, "n": n, "mode": "random", "subsets": checked, "seed": seed,
        "min_Z": Fraction(int(best_num), D),
        "argmin": [cell_of(k, n, i) for i in np.flatnonzero(best_row)],
        "all_ge_one": all_ge, "monotone": monotone, "chain_ok": chain,
    }


def boolean_cube_sum(S: CubeSubset) -> Fraction:
    """``sum over sigma in S of 2^-|boundary(sigma)|`` on the Boolean cube."""
    if S.k != 2:
        raise InvalidParameter("boolean_cube_sum needs k = 2")
    total = Fraction(0)
    for sigma in S.cells():
        nbrs = 0
        for v in range(S.n):
            flipped = list(sigma)
            flipped[v] ^= 1
            nbrs += flipped in S
        total += Fraction(1, 2**nbrs)
    return total
