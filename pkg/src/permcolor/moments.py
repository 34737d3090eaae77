"""Closed-form moment functions and the numeric threshold bounds.

Everything exponential in ``n`` is kept in natural-log space.  The overlap
``zeta`` of two colorings is the fraction of vertices where they agree; the
pair rate ``phi(zeta)`` is ``(1/n) log`` of the overlap-``zeta`` term of
``E[X^2] / E[X]^2`` and ``psi`` is its polynomial upper envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.special import entr, gammaln, logsumexp

from permcolor.errors import InvalidParameter, NoSignChange

__all__ = [
    "MomentParams",
    "ScanReport",
    "BoundsRow",
    "entropy",
    "pair_prob",
    "phi",
    "ell",
    "psi",
    "psi_pp_center",
    "psi_pppp",
    "scan_second_moment",
    "smallest_stable_k",
    "first_moment_bound",
    "asymptotic_lower",
    "asymptotic_upper",
    "exact_Q",
    "poissonized_inverse_mean",
    "poissonized_inverse_mean_sum",
    "f_rate",
    "improved_upper_bound",
    "expected_X_log",
    "expected_X2_log",
    "bounds_row",
    "bounds_table",
]


@dataclass(frozen=True)
class MomentParams:
    k: int
    d: float

    def __post_init__(self):
        if self.k < 3:
            raise InvalidParameter(f"k must be >= 3, got {self.k}")
        if not self.d >= 0:
            raise InvalidParameter(f"d must be >= 0, got {self.d}")


def _check_zeta(zeta):
    z = np.asarray(zeta, dtype=float)
    if np.any(~((z >= 0) & (z <= 1))):
        raise InvalidParameter("zeta must lie in [0, 1]")
    return z


def _out(z, value):
    return float(value) if np.ndim(z) == 0 else value


def entropy(zeta):
    """Binary entropy in nats with ``h(0) = h(1) = 0``."""
    z = _check_zeta(zeta)
    return _out(z, entr(z) + entr(1.0 - z))


def pair_prob(zeta, k: int):
    """Probability that a random decorated edge satisfies two colorings with overlap ``zeta``."""
    if k < 2:
        raise InvalidParameter(f"k must be >= 2, got {k}")
    z = _check_zeta(zeta)
    both = 1 - 1 / k
    one = 1 - 2 / k
    neither = 1 - 2 / k + 1 / (k * (k - 1))
    return _out(z, z * z * both + 2 * z * (1 - z) * one + (1 - z) ** 2 * neither)


def phi(zeta, params: MomentParams):
    k, d = params.k, params.d
    z = _check_zeta(zeta)
    ratio = np.asarray(pair_prob(z, k)) / (1 - 1 / k) ** 2
    val = entr(z) + entr(1 - z) + (1 - z) * math.log(k - 1) - math.log(k) + d / 2 * np.log(ratio)
    return _out(z, val)


def ell(x, k: int):
    """Cubic-Taylor upper bound on ``log(1 + x)``, valid for ``-1 < x <= 1/(k-1)``."""
    return x - x * x / 2 * (1 - 2 / (3 * (k - 1)))


def psi(zeta, params: MomentParams):
    """Upper envelope of ``phi``; tight at ``zeta = 1/k``."""
    k, d = params.k, params.d
    z = _check_zeta(zeta)
    x = (k * z - 1) ** 2 / (k - 1) ** 3
    val = entr(z) + entr(1 - z) + (1 - z) * math.log(k - 1) - math.log(k) + d / 2 * ell(x, k)
    return _out(z, val)


def psi_pp_center(params: MomentParams) -> float:
    k, d = params.k, params.d
    return k * k / (k - 1) ** 3 * (d - (k - 1) ** 2)


def psi_pppp(zeta, params: MomentParams):
    """Fourth derivative of ``psi`` on the open unit interval."""
    k, d = params.k, params.d
    z = np.asarray(zeta, dtype=float)
    if np.any(~((z > 0) & (z < 1))):
        raise InvalidParameter("zeta must lie in (0, 1)")
    val = -2 * (1 / z**3 + 1 / (1 - z) ** 3 + d * k**4 * (3 * k - 5) / (k - 1) ** 7)
    return _out(z, val)


@dataclass
class ScanReport:
    k: int
    d: float
    grid_resolution: int
    zeta_max: float
    max_value: float
    local_maxima: list[tuple[float, float]] = field(default_factory=list)
    curvature_at_center: float = float("nan")
    condition_holds: bool = False

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "grid_resolution": self.grid_resolution,
            "zeta_max": self.zeta_max,
            "max_value": self.max_value,
            "local_maxima": [list(p) for p in self.local_maxima],
            "curvature_at_center": self.curvature_at_center,
            "condition_holds": self.condition_holds,
        }


def scan_second_moment(
    params: MomentParams,
    resolution: int = 100_000,
    refine_tolerance: float = 1e-10,
    value_tolerance: float = 1e-9,
    margin: float = 1e-6,
    fd_step: float = 1e-4,
) -> ScanReport:
    """Locate the local maxima of ``phi`` on [0, 1] and test the second-moment condition.

    ``phi`` is evaluated on ``resolution + 1`` equally spaced points; every
    discrete local maximum is refined by golden-section search inside its
    grid bracket.  The maximum nearest ``1/k`` is pinned to ``1/k`` itself.
    The condition holds when that maximum is global with ``|phi| <
    value_tolerance``, every other local maximum is below ``-margin`` and the
    central-difference second derivative at ``1/k`` is negative.
    """
    if resolution < 1000:
        raise InvalidParameter("resolution must be at least 1000")
    k = params.k
    center = 1.0 / k

    def f(z):
        return phi(min(max(z, 0.0), 1.0), params)

    grid = np.linspace(0.0, 1.0, resolution + 1)
    vals = phi(grid, params)
    step = 1.0 / resolution

    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    candidates = [int(i) for i in interior]
    if vals[0] > vals[1]:
        candidates.insert(0, 0)
    if vals[-1] > vals[-2]:
        candidates.append(resolution)

    maxima: dict[float, float] = {}
    for i in candidates:
        if abs(grid[i] - center) <= 2 * step:
            maxima[center] = f(center)
            continue
        if i in (0, resolution):
            maxima[float(grid[i])] = float(vals[i])
            continue
        lo, mid, hi = grid[i - 1], grid[i], grid[i + 1]
        if vals[i] > vals[i - 1] and vals[i] > vals[i + 1]:
            res = minimize_scalar(
                lambda z: -f(z), bracket=(lo, mid, hi), method="golden",
                options={"xtol": refine_tolerance},
            )
            z_ref = float(min(max(res.x, lo), hi))
        else:
            z_ref = float(mid)  # plateau on the grid
        maxima[z_ref] = max(f(z_ref), float(vals[i]))

    local = sorted(maxima.items())
    z_max, v_max = max(local, key=lambda p: p[1])
    center_val = f(center)
    curvature = (f(center + fd_step) - 2 * center_val + f(center - fd_step)) / fd_step**2

    at_center = abs(z_max - center) <= max(2 * step, refine_tolerance)
    others_ok = all(v < -margin for z, v in local if abs(z - center) > 2 * step)
    holds = bool(at_center and abs(v_max) < value_tolerance and others_ok and curvature < 0)
    return ScanReport(
        k=k, d=params.d, grid_resolution=resolution, zeta_max=float(z_max),
        max_value=float(v_max), local_maxima=[(float(z), float(v)) for z, v in local],
        curvature_at_center=float(curvature), condition_holds=holds,
    )


def smallest_stable_k(eps: float, k_min: int = 3, k_max: int = 200, resolution: int = 100_000) -> int | None:
    """Smallest ``k0`` such that the condition holds for every ``k0 <= k <= k_max``
    at ``d = 2k ln k - ln k - 2 - eps``; ``None`` if it fails at ``k_max``."""
    k0 = None
    for k in range(k_max, k_min - 1, -1):
        d = asymptotic_lower(k) - eps
        if d < 0 or not scan_second_moment(MomentParams(k, d), resolution).condition_holds:
            break
        k0 = k
    return k0


def first_moment_bound(k: int) -> float:
    """Degree above which ``E[X]`` is exponentially small."""
    if k < 2:
        raise InvalidParameter(f"k must be >= 2, got {k}")
    return 2 * math.log(k) / -math.log1p(-1 / k)


def asymptotic_lower(k: int) -> float:
    return 2 * k * math.log(k) - math.log(k) - 2


def asymptotic_upper(k: int) -> float:
    return 2 * k * math.log(k) - math.log(k) - 1


def exact_Q(b: int, k: int, c: int) -> Fraction:
    """P[exactly ``c - 1`` of ``k - 1`` bins stay empty after ``b`` uniform balls]."""
    if k < 2 or b < 0 or not 1 <= c <= k:
        raise InvalidParameter(f"need k >= 2, b >= 0, 1 <= c <= k; got b={b}, k={k}, c={c}")
    bins = k - 1
    empty = c - 1
    occupied_pool = bins - empty
    total = Fraction(0)
    for j in range(occupied_pool + 1):
        term = Fraction(occupied_pool - j, bins) ** b
        total += (-1) ** j * comb(occupied_pool, j) * term
    return comb(bins, empty) * total


def poissonized_inverse_mean(k: int, r: float) -> float:
    """``E[1/c]`` when each of ``k - 1`` bins is empty independently with probability ``r``."""
    if not 0 < r <= 1:
        raise InvalidParameter(f"r must lie in (0, 1], got {r}")
    return -math.expm1(k * math.log1p(-r)) / (k * r) if r < 1 else 1.0 / k


def poissonized_inverse_mean_sum(k: int, r: float) -> float:
    """The same expectation summed term by term over the binomial."""
    return math.fsum(
        comb(k - 1, c - 1) * r ** (c - 1) * (1 - r) ** (k - c) / c for c in range(1, k + 1)
    )


def f_rate(d: float, k: int) -> float:
    """Exponential growth rate of ``E[Z]`` per vertex at average degree ``d``."""
    if k < 2:
        raise InvalidParameter(f"k must be >= 2, got {k}")
    if not d >= 0:
        raise InvalidParameter(f"d must be >= 0, got {d}")
    if d == 0:
        return 0.0
    t = d / (k - 1)
    log_all_hit = k * math.log1p(-math.exp(-t))  # log (1 - e^{-t})^k
    return d / 2 * math.log1p(-1 / k) + t + math.log(-math.expm1(log_all_hit))


def improved_upper_bound(k: int, tolerance: float = 1e-9) -> float:
    """Root of ``f_rate`` bracketed in ``[k ln k, 3 k ln k]``."""
    if k < 3:
        raise InvalidParameter(f"k must be >= 3, got {k}")
    lo, hi = k * math.log(k), 3 * k * math.log(k)
    for _ in range(30):
        if f_rate(lo, k) > 0:
            break
        lo /= 2
    for _ in range(30):
        if f_rate(hi, k) < 0:
            break
        hi *= 2
    if not (f_rate(lo, k) > 0 > f_rate(hi, k)):
        raise NoSignChange(f"f_rate does not change sign on [{lo}, {hi}] for k={k}")
    return float(bisect(f_rate, lo, hi, args=(k,), xtol=tolerance))


def expected_X_log(n: int, m: int, k: int) -> float:
    if n < 1 or m < 0 or k < 2:
        raise InvalidParameter(f"need n >= 1, m >= 0, k >= 2; got n={n}, m={m}, k={k}")
    return n * math.log(k) + m * math.log1p(-1 / k)


def expected_X2_log(n: int, m: int, k: int) -> float:
    """``log E[X^2]``, summing over the number ``z`` of agreeing vertices."""
    if n < 1 or m < 0 or k < 2:
        raise InvalidParameter(f"need n >= 1, m >= 0, k >= 2; got n={n}, m={m}, k={k}")
    z = np.arange(n + 1)
    log_binom = gammaln(n + 1) - gammaln(z + 1) - gammaln(n - z + 1)
    p = np.asarray(pair_prob(z / n, k))
    terms = log_binom + (n - z) * math.log(k - 1) + (m * np.log(p) if m else 0.0)
    return float(n * math.log(k) + logsumexp(terms))


@dataclass(frozen=True)
class BoundsRow:
    k: int
    fm_upper: float
    improved_upper: float
    asym_lower: float
    asym_upper: float

    def to_dict(self) -> dict:
        return {
            "k": self.k, "fm_upper": self.fm_upper, "improved_upper": self.improved_upper,
            "asym_lower": self.asym_lower, "asym_upper": self.asym_upper,
        }


def bounds_row(k: int, tolerance: float = 1e-9) -> BoundsRow:
    return BoundsRow(k, first_moment_bound(k), improved_upper_bound(k, tolerance),
                     asymptotic_lower(k), asymptotic_upper(k))


def bounds_table(k_min: int, k_max: int, tolerance: float = 1e-9) -> list[BoundsRow]:
    return [bounds_row(k, tolerance) for k in range(k_min, k_max + 1)]
