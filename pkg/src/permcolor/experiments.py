"""Seeded Monte Carlo experiments over random decorated graphs.

Trial ``t`` of an experiment with master seed ``s`` draws from its own PCG64
stream seeded by ``SeedSequence([s, t])``, so results do not depend on how
trials are scheduled across worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from permcolor.errors import BudgetExhausted, InvalidParameter
from permcolor.graph_model import ModelParams, sample_graph
from permcolor.moments import exact_Q, expected_X2_log, expected_X_log, first_moment_bound
from permcolor.solver import decide, z_weight_float

log = logging.getLogger(__name__)

__all__ = [
    "TrialSpec",
    "Estimate",
    "CurvePoint",
    "ThresholdResult",
    "trial_rng",
    "wilson_interval",
    "mc_colorable",
    "mc_moments",
    "colorability_curve",
    "curve_is_monotone",
    "threshold_bisect",
    "check_available_colors",
    "check_edge_indep",
    "check_degree_model",
]


@dataclass(frozen=True)
class TrialSpec:
    params: ModelParams
    trials: int
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameter("trials must be >= 1")


@dataclass
class Estimate:
    mean: float
    stderr: float
    trials: int
    extra: float | None = None
    ci_lo: float | None = None
    ci_hi: float | None = None
    excluded: int = 0


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial)]))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _map_trials(fn: Callable, args: tuple, trials: int, workers: int) -> list:
    """Apply ``fn(*args, t)`` for every trial index, results in trial order."""
    if workers <= 1 or trials < 2 * workers:
        return [fn(*args, t) for t in range(trials)]
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_range, fn, args, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]
        out = []
        for fut in futures:
            out.extend(fut.result())
    return out


def _run_range(fn, args, start, stop):
    return [fn(*args, t) for t in range(start, stop)]


def _colorable_trial(params: ModelParams, seed: int, budget: int | None, t: int) -> int:
    """1 colorable, 0 uncolorable, -1 budget exhausted."""
    g = sample_graph(params, trial_rng(seed, t))
    try:
        return int(decide(g, budget).colorable)
    except BudgetExhausted:
        return -1


def _proportion(outcomes: Sequence[int]) -> Estimate:
    arr = np.asarray(outcomes)
    excluded = int((arr < 0).sum())
    used = arr[arr >= 0]
    n_used = len(used)
    hits = int(used.sum())
    p = hits / n_used if n_used else float("nan")
    se = math.sqrt(p * (1 - p) / n_used) if n_used else float("nan")
    lo, hi = wilson_interval(hits, n_used)
    return Estimate(p, se, n_used, ci_lo=lo, ci_hi=hi, excluded=excluded)


def mc_colorable(spec: TrialSpec, budget: int | None = None, workers: int = 1) -> Estimate:
    """Fraction of sampled instances with a permuted coloring (Wilson 95% interval).

    Trials that exhaust ``budget`` are excluded from the denominator and
    counted in ``excluded``.
    """
    outcomes = _map_trials(_colorable_trial, (spec.params, spec.master_seed, budget), spec.trials, workers)
    est = _proportion(outcomes)
    if est.excluded:
        log.warning("%d of %d trials exhausted the node budget", est.excluded, spec.trials)
    return est


def _moment_trial(params: ModelParams, seed: int, t: int) -> tuple[int, float, bool]:
    g = sample_graph(params, trial_rng(seed, t))
    x, z = z_weight_float(g)
    return x, z, any(e.u == e.v for e in g.edges)


def _mean_estimate(values: np.ndarray, reference: float | None = None) -> Estimate:
    n = len(values)
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(float(values.mean()), se, n, extra=reference)


def mc_moments(spec: TrialSpec, workers: int = 1) -> dict:
    """Sample means of ``X``, ``X^2`` and ``Z`` with exact references for the first two.

    Also counts instances violating ``X >= 1 <=> Z >= 1``, separately for
    loop-free instances (where it always holds) and instances with a
    self-loop (where the loop's fixed points are not counted as forbidden and
    ``Z`` can drop below 1).
    """
    p = spec.params
    rows = _map_trials(_moment_trial, (p, spec.master_seed), spec.trials, workers)
    x = np.array([r[0] for r in rows], dtype=float)
    z = np.array([r[1] for r in rows], dtype=float)
    loops = np.array([r[2] for r in rows], dtype=bool)
    bad = (x >= 1) != (z >= 1 - 1e-9)
    return {
        "X": _mean_estimate(x, math.exp(expected_X_log(p.n, p.m, p.k))),
        "X2": _mean_estimate(x * x, math.exp(expected_X2_log(p.n, p.m, p.k))),
        "Z": _mean_estimate(z),
        "violations_loop_free": int(bad[~loops].sum()),
        "violations_with_loops": int(bad[loops].sum()),
    }


@dataclass
class CurvePoint:
    d: float
    m: int
    trials: int
    colorable: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    excluded: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _curve_point(n: int, m: int, k: int, trials: int, seed: int, budget, workers) -> CurvePoint:
    # the point's master seed depends on m only, so repeated m reuses the same trials
    point_seed = int(np.random.SeedSequence([int(seed), n, m, k]).generate_state(1, np.uint64)[0])
    est = mc_colorable(TrialSpec(ModelParams(n, m, k), trials, point_seed), budget, workers)
    hits = int(round(est.mean * est.trials)) if est.trials else 0
    return CurvePoint(2 * m / n, m, est.trials, hits, est.mean, est.ci_lo, est.ci_hi, est.excluded)


def colorability_curve(n: int, k: int, ds: Sequence[float], trials: int, seed: int = 0,
                       budget: int | None = None, workers: int = 1) -> list[CurvePoint]:
    """Colorability estimates at average degrees ``ds`` (``m = round half up(d n / 2)``)."""
    out = []
    for d in ds:
        m = ModelParams.edges_for_degree(n, d)
        out.append(_curve_point(n, m, k, trials, seed, budget, workers))
    return out


def curve_is_monotone(curve: Sequence[CurvePoint]) -> bool:
    """No pair of points shows a significant increase with ``d`` (Wilson intervals disjoint)."""
    pts = sorted(curve, key=lambda p: p.m)
    for i, a in enumerate(pts):
        for b in pts[i + 1:]:
            if b.m > a.m and b.ci_lo > a.ci_hi:
                return False
    return True


@dataclass
class ThresholdResult:
    n: int
    k: int
    target: float
    d_hat: float
    bracket: tuple[float, float]
    curve: list[CurvePoint] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def threshold_bisect(n: int, k: int, trials_per_point: int, target: float = 0.5, seed: int = 0,
                     d_lo: float = 0.0, d_hi: float | None = None, budget: int | None = None,
                     workers: int = 1, max_expansions: int = 8) -> ThresholdResult:
    """Bisect on ``d`` for the degree where colorability crosses ``target``.

    Moves the bracket while the midpoint's Wilson interval excludes ``target``;
    stops when it does not, or when the bracket is narrower than ``2/n``
    (one edge).
    """
    if not 0 < target < 1:
        raise InvalidParameter("target must lie in (0, 1)")
    cache: dict[int, CurvePoint] = {}

    def point(d: float) -> CurvePoint:
        m = ModelParams.edges_for_degree(n, d)
        if m not in cache:
            cache[m] = _curve_point(n, m, k, trials_per_point, seed, budget, workers)
        return cache[m]

    warnings: list[str] = []
    lo = d_lo
    hi = 2 * first_moment_bound(k) if d_hi is None else d_hi
    if point(lo).ci_hi < target:
        warnings.append(f"lower end d={lo} already below target")
    for _ in range(max_expansions):
        if point(hi).ci_lo <= target:
            break
        lo, hi = hi, hi * 1.5
    d_hat = None
    while hi - lo > 2.0 / n:
        mid = (lo + hi) / 2
        pt = point(mid)
        if pt.ci_lo > target:
            lo = mid
        elif pt.ci_hi < target:
            hi = mid
        else:
            d_hat = mid
            break
    if d_hat is None:
        d_hat = (lo + hi) / 2
    curve = sorted(cache.values(), key=lambda p: p.m)
    if not curve_is_monotone(curve):
        msg = "colorability curve increases with d beyond Wilson-interval noise"
        log.warning(msg)
        warnings.append(msg)
    return ThresholdResult(n, k, target, d_hat, (lo, hi), curve, warnings)


def _random_perms(rng: np.random.Generator, shape: tuple[int, ...], k: int) -> np.ndarray:
    """Uniform permutations of ``0..k-1`` along the last axis."""
    return np.argsort(rng.random(shape + (k,)), axis=-1)


def _invert_perms(perms: np.ndarray) -> np.ndarray:
    return np.argsort(perms, axis=-1)


def check_available_colors(k: int, deg: int, trials: int, seed: int = 0,
                           center_color: int | None = None) -> dict:
    """Histogram of available colors at the center of a random decorated star.

    Each trial decorates a star with ``deg`` leaves (each edge oriented at
    random) by uniform permutations, draws a uniform proper coloring (center
    color uniform or fixed to ``center_color``, then each leaf uniform among
    its ``k - 1`` allowed colors) and records ``c`` at the center.  Returns
    the total-variation distance to the exact balls-in-bins law.
    """
    if k < 2 or deg < 0 or trials < 1:
        raise InvalidParameter("need k >= 2, deg >= 0, trials >= 1")
    rng = np.random.default_rng(seed)
    ref = np.array([float(exact_Q(deg, k, c)) for c in range(1, k + 1)])
    counts = np.zeros(k, dtype=np.int64)
    chunk = 200_000
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        if center_color is None:
            s = rng.integers(k, size=size)
        else:
            s = np.full(size, int(center_color))
        if deg == 0:
            c = np.full(size, k)
        else:
            perms = _random_perms(rng, (size, deg), k)
            # map from leaf color to the color it forbids at the center
            reverse = rng.random((size, deg)) < 0.5
            fwd = np.where(reverse[..., None], _invert_perms(perms), perms)
            banned = np.take_along_axis(_invert_perms(fwd), np.broadcast_to(s[:, None, None], (size, deg, 1)), -1)[..., 0]
            r = rng.integers(k - 1, size=(size, deg))
            leaf = r + (r >= banned)
            forb = np.take_along_axis(fwd, leaf[..., None], -1)[..., 0]
            mask = np.zeros(size, dtype=np.int64)
            for j in range(deg):
                mask |= 1 << forb[:, j]
            c = k - np.array([bin(x).count("1") for x in range(1 << k)])[mask]
        counts += np.bincount(c - 1, minlength=k)
        done += size
    hist = counts / trials
    return {"k": k, "deg": deg, "trials": trials, "histogram": hist.tolist(),
            "reference": ref.tolist(), "tv": float(0.5 * np.abs(hist - ref).sum())}


def _chisquare_uniform(counts: np.ndarray) -> tuple[float, float]:
    if counts.size <= 1:
        return 0.0, 1.0
    res = stats.chisquare(counts.ravel())
    return float(res.statistic), float(res.pvalue)


def check_edge_indep(k: int, trials: int, seed: int = 0, self_loop: bool = False) -> dict:
    """Joint law of ``(pi(s(u)), pi^-1(s(v)))`` on a single edge conditioned on properness.

    Colors and permutation are drawn uniformly and improper draws rejected.
    Each coordinate is recorded as its rank among the ``k - 1`` colors it
    may take, giving a ``(k-1) x (k-1)`` table tested against uniformity.
    With ``self_loop`` the edge is ``(v, v)`` and both coordinates live in
    ``[k] - s(v)``.
    """
    if k < 2 or trials < 1:
        raise InvalidParameter("need k >= 2 and trials >= 1")
    rng = np.random.default_rng(seed)
    table = np.zeros((k - 1, k - 1), dtype=np.int64)
    got = 0
    while got < trials:
        size = int((trials - got) * k / (k - 1)) + 64
        su = rng.integers(k, size=size)
        sv = su if self_loop else rng.integers(k, size=size)
        perms = _random_perms(rng, (size,), k)
        inv = _invert_perms(perms)
        q = perms[np.arange(size), su]
        q2 = inv[np.arange(size), sv]
        ok = q != sv
        q, q2, su, sv = q[ok], q2[ok], su[ok], sv[ok]
        take = min(len(q), trials - got)
        q, q2, su, sv = q[:take], q2[:take], su[:take], sv[:take]
        rank_q = q - (q > sv)
        rank_q2 = q2 - (q2 > su)
        np.add.at(table, (rank_q, rank_q2), 1)
        got += take
    stat, pval = _chisquare_uniform(table)
    return {"k": k, "trials": trials, "self_loop": self_loop, "table": table.tolist(),
            "statistic": stat, "p_value": pval}


def check_degree_model(params: ModelParams, trials: int, seed: int = 0) -> dict:
    """Goodness of fit of vertex 0's degree against Binomial(2m, 1/n).

    Endpoints are drawn exactly as the model does (``2m`` i.i.d. uniform
    vertices); every trial's degree sum is checked to equal ``2m``.  Bins
    with expected count below 5 are pooled into their neighbors.
    """
    n, m = params.n, params.m
    rng = np.random.default_rng(seed)
    counts = np.zeros(2 * m + 1, dtype=np.int64)
    sums_ok = True
    chunk = 100_000
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        ends = rng.integers(n, size=(size, 2 * m))
        degs = np.zeros((size, n), dtype=np.int64)
        rows = np.repeat(np.arange(size), 2 * m)
        np.add.at(degs, (rows, ends.ravel()), 1)
        sums_ok &= bool((degs.sum(axis=1) == 2 * m).all())
        counts += np.bincount(degs[:, 0], minlength=2 * m + 1)
        done += size
    expected = stats.binom.pmf(np.arange(2 * m + 1), 2 * m, 1 / n) * trials
    obs_bins, exp_bins = _pool_bins(counts, expected)
    if len(obs_bins) <= 1:
        stat, pval = 0.0, 1.0
    else:
        exp_bins = exp_bins * obs_bins.sum() / exp_bins.sum()
        res = stats.chisquare(obs_bins, exp_bins)
        stat, pval = float(res.statistic), float(res.pvalue)
    return {"n": n, "m": m, "trials": trials, "observed": counts.tolist(),
            "statistic": stat, "p_value": pval, "bins": len(obs_bins), "sums_ok": sums_ok}


def _pool_bins(obs: np.ndarray, exp: np.ndarray, min_expected: float = 5.0):
    """Merge adjacent bins left to right until each expected count reaches ``min_expected``."""
    o_out, e_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs, exp):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            o_out.append(o_acc)
            e_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if e_out:
            o_out[-1] += o_acc
            e_out[-1] += e_acc
        else:
            o_out.append(o_acc)
            e_out.append(e_acc)
    return np.array(o_out), np.array(e_out)
