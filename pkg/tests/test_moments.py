import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_Q, brute_second_moment
from permcolor.errors import InvalidParameter
from permcolor.moments import (
    MomentParams,
    asymptotic_lower,
    asymptotic_upper,
    bounds_row,
    ell,
    entropy,
    exact_Q,
    expected_X2_log,
    expected_X_log,
    f_rate,
    first_moment_bound,
    improved_upper_bound,
    pair_prob,
    phi,
    poissonized_inverse_mean,
    poissonized_inverse_mean_sum,
    psi,
    psi_pp_center,
    psi_pppp,
    scan_second_moment,
)

# 40-digit mpmath evaluations, frozen
H_QUARTER = 0.5623351446188083502880303152244588576654
PHI_ONE_K3_D4 = -0.2876820724517809274392190059938274315035
PHI_ZERO_K3_D4 = -0.169899036795397472900424896523305726435
PHI_K5_D7_AT_03 = -0.01452231614048284784218269915190958422139
FM_UPPER_3 = 5.41902258270290955395238052434802828123
ROOTS = {3: 5.010846410552879386904885271343217245622,
         4: 9.140362430287788716696994038958805793866,
         10: 42.99179976824719024829113540087706489452,
         100: 915.4724800727440792602554280695097398782}


def test_params_validation():
    with pytest.raises(InvalidParameter):
        MomentParams(2, 1.0)
    with pytest.raises(InvalidParameter):
        MomentParams(3, -0.1)


def test_entropy():
    assert entropy(0.0) == 0.0 and entropy(1.0) == 0.0
    assert entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy(0.25) == pytest.approx(H_QUARTER, abs=1e-15)
    with pytest.raises(InvalidParameter):
        entropy(1.5)
    assert np.allclose(entropy(np.array([0.0, 0.5])), [0.0, math.log(2)])


def test_pair_prob():
    for k in (3, 5, 11):
        assert pair_prob(1 / k, k) == pytest.approx((1 - 1 / k) ** 2, abs=1e-15)
        assert pair_prob(1.0, k) == pytest.approx(1 - 1 / k, abs=1e-15)
    assert pair_prob(0.0, 3) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(InvalidParameter):
        pair_prob(-0.1, 3)


def _pair_prob_enum(k, z):
    # sigma uniform on both endpoints; tau copies sigma at each endpoint with
    # probability z, else takes one of the other k - 1 colors
    perms = list(itertools.permutations(range(k)))
    total = Fraction(0)
    for su, sv, tu, tv in itertools.product(range(k), repeat=4):
        w = Fraction(1, k * k)
        for s, t in ((su, tu), (sv, tv)):
            w *= z if s == t else (1 - z) / (k - 1)
        ok = sum(1 for p in perms if sv != p[su] and tv != p[tu])
        total += w * Fraction(ok, len(perms))
    return total


def test_pair_prob_matches_enumeration():
    for k in (3, 4):
        for z in (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1)):
            assert pair_prob(float(z), k) == pytest.approx(float(_pair_prob_enum(k, z)), abs=1e-14)


def test_phi_values():
    p = MomentParams(3, 4.0)
    assert phi(1.0, p) == pytest.approx(PHI_ONE_K3_D4, abs=1e-12)
    assert phi(0.0, p) == pytest.approx(PHI_ZERO_K3_D4, abs=1e-12)
    assert phi(0.3, MomentParams(5, 7.0)) == pytest.approx(PHI_K5_D7_AT_03, abs=1e-12)


@pytest.mark.parametrize("k", [3, 4, 7, 20, 100])
@pytest.mark.parametrize("d", [0.0, 1.0, 10.0])
def test_phi_zero_at_center(k, d):
    assert abs(phi(1 / k, MomentParams(k, d))) < 1e-12


def test_phi_no_edges_max_at_center():
    p = MomentParams(6, 0.0)
    z = np.linspace(0, 1, 10_001)
    v = phi(z, p)
    assert v.max() <= 1e-12
    assert abs(z[np.argmax(v)] - 1 / 6) < 1e-3


def test_ell():
    assert ell(0.0, 5) == 0.0
    assert ell(0.1, 4) == pytest.approx(0.1 - 0.005 * 7 / 9, abs=1e-15)
    assert ell(1 / 9, 10) - math.log(10 / 9) > 0
    for k in (3, 5, 20):
        x = np.linspace(-0.999, 1 / (k - 1), 5001)
        assert np.all(ell(x, k) >= np.log1p(x) - 1e-15)


def test_psi_examples():
    for k in (3, 8):
        assert abs(psi(1 / k, MomentParams(k, 5.0))) < 1e-12
    assert psi_pp_center(MomentParams(3, 4.0)) == 0
    assert psi_pp_center(MomentParams(3, 5.0)) == pytest.approx(1.125, abs=1e-14)


def test_phi_below_psi():
    for k in range(3, 41):
        z = np.linspace(1e-6, 1 - 1e-6, 4001)
        for d in range(1, int(first_moment_bound(k)) + 1):
            p = MomentParams(k, float(d))
            gap = psi(z, p) - phi(z, p)
            assert gap.min() >= -1e-12
            # the gap vanishes to third order at 1/k, so test strictness away from it
            far = np.abs(z - 1 / k) > 0.05
            assert gap[far].min() > 1e-12


def test_psi_fourth_derivative_closed_form():
    z, k, d = sp.symbols("z k d", positive=True)
    h = -z * sp.log(z) - (1 - z) * sp.log(1 - z)
    # psi replaces ln(p/p0) by ell(p/p0 - 1); p is quadratic in z
    p = z**2 * (1 - 1 / k) + 2 * z * (1 - z) * (1 - 2 / k) + (1 - z) ** 2 * (1 - 2 / k + 1 / (k * (k - 1)))
    x = p / (1 - 1 / k) ** 2 - 1
    ellx = x - x**2 / 2 * (1 - sp.Rational(2, 3) / (k - 1))
    psi_sym = h + (1 - z) * sp.log(k - 1) - sp.log(k) + d / 2 * ellx
    fourth = sp.diff(psi_sym, z, 4)
    closed = -2 * (1 / z**3 + 1 / (1 - z) ** 3 + d * k**4 * (3 * k - 5) / (k - 1) ** 7)
    for kv, dv, zv in [(3, 4.0, 0.2), (7, 30.0, 0.6), (20, 100.0, 0.05)]:
        sym = float(fourth.subs({k: kv, d: dv, z: zv}))
        assert sym == pytest.approx(float(closed.subs({k: kv, d: dv, z: zv})), rel=1e-10)
        assert psi_pppp(zv, MomentParams(kv, dv)) == pytest.approx(sym, rel=1e-10)
        # psi itself agrees with the symbolic expression
        assert psi(zv, MomentParams(kv, dv)) == pytest.approx(float(psi_sym.subs({k: kv, d: dv, z: zv})), abs=1e-12)


def test_psi_fourth_derivative_negative():
    z = np.linspace(1e-4, 1 - 1e-4, 2001)
    for k in (3, 4, 10, 50):
        for d in (0.0, 5.0, 200.0):
            assert np.all(psi_pppp(z, MomentParams(k, d)) < 0)


@pytest.mark.parametrize("k,d", [(3, 2.0), (3, 6.0), (10, 40.0), (20, 100.0)])
def test_psi_curvature_fd(k, d):
    p = MomentParams(k, d)
    h = 1e-4
    c = 1 / k
    fd = (psi(c + h, p) - 2 * psi(c, p) + psi(c - h, p)) / h**2
    assert fd == pytest.approx(psi_pp_center(p), rel=1e-6)


def test_scan_examples():
    k = 20
    good = scan_second_moment(MomentParams(k, asymptotic_lower(k) - 0.1))
    assert good.condition_holds
    assert abs(good.zeta_max - 0.05) < 1e-5
    others = [v for z, v in good.local_maxima if abs(z - 0.05) > 1e-4]
    assert others and max(others) < -1e-6
    bad = scan_second_moment(MomentParams(k, first_moment_bound(k) + 5))
    assert not bad.condition_holds
    assert bad.zeta_max > 0.9
    free = scan_second_moment(MomentParams(5, 0.0), resolution=2000)
    assert free.condition_holds and free.zeta_max == pytest.approx(0.2)


def test_scan_resolution_validation():
    with pytest.raises(InvalidParameter):
        scan_second_moment(MomentParams(3, 1.0), resolution=10)


@pytest.mark.parametrize("k,d", [(20, asymptotic_lower(20) - 0.1), (20, first_moment_bound(20) + 5),
                                 (3, 2.0), (5, 12.0), (10, 40.0)])
def test_scan_resolution_doubling(k, d):
    a = scan_second_moment(MomentParams(k, d), resolution=50_000)
    b = scan_second_moment(MomentParams(k, d), resolution=100_000)
    assert a.condition_holds == b.condition_holds
    assert a.zeta_max == pytest.approx(b.zeta_max, abs=1e-6)


def test_scan_report_sorted():
    r = scan_second_moment(MomentParams(20, 110.0), resolution=20_000)
    zs = [z for z, _ in r.local_maxima]
    assert zs == sorted(zs)
    assert set(r.to_dict()) >= {"zeta_max", "condition_holds", "local_maxima", "curvature_at_center"}


def test_first_moment_bound():
    assert first_moment_bound(3) == pytest.approx(FM_UPPER_3, abs=1e-12)
    assert first_moment_bound(2) == pytest.approx(2.0, abs=1e-14)
    k = 1000
    gap = (2 * k * math.log(k) - math.log(k)) - first_moment_bound(k)
    assert 0 < gap < 1


def test_exact_Q_examples():
    for k in (2, 3, 6):
        assert exact_Q(0, k, k) == 1
        assert all(exact_Q(0, k, c) == 0 for c in range(1, k))
        assert exact_Q(1, k, k - 1) == 1
    assert exact_Q(2, 3, 2) == Fraction(1, 2)
    assert exact_Q(2, 3, 1) == Fraction(1, 2)
    with pytest.raises(InvalidParameter):
        exact_Q(1, 3, 0)


def test_exact_Q_brute_force():
    for k in range(2, 6):
        for b in range(0, 6):
            for c in range(1, k + 1):
                assert exact_Q(b, k, c) == brute_Q(b, k, c)


def test_exact_Q_sums_to_one():
    for k in range(2, 31):
        for b in range(0, 31):
            assert sum(exact_Q(b, k, c) for c in range(1, k + 1)) == 1


def test_poissonized_examples():
    assert poissonized_inverse_mean(7, 1.0) == pytest.approx(1 / 7)
    assert poissonized_inverse_mean(2, 0.5) == pytest.approx(0.75, abs=1e-15)
    assert poissonized_inverse_mean(5, 0.3) == pytest.approx(poissonized_inverse_mean_sum(5, 0.3), rel=1e-12)
    with pytest.raises(InvalidParameter):
        poissonized_inverse_mean(3, 0.0)


def test_poissonized_identity_random():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        k = int(rng.integers(2, 60))
        r = float(rng.uniform(1e-3, 1.0))
        assert poissonized_inverse_mean(k, r) == pytest.approx(poissonized_inverse_mean_sum(k, r), rel=1e-12)


def test_f_rate():
    for k in (2, 3, 50):
        assert f_rate(0.0, k) == 0.0
    assert f_rate(5.0, 3) == pytest.approx(0.001742876443564285819689747742385455022423, abs=1e-13)
    k = 100
    assert f_rate(asymptotic_upper(k) + 0.5, k) < 0
    with pytest.raises(InvalidParameter):
        f_rate(-1.0, 3)


@pytest.mark.parametrize("k", sorted(ROOTS))
def test_improved_bound_roots(k):
    assert improved_upper_bound(k) == pytest.approx(ROOTS[k], abs=1e-8)


def test_improved_bound_k3():
    r = improved_upper_bound(3)
    assert abs(r - 5.011) <= 0.005
    assert r < first_moment_bound(3)
    with pytest.raises(InvalidParameter):
        improved_upper_bound(2)


def test_improved_bound_large_k():
    assert abs(improved_upper_bound(1000) - asymptotic_upper(1000)) < 0.1


def test_bounds_row():
    row = bounds_row(3)
    assert row.improved_upper < row.fm_upper
    assert row.asym_lower == pytest.approx(row.asym_upper - 1)


def test_expected_X_log():
    assert expected_X_log(1, 0, 5) == pytest.approx(math.log(5))
    assert expected_X_log(5, 6, 3) == pytest.approx(math.log(64 / 3), abs=1e-14)
    k = 7
    d = first_moment_bound(k) + 0.1
    assert math.log(k) + d / 2 * math.log(1 - 1 / k) < 0


def test_expected_X2_log():
    assert expected_X2_log(1, 0, 4) == pytest.approx(math.log(16))
    assert expected_X2_log(7, 0, 3) == pytest.approx(14 * math.log(3))
    brute = brute_second_moment(4, 3, 3)
    assert brute == Fraction(2880549, 4096)
    assert math.exp(expected_X2_log(4, 3, 3)) == pytest.approx(float(brute), rel=1e-9)


def test_expected_X2_small_brute():
    for n, m, k in [(2, 1, 3), (3, 2, 3), (2, 2, 4), (3, 1, 4)]:
        assert math.exp(expected_X2_log(n, m, k)) == pytest.approx(float(brute_second_moment(n, m, k)), rel=1e-9)


@given(st.integers(1, 500), st.integers(0, 2000), st.integers(2, 30))
@settings(max_examples=200)
def test_second_moment_dominates(n, m, k):
    assert expected_X2_log(n, m, k) >= 2 * expected_X_log(n, m, k) - 1e-9 * (1 + n)
