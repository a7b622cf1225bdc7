import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtlab.dims import make_dimension
from mtlab.errors import MatchingError
from mtlab.functional import FunctionalParams, mt_functional
from mtlab.odes import green_alpha
from mtlab.radial import RadialGrid, full_sobolev_norm, moser_transform
from mtlab.sequences import (
    MoserParams,
    TestFunctionParams,
    blowup_mass,
    blowup_profile,
    carleson_chang_bound,
    liouville_moment,
    liouville_moment_closed_form,
    moser_core_value,
    moser_divergence_table,
    moser_norm_asymptotic,
    moser_profile,
    normalized_moser,
    test_function,
    test_function_excess,
)


def moser_lN_exact(k, N):
    # ||u_k||_N^N = (gamma(N+1, k) + k^N e^{-k}) / (N^N k), evaluated in mpmath
    with mpmath.workdps(40):
        k = mpmath.mpf(k)
        return float((mpmath.gammainc(N + 1, 0, k) + k**N * mpmath.exp(-k)) / (N**N * k))


# ------------------------------------------------------------------ Moser


@pytest.mark.parametrize("N", [2, 3])
def test_moser_gradient_unit_all_k(N):
    d = make_dimension(N)
    for k in range(1, 101):
        u = moser_profile(MoserParams(k=float(k)), d)
        assert abs(u.grad_power() ** (1.0 / N) - 1.0) <= 1e-12


@pytest.mark.parametrize("N,k", [(2, 10.0), (2, 20.0), (3, 10.0), (3, 25.0)])
def test_moser_lN_against_closed_form(N, k):
    # the kink at the core radius leaves an h^2 Euler-Maclaurin term of size
    # (h^2/12) N k^{N-1} e^{-k} / (N^N k); the smooth part is O(h^4)
    u = moser_profile(MoserParams(k=k), make_dimension(N))
    kink = (0.01**2 / 12) * N * k ** (N - 1) * math.exp(-k) / (N**N * k)
    assert abs(u.lp_power(N) - moser_lN_exact(k, N)) <= 2 * kink + 1e-10 * moser_lN_exact(k, N)


def test_moser_n2_k10_value(d2):
    u = moser_profile(MoserParams(k=10.0), d2)
    assert u.lp_power(2) == pytest.approx(0.05, abs=5e-5)


@pytest.mark.parametrize("N", [2, 3])
def test_moser_remainder_scale_moderate_k(N):
    d = make_dimension(N)
    for k in (10, 15, 20, 25, 30):
        mp = MoserParams(k=float(k))
        dev = moser_profile(mp, d).lp_power(N) - moser_norm_asymptotic(mp, d)
        assert abs(dev) <= 10 * k ** (N - 1) * math.exp(-k)


def test_moser_asymptotic_values(d2, d3):
    assert moser_norm_asymptotic(MoserParams(k=10.0), d2) == pytest.approx(0.05, rel=1e-15)
    assert moser_norm_asymptotic(MoserParams(k=30.0), d3) == pytest.approx(6 / (27 * 30), rel=1e-15)
    assert moser_norm_asymptotic(MoserParams(k=10.0, R=2.0), d2) == pytest.approx(0.2, rel=1e-15)


@pytest.mark.parametrize("N", [2, 3])
def test_moser_core_value(N):
    d = make_dimension(N)
    mp = MoserParams(k=7.0)
    u = moser_profile(mp, d)
    ref = (2 * math.pi ** (N / 2) / math.gamma(N / 2)) ** (-1 / N) * (7.0 / N) ** ((N - 1) / N)
    assert moser_core_value(mp, d) == pytest.approx(ref, rel=1e-14)
    assert u.values[-1] == pytest.approx(ref, rel=1e-14)
    assert np.all(u.values[u.r > 1.0 + 1e-9] == 0.0)


def test_moser_window_check(d2):
    g = RadialGrid.uniform(d2, t_min=-5.0, t_max=10.0)
    with pytest.raises(ValueError):
        moser_profile(MoserParams(k=20.0), d2, g)
    with pytest.raises(ValueError):
        MoserParams(k=0.0)
    with pytest.raises(ValueError):
        MoserParams(k=1.0, R=-1.0)


def test_moser_transform_nodewise(d2, d3):
    for d in (d2, d3):
        N = d.N
        u = moser_profile(MoserParams(k=12.0), d)
        w = moser_transform(u)
        t = u.grid.t_nodes
        ref = N ** ((N - 1) / N) * d.omega ** (1 / N) * u.values
        assert np.max(np.abs(w.w_values - ref)) <= 1e-12
        # w is the clipped line t/k^{1/N}
        assert np.allclose(ref, np.clip(t, 0, 12.0) / 12.0 ** (1 / N), atol=1e-12, rtol=0)


def test_normalized_moser_unit(d2):
    for k in (5.0, 20.0, 60.0):
        u = normalized_moser(MoserParams(k=k, R=1.5), d2)
        assert full_sobolev_norm(u) == pytest.approx(1.0, abs=1e-10)


def test_normalization_ratio_decay(d2):
    # (1 + ||u~||_N^N) / ||u_{k,R}||^N - 1 = O(k^{-2})
    scaled = []
    for k in (10.0, 20.0, 40.0, 80.0):
        u = moser_profile(MoserParams(k=k), d2)
        full = u.grad_power() + u.lp_power(2)
        ut = normalized_moser(MoserParams(k=k), d2)
        ratio = (1 + ut.lp_power(2)) / full
        scaled.append((ratio - 1) * k**2)
    assert max(abs(s) for s in scaled) < 1.0


def test_divergence_table_growth(d2):
    rows = moser_divergence_table(d2, 1.0, 1.0, [10, 40])
    rows2 = moser_divergence_table(d2, 1.0, 2.0, [40])
    assert rows[1][1] > 0.9 * math.pi
    assert rows2[0][1] > 0.9 * 4 * math.pi
    assert rows2[0][1] / rows[1][1] == pytest.approx(4.0, rel=0.1)


# ------------------------------------------------------------ bubble


def test_blowup_profile_closed_form(d2):
    u = blowup_profile(d2)
    r = u.r
    assert np.allclose(u.values, -np.log1p(math.pi * r**2) / (4 * math.pi), rtol=1e-13, atol=0)
    assert u.source(np.array([0.0]))[0] == 0.0
    assert np.all(np.diff(u.values) >= 0)  # nodes run from large r to small r


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_blowup_mass(N):
    assert blowup_mass(make_dimension(N)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("delta", [0.0, 0.1, 0.5])
def test_liouville_moment(N, delta):
    quad, closed = liouville_moment(make_dimension(N), delta)
    assert quad == pytest.approx(closed, abs=1e-6)


def test_liouville_oracle_mpmath(d2):
    # independent quadrature in r of the delta = 0.1 moment
    with mpmath.workdps(30):
        f = lambda r: 2 * mpmath.pi * r * (1 + mpmath.pi * r**2) ** (-2 * 1.1)
        ref = float(mpmath.quad(f, [0, 1, 10, mpmath.inf]))
    assert liouville_moment_closed_form(d2, 0.1) == pytest.approx(ref, rel=1e-12)
    assert liouville_moment(d2, 0.1)[0] == pytest.approx(ref, abs=1e-6)


def test_liouville_monotone_and_divergence(d3):
    vals = [liouville_moment(d3, dl)[0] for dl in (0.0, 0.05, 0.2, 0.5, 1.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        liouville_moment(d3, -0.5)


# ----------------------------------------------------- Carleson-Chang


def test_carleson_chang_values(d2, d3):
    assert carleson_chang_bound(d2, 0.0) == pytest.approx(math.pi * math.e, rel=1e-15)
    A0 = (math.log(2) - np.euler_gamma) / (2 * math.pi)
    assert carleson_chang_bound(d2, A0) == pytest.approx(
        math.pi * math.exp(1 + 2 * (math.log(2) - np.euler_gamma)), rel=1e-14
    )
    assert 10.7 < carleson_chang_bound(d2, A0) < 10.85
    ref3 = d3.omega / 3 * math.exp(d3.beta_N * 0.1 + 1.5)
    assert carleson_chang_bound(d3, 0.1) == pytest.approx(ref3, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-1, 1), da=st.floats(1e-6, 1))
def test_carleson_chang_monotone(a, da):
    d = make_dimension(2)
    assert carleson_chang_bound(d, a + da) > carleson_chang_bound(d, a)


# ------------------------------------------------------- test functions


@pytest.fixture(scope="module")
def tf2(d2, g0_2):
    g = green_alpha(g0_2, 0.05, d2)
    tp = TestFunctionParams(eps=1e-3, alpha=0.05, green=g)
    return tp, test_function(tp, d2)


def test_test_function_defects(tf2):
    _, tf = tf2
    assert tf.continuity_defect <= 1e-8
    assert tf.norm_defect <= 1e-8
    assert full_sobolev_norm(tf.profile) == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(tf.profile.values) >= -1e-15)


def test_test_function_closed_form_c(tf2, d2):
    # continuity makes phi = c^{-1/(N-1)} F with F free of c, so c^{N'} = ||F||^N
    tp, tf = tf2
    prof = tf.profile
    F = prof.values * tf.c  # N = 2: c^{1/(N-1)} = c
    from mtlab.radial import RadialProfile

    Fp = RadialProfile(grid=prof.grid, values=F)
    assert tf.c**2 == pytest.approx(full_sobolev_norm(Fp) ** 2, rel=1e-10)
    assert tf.A == pytest.approx(
        float(tp.green.evaluate(np.array([tp.match_radius]))[0])
        + (1 / (4 * math.pi)) * math.log1p(math.pi * math.log(1e3) ** 2)
        - tf.c**2,
        rel=1e-12,
    )


def test_test_function_excess_positive(tf2, d2):
    tp, tf = tf2
    ex = test_function_excess(tp, d2, tf)
    assert ex > 0
    value = mt_functional(tf.profile, FunctionalParams(beta=d2.beta_N, alpha=0.05))
    assert ex == pytest.approx(value - carleson_chang_bound(d2, tf.A_alpha), rel=1e-15)


@pytest.mark.slow
def test_test_function_slope(d2, g0_2):
    g = green_alpha(g0_2, 0.0, d2)
    xs, ys = [], []
    for e in (1e-2, 1e-3, 1e-4, 1e-5):
        tf = test_function(TestFunctionParams(eps=e, green=g), d2)
        assert tf.continuity_defect <= 1e-8 and tf.norm_defect <= 1e-8
        xs.append(-math.log(e))
        ys.append(tf.c**2)
    slopes = np.diff(ys) / np.diff(xs)
    assert slopes[-1] == pytest.approx(2 / d2.beta_N, rel=5e-3)
    # the slope approaches N/beta_N from below
    assert np.all(np.diff(slopes) > 0)


def test_test_function_excess_alpha_zero(d2, g0_2):
    g = green_alpha(g0_2, 0.0, d2)
    tp = TestFunctionParams(eps=1e-3, green=g)
    assert test_function_excess(tp, d2) > 0


def test_test_function_validation(d2, g0_2):
    with pytest.raises(ValueError):
        TestFunctionParams(eps=0.0)
    with pytest.raises(ValueError):
        TestFunctionParams(eps=1e-3, alpha=1.0)
    g = green_alpha(g0_2, 0.1, d2)
    with pytest.raises(ValueError):
        test_function(TestFunctionParams(eps=1e-3, alpha=0.0, green=g), d2)


def test_test_function_nonconvergence_reported(d2, g0_2):
    g = green_alpha(g0_2, 0.0, d2)
    tp = TestFunctionParams(eps=1e-3, green=g, max_iter=2, tol=1e-14)
    with pytest.raises(MatchingError) as ei:
        test_function(tp, d2)
    assert set(ei.value.defects) == {"continuity", "norm"}


@pytest.mark.slow
def test_test_function_excess_trend(d2, g0_2):
    # positive, shrinking toward zero as the bubble concentrates
    g = green_alpha(g0_2, 0.05, d2)
    ex = [test_function_excess(TestFunctionParams(eps=e, alpha=0.05, green=g), d2) for e in (1e-2, 1e-3, 1e-4)]
    assert all(x > 0 for x in ex)
    assert ex[0] > ex[1] > ex[2]


@pytest.mark.parametrize("N", [2, 3])
def test_moser_remainder_bound_closed_form(N):
    # the exact remainder obeys the bound at every k; only the discrete norm
    # runs out of resolution
    with mpmath.workdps(60):
        for k in range(10, 101):
            km = mpmath.mpf(k)
            exact = (mpmath.gammainc(N + 1, 0, km) + km**N * mpmath.exp(-km)) / (N**N * km)
            lead = mpmath.factorial(N) / (N**N * km)
            assert abs(exact - lead) <= 10 * km ** (N - 1) * mpmath.exp(-km)
