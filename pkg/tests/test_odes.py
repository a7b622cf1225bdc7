import math

import mpmath
import numpy as np
import pytest
from scipy.special import k0

from mtlab.odes import (
    b2_family_lower_bound,
    gaussian_quotient,
    gn_ground_state,
    green_alpha,
    green_direct_check,
    green_solve,
)
from mtlab.radial import RadialGrid, RadialProfile

A0_EXACT = (math.log(2) - np.euler_gamma) / (2 * math.pi)


# ---------------------------------------------------------------- ground state


def test_ground_state_profile(ground_state):
    gs = ground_state
    v = gs.profile.values
    assert np.all(v >= 0)
    # nodes run outward to inward, so a decreasing profile increases along the
    # array; near r = 0 Q is flat to machine precision
    r = gs.profile.r
    sel = (v > 1e-12) & (r > 1e-3)
    assert np.all(np.diff(v[sel]) > 0)
    assert np.all(np.diff(v) >= 0)
    assert gs.residual <= 1e-8
    # Townes soliton amplitude
    assert gs.q0 == pytest.approx(2.2062, abs=1e-4)


def test_b2_range_and_identity(ground_state):
    gs = ground_state
    assert 1 / (2 * math.pi) + 0.005 < gs.b2 < 0.2
    assert gs.b2 == pytest.approx(gs.l4_fourth / (gs.grad_squared * gs.l2_squared), rel=1e-15)
    # Pohozaev: ||Q||_4^4 = 2||grad Q||_2^2 = 2||Q||_2^2, so B2 = 2/||Q||_2^2
    assert gs.b2 == pytest.approx(2 / gs.l2_squared, abs=1e-8)


def test_b2_against_known_mass(ground_state):
    # ||Q||_2^2 of the planar Townes profile, 1.86225... * 2 pi
    assert ground_state.l2_squared == pytest.approx(11.700896, rel=1e-5)


def test_gaussian_quotient_closed_form():
    with mpmath.workdps(30):
        f = lambda g: float(mpmath.quad(lambda r: 2 * mpmath.pi * r * g(r), [0, mpmath.inf]))
        l2 = f(lambda r: mpmath.exp(-(r**2)))
        l4 = f(lambda r: mpmath.exp(-2 * r**2))
        gr = f(lambda r: r**2 * mpmath.exp(-(r**2)))
    assert gaussian_quotient() == pytest.approx(l4 / (gr * l2), abs=1e-10)
    assert gaussian_quotient() == pytest.approx(1 / (2 * math.pi), abs=1e-10)


@pytest.mark.slow
def test_b2_family_bound(ground_state):
    val, (b, c) = b2_family_lower_bound()
    assert val < ground_state.b2
    assert ground_state.b2 - val < 5e-4
    assert val > 1 / (2 * math.pi)
    assert b > 0


def test_ground_state_deterministic(ground_state):
    again = gn_ground_state()
    assert again.b2 == ground_state.b2
    assert again.q0 == ground_state.q0


def test_ground_state_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        gn_ground_state(RadialGrid.uniform(3))


# -------------------------------------------------------------------- Green


def test_g0_n2_against_bessel(g0_2):
    assert g0_2.A_alpha == pytest.approx(A0_EXACT, abs=1e-5)
    assert g0_2.log_coefficient == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    r = np.array([1e-4, 1e-2, 0.1, 1.0, 3.0, 8.0])
    assert np.allclose(g0_2.evaluate(r), k0(r) / (2 * math.pi), rtol=1e-6, atol=1e-12)


def test_a0_oracle_value():
    # A0 from the small-argument expansion of K0, in high precision
    with mpmath.workdps(30):
        r = mpmath.mpf("1e-12")
        ref = float((mpmath.besselk(0, r) + mpmath.log(r)) / (2 * mpmath.pi))
    assert A0_EXACT == pytest.approx(ref, rel=1e-12)
    assert A0_EXACT == pytest.approx(0.0184510737771718, rel=1e-13)


def test_green_scaling_constructor(d2, g0_2):
    g = green_alpha(g0_2, 0.5, d2)
    assert g.A_alpha - g0_2.A_alpha == pytest.approx(math.log(2) / (4 * math.pi), abs=1e-10)
    assert g.norm_N == pytest.approx(2 * g0_2.norm_N, rel=1e-6)
    assert green_alpha(g0_2, 0.0, d2) is g0_2
    with pytest.raises(ValueError):
        green_alpha(g0_2, 1.0, d2)
    with pytest.raises(ValueError):
        green_alpha(g, 0.2, d2)


@pytest.mark.slow
def test_green_direct_solve_half(d2, g0_2):
    direct = green_solve(d2, 0.5)
    scaled = green_alpha(g0_2, 0.5, d2)
    assert direct.A_alpha == pytest.approx(scaled.A_alpha, abs=1e-4)


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_weak_defect_n2(d2, g0_2, alpha):
    assert green_direct_check(green_alpha(g0_2, alpha, d2)) <= 1e-6


def test_weak_defect_n3(d3, g0_3):
    assert green_direct_check(g0_3) <= 1e-6


def test_weak_defect_zero_profile(d2, g0_2):
    from dataclasses import replace

    z = RadialProfile(grid=g0_2.profile.grid, values=np.zeros(g0_2.profile.grid.n))
    assert green_direct_check(replace(g0_2, profile=z)) == 0.0


@pytest.mark.parametrize("N", [2, 3])
def test_near_origin_rate(N, g0_2, g0_3):
    g = {2: g0_2, 3: g0_3}[N]
    rs = np.logspace(-4, -1, 7)
    res = np.abs(g.near_origin_residual(rs))
    # remove the log factor ln^{N-1} r before fitting the power
    y = np.log(res / np.abs(np.log(rs)) ** (N - 1))
    slope = np.polyfit(np.log(rs), y, 1)[0]
    assert slope == pytest.approx(N, abs=0.2)


@pytest.mark.parametrize("N", [2, 3])
def test_far_field(N, g0_2, g0_3):
    g = {2: g0_2, 3: g0_3}[N]
    v = g.profile.values
    assert v[0] <= 1e-10
    assert abs(g.flux(np.array([g.profile.grid.r_nodes[0]]))[0]) <= 1e-10


def test_green_rejects_alpha_one(d2):
    with pytest.raises(ValueError):
        green_solve(d2, 1.0)
