"""Explicit function families: Moser functions, the Liouville bubble, the
concentration threshold and the two-branch test functions built from a
Green function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import beta as beta_fn
from scipy.special import betaincc, gammaln

from .dims import Dimension, harmonic_sum
from .errors import MatchingError, TailWarning
from .functional import FunctionalParams, mt_functional
from .odes import GreenSolution, green_alpha, green_g0
from .radial import (
    DEFAULT_H,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    RadialGrid,
    RadialProfile,
    full_sobolev_norm,
    normalize_to_sphere,
)

BUBBLE_REL_FLOOR = 1e-12
MATCH_TOL = 1e-8


# ------------------------------------------------------------------ Moser


@dataclass(frozen=True)
class MoserParams:
    k: float
    R: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if not self.R > 0:
            raise ValueError("R must be positive")


def moser_grid(mp: MoserParams, dim: Dimension, h: float = DEFAULT_H) -> RadialGrid:
    """Grid with both kinks of u_{k,R} on nodes and room on either side."""
    t_edge = -dim.N * math.log(mp.R)
    t_max = max(DEFAULT_T_MAX, t_edge + mp.k + 20.0)
    return RadialGrid.anchored(dim, t_edge, t_min=min(DEFAULT_T_MIN, t_edge - 20.0), t_max=t_max, h=h)


def _moser_line(t, k, N, t_edge):
    # w(t) = (t - t_edge)/k^{1/N} on (t_edge, t_edge + k], k^{(N-1)/N} beyond
    s = np.clip(np.asarray(t, dtype=float) - t_edge, 0.0, k)
    return s / k ** (1.0 / N)


def moser_profile(mp: MoserParams, dim: Dimension, grid: Optional[RadialGrid] = None) -> RadialProfile:
    """u_{k,R}(r) = u_k(r/R), with u_k piecewise linear in t = -N ln r.

    u_k is omega^{-1/N} (k/N)^{(N-1)/N} on the ball of radius e^{-k/N},
    logarithmic on the annulus up to radius 1 and zero outside.
    """
    if grid is None:
        grid = moser_grid(mp, dim)
    N = dim.N
    t_edge = -N * math.log(mp.R)
    if t_edge < grid.t_nodes[0] or t_edge + mp.k > grid.t_nodes[-1]:
        raise ValueError("grid window must contain the support radius R and the core radius R e^{-k/N}")
    scale = 1.0 / (N ** (1.0 - 1.0 / N) * dim.omega ** (1.0 / N))
    k = float(mp.k)
    vals = scale * _moser_line(grid.t_nodes, k, N, t_edge)

    def source(r):
        return scale * _moser_line(-N * np.log(r), k, N, t_edge)

    return RadialProfile(grid=grid, values=vals, kind="linear", decreasing=True, source=source)


def moser_core_value(mp: MoserParams, dim: Dimension) -> float:
    N = dim.N
    return dim.omega ** (-1.0 / N) * (mp.k / N) ** ((N - 1) / N)


def moser_norm_asymptotic(mp: MoserParams, dim: Dimension) -> float:
    """Leading term R^N N!/(N^N k) of ||u_{k,R}||_N^N."""
    N = dim.N
    return mp.R**N * math.factorial(N) / (N**N * mp.k)


def normalized_moser(mp: MoserParams, dim: Dimension, grid: Optional[RadialGrid] = None) -> RadialProfile:
    return normalize_to_sphere(moser_profile(mp, dim, grid))


def moser_divergence_table(dim: Dimension, alpha: float, R: float, ks) -> list[tuple[float, float]]:
    """(k, functional at beta_N on the normalized u_{k,R}) for each k."""
    p = FunctionalParams(beta=dim.beta_N, alpha=alpha)
    rows = []
    for k in ks:
        u = normalized_moser(MoserParams(k=float(k), R=R), dim)
        rows.append((float(k), float(mt_functional(u, p))))
    return rows


# ------------------------------------------------------------ bubble


def _bubble_s(dim: Dimension, t):
    # c_N r^{N/(N-1)} written in t
    return dim.c_N * np.exp(-np.asarray(t, dtype=float) / (dim.N - 1))


def blowup_grid(dim: Dimension, h: float = DEFAULT_H) -> RadialGrid:
    """Window whose outer edge puts the bubble density below 1e-12 of its peak.

    In t the density of (1 + s)^{-N} dx is proportional to s^{N-1}(1+s)^{-N},
    roughly 1/s for large s.
    """
    s_edge = 1.0 / BUBBLE_REL_FLOOR
    t_edge = -(dim.N - 1) * math.log(s_edge / dim.c_N)
    t_min = h * math.floor(min(t_edge, DEFAULT_T_MIN) / h)
    return RadialGrid.uniform(dim, t_min=t_min, t_max=DEFAULT_T_MAX, h=h)


def blowup_profile(dim: Dimension, grid: Optional[RadialGrid] = None) -> RadialProfile:
    """phi(r) = -((N-1)/beta_N) ln(1 + c_N r^{N/(N-1)})."""
    if grid is None:
        grid = RadialGrid.uniform(dim)
    N = dim.N

    def source(r):
        return -((N - 1) / dim.beta_N) * np.log1p(dim.c_N * np.asarray(r, dtype=float) ** (N / (N - 1)))

    vals = -((N - 1) / dim.beta_N) * np.log1p(_bubble_s(dim, grid.t_nodes))
    return RadialProfile(grid=grid, values=vals, decreasing=True, signed=True, source=source)


def _outer_tail(dim: Dimension, delta: float, t_min: float) -> float:
    """Exact mass of (1 + c_N r^{N/(N-1)})^{-N(1+delta)} outside the window.

    With s = c_N r^{N/(N-1)} the measure becomes (N-1) s^{N-2} ds, and with
    x = s/(1+s) the integral is an incomplete beta function.
    """
    N = dim.N
    s0 = float(_bubble_s(dim, t_min))
    x0 = s0 / (1.0 + s0)
    b = N * delta + 1.0
    return (N - 1) * beta_fn(N - 1, b) * betaincc(N - 1, b, x0)


def liouville_moment_closed_form(dim: Dimension, delta: float) -> float:
    """Gamma(1 + N delta) Gamma(N) / Gamma(N + N delta)."""
    N = dim.N
    return math.exp(gammaln(1 + N * delta) + gammaln(N) - gammaln(N + N * delta))


def liouville_moment(dim: Dimension, delta: float, grid: Optional[RadialGrid] = None) -> tuple[float, float]:
    """(quadrature, closed form) of int (1 + c_N |x|^{N/(N-1)})^{-N(1+delta)} dx."""
    N = dim.N
    if delta <= -1.0 / N:
        raise ValueError("the moment diverges for delta <= -1/N")
    if grid is None:
        grid = blowup_grid(dim)
    s = _bubble_s(dim, grid.t_nodes)
    integrand = np.exp(-N * (1 + delta) * np.log1p(s))
    tail = _outer_tail(dim, delta, grid.t_nodes[0])
    if tail > 1e-8:
        warnings.warn(f"analytic tail {tail:.3g} exceeds 1e-8; widen the window", TailWarning, stacklevel=2)
    value = math.fsum(grid.weights * integrand) + tail
    return value, liouville_moment_closed_form(dim, delta)


def blowup_mass(dim: Dimension, grid: Optional[RadialGrid] = None) -> float:
    """int exp((N/(N-1)) beta_N phi) dx for the bubble phi; equals 1."""
    if grid is None:
        grid = blowup_grid(dim)
    N = dim.N
    phi = blowup_profile(dim, grid).values
    integrand = np.exp((N / (N - 1)) * dim.beta_N * phi)
    tail = _outer_tail(dim, 0.0, grid.t_nodes[0])
    if tail > 1e-8:
        warnings.warn(f"analytic tail {tail:.3g} exceeds 1e-8; widen the window", TailWarning, stacklevel=2)
    return math.fsum(grid.weights * integrand) + tail


def carleson_chang_bound(dim: Dimension, A_alpha: float) -> float:
    """(omega/N) exp(beta_N A + 1 + 1/2 + ... + 1/(N-1))."""
    return dim.omega / dim.N * math.exp(dim.beta_N * A_alpha + harmonic_sum(dim))


# ------------------------------------------------------- test functions


@dataclass(frozen=True)
class TestFunctionParams:
    __test__ = False

    eps: float
    alpha: float = 0.0
    green: Optional[GreenSolution] = None
    damping: float = 0.5
    max_iter: int = 200
    tol: float = MATCH_TOL

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def R(self) -> float:
        return -math.log(self.eps)

    @property
    def match_radius(self) -> float:
        return self.R * self.eps


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False

    profile: RadialProfile
    c: float
    A: float
    A_alpha: float
    green_norm_N: float
    continuity_defect: float
    norm_defect: float
    iterations: int
    params: TestFunctionParams


def _bubble_log(dim: Dimension, r, eps):
    N = dim.N
    return -((N - 1) / dim.beta_N) * np.log1p(dim.c_N * (np.asarray(r, dtype=float) / eps) ** (N / (N - 1)))


def test_function(tp: TestFunctionParams, dim: Dimension, grid: Optional[RadialGrid] = None) -> TestFunction:
    """Bubble glued to the Green function at r = R eps, unit full norm.

    Inside: c + c^{-1/(N-1)} (L(r) + A) with L the bubble logarithm at scale
    eps; outside: c^{-1/(N-1)} G_alpha(r). A is updated from continuity at
    fixed c and c from the unit-norm condition at fixed A, with damping.
    """
    N = dim.N
    q = N / (N - 1)
    green = tp.green
    if green is None:
        green = green_alpha(green_g0(dim), tp.alpha, dim)
    elif abs(green.alpha - tp.alpha) > 1e-15:
        raise ValueError("Green solution was computed for a different alpha")
    r_match = tp.match_radius
    t_match = -N * math.log(r_match)
    if grid is None:
        grid = RadialGrid.anchored(dim, t_match)
    i_m = grid.nearest_index(t_match)
    if abs(grid.t_nodes[i_m] - t_match) > 1e-9 or not (0 < i_m < grid.n - 1):
        raise ValueError("the matching radius must sit on an interior grid node")

    r = grid.r_nodes
    L = _bubble_log(dim, r, tp.eps)
    G = green.evaluate(r)
    G_m = float(green.evaluate(np.array([r_match]))[0])
    L_m = float(_bubble_log(dim, r_match, tp.eps))

    W = grid.weights
    h = grid.h
    gfac = dim.omega * N ** (N - 1) * h

    def branches(c, A):
        inner = c + c ** (-1.0 / (N - 1)) * (L[i_m:] + A)
        outer = c ** (-1.0 / (N - 1)) * G[: i_m + 1]
        return inner, outer

    def piecewise_norm(c, A):
        # ball and exterior integrated separately, so a jump at the
        # matching radius is not charged to the gradient
        inner, outer = branches(c, A)
        grad = math.fsum(np.abs(np.diff(inner) / h) ** N) + math.fsum(np.abs(np.diff(outer) / h) ** N)
        w_in = W[i_m:].copy()
        w_in[0] *= 0.5
        w_out = W[: i_m + 1].copy()
        w_out[-1] *= 0.5
        mass = math.fsum(w_in * np.abs(inner) ** N) + math.fsum(w_out * np.abs(outer) ** N)
        return (gfac * grad + mass) ** (1.0 / N)

    def build(c, A):
        inner, outer = branches(c, A)
        return np.concatenate([outer[:-1], inner])

    def norm_of(vals):
        return full_sobolev_norm(RadialProfile(grid=grid, values=np.abs(vals)))

    c = max(-(N / dim.beta_N) * math.log(tp.eps), 1e-3) ** (1.0 / q)
    it = 0
    for it in range(1, tp.max_iter + 1):
        A = G_m - L_m - c**q
        f = lambda cc: piecewise_norm(cc, A) - 1.0
        lo, hi = 0.5 * c, 2.0 * c
        grow = 0
        while f(lo) * f(hi) > 0 and grow < 40:
            lo, hi = 0.5 * lo, 2.0 * hi
            grow += 1
        c_new = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        c_next = (1 - tp.damping) * c + tp.damping * c_new
        done = abs(c_next - c) <= 1e-14 * c
        c = c_next
        if done:
            break
    A = G_m - L_m - c**q
    vals = build(c, A)
    inner_at_m = c + c ** (-1.0 / (N - 1)) * (L_m + A)
    outer_at_m = c ** (-1.0 / (N - 1)) * G_m
    cont = abs(inner_at_m - outer_at_m)
    nd = abs(norm_of(vals) - 1.0)
    if cont > tp.tol or nd > tp.tol or np.any(vals < 0):
        raise MatchingError(
            f"matching did not converge after {it} iterations",
            defects={"continuity": cont, "norm": nd},
        )
    profile = RadialProfile(grid=grid, values=vals, decreasing=True)
    return TestFunction(
        profile=profile,
        c=c,
        A=A,
        A_alpha=green.A_alpha,
        green_norm_N=green.norm_N,
        continuity_defect=cont,
        norm_defect=nd,
        iterations=it,
        params=tp,
    )


def test_function_excess(tp: TestFunctionParams, dim: Dimension, built: Optional[TestFunction] = None) -> float:
    """Functional at beta_N on the test function minus the concentration threshold."""
    if built is None:
        built = test_function(tp, dim)
    value = mt_functional(built.profile, FunctionalParams(beta=dim.beta_N, alpha=tp.alpha))
    return value - carleson_chang_bound(dim, built.A_alpha)


test_function.__test__ = False
test_function_excess.__test__ = False
