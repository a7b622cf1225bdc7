"""Radial ODE solves: the cubic NLS ground state in the plane and the
Green function of -Delta_N G + (1 - alpha) G^{N-1} = delta_0.

Both are found by bisection shooting with an embedded RK45 integrator and
monotone classification of trajectories at the first qualitative event.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import k0, k1

from .dims import Dimension, make_dimension
from .errors import SensitivityWarning, ShootingError
from .radial import RadialGrid, RadialProfile

RTOL = 1e-10
ATOL = 1e-12
BRACKET_TOL = 1e-12
GREEN_R0 = 1e-6
SENSITIVITY_TOL = 1e-5


# ---------------------------------------------------------------- ground state


@dataclass(frozen=True, eq=False)
class GroundState:
    profile: RadialProfile
    residual: float
    b2: float
    q0: float
    l2_squared: float
    grad_squared: float
    l4_fourth: float
    bracket: tuple = ()
    evaluate: Optional[Callable] = field(default=None, repr=False)
    derivative: Optional[Callable] = field(default=None, repr=False)


def _gs_rhs(r, y):
    q, p = y
    return [p, -p / r + q - q**3]


def _gs_series(q0, r):
    # Q = q0 + c2 r^2 + c4 r^4 with c2 = (q0 - q0^3)/4
    c2 = (q0 - q0**3) / 4.0
    c4 = (c2 - 3 * q0**2 * c2) / 16.0
    return q0 + c2 * r**2 + c4 * r**4, 2 * c2 * r + 4 * c4 * r**3


def _gs_events():
    def crosses(r, y):
        return y[0]

    crosses.terminal = True
    crosses.direction = -1

    def turns(r, y):
        return y[1]

    turns.terminal = True
    turns.direction = 1
    return crosses, turns


_GS_START = 1e-3
_GS_RMAX = 40.0


def _gs_shoot(q0, dense=False):
    y0 = _gs_series(q0, _GS_START)
    crosses, turns = _gs_events()
    sol = solve_ivp(
        _gs_rhs,
        (_GS_START, _GS_RMAX),
        y0,
        method="RK45",
        rtol=RTOL,
        atol=ATOL,
        events=(crosses, turns),
        dense_output=dense,
    )
    if sol.t_events[0].size:
        return +1, sol  # overshoot: q0 too large
    if sol.t_events[1].size:
        return -1, sol  # undershoot
    return 0, sol


def gn_ground_state(grid: RadialGrid | None = None, bracket=(2.0, 2.5)) -> GroundState:
    """Positive radial solution of Q'' + Q'/r - Q + Q^3 = 0 decaying at infinity.

    Returns the profile on ``grid`` (N = 2) together with the quotient
    ||Q||_4^4 / (||grad Q||_2^2 ||Q||_2^2), which is the best constant of the
    planar Gagliardo-Nirenberg inequality when Q is the ground state.
    """
    if grid is None:
        grid = RadialGrid.uniform(2)
    if grid.N != 2:
        raise ValueError("the ground state lives in dimension 2")
    lo, hi = map(float, bracket)
    slo, _ = _gs_shoot(lo)
    shi, _ = _gs_shoot(hi)
    if not (slo < 0 < shi):
        raise ShootingError("ground-state bracket does not straddle a sign change", (lo, hi))
    while hi - lo > BRACKET_TOL:
        mid = 0.5 * (lo + hi)
        s, _ = _gs_shoot(mid)
        if s > 0:
            hi = mid
        else:
            lo = mid
    q0 = lo
    _, sol_lo = _gs_shoot(lo, dense=True)
    _, sol_hi = _gs_shoot(hi, dense=True)

    # trust the trajectory while the bracketing solutions agree; beyond that
    # use the exact linear far field C K0(r)
    rs = np.linspace(1.0, min(sol_lo.t[-1], sol_hi.t[-1]), 4000)
    qa = sol_lo.sol(rs)[0]
    qb = sol_hi.sol(rs)[0]
    spread = np.abs(qa - qb) / np.maximum(np.abs(qa), 1e-300)
    ok = np.nonzero(spread > 1e-6)[0]
    r_match = float(rs[ok[0]] if ok.size else rs[-1])
    r_match = min(r_match, 12.0)
    q_m, p_m = sol_lo.sol(r_match)
    coef = q_m / k0(r_match)
    dense = sol_lo.sol

    def Q(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < _GS_START
        mid = (~small) & (r <= r_match)
        big = r > r_match
        out[small] = _gs_series(q0, r[small])[0]
        if np.any(mid):
            out[mid] = dense(r[mid])[0]
        if np.any(big):
            out[big] = coef * k0(r[big])
        return out

    def dQ(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < _GS_START
        mid = (~small) & (r <= r_match)
        big = r > r_match
        out[small] = _gs_series(q0, r[small])[1]
        if np.any(mid):
            out[mid] = dense(r[mid])[1]
        if np.any(big):
            out[big] = -coef * k1(r[big])
        return out

    vals = np.maximum(Q(grid.r_nodes), 0.0)
    W = grid.weights
    l2 = math.fsum(W * vals**2)
    l4 = math.fsum(W * vals**4)
    grad = math.fsum(W * dQ(grid.r_nodes) ** 2)
    b2 = l4 / (grad * l2)

    residual = _gs_residual(dense, r_match, max(abs(q0), 1.0), q0)
    profile = RadialProfile(grid=grid, values=vals, decreasing=True, source=Q)
    return GroundState(
        profile=profile,
        residual=residual,
        b2=b2,
        q0=q0,
        l2_squared=l2,
        grad_squared=grad,
        l4_fourth=l4,
        bracket=(lo, hi),
        evaluate=Q,
        derivative=dQ,
    )


def _gs_residual(dense, r_match, scale, q0):
    """Sup over r of |r Q'(r) - int_0^r s (Q - Q^3) ds| / scale.

    This is the ground-state equation in integrated form; it avoids
    differentiating the interpolated solution.
    """
    x, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(_GS_START, r_match, 3001)
    a, b = edges[:-1], edges[1:]
    s = 0.5 * (b - a)[:, None] * (x[None, :] + 1.0) + a[:, None]
    q = dense(s.ravel())[0].reshape(s.shape)
    piece = 0.5 * (b - a) * ((w[None, :] * s * (q - q**3)).sum(axis=1))
    # the series start gives r Q'(r) at the first node exactly up to O(r^6)
    start = _GS_START * _gs_series(q0, _GS_START)[1]
    integral = start + np.cumsum(piece)
    lhs = b * dense(b)[1]
    return float(np.max(np.abs(lhs - integral)) / scale)


def gaussian_quotient() -> float:
    """GN quotient of exp(-r^2/2) from its closed-form integrals."""
    l2 = math.pi
    l4 = math.pi / 2
    grad = math.pi
    return l4 / (grad * l2)


def _family_quotient(params) -> float:
    b, c = params
    if b <= 0.05 or c < 0:
        return 0.0

    def sech_b(r):
        # log cosh r written to avoid overflow
        return math.exp(-b * (r + math.log1p(math.exp(-2.0 * r)) - math.log(2.0)))

    def u(r):
        return sech_b(r) * (1.0 + c * r * r)

    def du(r):
        return -b * math.tanh(r) * u(r) + sech_b(r) * 2.0 * c * r

    def integ(f):
        return quad(lambda r: 2.0 * math.pi * r * f(r), 0.0, np.inf, limit=400, epsabs=0, epsrel=1e-13)[0]

    l2 = integ(lambda r: u(r) ** 2)
    l4 = integ(lambda r: u(r) ** 4)
    g = integ(lambda r: du(r) ** 2)
    return l4 / (g * l2)


def b2_family_lower_bound(start=(1.0, 0.1)) -> tuple[float, tuple[float, float]]:
    """Best GN quotient over the two-parameter family sech(r)^b (1 + c r^2).

    Integrals are done by adaptive quadrature with the exact derivative, so
    the result is an independent lower bound for B_2.
    """
    from scipy.optimize import minimize

    res = minimize(
        lambda x: -_family_quotient(x),
        np.asarray(start, float),
        method="Nelder-Mead",
        options=dict(xatol=1e-9, fatol=1e-14, maxiter=4000),
    )
    return -float(res.fun), (float(res.x[0]), float(res.x[1]))


# -------------------------------------------------------------------- Green


@dataclass(frozen=True, eq=False)
class GreenSolution:
    alpha: float
    profile: RadialProfile
    A_alpha: float
    log_coefficient: float
    norm_N: float = float("nan")
    r0: float = GREEN_R0
    bracket: tuple = ()
    evaluate: Optional[Callable] = field(default=None, repr=False)
    flux: Optional[Callable] = field(default=None, repr=False)

    def near_origin_residual(self, r):
        """G(r) + (N/beta_N) ln r - A_alpha."""
        r = np.asarray(r, dtype=float)
        return self.evaluate(r) + self.log_coefficient * np.log(r) - self.A_alpha


def _phase1_rhs(N, a, A, omega, tau):
    # variables H = G + a ln r - A and sigma = s + 1/omega in rho = ln r
    def rhs(rho, y):
        H, sig = y
        G = -a * rho + A + H
        x = omega * sig
        if x < 0.5:
            dH = -a * math.expm1(math.log1p(-x) / (N - 1))
        else:
            sflux = sig - 1.0 / omega
            dH = a + math.copysign(abs(sflux) ** (1.0 / (N - 1)), sflux)
        dsig = tau * math.exp(N * rho) * abs(G) ** (N - 2) * G
        return [dH, dsig]

    return rhs


def _phase2_rhs(N, tau):
    def rhs(rho, y):
        G, s = y
        dG = math.copysign(abs(s) ** (1.0 / (N - 1)), s)
        ds = tau * math.exp(N * rho) * abs(G) ** (N - 2) * G
        return [dG, ds]

    return rhs


def _inner_flux_integral(N, a, A, tau, r0):
    f = lambda r: r ** (N - 1) * (-a * math.log(r) + A) ** (N - 1)
    return tau * quad(f, 0.0, r0, limit=200)[0]


class _GreenShot:
    def __init__(self, dim: Dimension, alpha: float, A: float, r0: float, rho_max: float, dense=False):
        N = dim.N
        self.dim = dim
        a = N / dim.beta_N
        tau = 1.0 - alpha
        omega = dim.omega
        sig0 = _inner_flux_integral(N, a, A, tau, r0)
        rho0 = math.log(r0)
        rhs1 = _phase1_rhs(N, a, A, omega, tau)

        def g_zero1(rho, y):
            return -a * rho + A + y[0]

        g_zero1.terminal = True
        g_zero1.direction = -1

        def s_zero1(rho, y):
            return y[1] - 1.0 / omega

        s_zero1.terminal = True
        s_zero1.direction = 1
        self.state = 0
        sol1 = solve_ivp(
            rhs1, (rho0, 0.0), [0.0, sig0], method="RK45", rtol=RTOL, atol=1e-30,
            events=(g_zero1, s_zero1), dense_output=dense,
        )
        self.sol1 = sol1
        self.sol2 = None
        if sol1.t_events[0].size:
            self.state = -1  # G vanished: A too small
            return
        if sol1.t_events[1].size:
            self.state = +1  # flux turned: A too large
            return
        H1, sig1 = sol1.y[:, -1]
        G1 = A + H1
        s1 = sig1 - 1.0 / omega
        if s1 >= 0:
            self.state = +1
            return

        def g_zero(rho, y):
            return y[0]

        g_zero.terminal = True
        g_zero.direction = -1

        def s_zero(rho, y):
            return y[1]

        s_zero.terminal = True
        s_zero.direction = 1
        sol2 = solve_ivp(
            _phase2_rhs(N, tau), (0.0, rho_max), [G1, s1], method="RK45", rtol=RTOL, atol=ATOL,
            events=(g_zero, s_zero), dense_output=dense,
        )
        self.sol2 = sol2
        if sol2.t_events[0].size:
            self.state = -1
        elif sol2.t_events[1].size:
            self.state = +1


def _far_rate(N):
    return (N - 1) ** (-1.0 / N)


def green_solve(
    dim: Dimension | int,
    alpha: float = 0.0,
    grid: RadialGrid | None = None,
    r0: float = GREEN_R0,
    bracket=(-2.0, 2.0),
    check_sensitivity: bool = True,
) -> GreenSolution:
    """Shoot on A for -Delta_N G + (1 - alpha) G^{N-1} = delta_0, G ~ -(N/beta_N) ln r + A."""
    if isinstance(dim, int):
        dim = make_dimension(dim)
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if grid is None:
        grid = RadialGrid.uniform(dim)
    N = dim.N
    a = N / dim.beta_N
    kappa = _far_rate(N) * (1.0 - alpha) ** (1.0 / N)
    rho_max = math.log(60.0 / kappa)
    lo, hi = map(float, bracket)
    if not (_GreenShot(dim, alpha, lo, r0, rho_max).state < 0 < _GreenShot(dim, alpha, hi, r0, rho_max).state):
        raise ShootingError("Green-function bracket does not straddle a sign change", (lo, hi))
    while hi - lo > BRACKET_TOL:
        mid = 0.5 * (lo + hi)
        st = _GreenShot(dim, alpha, mid, r0, rho_max).state
        if st > 0:
            hi = mid
        else:
            lo = mid
    A = 0.5 * (lo + hi)

    if check_sensitivity:
        half = green_solve(dim, alpha, grid, r0 / 2, (lo - 1e-3, hi + 1e-3), check_sensitivity=False)
        if abs(half.A_alpha - A) > SENSITIVITY_TOL:
            warnings.warn(
                f"A shifts by {abs(half.A_alpha - A):.3g} when r0 halves",
                SensitivityWarning,
                stacklevel=2,
            )

    shot_lo = _GreenShot(dim, alpha, lo, r0, rho_max, dense=True)
    shot_hi = _GreenShot(dim, alpha, hi, r0, rho_max, dense=True)
    evaluate, flux = _assemble_green(dim, alpha, A, r0, shot_lo, shot_hi, kappa)
    vals = evaluate(grid.r_nodes)
    profile = RadialProfile(grid=grid, values=np.maximum(vals, 0.0), decreasing=True, source=evaluate)
    return GreenSolution(
        alpha=alpha,
        profile=profile,
        A_alpha=A,
        log_coefficient=a,
        norm_N=profile.lp_power(N),
        r0=r0,
        bracket=(lo, hi),
        evaluate=evaluate,
        flux=flux,
    )


def _assemble_green(dim, alpha, A, r0, shot_lo, shot_hi, kappa):
    N = dim.N
    a = N / dim.beta_N
    omega = dim.omega
    s1 = shot_lo.sol1.sol
    # the last radius where the bracketing trajectories still agree
    s2lo, s2hi = shot_lo.sol2, shot_hi.sol2
    rho_end = min(s2lo.t[-1], s2hi.t[-1])
    rhos = np.linspace(0.0, rho_end, 4000)
    ga = s2lo.sol(rhos)[0]
    gb = s2hi.sol(rhos)[0]
    spread = np.abs(ga - gb) / np.maximum(np.abs(0.5 * (ga + gb)), 1e-300)
    bad = np.nonzero(spread > 1e-7)[0]
    rho_m = float(rhos[bad[0] - 1] if bad.size and bad[0] > 0 else rhos[-1])
    dense2 = lambda rho: 0.5 * (s2lo.sol(rho) + s2hi.sol(rho))
    G_m, s_m = dense2(rho_m)
    r_m = math.exp(rho_m)
    tau = 1.0 - alpha

    if N == 2:
        # the far field is exactly C K0(sqrt(tau) r)
        k = math.sqrt(tau)
        C = G_m / k0(k * r_m)

        def tail(r):
            return C * k0(k * r)

        def tail_flux(r):
            return -C * k * r * k1(k * r)
    else:
        rate = -math.copysign(abs(s_m) ** (1.0 / (N - 1)), s_m) / (r_m * G_m)
        rate = rate if rate > 0 else kappa

        def tail(r):
            return G_m * np.exp(-rate * (r - r_m))

        def tail_flux(r):
            g = tail(r)
            return -(r ** (N - 1)) * (rate * g) ** (N - 1)

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lnr = np.log(np.maximum(r, 1e-300))
        inner = r < r0
        p1 = (~inner) & (r <= 1.0)
        p2 = (r > 1.0) & (r <= r_m)
        far = r > r_m
        out[inner] = -a * lnr[inner] + A
        if np.any(p1):
            out[p1] = -a * lnr[p1] + A + s1(lnr[p1])[0]
        if np.any(p2):
            out[p2] = dense2(lnr[p2])[0]
        if np.any(far):
            out[far] = tail(r[far])
        return out

    def flux(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lnr = np.log(r)
        p1 = r <= 1.0
        p2 = (r > 1.0) & (r <= r_m)
        far = r > r_m
        if np.any(p1):
            out[p1] = s1(lnr[p1])[1] - 1.0 / omega
        if np.any(p2):
            out[p2] = dense2(lnr[p2])[1]
        if np.any(far):
            out[far] = tail_flux(r[far])
        return out

    return evaluate, flux


def green_g0(dim: Dimension | int, grid: RadialGrid | None = None, **kw) -> GreenSolution:
    return green_solve(dim, 0.0, grid, **kw)


def green_alpha(g0: GreenSolution, alpha: float, dim: Dimension | int | None = None) -> GreenSolution:
    """G_alpha(r) = G_0((1 - alpha)^{1/N} r) with the matching shift of A."""
    if g0.alpha != 0.0:
        raise ValueError("scaling starts from the alpha = 0 solution")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1); the norm blows up as alpha -> 1")
    if dim is None:
        dim = g0.profile.dim
    elif isinstance(dim, int):
        dim = make_dimension(dim)
    if alpha == 0.0:
        return g0
    N = dim.N
    lam = (1.0 - alpha) ** (1.0 / N)
    ev0, fl0 = g0.evaluate, g0.flux

    def evaluate(r):
        return ev0(lam * np.asarray(r, dtype=float))

    def flux(r):
        # the chain-rule factor lam^{N-1} is absorbed by r^{N-1}
        return fl0(lam * np.asarray(r, dtype=float))

    grid = g0.profile.grid
    vals = evaluate(grid.r_nodes)
    profile = RadialProfile(grid=grid, values=np.maximum(vals, 0.0), decreasing=True, source=evaluate)
    return GreenSolution(
        alpha=alpha,
        profile=profile,
        A_alpha=g0.A_alpha - math.log(1.0 - alpha) / dim.beta_N,
        log_coefficient=g0.log_coefficient,
        norm_N=profile.lp_power(N),
        r0=g0.r0,
        bracket=g0.bracket,
        evaluate=evaluate,
        flux=flux,
    )


DEFAULT_ANNULI = (1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 4.0)


def _flux_from_profile(u: RadialProfile, i: int) -> float:
    """r^{N-1}|G'|^{N-2}G' at node i from a 5-point stencil in t."""
    g = u.grid
    N = g.N
    v = u.values
    dvdt = (-v[i + 2] + 8 * v[i + 1] - 8 * v[i - 1] + v[i - 2]) / (12 * g.h)
    r = g.r_nodes[i]
    dGdr = -N * dvdt / r
    return r ** (N - 1) * abs(dGdr) ** (N - 2) * dGdr


def green_direct_check(g: GreenSolution, dim: Dimension | None = None, radii=DEFAULT_ANNULI) -> float:
    """Largest weak-form defect over annuli between consecutive test radii.

    For each annulus [a, b] the flux jump s(b) - s(a), with s taken from
    high-order differences of the sampled profile, is compared with
    (1 - alpha) int_a^b G^{N-1} r^{N-1} dr by composite Simpson in t.
    """
    u = g.profile
    grid = u.grid
    N = grid.N
    tau = 1.0 - g.alpha
    idx = sorted({grid.nearest_index(float(grid.t_of_r(r))) for r in radii}, reverse=True)
    # indices decrease as r increases; keep each annulus at an even node count
    dens = u.values ** (N - 1) * grid.r_nodes**N / N  # G^{N-1} r^{N-1} dr = G^{N-1} r^N/N dt
    worst = 0.0
    for i_out, i_in in zip(idx[1:], idx[:-1]):
        lo_i, hi_i = i_out, i_in
        if (hi_i - lo_i) % 2:
            hi_i -= 1
        seg = dens[lo_i : hi_i + 1]
        simpson = grid.h / 3 * (seg[0] + seg[-1] + 4 * seg[1:-1:2].sum() + 2 * seg[2:-1:2].sum())
        jump = _flux_from_profile(u, lo_i) - _flux_from_profile(u, hi_i)
        worst = max(worst, abs(jump - tau * simpson))
    return float(worst)
