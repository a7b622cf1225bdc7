"""Projected ascent for the perturbed Moser-Trudinger functional.

The search runs over non-increasing, nonnegative radial profiles on the unit
sphere of W^{1,N}. Each iteration takes a Sobolev-preconditioned gradient
step, projects onto monotone profiles with weighted PAV, and rescales back
to unit norm. Step lengths come from Armijo backtracking on the functional
itself, so accepted steps never decrease the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .battery import SEED_NAMES, named_profile
from .dims import Dimension, phi_N_prime
from .errors import ConstraintError, SaturationError
from .functional import CONSTRAINT_TOL, FunctionalParams, exponent_coefficient, mt_functional
from .radial import RadialGrid, RadialProfile, full_sobolev_norm, pav_nondecreasing

REL_TOL = 1e-10
ARMIJO = 1e-4
MAX_HALVINGS = 60
# largest alpha accepted for runs at beta = beta_N
CRITICAL_ALPHA_MAX = 0.05


@dataclass(frozen=True)
class Multipliers:
    lam: float
    alpha_eps: float
    gamma_eps: float


@dataclass(frozen=True)
class Concentration:
    c0: float
    lN_mass: float
    r_concentration: float


@dataclass(frozen=True)
class MaximizerReport:
    profile: RadialProfile
    value: float
    multipliers: Multipliers
    el_residual: float
    concentration: Concentration
    iterations: int
    converged: bool
    experimental: bool = False
    history: tuple = field(default=(), repr=False)
    rejected_saturated: int = 0


def _grad_factor(grid: RadialGrid) -> float:
    dim = grid.dim
    return dim.omega * dim.N ** (dim.N - 1) * grid.h


def _parts(v: np.ndarray, grid: RadialGrid) -> tuple[float, float]:
    N = grid.N
    K = _grad_factor(grid)
    dv = np.diff(v) / grid.h
    return K * math.fsum(np.abs(dv) ** N), math.fsum(grid.weights * np.abs(v) ** N)


def _constraint_grad(v: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Gradient of ||grad v||_N^N + ||v||_N^N with respect to the node values."""
    N = grid.N
    K = _grad_factor(grid)
    dv = np.diff(v) / grid.h
    flux = np.abs(dv) ** (N - 2) * dv
    g = np.zeros_like(v)
    g[:-1] -= flux
    g[1:] += flux
    g *= K * N / grid.h
    g += N * grid.weights * np.abs(v) ** (N - 1)
    return g


def _functional_grad(v: np.ndarray, grid: RadialGrid, p: FunctionalParams) -> tuple[np.ndarray, float]:
    """Gradient of the discretized functional, and lambda."""
    dim = grid.dim
    N = dim.N
    q = dim.conj
    W = grid.weights
    m = math.fsum(W * v**N)
    b = p.beta * (1.0 + p.alpha * m) ** (1.0 / (N - 1))
    vq = v**q
    dphi = phi_N_prime(b * vq, dim)
    lam = math.fsum(W * dphi * vq)
    db = b * p.alpha / ((N - 1) * (1.0 + p.alpha * m))
    g = W * dphi * b * q * v ** (1.0 / (N - 1)) + lam * db * N * W * v ** (N - 1)
    return g, lam


def _preconditioner(v: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Upper banded storage of a regularized Hessian of the constraint."""
    N = grid.N
    K = _grad_factor(grid)
    h = grid.h
    dv = np.abs(np.diff(v) / h)
    a = dv ** (N - 2)
    a = np.maximum(a, 1e-3 * max(a.max(), 1e-300)) if N > 2 else a
    c = np.abs(v) ** (N - 2)
    c = np.maximum(c, 1e-3 * max(c.max(), 1e-300)) if N > 2 else c
    scale = K * N * (N - 1) / h**2
    diag = np.zeros_like(v)
    diag[:-1] += scale * a
    diag[1:] += scale * a
    diag += N * (N - 1) * grid.weights * c
    ab = np.zeros((2, v.size))
    ab[0, 1:] = -scale * a
    ab[1] = diag
    return ab


def _project(v: np.ndarray, grid: RadialGrid) -> np.ndarray:
    w = np.maximum(pav_nondecreasing(v, grid.weights), 0.0)
    g, mass = _parts(w, grid)
    total = g + mass
    if total <= 0:
        raise ConstraintError("projection collapsed to zero")
    return w / total ** (1.0 / grid.N)


def _value(v, grid, p) -> float:
    u = RadialProfile(grid=grid, values=v, decreasing=True)
    return mt_functional(u, p)


def _check_unit(u: RadialProfile) -> None:
    nrm = full_sobolev_norm(u)
    if abs(nrm - 1.0) > CONSTRAINT_TOL:
        raise ConstraintError(f"profile must have unit norm, got {nrm!r}")


def el_multipliers(u: RadialProfile, p: FunctionalParams, dim: Optional[Dimension] = None) -> Multipliers:
    """(lambda, alpha_eps, gamma_eps) of the Euler-Lagrange system at u."""
    _check_unit(u)
    dim = dim or u.dim
    N = dim.N
    m = u.lp_power(N)
    b = exponent_coefficient(u, p)
    vq = np.abs(u.values) ** dim.conj
    lam = math.fsum(u.grid.weights * phi_N_prime(b * vq, dim) * vq)
    a_eps = (1.0 + p.alpha * m) / (1.0 + 2.0 * p.alpha * m)
    g_eps = p.alpha / (1.0 + 2.0 * p.alpha * m)
    return Multipliers(lam=lam, alpha_eps=a_eps, gamma_eps=g_eps)


def test_battery(grid: RadialGrid) -> list[np.ndarray]:
    """Compactly supported radial test functions, smooth in t = -N ln r.

    Annular cos^2 bumps and smooth plateaus equal to one on a ball.
    """
    t = grid.t_nodes
    out = []
    for tc in np.arange(-8.0, 12.5, 1.0):
        s = (t - tc) / 1.5
        out.append(np.where(np.abs(s) < 1, np.cos(0.5 * np.pi * s) ** 2, 0.0))
    for tc in np.arange(-6.0, 10.5, 2.0):
        s = (t - tc) / 2.0
        ramp = np.where(s <= -1, 0.0, np.where(s >= 0, 1.0, np.sin(0.5 * np.pi * (s + 1)) ** 2))
        out.append(ramp)
    return out


def el_residual(u: RadialProfile, p: FunctionalParams, dim: Optional[Dimension] = None) -> float:
    """Largest weak-form defect of the Euler-Lagrange equation over the battery.

    Each defect is divided by the W^{1,N} norm of its test function.
    """
    dim = dim or u.dim
    mult = el_multipliers(u, p, dim)
    grid = u.grid
    N = dim.N
    W = grid.weights
    v = np.abs(u.values)
    b = exponent_coefficient(u, p)
    dphi = phi_N_prime(b * v**dim.conj, dim)
    K = _grad_factor(grid)
    dv = np.diff(v) / grid.h
    flux = np.abs(dv) ** (N - 2) * dv
    source = (mult.alpha_eps / mult.lam) * v ** (1.0 / (N - 1)) * dphi + (mult.gamma_eps - 1.0) * v ** (N - 1)
    worst = 0.0
    for psi in test_battery(grid):
        lhs = K * math.fsum(flux * np.diff(psi) / grid.h)
        rhs = math.fsum(W * source * psi)
        g, mass = _parts(psi, grid)
        worst = max(worst, abs(lhs - rhs) / (g + mass) ** (1.0 / N))
    return worst


def concentration_diagnostics(u: RadialProfile, p: FunctionalParams, dim: Optional[Dimension] = None) -> Concentration:
    """u(0), ||u||_N^N and the blow-up scale r from the multipliers."""
    dim = dim or u.dim
    N = dim.N
    mult = el_multipliers(u, p, dim)
    c0 = float(u.values[-1])
    m = u.lp_power(N)
    cq = c0**dim.conj
    log_rN = (
        math.log(mult.lam / mult.alpha_eps)
        - math.log(cq)
        - p.beta * (1.0 + p.alpha * m) ** (1.0 / (N - 1)) * cq
    )
    # underflow to zero is a legitimate answer for concentrated profiles
    r_conc = math.exp(log_rN / N) if log_rN / N > -745 else 0.0
    return Concentration(c0=c0, lN_mass=m, r_concentration=r_conc)


def maximize(
    p: FunctionalParams,
    dim: Dimension,
    seed: RadialProfile,
    budget: int = 2000,
    rel_tol: float = REL_TOL,
) -> MaximizerReport:
    """Preconditioned projected ascent started from ``seed``.

    Stops when the relative value change of an accepted step drops below
    ``rel_tol`` or after ``budget`` iterations. Steps that saturate the
    exponential are rejected and the step length halved.
    """
    if p.beta > dim.beta_N * (1 + 1e-14):
        raise ValueError("beta above the sharp exponent")
    experimental = p.beta >= dim.beta_N * (1 - 1e-14)
    if experimental and p.alpha > CRITICAL_ALPHA_MAX:
        raise ValueError(f"critical runs need alpha <= {CRITICAL_ALPHA_MAX}")
    _check_unit(seed)
    grid = seed.grid
    N = dim.N
    v = _project(np.abs(seed.values), grid)
    J = _value(v, grid, p)
    history = [J]
    step = 1.0
    converged = False
    rejected = 0
    it = 0
    for it in range(1, budget + 1):
        gJ, _ = _functional_grad(v, grid, p)
        gC = _constraint_grad(v, grid)
        mu = float(np.dot(gJ, v)) / N
        g = gJ - mu * gC
        d = solveh_banded(_preconditioner(v, grid), g)
        slope = float(np.dot(g, d))
        if not slope > 0:
            converged = True
            break
        s = min(2.0 * step, 1e6)
        accepted = False
        for _ in range(MAX_HALVINGS):
            try:
                w = _project(v + s * d, grid)
                Jw = _value(w, grid, p)
            except (SaturationError, ConstraintError):
                rejected += 1
                s *= 0.5
                continue
            if Jw >= J + ARMIJO * s * slope:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            converged = True
            break
        assert Jw >= J, "ascent must be monotone"
        change = (Jw - J) / abs(Jw)
        v, J, step = w, Jw, s
        history.append(J)
        if change < rel_tol:
            converged = True
            break
    u = RadialProfile(grid=grid, values=v, decreasing=True)
    return MaximizerReport(
        profile=u,
        value=J,
        multipliers=el_multipliers(u, p, dim),
        el_residual=el_residual(u, p, dim),
        concentration=concentration_diagnostics(u, p, dim),
        iterations=it,
        converged=converged,
        experimental=experimental,
        history=tuple(history),
        rejected_saturated=rejected,
    )


def seed_profile(name: str, dim: Dimension, grid: Optional[RadialGrid] = None) -> RadialProfile:
    """Named seed on a common grid, normalized to the unit sphere."""
    if name not in SEED_NAMES:
        raise ValueError(f"unknown seed {name!r}; choose from {SEED_NAMES}")
    return named_profile(name, dim, grid)


maximize.__test__ = False
test_battery.__test__ = False
