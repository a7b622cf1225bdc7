"""The Moser-Trudinger functional with the L^N-norm perturbation.

For a radial profile u with m = ||u||_N^N the functional is

    J(u) = int Phi_N( beta (1 + alpha m)^{1/(N-1)} |u|^{N/(N-1)} ) dx,

evaluated with the grid quadrature of :mod:`mtlab.radial`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dims import Dimension, phi_N, psi_N
from .errors import ConstraintError, SaturationError, SaturationWarning, StepSizeError
from .radial import (
    RadialProfile,
    full_sobolev_norm,
    normalize_to_sphere,
    scale_family,
)

CONSTRAINT_TOL = 1e-9
ISHIWATA_STEP = 1e-4
SERIES_REL_CUTOFF = 1e-14


@dataclass(frozen=True)
class FunctionalParams:
    beta: float
    alpha: float = 0.0
    allow_supercritical: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def check_against(self, dim: Dimension) -> None:
        if self.beta > dim.beta_N * (1 + 1e-14) and not self.allow_supercritical:
            raise ValueError(
                f"beta={self.beta} exceeds the sharp exponent {dim.beta_N}; "
                "set allow_supercritical to evaluate anyway"
            )


@dataclass(frozen=True)
class Evaluation:
    value: float
    saturated: int


def exponent_coefficient(u: RadialProfile, p: FunctionalParams) -> float:
    """beta (1 + alpha ||u||_N^N)^{1/(N-1)}."""
    N = u.dim.N
    return p.beta * (1.0 + p.alpha * u.lp_power(N)) ** (1.0 / (N - 1))


def _check_constraint(u: RadialProfile, enforce: bool) -> None:
    if not enforce:
        return
    nrm = full_sobolev_norm(u)
    if nrm > 1.0 + CONSTRAINT_TOL:
        raise ConstraintError(f"full Sobolev norm {nrm!r} exceeds 1 + {CONSTRAINT_TOL:g}")


def _integrate(u, p, fn, enforce_constraint, allow_saturation) -> Evaluation:
    dim = u.dim
    p.check_against(dim)
    _check_constraint(u, enforce_constraint)
    q = dim.N / (dim.N - 1)
    arg = exponent_coefficient(u, p) * np.abs(u.values) ** q
    vals, sat = fn(arg, dim, flag=True)
    nsat = int(np.count_nonzero(sat))
    if nsat and not (allow_saturation or p.allow_supercritical):
        raise SaturationError(f"{nsat} nodes exceed the exponent cap")
    if nsat:
        warnings.warn(f"{nsat} saturated nodes", SaturationWarning, stacklevel=3)
    return Evaluation(value=math.fsum(u.grid.weights * vals), saturated=nsat)


def mt_functional(
    u: RadialProfile,
    p: FunctionalParams,
    *,
    enforce_constraint: bool = True,
    allow_saturation: bool = False,
    detailed: bool = False,
):
    ev = _integrate(u, p, phi_N, enforce_constraint, allow_saturation)
    return ev if detailed else ev.value


def mt_functional_psi(
    u: RadialProfile,
    p: FunctionalParams,
    *,
    enforce_constraint: bool = True,
    allow_saturation: bool = False,
    detailed: bool = False,
):
    """Same as :func:`mt_functional` with the Taylor term of order N-1 removed."""
    ev = _integrate(u, p, psi_N, enforce_constraint, allow_saturation)
    return ev if detailed else ev.value


def psi_gap(u: RadialProfile, p: FunctionalParams) -> float:
    """Closed form of mt_functional - mt_functional_psi."""
    N = u.dim.N
    m = u.lp_power(N)
    return p.beta ** (N - 1) * (1.0 + p.alpha * m) * m / math.factorial(N - 1)


def tau_reduction_nodes(u: RadialProfile, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise sides of the tau-rescaling inequality.

    With tau = 1 - alpha and w = u / (||grad u||_N^N + tau ||u||_N^N)^{1/N},
    returns (1 + alpha ||u||_N^N)^{1/(N-1)} |u|^{N/(N-1)} and |w|^{N/(N-1)}.
    On the unit ball the first never exceeds the second.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    N = u.dim.N
    q = N / (N - 1)
    m = u.lp_power(N)
    g = u.grad_power()
    tau = 1.0 - alpha
    absu = np.abs(u.values) ** q
    lhs = (1.0 + alpha * m) ** (1.0 / (N - 1)) * absu
    denom = (g + tau * m) ** (1.0 / (N - 1))
    rhs = absu / denom if denom > 0 else np.zeros_like(absu)
    return lhs, rhs


def tau_reduction_check(u: RadialProfile, alpha: float) -> tuple[float, float]:
    _check_constraint(u, True)
    lhs, rhs = tau_reduction_nodes(u, alpha)
    i = int(np.argmax(lhs))
    return float(lhs[i]), float(rhs[i])


def lower_bound_expansion(v: RadialProfile, p: FunctionalParams, t) -> np.ndarray:
    """Small-t expansion of J on the normalized scaling family v_t / ||v_t||.

    Constant, linear and t^{1/(N-1)} terms; the remainder is o(t^{1/(N-1)}).
    """
    N = v.dim.N
    beta, alpha = p.beta, p.alpha
    g = v.grad_power()
    a = v.lp_power(N)
    pq = N * N / (N - 1)
    t = np.asarray(t, dtype=float)
    c0 = beta ** (N - 1) * (1 + alpha) / math.factorial(N - 1)
    c1 = beta ** (N - 1) * (1 + 2 * alpha) / math.factorial(N - 1) * g / a
    c2 = (
        beta**N
        / math.factorial(N)
        * (1 + alpha) ** (N / (N - 1))
        * v.lp_power(pq)
        / a ** (N / (N - 1))
    )
    return c0 - c1 * t + c2 * t ** (1.0 / (N - 1))


def lower_bound_curve(
    v: RadialProfile, p: FunctionalParams, t_values: Sequence[float]
) -> list[tuple[float, float, float]]:
    """(t, J on the normalized family, expansion) for each t."""
    if not np.any(v.values):
        raise ValueError("profile must not vanish identically")
    out = []
    for t in t_values:
        w = normalize_to_sphere(scale_family(v, float(t)))
        J = mt_functional(w, p)
        E = float(lower_bound_expansion(v, p, t))
        out.append((float(t), float(J), E))
    return out


def lower_bound_threshold(p: FunctionalParams, dim: Dimension) -> float:
    """beta^{N-1}(1+alpha)/(N-1)!, the level the scaled family must beat."""
    N = dim.N
    return p.beta ** (N - 1) * (1 + p.alpha) / math.factorial(N - 1)


@dataclass(frozen=True)
class IshiwataResult:
    derivative: float
    series: float
    forward: float
    backward: float
    terms: int


def scaled_curve_value(v: RadialProfile, p: FunctionalParams, t: float) -> float:
    """J[w_t] for w_t = v_t/||v_t||_{W^{1,2}}, pulled back to the grid of v.

    Substituting y = t^{1/2} x turns the integral over w_t into
    t^{-1} int Phi_2(beta t (1 + alpha a/n^2) v(y)^2 / n^2) dy with
    n^2 = t ||grad v||^2 + ||v||^2 and a = ||v||^2, so no resampling is needed.
    """
    g = v.grad_power()
    a = v.lp_power(2)
    n2 = t * g + a
    c = p.beta * t * (1.0 + p.alpha * a / n2) / n2
    vals = phi_N(c * v.values**2, v.dim)
    return math.fsum(v.grid.weights * vals) / t


def ishiwata_derivative(v: RadialProfile, p: FunctionalParams, step: float = ISHIWATA_STEP) -> IshiwataResult:
    """d/dt J[w_t] at t = 1 along the normalized scaling curve, N = 2.

    Central differences at h and h/2 combined by Richardson extrapolation;
    the power series in beta is summed as an independent estimate.
    """
    if v.dim.N != 2:
        raise ValueError("the scaling-curve derivative is implemented for N = 2")
    nrm = full_sobolev_norm(v)
    if abs(nrm - 1.0) > CONSTRAINT_TOL:
        raise ConstraintError(f"profile must have unit norm, got {nrm!r}")

    def J(t):
        return scaled_curve_value(v, p, t)

    J0 = J(1.0)
    Jp, Jm = J(1.0 + step), J(1.0 - step)
    Jp2, Jm2 = J(1.0 + step / 2), J(1.0 - step / 2)
    fwd = (Jp - J0) / step
    bwd = (J0 - Jm) / step
    if abs(fwd - bwd) > 1e-3 * max(abs(fwd), abs(bwd)):
        raise StepSizeError(f"one-sided differences disagree: {fwd!r} vs {bwd!r}")
    d1 = (Jp - Jm) / (2 * step)
    d2 = (Jp2 - Jm2) / step
    deriv = (4.0 * d2 - d1) / 3.0
    series, nterms = ishiwata_series(v, p)
    return IshiwataResult(derivative=deriv, series=series, forward=fwd, backward=bwd, terms=nterms)


def ishiwata_series(v: RadialProfile, p: FunctionalParams, max_terms: int = 400) -> tuple[float, int]:
    """Term-by-term derivative of the power series of J[w_t] at t = 1."""
    beta, alpha = p.beta, p.alpha
    a = v.lp_power(2)
    g = v.grad_power()
    b = 1.0 + alpha * a
    W = v.grid.weights
    v2 = v.values**2
    total = 0.0
    pw = v2.copy()
    coef = beta
    for j in range(1, max_terms + 1):
        norm_j = math.fsum(W * pw)
        bracket = -j * alpha * a * g + (j - 1) * b - j * g * b
        term = coef * b ** (j - 1) * norm_j * bracket
        total += term
        if j > 1 and abs(term) <= SERIES_REL_CUTOFF * abs(total):
            return total, j
        pw = pw * v2
        coef = coef * beta / (j + 1)
    warnings.warn("series did not reach its cutoff", RuntimeWarning, stacklevel=2)
    return total, max_terms
