"""Dimension constants and truncated exponentials.

Everything downstream is parametrised by a :class:`Dimension`, which bundles
the sphere area, the sharp Moser exponent and the bubble constant for a
space dimension N >= 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SaturationWarning

# natural-log cap on exponents; above it values are flagged as saturated
EXP_CAP = 700.0
SERIES_SWITCH = 0.5


@dataclass(frozen=True)
class Dimension:
    N: int
    omega: float
    beta_N: float
    c_N: float

    @property
    def conj(self) -> float:
        """Hölder conjugate N/(N-1), the power on |u| inside the exponential."""
        return self.N / (self.N - 1)


def _gamma_half(n: int) -> float:
    """Gamma(n/2) by recursion from Gamma(1) = 1 and Gamma(1/2) = sqrt(pi)."""
    if n % 2 == 0:
        g, x = 1.0, 1.0
    else:
        g, x = math.sqrt(math.pi), 0.5
    while x < n / 2:
        g *= x
        x += 1.0
    return g


def make_dimension(N: int) -> Dimension:
    if int(N) != N or N < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {N!r}")
    N = int(N)
    omega = 2.0 * math.pi ** (N / 2) / _gamma_half(N)
    beta_N = N * omega ** (1.0 / (N - 1))
    c_N = (omega / N) ** (1.0 / (N - 1))
    return Dimension(N=N, omega=omega, beta_N=beta_N, c_N=c_N)


def truncated_exp(t, m: int):
    """Return ``(e^t - sum_{k<m} t^k/k!, saturated)`` for t >= 0.

    Below :data:`SERIES_SWITCH` the tail series is summed directly, which
    avoids the cancellation of the subtraction form. Arguments above
    :data:`EXP_CAP` are clamped to the cap and reported in ``saturated``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("truncated exponentials are defined for t >= 0 only")
    saturated = t > EXP_CAP
    tc = np.minimum(t, EXP_CAP)
    out = np.empty_like(tc)

    small = tc < SERIES_SWITCH
    if np.any(small):
        ts = tc[small]
        term = ts**m / math.factorial(m)
        acc = term.copy()
        k = m
        while True:
            k += 1
            term = term * ts / k
            acc += term
            if np.all(term <= 1e-16 * acc):
                break
        out[small] = acc
    big = ~small
    if np.any(big):
        tb = tc[big]
        partial = np.zeros_like(tb)
        term = np.ones_like(tb)
        for k in range(m):
            partial += term
            term = term * tb / (k + 1)
        out[big] = np.exp(tb) - partial
    if out.ndim == 0:
        return float(out), bool(saturated)
    return out, saturated


def _flagged(values, saturated, flag):
    if flag:
        return values, saturated
    if np.any(saturated):
        warnings.warn(
            f"exponent above cap {EXP_CAP:g}; returning saturated value",
            SaturationWarning,
            stacklevel=3,
        )
    return values


def phi_N(t, dim: Dimension, *, flag: bool = False):
    """Phi_N(t) = e^t - sum_{k=0}^{N-2} t^k/k!."""
    return _flagged(*truncated_exp(t, dim.N - 1), flag)


def psi_N(t, dim: Dimension, *, flag: bool = False):
    """Psi_N(t) = Phi_N(t) - t^{N-1}/(N-1)!, i.e. one more Taylor term removed."""
    return _flagged(*truncated_exp(t, dim.N), flag)


def phi_N_prime(t, dim: Dimension, *, flag: bool = False):
    # Phi_N' = Phi_N + t^{N-2}/(N-2)!, which is the exponential truncated one term earlier
    return _flagged(*truncated_exp(t, dim.N - 2), flag)


def harmonic_sum(dim: Dimension) -> float:
    return math.fsum(1.0 / k for k in range(1, dim.N))
