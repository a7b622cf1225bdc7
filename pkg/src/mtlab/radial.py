"""Radial functions on a grid uniform in the log variable t = -N ln r.

Arrays are stored in increasing t, so index 0 is the largest radius and the
last index the smallest. A radially decreasing profile is therefore a
non-decreasing array.

In t the volume element is dx = (omega/N) e^{-t} dt and the N-energy of a
radial function is omega N^{N-1} |du/dt|^N dt, with no weight at all. Both
facts are used throughout.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dims import Dimension, make_dimension, phi_N
from .errors import TailWarning, WindowClipWarning

DEFAULT_T_MIN = -20.0
DEFAULT_T_MAX = 60.0
DEFAULT_H = 0.01
TAIL_TOL = 1e-10
CLIP_TOL = 1e-8

# 4-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True, eq=False)
class RadialGrid:
    dim: Dimension
    t_min: float
    h: float
    n: int
    t_nodes: np.ndarray = field(init=False, repr=False)
    r_nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3 or self.h <= 0:
            raise ValueError("grid needs h > 0 and at least 3 nodes")
        t = self.t_min + self.h * np.arange(self.n, dtype=float)
        if not (t[0] < 0.0 < t[-1]):
            raise ValueError("grid window must straddle t = 0")
        r = np.exp(-t / self.dim.N)
        # trapezoid in t for (omega/N) e^{-t} f(t) dt, plus the ball r < r_min
        # on the last node (constant continuation towards the origin)
        w = (self.dim.omega / self.dim.N) * np.exp(-t) * self.h
        w[0] *= 0.5
        w[-1] *= 0.5
        w[-1] += (self.dim.omega / self.dim.N) * math.exp(-t[-1])
        for name, arr in (("t_nodes", t), ("r_nodes", r), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(
        cls,
        dim: Dimension | int,
        t_min: float = DEFAULT_T_MIN,
        t_max: float = DEFAULT_T_MAX,
        h: float = DEFAULT_H,
    ) -> "RadialGrid":
        if isinstance(dim, int):
            dim = make_dimension(dim)
        if not t_max > t_min:
            raise ValueError("t_max must exceed t_min")
        n = int(round((t_max - t_min) / h)) + 1
        if abs((n - 1) * h - (t_max - t_min)) > 1e-9 * max(1.0, t_max - t_min):
            raise ValueError("window length must be a multiple of h")
        return cls(dim=dim, t_min=float(t_min), h=float(h), n=n)

    @classmethod
    def anchored(
        cls,
        dim: Dimension | int,
        anchor: float,
        t_min: float = DEFAULT_T_MIN,
        t_max: float = DEFAULT_T_MAX,
        h: float = DEFAULT_H,
    ) -> "RadialGrid":
        """Uniform grid covering [t_min, t_max] with ``anchor`` exactly on a node."""
        if isinstance(dim, int):
            dim = make_dimension(dim)
        below = math.ceil((anchor - t_min) / h - 1e-9)
        start = anchor - below * h
        n = int(math.ceil((t_max - start) / h - 1e-9)) + 1
        return cls(dim=dim, t_min=float(start), h=float(h), n=n)

    @property
    def N(self) -> int:
        return self.dim.N

    @property
    def t_max(self) -> float:
        return float(self.t_nodes[-1])

    def same_as(self, other: "RadialGrid") -> bool:
        return (
            self.dim.N == other.dim.N
            and self.n == other.n
            and self.t_min == other.t_min
            and self.h == other.h
        )

    def t_of_r(self, r):
        return -self.dim.N * np.log(r)

    def nearest_index(self, t: float) -> int:
        return int(np.clip(round((t - self.t_min) / self.h), 0, self.n - 1))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Node values u(r_i) of a radial function.

    ``kind`` is "linear" for objects that are piecewise linear in t and
    "smooth" otherwise; it selects the resampling interpolant. ``source``,
    when present, evaluates the exact function at arbitrary radii and is
    used instead of interpolation by the transforms.
    """

    grid: RadialGrid
    values: np.ndarray
    kind: str = "smooth"
    decreasing: bool = False
    signed: bool = False
    source: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if not self.signed and np.any(v < 0):
            raise ValueError("profile values must be nonnegative")
        if self.kind not in ("smooth", "linear"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, f: Callable, **kw) -> "RadialProfile":
        return cls(grid=grid, values=f(grid.r_nodes), source=f, **kw)

    @property
    def dim(self) -> Dimension:
        return self.grid.dim

    @property
    def t(self) -> np.ndarray:
        return self.grid.t_nodes

    @property
    def r(self) -> np.ndarray:
        return self.grid.r_nodes

    def with_values(self, values, **kw) -> "RadialProfile":
        opts = dict(kind=self.kind, decreasing=self.decreasing, signed=self.signed)
        opts.update(kw)
        return RadialProfile(grid=self.grid, values=values, **opts)

    def scaled(self, c: float) -> "RadialProfile":
        src = None if self.source is None else _scaled_source(self.source, c)
        return RadialProfile(
            grid=self.grid,
            values=c * self.values,
            kind=self.kind,
            decreasing=self.decreasing and c >= 0,
            signed=self.signed,
            source=src,
        )

    @cached_property
    def _norm_cache(self) -> dict:
        return {}

    def lp_power(self, p: float) -> float:
        key = ("lp", float(p))
        cache = self._norm_cache
        if key not in cache:
            cache[key] = math.fsum(self.grid.weights * np.abs(self.values) ** p)
        return cache[key]

    def grad_power(self) -> float:
        cache = self._norm_cache
        if "grad" not in cache:
            N = self.dim.N
            slope = np.diff(self.values) / self.grid.h
            cache["grad"] = (
                self.dim.omega * N ** (N - 1) * self.grid.h * math.fsum(np.abs(slope) ** N)
            )
        return cache["grad"]


def _scaled_source(f, c):
    return lambda r: c * f(r)


def lp_norm(u: RadialProfile, p: float) -> float:
    """(omega int u^p r^{N-1} dr)^{1/p} by trapezoid in t."""
    if p < 1:
        raise ValueError("p must be >= 1")
    val = u.lp_power(p)
    if not math.isfinite(val):
        raise ValueError("non-finite L^p quadrature")
    return val ** (1.0 / p)


def grad_norm_N(u: RadialProfile, r_max: float | None = None) -> float:
    """N-norm of the gradient from per-interval slopes in t.

    Exact for functions that are piecewise linear in t with kinks at nodes.
    With ``r_max`` only the ball of that radius (snapped to a node) counts.
    """
    if r_max is None:
        val = u.grad_power()
    else:
        g = u.grid
        i0 = g.nearest_index(g.t_of_r(r_max))
        N = g.N
        slope = np.diff(u.values[i0:]) / g.h
        val = g.dim.omega * N ** (N - 1) * g.h * math.fsum(np.abs(slope) ** N)
    if not math.isfinite(val):
        raise ValueError("non-finite gradient quadrature")
    return val ** (1.0 / u.dim.N)


def full_sobolev_norm(u: RadialProfile) -> float:
    N = u.dim.N
    return (u.grad_power() + u.lp_power(N)) ** (1.0 / N)


def normalize_to_sphere(u: RadialProfile) -> RadialProfile:
    nrm = full_sobolev_norm(u)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero profile")
    return u.scaled(1.0 / nrm)


def tail_estimates(u: RadialProfile) -> dict:
    """Estimate the L^N mass and N-energy lost outside the grid window.

    Each integrand is extrapolated beyond the edge by the exponential rate
    seen over the last two nodes; a non-decaying integrand gives ``inf``.
    Estimates are relative to the corresponding in-window quantity.
    """
    g = u.grid
    N = g.N
    v = np.abs(u.values)
    dens = (g.dim.omega / N) * np.exp(-g.t_nodes) * v**N
    energy = g.dim.omega * N ** (N - 1) * np.abs(np.diff(u.values) / g.h) ** N

    def _edge(a0, a1):
        # a0 at the edge, a1 one step inside
        if a0 == 0.0:
            return 0.0
        if a1 <= a0:
            return math.inf
        rate = math.log(a1 / a0) / g.h
        return a0 / rate

    lN_total = u.lp_power(N) or 1.0
    grad_total = u.grad_power() or 1.0
    return {
        # large radii: beyond t_min
        "lN_outer": _edge(dens[0], dens[1]) / lN_total,
        "grad_outer": _edge(energy[0], energy[1]) / grad_total,
        # the inner ball is already integrated with constant continuation
        "grad_inner": _edge(energy[-1], energy[-2]) / grad_total,
    }


def check_tails(u: RadialProfile, tol: float = TAIL_TOL) -> dict:
    est = tail_estimates(u)
    bad = {k: v for k, v in est.items() if v > tol}
    if bad:
        warnings.warn(f"neglected tail above {tol:g}: {bad}", TailWarning, stacklevel=2)
    return est


def radial_decay_constant(u: RadialProfile) -> float:
    """C such that |u(r)|^N <= C r^{-(N-1)} ||u||_{W^{1,N}}^N at the window edge."""
    N = u.dim.N
    return float(u.r[0] ** (N - 1) * abs(u.values[0]) ** N / max(full_sobolev_norm(u) ** N, 1e-300))


def _resample(u: RadialProfile, a: float, b: float) -> tuple[np.ndarray, Optional[Callable]]:
    """Values of s -> a * u(s + b) on the grid of ``u`` (s is the t variable)."""
    g = u.grid
    N = g.N
    if u.source is not None:
        f = u.source
        shift = math.exp(-b / N)
        src = lambda r: a * f(r * shift)
        return src(g.r_nodes), src
    q = b / g.h
    m = int(round(q))
    if abs(q - m) < 1e-9:
        idx = np.clip(np.arange(g.n) + m, 0, g.n - 1)
        return a * u.values[idx], None
    s = g.t_nodes + b
    inside = np.clip(s, g.t_nodes[0], g.t_nodes[-1])
    if u.kind == "linear":
        vals = np.interp(inside, g.t_nodes, u.values)
    else:
        # slopes between underflowed neighbours overflow harmlessly inside PCHIP
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = PchipInterpolator(g.t_nodes, u.values, extrapolate=False)(inside)
    return a * vals, None


def _clip_fraction(u: RadialProfile, b: float) -> float:
    """Share of L^N mass and energy of ``u`` mapped outside the window by a shift b."""
    g = u.grid
    lo, hi = g.t_nodes[0] + b, g.t_nodes[-1] + b
    out = (g.t_nodes < lo - 1e-12) | (g.t_nodes > hi + 1e-12)
    if not np.any(out):
        return 0.0
    N = g.N
    w = g.weights * np.abs(u.values) ** N
    lost = math.fsum(w[out])
    tot = math.fsum(w)
    frac = lost / tot if tot > 0 else 0.0
    slope = np.abs(np.diff(u.values)) ** N
    sout = out[:-1] | out[1:]
    stot = math.fsum(slope)
    if stot > 0:
        frac = max(frac, math.fsum(slope[sout]) / stot)
    return frac


def _transform(u: RadialProfile, a: float, b: float) -> RadialProfile:
    frac = _clip_fraction(u, b)
    if frac > CLIP_TOL:
        warnings.warn(
            f"resampling moves {frac:.3g} of the mass outside the grid window",
            WindowClipWarning,
            stacklevel=3,
        )
    vals, src = _resample(u, a, b)
    return RadialProfile(
        grid=u.grid, values=vals, kind=u.kind, decreasing=u.decreasing, signed=u.signed, source=src
    )


def scale_family(v: RadialProfile, t: float) -> RadialProfile:
    """v_t(r) = t^{1/N} v(t^{1/N} r); the N-energy scales by t, L^p^p by t^{(p-N)/N}."""
    if not t > 0:
        raise ValueError("scale parameter must be positive")
    if t == 1.0:
        return v
    return _transform(v, t ** (1.0 / v.dim.N), -math.log(t))


def dilate(u: RadialProfile, R: float) -> RadialProfile:
    """u(r/R); the N-energy is unchanged and ||u||_N^N scales by R^N."""
    if not R > 0:
        raise ValueError("dilation factor must be positive")
    if R == 1.0:
        return u
    return _transform(u, 1.0, u.dim.N * math.log(R))


@dataclass(frozen=True, eq=False)
class LineProfile:
    t_nodes: np.ndarray
    w_values: np.ndarray
    dim: Dimension


def _moser_factor(dim: Dimension) -> float:
    N = dim.N
    return N ** (1.0 - 1.0 / N) * dim.omega ** (1.0 / N)


def moser_transform(u: RadialProfile) -> LineProfile:
    """w(t) = N^{1-1/N} omega^{1/N} u(e^{-t/N}) at the grid nodes."""
    w = _moser_factor(u.dim) * u.values
    w.setflags(write=False)
    return LineProfile(t_nodes=u.grid.t_nodes, w_values=w, dim=u.dim)


def inverse_moser_transform(line: LineProfile, grid: RadialGrid, **kw) -> RadialProfile:
    if line.t_nodes.shape != grid.t_nodes.shape or not np.array_equal(line.t_nodes, grid.t_nodes):
        raise ValueError("line profile does not live on this grid")
    return RadialProfile(grid=grid, values=line.w_values / _moser_factor(grid.dim), **kw)


def functional_change_of_variables(u: RadialProfile, beta: float) -> tuple[float, float]:
    """Both sides of the Moser change of variables for int Phi_N(beta |u|^{N/(N-1)}) dx.

    The left side integrates in r over each grid interval with Gauss-Legendre
    nodes and the volume element omega r^{N-1} dr; the right side integrates
    the transformed line profile in t against (omega/N) e^{-t} dt. Both use the
    interpolant that is linear in t between nodes and constant towards r = 0.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    g = u.grid
    dim = g.dim
    N = dim.N
    q = N / (N - 1)
    v = np.abs(u.values)
    t0, t1 = g.t_nodes[:-1], g.t_nodes[1:]
    r0, r1 = g.r_nodes[:-1], g.r_nodes[1:]

    # left: r-quadrature on [r1, r0] of each interval
    rr = r1[:, None] + (r0 - r1)[:, None] * _GL_X[None, :]
    tt = -N * np.log(rr)
    lam = (tt - t0[:, None]) / g.h
    uu = v[:-1, None] * (1 - lam) + v[1:, None] * lam
    integrand = phi_N(beta * uu**q, dim) * dim.omega * rr ** (N - 1)
    lhs_parts = ((r0 - r1)[:, None] * _GL_W[None, :] * integrand).sum(axis=1)
    lhs = math.fsum(lhs_parts) + phi_N(beta * v[-1] ** q, dim) * dim.omega / N * g.r_nodes[-1] ** N

    # right: t-quadrature of the line profile
    line = moser_transform(u)
    w = np.abs(line.w_values)
    ww = w[:-1, None] * (1 - _GL_X[None, :]) + w[1:, None] * _GL_X[None, :]
    tq = t0[:, None] + g.h * _GL_X[None, :]
    integrand = phi_N((beta / dim.beta_N) * ww**q, dim) * np.exp(-tq)
    rhs_parts = (g.h * _GL_W[None, :] * integrand).sum(axis=1)
    rhs = (dim.omega / N) * (
        math.fsum(rhs_parts) + phi_N((beta / dim.beta_N) * w[-1] ** q, dim) * math.exp(-g.t_nodes[-1])
    )
    return float(lhs), float(rhs)


def radial_bound_check(u: RadialProfile, form: str = "holder") -> float:
    """Empirical constant of the radial decay lemma, sup_r r^{N-1}|u(r)|^N / D.

    With ``form="holder"`` D = ||grad u||_N ||u||_N^{N-1}, which makes the
    quotient invariant under dilation. ``form="sobolev"`` uses the full norm
    ||u||_{W^{1,N}}^N instead, which is bounded by the Holder form through
    Young's inequality but changes under dilation.
    """
    N = u.dim.N
    num = np.max(u.r ** (N - 1) * np.abs(u.values) ** N)
    if num == 0.0:
        return 0.0
    if form == "holder":
        den = grad_norm_N(u) * lp_norm(u, N) ** (N - 1)
    elif form == "sobolev":
        den = full_sobolev_norm(u) ** N
    else:
        raise ValueError(f"unknown form {form!r}")
    return float(num / den)


def value_at(u: RadialProfile, r: float) -> float:
    """Linear-in-t interpolation of the node values at radius r."""
    g = u.grid
    t = float(g.t_of_r(r))
    return float(np.interp(t, g.t_nodes, u.values))


def boundary_truncate(u: RadialProfile, R: float) -> RadialProfile:
    """max(u(r) - u(R), 0) on the ball r < R and 0 outside.

    R is snapped to the nearest grid radius so that the energy over the ball
    is reproduced exactly.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    g = u.grid
    i0 = g.nearest_index(g.t_of_r(R))
    uR = u.values[i0]
    vals = np.zeros(g.n)
    vals[i0:] = np.maximum(u.values[i0:] - uR, 0.0)
    return RadialProfile(grid=g, values=vals, kind=u.kind, decreasing=u.decreasing)


def pav_nondecreasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares projection onto non-decreasing sequences.

    Only strict violations are pooled, so an input that is already monotone
    comes back unchanged bit for bit, which makes the projection idempotent.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.all(np.diff(y) >= 0):
        return y.copy()
    vals: list[float] = []
    wts: list[float] = []
    cnt: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        v, ww, c = yi, wi, 1
        while vals and vals[-1] > v:
            pv, pw, pc = vals.pop(), wts.pop(), cnt.pop()
            tw = pw + ww
            v = (pv * pw + v * ww) / tw if tw > 0 else 0.5 * (pv + v)
            ww = tw
            c += pc
        vals.append(v)
        wts.append(ww)
        cnt.append(c)
    return np.repeat(np.array(vals), np.array(cnt))


def decreasing_projection(u: RadialProfile) -> RadialProfile:
    """Nearest radially non-increasing profile in the quadrature-weighted L^2 sense."""
    vals = pav_nondecreasing(u.values, u.grid.weights)
    if not u.signed:
        vals = np.maximum(vals, 0.0)
    return RadialProfile(grid=u.grid, values=vals, kind=u.kind, decreasing=True, signed=u.signed)


def profile_to_csv(u: RadialProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "r", "value"])
        for t, r, v in zip(u.t.tolist(), u.r.tolist(), u.values.tolist()):
            wr.writerow([repr(t), repr(r), repr(v)])


def profile_from_csv(path, dim: Dimension | int, **kw) -> RadialProfile:
    if isinstance(dim, int):
        dim = make_dimension(dim)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    h = float(np.round((t[-1] - t[0]) / (len(t) - 1), 12))
    grid = RadialGrid(dim=dim, t_min=float(t[0]), h=h, n=len(t))
    if np.max(np.abs(grid.t_nodes - t)) > 1e-9 * max(1.0, np.max(np.abs(t))):
        raise ValueError("CSV t column is not a uniform grid")
    signed = bool(np.any(data[:, 2] < 0))
    return RadialProfile(grid=grid, values=data[:, 2], signed=signed, **kw)
