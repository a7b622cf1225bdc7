"""Named unit-norm radial profiles used as seeds and test batteries."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .dims import Dimension
from .radial import RadialGrid, RadialProfile, normalize_to_sphere

PROFILE_NAMES = ("gaussian", "exponential", "lorentzian", "sech", "moser5", "ground_state")
# five shapes for the scaling-curve derivative at small beta
SCALING_BATTERY = ("gaussian", "exponential", "lorentzian", "sech", "moser5")
SEED_NAMES = ("gaussian", "moser5", "ground_state")

_CLOSED_FORMS = {
    "gaussian": lambda r: np.exp(-(r**2)),
    "exponential": lambda r: np.exp(-r),
    "lorentzian": lambda r: (1.0 + r**2) ** -2,
    "sech": lambda r: 1.0 / np.cosh(np.minimum(r, 700.0)),
}


def named_profile(name: str, dim: Dimension, grid: Optional[RadialGrid] = None) -> RadialProfile:
    """Profile ``name`` on ``grid`` (default uniform), scaled to unit W^{1,N} norm."""
    grid = grid or RadialGrid.uniform(dim)
    if name in _CLOSED_FORMS:
        u = RadialProfile.from_function(grid, _CLOSED_FORMS[name], decreasing=True)
    elif name == "moser5":
        from .sequences import MoserParams, moser_profile

        u = moser_profile(MoserParams(k=5.0), dim, grid=grid)
    elif name == "ground_state":
        if dim.N != 2:
            raise ValueError("the ground-state profile exists for N = 2 only")
        from .odes import gn_ground_state

        u = gn_ground_state(grid=grid).profile
    else:
        raise ValueError(f"unknown profile {name!r}; choose from {PROFILE_NAMES}")
    return normalize_to_sphere(u)
