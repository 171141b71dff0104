"""Piecewise-linear bound synthesis for pixel curves."""
from .fitting import Side, fit_segment
from .lipo import eps_max, f_bound
from .segments import LinearSegment, PiecewiseLinearBound, polytope_area, split_domain
from .synthesis import (
    BoundConfig,
    BoundSet,
    LipschitzBudget,
    bound_image,
    bound_pixel,
    lipschitz_constant,
)

__all__ = [
    "Side", "fit_segment", "eps_max", "f_bound", "LinearSegment", "PiecewiseLinearBound",
    "polytope_area", "split_domain", "BoundConfig", "BoundSet", "LipschitzBudget",
    "bound_image", "bound_pixel", "lipschitz_constant",
]
