"""Linear segments, piecewise-linear bound containers and polytope area."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EmptyDomain


@dataclass(frozen=True)
class LinearSegment:
    w: float
    b: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.w) and np.isfinite(self.b)):
            raise ValueError("segment coefficients must be finite")
        if not self.lo <= self.hi:
            raise EmptyDomain(f"empty subdomain [{self.lo}, {self.hi}]")

    @property
    def subdomain(self):
        return (self.lo, self.hi)

    def __call__(self, kappa):
        return self.w * np.asarray(kappa, dtype=float) + self.b


def split_domain(B, q: int):
    """``q`` equal-width contiguous pieces of ``B``; shared ends are identical floats."""
    lo, hi = float(B[0]), float(B[1])
    if q < 1:
        raise ValueError("q must be >= 1")
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise EmptyDomain(f"invalid domain [{lo}, {hi}]")
    edges = [lo + (hi - lo) * k / q for k in range(q + 1)]
    edges[-1] = hi
    return [(edges[k], edges[k + 1]) for k in range(q)]


def _lines(segs):
    return np.array([s.w for s in segs]), np.array([s.b for s in segs])


def envelope_max(segs, kappa):
    w, b = _lines(segs)
    k = np.asarray(kappa, dtype=float)
    return np.max(w * k[..., None] + b, axis=-1)


def envelope_min(segs, kappa):
    w, b = _lines(segs)
    k = np.asarray(kappa, dtype=float)
    return np.min(w * k[..., None] + b, axis=-1)


def _crossings(segs, lo, hi):
    w, b = _lines(segs)
    out = []
    for a in range(len(segs)):
        for c in range(a + 1, len(segs)):
            dw = w[a] - w[c]
            if dw != 0:
                x = (b[c] - b[a]) / dw
                if lo < x < hi:
                    out.append(x)
    return out


@dataclass(frozen=True, eq=False)
class PiecewiseLinearBound:
    """Per-pixel lower/upper segment lists with their soundness shifts.

    The unsound bounds are the max (lower) and min (upper) of the segment
    lines, each line taken over all of ``B``; the sound bounds subtract
    ``shift_lower`` / add ``shift_upper``.
    """

    lower: Sequence[LinearSegment]
    upper: Sequence[LinearSegment]
    shift_lower: float = 0.0
    shift_upper: float = 0.0
    epsilon: float = 0.0
    sound: bool = True
    iterations: tuple = (0, 0)
    exhausted: tuple = (False, False)
    budget: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(self.lower))
        object.__setattr__(self, "upper", tuple(self.upper))
        if not self.lower or len(self.lower) != len(self.upper):
            raise ValueError("lower and upper need the same non-zero number of segments")
        if self.shift_lower < 0 or self.shift_upper < 0:
            raise ValueError("shifts must be >= 0")
        for a, c in zip(self.lower, self.upper):
            if a.subdomain != c.subdomain:
                raise ValueError("lower and upper segments must share one partition")

    @property
    def domain(self):
        return (self.lower[0].lo, self.lower[-1].hi)

    @property
    def partition(self):
        return [s.subdomain for s in self.lower]

    @property
    def breaks(self):
        return [self.lower[0].lo] + [s.hi for s in self.lower]

    @property
    def warnings(self) -> int:
        return int(sum(self.exhausted))

    def lb(self, kappa):
        return envelope_max(self.lower, kappa)

    def ub(self, kappa):
        return envelope_min(self.upper, kappa)

    def lb_star(self, kappa):
        return self.lb(kappa) - self.shift_lower

    def ub_star(self, kappa):
        return self.ub(kappa) + self.shift_upper

    def kinks(self, lo=None, hi=None):
        """Sorted points in ``[lo, hi]`` between which both envelopes are linear."""
        d0, d1 = self.domain
        lo = d0 if lo is None else lo
        hi = d1 if hi is None else hi
        pts = {lo, hi, *_crossings(self.lower, lo, hi), *_crossings(self.upper, lo, hi)}
        return np.array(sorted(pts))

    def value_range(self, lo=None, hi=None):
        """Exact ``(min LB*, max UB*)`` over ``[lo, hi]`` (defaults to ``B``)."""
        k = self.kinks(lo, hi)
        return float(self.lb_star(k).min()), float(self.ub_star(k).max())


def polytope_area(b: PiecewiseLinearBound) -> float:
    """Exact integral of ``UB* - LB*`` over ``B``."""
    k = b.kinks()
    gap = b.ub_star(k) - b.lb_star(k)
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(k)))
