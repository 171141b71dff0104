"""Sample-feasible linear fits.

The fit minimises the mean gap ``G(k_i) - (w k_i + b)`` subject to the line
staying below every constraint sample.  Since the mean gap equals
``mean(G) - line(k_bar)`` at the sample centroid ``k_bar``, the optimum is the
lower convex hull of the constraint samples evaluated at ``k_bar``, and the
optimal lines are the supporting lines of the hull through that point.
Among those we take the smallest ``|w|`` (then the smallest ``b``, which is
then unique).  This equals the answer of exhaustive support-pair
enumeration, at O(n_left * n_right) per fit and vectorised over pixels.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from ..errors import DegenerateSamples
from .segments import LinearSegment

_CHUNK = 256


class Side(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


def hull_support(xs, ys, xbar):
    """Best supporting line below the samples at ``xbar``.

    ``xs`` shape ``(n,)`` shared by every row of ``ys`` (shape ``(P, n)``).
    Returns ``(w, b)`` arrays of shape ``(P,)``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    # a sample a few ulps from the centroid would give meaningless slope ratios
    near = np.abs(xs - xbar) <= 1e-12 * max(1.0, np.abs(xs).max(initial=0.0))
    if near.any():
        xbar = float(xs[near][0])
    left = xs < xbar
    right = xs > xbar
    at = ~(left | right)
    xl, xr = xs[left], xs[right]
    if (len(xl) == 0 or len(xr) == 0) and not at.any():
        raise DegenerateSamples("centroid lies outside the constraint samples")
    t = (xbar - xl[:, None]) / (xr[None, :] - xl[:, None])

    ws, bs = [], []
    for s in range(0, ys.shape[0], _CHUNK):
        y = ys[s:s + _CHUNK]
        yl, yr = y[:, left], y[:, right]
        m = np.full(y.shape[0], np.inf)
        if at.any():
            m = y[:, at].min(axis=1)
        if len(xl) and len(xr):
            chords = yl[:, :, None] * (1.0 - t) + yr[:, None, :] * t
            m = np.minimum(m, chords.min(axis=(1, 2)))
        # feasible slopes of lines through (xbar, m)
        wmin = np.max((yl - m[:, None]) / (xl - xbar), axis=1) if len(xl) else np.full(len(m), -np.inf)
        wmax = np.min((yr - m[:, None]) / (xr - xbar), axis=1) if len(xr) else np.full(len(m), np.inf)
        w = np.minimum(np.maximum(0.0, wmin), np.maximum(wmax, wmin))
        ws.append(w)
        bs.append(m - w * xbar)
    return np.concatenate(ws), np.concatenate(bs)


def fit_batch(xs, ys, xbar, side: Side):
    if Side(side) is Side.LOWER:
        return hull_support(xs, ys, xbar)
    w, b = hull_support(xs, -np.asarray(ys, dtype=float), xbar)
    return -w, -b


def fit_segment(samples, side: Side = Side.LOWER, constraints=None, subdomain=None) -> LinearSegment:
    """Fit one segment to ``samples`` (pairs ``(kappa, G)``).

    ``constraints`` optionally adds further ``(kappa, G)`` pairs the line must
    respect without entering the objective.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(pts) < 2 or np.ptp(pts[:, 0]) == 0:
        raise DegenerateSamples("need at least two samples with distinct kappa")
    xbar = float(pts[:, 0].mean())
    allp = pts if constraints is None else np.vstack([pts, np.asarray(constraints, float).reshape(-1, 2)])
    w, b = fit_batch(allp[:, 0], allp[None, :, 1], xbar, side)
    lo, hi = (pts[:, 0].min(), pts[:, 0].max()) if subdomain is None else subdomain
    return LinearSegment(float(w[0]), float(b[0]), float(lo), float(hi))
