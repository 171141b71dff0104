"""Lipschitz branch-and-bound for an eps-maximum of a 1-D function.

For ``J`` with Lipschitz constant ``L`` on ``[k1, k2]`` the two cones from
the ends meet at height ``f_bound = (J(k1) + J(k2) + L (k2 - k1)) / 2``,
which bounds ``J`` on the whole interval.  Intervals whose ``f_bound`` does
not beat the incumbent by more than ``eps`` are discarded, the rest are
bisected.  The returned value ``best + eps`` is then an upper bound on
``max J`` and at most ``eps`` above it.

The batched engine runs many independent curves in lock step: every round
pops all live intervals at once (they share the same width, so this is
widest-first order) and each curve keeps its own incumbent and counter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IterationBudgetExhausted

_CHUNK = 1 << 16


def f_bound(j1, j2, L, width):
    return 0.5 * (j1 + j2 + L * width)


@dataclass
class BabResult:
    value: np.ndarray        # certified upper bound per curve
    best: np.ndarray         # largest J actually evaluated
    iterations: np.ndarray   # intervals popped per curve
    exhausted: np.ndarray    # budget hit; ``value`` is valid but loose


def _chunked(fn, c, lo, hi):
    if len(c) <= _CHUNK:
        return np.asarray(fn(c, lo, hi), dtype=float)
    return np.concatenate([
        np.asarray(fn(c[s:s + _CHUNK], lo[s:s + _CHUNK], hi[s:s + _CHUNK]), dtype=float)
        for s in range(0, len(c), _CHUNK)
    ])


def eps_max_batch(J, L_of, c, lo, hi, j_lo, j_hi, best, eps, max_iters) -> BabResult:
    """Run the branch-and-bound over curves ``0..len(best)-1``.

    ``J(c, k)`` evaluates curve ``c`` at ``k`` and ``L_of(c, lo, hi)`` gives a
    Lipschitz constant on ``[lo, hi]`` (both vectorised).  The arrays
    ``c, lo, hi, j_lo, j_hi`` describe the initial queue; ``best`` holds the
    incumbent per curve (at least the max of ``j_lo``/``j_hi``).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    n = len(best)
    best = np.asarray(best, dtype=float).copy()
    c = np.asarray(c, dtype=np.int64)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    j_lo, j_hi = np.asarray(j_lo, float), np.asarray(j_hi, float)
    np.maximum.at(best, c, np.maximum(j_lo, j_hi))
    iters = np.zeros(n, dtype=np.int64)
    residual = np.full(n, -np.inf)
    exhausted = np.zeros(n, dtype=bool)

    while len(c):
        L = _chunked(L_of, c, lo, hi)
        fb = f_bound(j_lo, j_hi, L, hi - lo)
        np.add.at(iters, c, 1)
        keep = fb > best[c] + eps
        over = keep & (iters[c] > max_iters)
        mid = 0.5 * (lo + hi)
        stuck = keep & ~over & ((mid <= lo) | (mid >= hi))
        if over.any():
            exhausted[c[over]] = True
        # unresolved intervals still carry a valid bound
        for mask in (over, stuck):
            if mask.any():
                np.maximum.at(residual, c[mask], fb[mask])
        keep &= ~(over | stuck | exhausted[c])
        c, lo, hi, mid = c[keep], lo[keep], hi[keep], mid[keep]
        j_lo, j_hi = j_lo[keep], j_hi[keep]
        if not len(c):
            break
        j_mid = np.asarray(J(c, mid), dtype=float)
        np.maximum.at(best, c, j_mid)
        c = np.concatenate([c, c])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        j_lo, j_hi = np.concatenate([j_lo, j_mid]), np.concatenate([j_mid, j_hi])

    value = np.maximum(best + eps, residual)
    return BabResult(value, best, iters, exhausted)


def eps_max(J, B, L_provider, eps: float, max_iters: int) -> float:
    """eps-maximum of a scalar function ``J`` over the interval ``B``.

    ``L_provider(lo, hi)`` returns a Lipschitz constant of ``J`` on
    ``[lo, hi]``.  Raises :class:`IterationBudgetExhausted` carrying the
    still-valid loose bound when ``max_iters`` intervals did not suffice.
    """
    lo, hi = float(B[0]), float(B[1])

    def J_vec(c, k):
        return np.array([J(float(x)) for x in k])

    def L_vec(c, a, b):
        return np.array([L_provider(float(x), float(y)) for x, y in zip(a, b)])

    j1, j2 = J(lo), J(hi)
    res = eps_max_batch(J_vec, L_vec, [0], [lo], [hi], [j1], [j2], [-np.inf], eps, max_iters)
    if res.exhausted[0]:
        raise IterationBudgetExhausted(float(res.value[0]), int(res.iterations[0]))
    return float(res.value[0])
