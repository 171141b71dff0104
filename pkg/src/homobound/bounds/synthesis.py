"""Per-pixel bound synthesis: sample, fit, certify the violation, shift."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..geometry import CameraIntrinsics, PerturbationScenario
from ..imaging import CurveBatch, Image, PixelCurveContext
from .fitting import Side, fit_batch
from .lipo import eps_max_batch
from .segments import LinearSegment, PiecewiseLinearBound, polytope_area, split_domain


@dataclass(frozen=True)
class BoundConfig:
    q: int = 2
    n_s: int = 65
    eps: float = 0.01
    max_iters: int = 5000
    threads: int = 1
    chunk: int = 128

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.n_s < 2:
            raise ValueError("need at least 2 samples per subdomain")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def echo(self) -> dict:
        """Fields that determine the result (threads/chunk do not)."""
        return {"q": self.q, "n_s": self.n_s, "eps": self.eps, "max_iters": self.max_iters}


@dataclass(frozen=True)
class LipschitzBudget:
    w_star: float
    interp_u: float
    interp_v: float
    geom_u: float
    geom_v: float

    @property
    def L(self) -> float:
        return self.w_star + self.interp_u * self.geom_u + self.interp_v * self.geom_v


def lipschitz_constant(ctx: PixelCurveContext, segment, subdomain=None) -> LipschitzBudget:
    """Lipschitz budget of ``J = segment - G`` (or ``G - segment``) on ``subdomain``.

    ``segment`` may be a single :class:`LinearSegment` or a list, in which
    case the largest slope is used (the envelope is at most that steep).
    """
    segs = segment if isinstance(segment, (list, tuple)) else [segment]
    lo, hi = ctx.scenario.domain if subdomain is None else subdomain
    batch = ctx.batch()
    batch.check_domain(lo, hi)
    idx = np.array([0])
    lo_a, hi_a = np.array([float(lo)]), np.array([float(hi)])
    iu, iv = batch.interp_sup(idx, lo_a, hi_a)
    gu, gv = batch.geom_sup(idx, lo_a, hi_a)
    return LipschitzBudget(max(abs(s.w) for s in segs), float(iu[0]), float(iv[0]),
                           float(gu[0]), float(gv[0]))


def sample_grid(domain, q, n_s):
    parts = split_domain(domain, q)
    per_part = [np.linspace(lo, hi, n_s) for lo, hi in parts]
    return parts, per_part, np.unique(np.concatenate(per_part))


def _bound_block(img: Image, intr, s: PerturbationScenario, rows, cols, cfg: BoundConfig):
    """Bounds for one block of pixels; every pixel is handled independently."""
    batch = CurveBatch(img, intr, s, rows, cols)
    batch.check_domain()
    P = len(batch)
    parts, per_part, xs = sample_grid(s.domain, cfg.q, cfg.n_s)
    G = batch.values_grid(xs)

    # every segment must respect all samples of B, not only its own piece,
    # because the envelope extends each line over the full domain
    Wl = np.empty((P, cfg.q)); Bl = np.empty((P, cfg.q))
    Wu = np.empty((P, cfg.q)); Bu = np.empty((P, cfg.q))
    for j, ks in enumerate(per_part):
        xbar = float(ks.mean())
        Wl[:, j], Bl[:, j] = fit_batch(xs, G, xbar, Side.LOWER)
        Wu[:, j], Bu[:, j] = fit_batch(xs, G, xbar, Side.UPPER)

    # curves 0..P-1: lower violation LB - G; P..2P-1: upper violation G - UB
    W = np.vstack([Wl, Wu]); Bc = np.vstack([Bl, Bu])
    sign = np.concatenate([np.ones(P), -np.ones(P)])
    pix = np.concatenate([np.arange(P), np.arange(P)])
    w_star = np.abs(W).max(axis=1)

    def J(c, k):
        lines = W[c] * k[:, None] + Bc[c]
        env = np.where(sign[c] > 0, lines.max(axis=1), lines.min(axis=1))
        return sign[c] * (env - batch.values(pix[c], k))

    def L_of(c, lo, hi):
        p = pix[c]
        iu, iv = batch.interp_sup(p, lo, hi)
        gu, gv = batch.geom_sup(p, lo, hi)
        return w_star[c] + iu * gu + iv * gv

    lines = W[:, None, :] * xs[None, :, None] + Bc[:, None, :]
    env = np.where(sign[:, None] > 0, lines.max(axis=2), lines.min(axis=2))
    best0 = (sign[:, None] * (env - np.vstack([G, G]))).max(axis=1)

    c0 = np.repeat(np.arange(2 * P), cfg.q)
    lo0 = np.tile([p[0] for p in parts], 2 * P)
    hi0 = np.tile([p[1] for p in parts], 2 * P)
    res = eps_max_batch(J, L_of, c0, lo0, hi0, J(c0, lo0), J(c0, hi0), best0,
                        cfg.eps, cfg.max_iters)
    shift = np.maximum(0.0, res.value)

    out = []
    for p in range(P):
        lower = [LinearSegment(float(Wl[p, j]), float(Bl[p, j]), *parts[j]) for j in range(cfg.q)]
        upper = [LinearSegment(float(Wu[p, j]), float(Bu[p, j]), *parts[j]) for j in range(cfg.q)]
        out.append(PiecewiseLinearBound(
            lower, upper, float(shift[p]), float(shift[P + p]), cfg.eps, True,
            (int(res.iterations[p]), int(res.iterations[P + p])),
            (bool(res.exhausted[p]), bool(res.exhausted[P + p])),
        ))
    return out


def bound_pixel(ctx: PixelCurveContext, q: int = 2, n_s: int = 65, eps: float = 0.01,
                max_iters: int = 5000) -> PiecewiseLinearBound:
    cfg = BoundConfig(q, n_s, eps, max_iters)
    return _bound_block(ctx.image, ctx.intr, ctx.scenario, [ctx.i], [ctx.j], cfg)[0]


@dataclass(eq=False)
class BoundSet:
    """Sound bounds for every pixel of one image (row-major order)."""

    shape: tuple
    scenario: PerturbationScenario
    intr: CameraIntrinsics
    config: dict
    bounds: list = field(repr=False)

    def __post_init__(self):
        h, w = self.shape
        if len(self.bounds) != h * w:
            raise ValueError(f"expected {h * w} pixel bounds, got {len(self.bounds)}")

    def __getitem__(self, ij) -> PiecewiseLinearBound:
        i, j = ij
        return self.bounds[i * self.shape[1] + j]

    def __len__(self):
        return len(self.bounds)

    @property
    def warnings(self) -> int:
        return sum(b.warnings for b in self.bounds)

    @property
    def total_area(self) -> float:
        return float(sum(polytope_area(b) for b in self.bounds))

    @property
    def mean_iterations(self) -> float:
        return float(np.mean([sum(b.iterations) / 2 for b in self.bounds]))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("HOMOBOUND_THREADS", "1")))
    except ValueError:
        return 1


def bound_image(img: Image, intr: CameraIntrinsics, s: PerturbationScenario,
                config: BoundConfig | None = None) -> BoundSet:
    cfg = config or BoundConfig(threads=default_threads())
    h, w = img.shape
    rows, cols = (a.ravel() for a in np.mgrid[0:h, 0:w])
    blocks = [(rows[k:k + cfg.chunk], cols[k:k + cfg.chunk]) for k in range(0, h * w, cfg.chunk)]

    def run(block):
        return _bound_block(img, intr, s, block[0], block[1], cfg)

    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    bounds = [b for part in parts for b in part]
    return BoundSet((h, w), s, intr, cfg.echo(), bounds)


__all__ = ["BoundConfig", "LipschitzBudget", "lipschitz_constant", "bound_pixel",
           "bound_image", "BoundSet", "sample_grid"]
