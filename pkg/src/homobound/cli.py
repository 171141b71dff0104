"""``homobound`` command-line driver.

Angles are given in degrees and translations in meters; everything is
converted to radians at this boundary.  Options may come from a JSON config
file (``--config``, keys named like the long flags with dashes or
underscores); explicit flags win.

Exit codes: 0 success (``verify``: all Robust), 1 ``verify`` Unknown or
``validate`` failure, 2 usage or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .bounds import serialize
from .bounds.synthesis import (
    BoundConfig,
    BoundSet,
    bound_image,
    bound_pixel,
    default_threads,
    lipschitz_constant,
)
from .errors import HomoboundError
from .geometry import CameraIntrinsics, PerturbationScenario, ScenarioKind
from .image_io import load_image, save_image
from .imaging import CurveBatch, Image, Padding, PixelCurveContext, render
from .verifier import load_network, verify_robust

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    scenario: str | None = None
    range: tuple | None = None          # user units (degrees or meters)
    focal: float | None = None
    principal: tuple | None = None
    height: float | None = None
    padding: str = "black"
    q: int = 2
    samples: int = 65
    eps: float = 0.01
    max_iters: int = 5000
    mode: str = "interval"
    threads: int = 1
    seed: int = 0
    image: list = field(default_factory=list)
    net: str | None = None
    bounds: list = field(default_factory=list)
    label: list = field(default_factory=list)
    out: str | None = None
    frames: int = 5
    pixel: tuple | None = None
    grid: int = 10000
    probes: int = 1000
    pixels: int = 20

    # -- derived -------------------------------------------------------
    @property
    def kind(self) -> ScenarioKind:
        if self.scenario is None:
            raise UsageError("--scenario is required")
        return ScenarioKind(self.scenario)

    def domain(self):
        if self.range is None:
            raise UsageError("--range MIN:MAX is required")
        lo, hi = self.range
        if self.kind.is_rotation:
            return math.radians(lo), math.radians(hi)
        return float(lo), float(hi)

    def to_user(self, kappa):
        return math.degrees(kappa) if self.kind.is_rotation else kappa

    def make_scenario(self) -> PerturbationScenario:
        return PerturbationScenario(self.kind, self.domain(), self.height)

    def make_intrinsics(self, h, w) -> CameraIntrinsics:
        return CameraIntrinsics.for_image(h, w, self.focal, self.principal)

    def bound_config(self) -> BoundConfig:
        return BoundConfig(self.q, self.samples, self.eps, self.max_iters, self.threads)

    def load_images(self):
        if not self.image:
            raise UsageError("--image is required")
        return [load_image(p, Padding(self.padding)) for p in self.image]


def _pair(text, conv=float):
    parts = str(text).replace(",", ":").split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two values, got {text!r}")
    return conv(parts[0]), conv(parts[1])


def _listify(v):
    if v is None:
        return []
    return list(v) if isinstance(v, (list, tuple)) else [v]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("instance")
    g.add_argument("--config", help="JSON file with default option values")
    g.add_argument("--image", nargs="+", help="PGM or CSV image(s)")
    g.add_argument("--scenario", choices=[k.value for k in ScenarioKind])
    g.add_argument("--range", type=_pair, metavar="MIN:MAX", help="degrees or meters")
    g.add_argument("--focal", type=float, help="focal length in pixels (default: width)")
    g.add_argument("--principal", type=_pair, metavar="U,V")
    g.add_argument("--height", type=float, help="camera height z in meters")
    g.add_argument("--padding", choices=[p.value for p in Padding])
    b = common.add_argument_group("bounds")
    b.add_argument("--q", type=int)
    b.add_argument("--samples", type=int, help="samples per subdomain")
    b.add_argument("--eps", type=float)
    b.add_argument("--max-iters", type=int)
    b.add_argument("--threads", type=int, help="default: $HOMOBOUND_THREADS or 1")
    b.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file or directory")

    p = argparse.ArgumentParser(prog="homobound", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", parents=[common], help="write renderings over the range")
    r.add_argument("--frames", type=int, help="number of evenly spaced renderings")
    sub.add_parser("bound", parents=[common], help="synthesise a BoundSet")
    v = sub.add_parser("verify", parents=[common], help="verify network robustness")
    v.add_argument("--net")
    v.add_argument("--bounds", nargs="+")
    v.add_argument("--label", type=int, nargs="+")
    v.add_argument("--mode", choices=["interval", "linear"])
    va = sub.add_parser("validate", parents=[common], help="run the numerical self-checks")
    va.add_argument("--bounds", nargs="+", help="check an existing BoundSet instead")
    va.add_argument("--grid", type=int, help="grid points for the soundness sweep")
    va.add_argument("--probes", type=int, help="finite-difference probes")
    va.add_argument("--pixels", type=int, help="pixels in the Lipschitz sweep")
    rp = sub.add_parser("report", parents=[common], help="emit one pixel curve and its bounds")
    rp.add_argument("--pixel", type=lambda t: _pair(t, int), metavar="I,J", required=False)
    rp.add_argument("--grid", type=int, help="rows to emit")
    rp.add_argument("--bounds", nargs="+")
    return p


def parse_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            merged.update({k.replace("-", "_"): v for k, v in json.load(fh).items()})
    merged.update({k: v for k, v in vars(args).items() if v is not None and k != "config"})
    merged.setdefault("threads", default_threads())
    for key in ("image", "bounds", "label"):
        merged[key] = _listify(merged.get(key))
    for key in ("range", "principal", "pixel"):
        if merged.get(key) is not None and isinstance(merged[key], str):
            merged[key] = _pair(merged[key], int if key == "pixel" else float)
        elif merged.get(key) is not None:
            merged[key] = tuple(merged[key])
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**merged)


# --------------------------------------------------------------------------
# commands


def cmd_render(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    img = cfg.load_images()[0]
    s = cfg.make_scenario()
    intr = cfg.make_intrinsics(*img.shape)
    if cfg.frames < 1:
        raise UsageError("--frames must be >= 1")
    outdir = Path(cfg.out or "render")
    outdir.mkdir(parents=True, exist_ok=True)
    lo, hi = cfg.range
    user = np.linspace(lo, hi, cfg.frames) if cfg.frames > 1 else np.array([float(lo)])
    kappas = np.radians(user) if s.kind.is_rotation else user
    suffix = Path(cfg.image[0]).suffix.lower() or ".csv"
    rows = []
    for n, k in enumerate(kappas):
        name = f"frame_{n:03d}{suffix}"
        k = float(np.clip(k, *s.domain))
        save_image(outdir / name, render(img, intr, s, k))
        rows.append((name, repr(float(user[n])), repr(k)))
    with open(outdir / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "kappa", "kappa_internal"])
        w.writerows(rows)
    print(f"wrote {len(rows)} frames to {outdir}", file=out)
    return EXIT_OK


def cmd_bound(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    img = cfg.load_images()[0]
    s = cfg.make_scenario()
    intr = cfg.make_intrinsics(*img.shape)
    t0 = time.perf_counter()
    bs = bound_image(img, intr, s, cfg.bound_config())
    wall = time.perf_counter() - t0
    if cfg.out:
        serialize.save(bs, cfg.out)
    print(f"pixels: {len(bs)}", file=out)
    print(f"total polytope area: {bs.total_area:.10g}", file=out)
    print(f"mean BaB iterations: {bs.mean_iterations:.2f}", file=out)
    print(f"wall time: {wall:.3f} s", file=out)
    print(f"warnings: {bs.warnings}", file=out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if not cfg.net or not cfg.bounds:
        raise UsageError("verify needs --net and --bounds")
    net = load_network(cfg.net)
    sets = [serialize.load(p) for p in cfg.bounds]
    images = cfg.load_images() if cfg.image else [None] * len(sets)
    if len(images) != len(sets):
        raise UsageError("give one --image per --bounds file")
    labels = list(cfg.label)
    if not labels:
        if images[0] is None:
            raise UsageError("verify needs --label or --image to infer it")
        labels = [int(np.argmax(net.forward(im.pixels.ravel()))) for im in images]
    if len(labels) == 1 and len(sets) > 1:
        labels = labels * len(sets)
    if len(labels) != len(sets):
        raise UsageError("give one --label per --bounds file")
    robust = 0
    for n, (bs, im, lab) in enumerate(zip(sets, images, labels)):
        res = verify_robust(net, bs, lab, cfg.mode, image=im)
        robust += res.robust
        finite = res.margins[np.isfinite(res.margins)]
        worst = float(finite.min()) if finite.size else math.inf
        line = f"[{n}] {Path(cfg.bounds[n]).name}: {res.status.value} label={lab} min_margin={worst:.6g}"
        print(line, file=out)
        print("    margins: " + " ".join(f"{m:.6g}" for m in res.margins), file=out)
        if res.witness_kappa is not None:
            unit = "deg" if bs.scenario.kind.is_rotation else "m"
            k = math.degrees(res.witness_kappa) if unit == "deg" else res.witness_kappa
            tag = "flips prediction" if res.witness_flips else "no flip observed"
            print(f"    witness kappa: {k:.10g} {unit} ({tag})", file=out)
    print(f"robust {robust}/{len(sets)}", file=out)
    return EXIT_OK if robust == len(sets) else EXIT_FAIL


def _gradient_check(intr, s, h, w, rng, probes):
    lo, hi = s.domain
    step = 1e-6
    worst = 0.0
    got = 0
    while got < probes:
        n = probes - got
        u = rng.uniform(0, w - 1, n)
        v = rng.uniform(0, h - 1, n)
        k = rng.uniform(lo + step, hi - step, n) if hi - lo > 4 * step else np.full(n, 0.5 * (lo + hi))
        ok = ~geo.domain_hits_critical(intr, s, u, v)
        u, v, k = u[ok], v[ok], k[ok]
        du, dv = geo.gradient_array(intr, s.kind, s.z, k, u, v)
        up = geo.preimage_array(intr, s.kind, s.z, k + step, u, v)
        dn = geo.preimage_array(intr, s.kind, s.z, k - step, u, v)
        for an, fd in ((du, (up[0] - dn[0]) / (2 * step)), (dv, (up[1] - dn[1]) / (2 * step))):
            err = np.abs(fd - an) / np.maximum(1.0, np.abs(an))
            worst = max(worst, float(err.max(initial=0.0)))
        got += int(ok.sum())
    return worst


def soundness_violation(img: Image, bs: BoundSet, grid: int):
    """Largest ``LB* - G`` or ``G - UB*`` over a dense grid, all pixels."""
    h, w = img.shape
    rows, cols = (a.ravel() for a in np.mgrid[0:h, 0:w])
    ks = np.linspace(*bs.scenario.domain, grid)
    worst = -np.inf
    for start in range(0, len(rows), 64):
        idx = np.arange(start, min(start + 64, len(rows)))
        G = CurveBatch(img, bs.intr, bs.scenario, rows[idx], cols[idx]).values_grid(ks)
        for r, p in enumerate(idx):
            b = bs.bounds[p]
            worst = max(worst, float((b.lb_star(ks) - G[r]).max()), float((G[r] - b.ub_star(ks)).max()))
    return worst


def lipschitz_slack(img: Image, bs: BoundSet, pixels, grid: int):
    """Max over pixels/sides of (grid slope of J) - L on the whole domain."""
    ks = np.linspace(*bs.scenario.domain, grid)
    worst = -np.inf
    for i, j in pixels:
        b = bs[i, j]
        ctx = PixelCurveContext(img, bs.intr, bs.scenario, int(i), int(j))
        g = ctx.batch().values_grid(ks)[0]
        for J, segs in ((b.lb(ks) - g, b.lower), (g - b.ub(ks), b.upper)):
            L = lipschitz_constant(ctx, list(segs)).L
            slope = np.abs(np.diff(J)) / np.diff(ks)
            worst = max(worst, float(slope.max()) - L)
    return worst


def cmd_validate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    rng = np.random.default_rng(cfg.seed)
    img = cfg.load_images()[0]
    if cfg.bounds:
        bs = serialize.load(cfg.bounds[0])
        if tuple(bs.shape) != img.shape:
            raise UsageError(f"BoundSet shape {bs.shape} does not match image {img.shape}")
    else:
        s = cfg.make_scenario()
        bs = bound_image(img, cfg.make_intrinsics(*img.shape), s, cfg.bound_config())
    h, w = img.shape
    grad = _gradient_check(bs.intr, bs.scenario, h, w, rng, cfg.probes)
    sound = soundness_violation(img, bs, cfg.grid)
    n_pix = min(cfg.pixels, h * w)
    flat = rng.choice(h * w, size=n_pix, replace=False)
    lip = lipschitz_slack(img, bs, [(k // w, k % w) for k in flat], max(cfg.grid, 2))
    checks = [
        ("gradient", "max relative error", grad, grad < 1e-5, "< 1e-05"),
        ("soundness", "max violation", sound, sound <= 1e-9, "<= 1e-09"),
        ("lipschitz", "max slope - L", lip, lip <= 1e-9, "<= 1e-09"),
    ]
    for name, what, val, ok, tol in checks:
        print(f"{name:10s} {what} = {val:.3e} (tol {tol}) {'PASS' if ok else 'FAIL'}", file=out)
    failed = [c[0] for c in checks if not c[3]]
    if failed:
        print("failing checks: " + ", ".join(failed), file=out)
        return EXIT_FAIL
    return EXIT_OK


def cmd_report(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    img = cfg.load_images()[0]
    if cfg.pixel is None:
        raise UsageError("report needs --pixel I,J")
    i, j = cfg.pixel
    if cfg.bounds:
        bs = serialize.load(cfg.bounds[0])
        s, intr, b = bs.scenario, bs.intr, bs[i, j]
    else:
        s = cfg.make_scenario()
        intr = cfg.make_intrinsics(*img.shape)
        ctx = PixelCurveContext(img, intr, s, i, j)
        b = bound_pixel(ctx, cfg.q, cfg.samples, cfg.eps, cfg.max_iters)
    ctx = PixelCurveContext(img, intr, s, i, j)
    if cfg.grid < 1:
        raise UsageError("--grid must be >= 1")
    ks = np.linspace(*s.domain, cfg.grid) if cfg.grid > 1 else np.array([s.domain[0]])
    G = ctx.batch().values_grid(ks)[0]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["kappa", "G", "LB", "UB", "LB_star", "UB_star"])
    for row in zip(ks, G, b.lb(ks), b.ub(ks), b.lb_star(ks), b.ub_star(ks)):
        wr.writerow([repr(float(x)) for x in row])
    if cfg.out:
        Path(cfg.out).write_text(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "render": cmd_render,
    "bound": cmd_bound,
    "verify": cmd_verify,
    "validate": cmd_validate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.command](cfg)
    except SystemExit as exc:  # argparse errors
        return EXIT_ERROR if exc.code else EXIT_OK
    except (HomoboundError, UsageError, ValueError, OSError, IndexError) as exc:
        print(f"homobound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
