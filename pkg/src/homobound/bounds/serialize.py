"""BoundSet files in JSON Lines.

Line 1 is a header::

    {"format": "homobound-bounds", "version": 1, "shape": [h, w],
     "scenario": {"kind": "yaw", "domain": [lo, hi], "camera_height": null},
     "intrinsics": {"f": ..., "xc": ..., "yc": ...},
     "config": {"q": 2, "n_s": 65, "eps": 0.01, "max_iters": 5000}}

followed by one record per pixel in row-major order::

    {"i": 0, "j": 0, "breaks": [k0, ..., kq],
     "lower": [[w, b], ...], "upper": [[w, b], ...],
     "shift_lower": s, "shift_upper": s, "eps": e,
     "iterations": [n_lower, n_upper], "exhausted": [false, false]}

Floats are written with Python's shortest round-trip repr (at most 17
significant digits), so reading a file back reproduces every value exactly.
"""
from __future__ import annotations

import json

from ..errors import SchemaError
from ..geometry import CameraIntrinsics, PerturbationScenario
from .segments import LinearSegment, PiecewiseLinearBound
from .synthesis import BoundSet

FORMAT = "homobound-bounds"
VERSION = 1


def _header(bs: BoundSet) -> dict:
    s = bs.scenario
    return {
        "format": FORMAT,
        "version": VERSION,
        "shape": list(bs.shape),
        "scenario": {"kind": s.kind.value, "domain": list(s.domain), "camera_height": s.camera_height},
        "intrinsics": {"f": bs.intr.f, "xc": bs.intr.xc, "yc": bs.intr.yc},
        "config": dict(bs.config),
    }


def _record(i, j, b: PiecewiseLinearBound) -> dict:
    return {
        "i": i,
        "j": j,
        "breaks": b.breaks,
        "lower": [[s.w, s.b] for s in b.lower],
        "upper": [[s.w, s.b] for s in b.upper],
        "shift_lower": b.shift_lower,
        "shift_upper": b.shift_upper,
        "eps": b.epsilon,
        "iterations": list(b.iterations),
        "exhausted": list(b.exhausted),
    }


def dumps(bs: BoundSet) -> str:
    h, w = bs.shape
    lines = [json.dumps(_header(bs))]
    for k, b in enumerate(bs.bounds):
        lines.append(json.dumps(_record(k // w, k % w, b)))
    return "\n".join(lines) + "\n"


def save(bs: BoundSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(bs))


def _bound_from(rec) -> PiecewiseLinearBound:
    br = rec["breaks"]
    parts = list(zip(br[:-1], br[1:]))
    if len(parts) != len(rec["lower"]) or len(parts) != len(rec["upper"]):
        raise SchemaError("segment count does not match breaks")
    lower = [LinearSegment(float(w), float(b), lo, hi) for (w, b), (lo, hi) in zip(rec["lower"], parts)]
    upper = [LinearSegment(float(w), float(b), lo, hi) for (w, b), (lo, hi) in zip(rec["upper"], parts)]
    return PiecewiseLinearBound(
        lower, upper, float(rec["shift_lower"]), float(rec["shift_upper"]), float(rec["eps"]), True,
        tuple(int(x) for x in rec.get("iterations", (0, 0))),
        tuple(bool(x) for x in rec.get("exhausted", (False, False))),
    )


def loads(text: str) -> BoundSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty bound file")
    try:
        head = json.loads(lines[0])
        if head.get("format") != FORMAT or head.get("version") != VERSION:
            raise SchemaError(f"not a {FORMAT} v{VERSION} file")
        h, w = (int(x) for x in head["shape"])
        sc = head["scenario"]
        scenario = PerturbationScenario(sc["kind"], tuple(sc["domain"]), sc.get("camera_height"))
        intr = CameraIntrinsics(**{k: float(v) for k, v in head["intrinsics"].items()})
        bounds = [None] * (h * w)
        for ln in lines[1:]:
            rec = json.loads(ln)
            i, j = int(rec["i"]), int(rec["j"])
            if not (0 <= i < h and 0 <= j < w):
                raise SchemaError(f"pixel ({i}, {j}) outside {h}x{w}")
            bounds[i * w + j] = _bound_from(rec)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed bound file: {exc}") from exc
    if any(b is None for b in bounds):
        raise SchemaError("bound file does not cover every pixel")
    return BoundSet((h, w), scenario, intr, head.get("config", {}), bounds)


def load(path) -> BoundSet:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
