"""Closed-form homographies for single-parameter camera-pose perturbations.

Conventions
-----------
Pixel centres sit at integer coordinates, origin top-left, ``u`` = column and
``v`` = row.  Angles are radians.  Euler angles are given in a body frame
(x forward, y right, z down); the camera frame is x right, y down, z forward.

Every scenario exposes the inverse homography ``H^-1(kappa)`` which maps an
output pixel ``p`` to its preimage ``p0`` in the source image.  The
``*_array`` helpers are the vectorised kernels used by the bound engine; they
skip validation and broadcast over ``kappa``, ``u`` and ``v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    AtDiscontinuity,
    DegenerateHeight,
    DegeneratePlane,
    DomainContainsCritical,
    OutOfDomain,
    PerspectiveDivideByZero,
    SingularIntrinsics,
)

H3_TOL = 1e-12

# x_cam = BODY_TO_CAM @ x_body
BODY_TO_CAM = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


class ScenarioKind(str, Enum):
    ROLL = "roll"
    PITCH = "pitch"
    YAW = "yaw"
    TRANS_X = "dx"
    TRANS_Y = "dy"
    TRANS_Z = "dz"

    @property
    def is_rotation(self) -> bool:
        return self in (ScenarioKind.ROLL, ScenarioKind.PITCH, ScenarioKind.YAW)


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float
    xc: float
    yc: float

    def __post_init__(self):
        if not (math.isfinite(self.f) and self.f > 0):
            raise SingularIntrinsics(f"focal length must be finite and > 0, got {self.f}")
        if not (math.isfinite(self.xc) and math.isfinite(self.yc)):
            raise SingularIntrinsics("principal point must be finite")

    @classmethod
    def for_image(cls, height: int, width: int, f: float | None = None,
                  principal: tuple[float, float] | None = None) -> "CameraIntrinsics":
        """Defaults: focal length = image width, principal point = image centre."""
        if principal is None:
            principal = ((width - 1) / 2.0, (height - 1) / 2.0)
        return cls(float(width if f is None else f), float(principal[0]), float(principal[1]))

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.xc], [0.0, self.f, self.yc], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        f = self.f
        return np.array([[1 / f, 0.0, -self.xc / f], [0.0, 1 / f, -self.yc / f], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError("pose fields must be finite")

    def as_tuple(self):
        return (self.phi, self.theta, self.psi, self.x, self.y, self.z)


@dataclass(frozen=True)
class PlaneWorld:
    pi: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 0.0)

    def __post_init__(self):
        if len(self.pi) != 4 or not any(self.pi[:3]):
            raise ValueError("plane normal (pi1, pi2, pi3) must be non-zero")


class PixelCoord(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class PerturbationScenario:
    """One pose parameter varying over ``domain``; the rest held fixed.

    ``camera_height`` is the height ``z`` of the camera above the world plane
    and is required by the translation scenarios.
    """

    kind: ScenarioKind
    domain: tuple[float, float]
    camera_height: float | None = None

    def __post_init__(self):
        kind = ScenarioKind(self.kind)
        object.__setattr__(self, "kind", kind)
        lo, hi = (float(x) for x in self.domain)
        object.__setattr__(self, "domain", (lo, hi))
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise OutOfDomain(f"invalid domain [{lo}, {hi}]")
        if kind.is_rotation:
            if lo < -math.pi / 2 or hi > math.pi / 2:
                raise OutOfDomain("rotation domains must lie inside [-pi/2, pi/2]")
            return
        z = self.camera_height
        if z is None or not math.isfinite(z) or z == 0:
            raise DegenerateHeight(f"{kind.value} needs a non-zero camera height")
        if kind is ScenarioKind.TRANS_Z and lo <= -z <= hi:
            raise DegenerateHeight("z + dz vanishes inside the domain")

    @property
    def z(self) -> float:
        return 0.0 if self.camera_height is None else float(self.camera_height)

    def contains(self, kappa) -> bool:
        lo, hi = self.domain
        slack = 1e-12 * (1.0 + hi - lo)
        k = np.asarray(kappa, dtype=float)
        return bool(np.all((k >= lo - slack) & (k <= hi + slack)))

    def with_domain(self, lo: float, hi: float) -> "PerturbationScenario":
        return PerturbationScenario(self.kind, (lo, hi), self.camera_height)


# --------------------------------------------------------------------------
# general 6-DOF homography


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def body_rotation(phi: float, theta: float, psi: float) -> np.ndarray:
    """Z-Y-X (yaw, pitch, roll) rotation in the body frame."""
    return _rz(psi) @ _ry(theta) @ _rx(phi)


def general_homography(intr: CameraIntrinsics, pose0: Pose, delta: Pose,
                       plane: PlaneWorld = PlaneWorld()) -> np.ndarray:
    """Homography from the first to the second viewpoint, ``K (R - t n^T / d) K^-1``.

    ``pose0`` places the first camera in the world; ``delta`` is the camera
    motion expressed in the body frame of the second camera.  The result is
    scaled to ``H[2, 2] = 1`` when that entry is not negligible.
    """
    P = BODY_TO_CAM
    R = P @ body_rotation(delta.phi, delta.theta, delta.psi).T @ P.T
    # camera displacement moves the scene the opposite way
    t = -P @ np.array([delta.x, delta.y, delta.z])

    r_w_c0 = body_rotation(pose0.phi, pose0.theta, pose0.psi) @ P.T
    t_w = np.array([pose0.x, pose0.y, pose0.z])
    pi_w = np.asarray(plane.pi, dtype=float)
    n = r_w_c0.T @ pi_w[:3]
    d = float(t_w @ pi_w[:3] + pi_w[3])
    if abs(d) < 1e-12:
        raise DegeneratePlane("plane passes through the first camera centre (d = 0)")

    H = intr.K @ (R - np.outer(t, n) / d) @ intr.K_inv
    if abs(H[2, 2]) > 1e-9:
        H = H / H[2, 2]
    return H


# --------------------------------------------------------------------------
# scenario closed forms


def _check_kappa(s: PerturbationScenario, kappa):
    if not s.contains(kappa):
        raise OutOfDomain(f"kappa outside {s.domain}")
    if s.kind is ScenarioKind.TRANS_Z and np.any(s.z + np.asarray(kappa) == 0):
        raise DegenerateHeight("z + dz = 0")


def scenario_inverse_homography(intr: CameraIntrinsics, s: PerturbationScenario,
                                kappa: float) -> np.ndarray:
    _check_kappa(s, kappa)
    f, xc, yc, z = intr.f, intr.xc, intr.yc, s.z
    c, sn = math.cos(kappa), math.sin(kappa)
    k = float(kappa)
    kind = s.kind
    if kind is ScenarioKind.ROLL:
        return np.array([
            [c, -sn, -xc * c + xc + yc * sn],
            [sn, c, -xc * sn - yc * c + yc],
            [0.0, 0.0, 1.0],
        ])
    if kind is ScenarioKind.PITCH:
        return np.array([
            [1.0, xc * sn / f, xc * (f * c - f - yc * sn) / f],
            [0.0, c + yc * sn / f, -(f * f + yc * yc) * sn / f],
            [0.0, sn / f, c - yc * sn / f],
        ])
    if kind is ScenarioKind.YAW:
        return np.array([
            [c - xc * sn / f, 0.0, (f * f + xc * xc) * sn / f],
            [-yc * sn / f, 1.0, yc * (f * (c - 1.0) + xc * sn) / f],
            [-sn / f, 0.0, c + xc * sn / f],
        ])
    fz = f * z
    if kind is ScenarioKind.TRANS_X:
        return np.array([
            [1.0, -k * xc / fz, k * xc * yc / fz],
            [0.0, 1.0 - k * yc / fz, k * yc * yc / fz],
            [0.0, -k / fz, 1.0 + k * yc / fz],
        ])
    if kind is ScenarioKind.TRANS_Y:
        return np.array([[1.0, -k / z, k * yc / z], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, z / (k + z), k * yc / (k + z)],
        [0.0, 0.0, 1.0],
    ])


def h3_array(intr, kind, z, kappa, u, v):
    """Perspective denominator of ``H^-1 p``; zero exactly at critical values."""
    kappa, u, v = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (kappa, u, v)))
    f = intr.f
    if kind is ScenarioKind.PITCH:
        return np.cos(kappa) + (v - intr.yc) * np.sin(kappa) / f
    if kind is ScenarioKind.YAW:
        return np.cos(kappa) - (u - intr.xc) * np.sin(kappa) / f
    if kind is ScenarioKind.TRANS_X:
        return 1.0 - kappa * (v - intr.yc) / (f * z)
    if kind is ScenarioKind.TRANS_Z:
        return (z + kappa) / z
    return np.ones_like(kappa)


def preimage_array(intr, kind, z, kappa, u, v):
    """Source coordinates ``(u0, v0)`` for output pixels ``(u, v)``.

    Written as ``u + displacement`` so that ``kappa = 0`` reproduces the input
    coordinates exactly in floating point, whatever the principal point.
    """
    kappa = np.asarray(kappa, dtype=float)
    f = intr.f
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    a = u - intr.xc
    b = v - intr.yc
    if kind is ScenarioKind.ROLL:
        c, s = np.cos(kappa), np.sin(kappa)
        return u + (a * (c - 1.0) - b * s), v + (a * s + b * (c - 1.0))
    if kind is ScenarioKind.PITCH:
        c, s = np.cos(kappa), np.sin(kappa)
        g = f / (f * c + b * s)
        return u + (g - 1.0) * a, v + (g * (b * c - f * s) - b)
    if kind is ScenarioKind.YAW:
        c, s = np.cos(kappa), np.sin(kappa)
        g = f / (f * c - a * s)
        return u + (g * (f * s + a * c) - a), v + (g - 1.0) * b
    if kind is ScenarioKind.TRANS_X:
        fz = f * z
        g = fz / (fz - kappa * b)
        return u + (g - 1.0) * a, v + (g - 1.0) * b
    if kind is ScenarioKind.TRANS_Y:
        return u + kappa * (-b / z), v + 0.0 * kappa
    g = z / (z + kappa)
    return u + 0.0 * kappa, v + (g - 1.0) * b


def gradient_array(intr, kind, z, kappa, u, v):
    """``(du0/dkappa, dv0/dkappa)`` from the closed forms."""
    kappa = np.asarray(kappa, dtype=float)
    f = intr.f
    a = np.asarray(u, dtype=float) - intr.xc
    b = np.asarray(v, dtype=float) - intr.yc
    zero = 0.0 * (kappa + a + b)
    if kind is ScenarioKind.ROLL:
        c, s = np.cos(kappa), np.sin(kappa)
        return -a * s - b * c, a * c - b * s
    if kind is ScenarioKind.PITCH:
        c, s = np.cos(kappa), np.sin(kappa)
        D = f * c + b * s
        return -f * a * (b * c - f * s) / D**2, -f * (f * f + b * b) / D**2
    if kind is ScenarioKind.YAW:
        c, s = np.cos(kappa), np.sin(kappa)
        D = f * c - a * s
        return f * (f * f + a * a) / D**2, f * b * (f * s + a * c) / D**2
    if kind is ScenarioKind.TRANS_X:
        fz = f * z
        D = kappa * b - fz
        return fz * a * b / D**2, fz * b * b / D**2
    if kind is ScenarioKind.TRANS_Y:
        return -b / z + zero, zero
    return zero, -z * b / (z + kappa) ** 2


def _coords(p):
    return np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def preimage(intr: CameraIntrinsics, s: PerturbationScenario, kappa, p) -> PixelCoord:
    """``T^-1(kappa)`` for pixel ``p``; broadcasts over array inputs."""
    _check_kappa(s, kappa)
    u, v = _coords(p)
    if np.any(np.abs(h3_array(intr, s.kind, s.z, kappa, u, v)) < H3_TOL):
        raise PerspectiveDivideByZero("kappa at a critical value for this pixel")
    u0, v0 = preimage_array(intr, s.kind, s.z, kappa, u, v)
    return PixelCoord(_unwrap(u0), _unwrap(v0))


def preimage_gradient(intr: CameraIntrinsics, s: PerturbationScenario, kappa, p):
    _check_kappa(s, kappa)
    u, v = _coords(p)
    if np.any(np.abs(h3_array(intr, s.kind, s.z, kappa, u, v)) < H3_TOL):
        raise AtDiscontinuity("gradient undefined at a critical value")
    du, dv = gradient_array(intr, s.kind, s.z, kappa, u, v)
    return _unwrap(du), _unwrap(dv)


# --------------------------------------------------------------------------
# critical values and stationary points

_BRANCHES = np.array([-math.pi, 0.0, math.pi])


def _tan_root(num, den):
    """Angle in (-pi/2, pi/2] with tan = num/den; NaN when 0/0."""
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    out = np.full(num.shape, np.nan)
    nz = den != 0
    out[nz] = np.arctan(num[nz] / den[nz])
    out[(den == 0) & (num != 0)] = math.pi / 2
    return out


def critical_array(intr, kind, z, u, v):
    """Critical values per pixel, shape ``(..., 2)``, NaN padded.

    Rotation criticals are reported inside [-pi/2, pi/2], the admissible
    rotation range; both signs are listed when the critical angle is +-pi/2.
    """
    a = np.asarray(u, dtype=float) - intr.xc
    b = np.asarray(v, dtype=float) - intr.yc
    a, b = np.broadcast_arrays(a, b)
    out = np.full(a.shape + (2,), np.nan)
    f = intr.f
    if kind is ScenarioKind.YAW:
        out[..., 0] = _tan_root(f, a)
        out[..., 1] = np.where(a == 0, -math.pi / 2, np.nan)
    elif kind is ScenarioKind.PITCH:
        out[..., 0] = _tan_root(-f, b)
        out[..., 1] = np.where(b == 0, -math.pi / 2, np.nan)
    elif kind is ScenarioKind.TRANS_X:
        with np.errstate(divide="ignore"):
            out[..., 0] = np.where(b != 0, f * z / np.where(b != 0, b, 1.0), np.nan)
    elif kind is ScenarioKind.TRANS_Z:
        out[..., 0] = -z
    return out


def critical_set(intr: CameraIntrinsics, s: PerturbationScenario, p) -> list[float]:
    u, v = _coords(p)
    vals = critical_array(intr, s.kind, s.z, u, v).ravel()
    return sorted(float(x) for x in vals[~np.isnan(vals)])


def stationary_angles(intr, kind, u, v):
    """Interior candidate angles per pixel, each of shape ``(..., 3)``.

    Returns ``(grad_u, grad_v, ext_u, ext_v)``: zeros of the second derivative
    of ``u0``/``v0`` (where ``|du0|``/``|dv0|`` can peak) and zeros of the
    first derivative (where ``u0``/``v0`` themselves can peak).  Each angle is
    expanded over the branches ``k*pi``, ``k`` in {-1, 0, 1}; NaN = none.
    """
    a = np.asarray(u, dtype=float) - intr.xc
    b = np.asarray(v, dtype=float) - intr.yc
    a, b = np.broadcast_arrays(a, b)
    none = np.full(a.shape, np.nan)
    f = intr.f
    if kind is ScenarioKind.ROLL:
        t_ab = _tan_root(a, b)
        t_ba = _tan_root(-b, a)
        fam = (t_ab, t_ba, t_ba, t_ab)
    elif kind is ScenarioKind.PITCH:
        t = _tan_root(b, f)
        fam = (none, t, t, none)
    elif kind is ScenarioKind.YAW:
        t = _tan_root(-a, f)
        fam = (t, none, none, t)
    else:
        fam = (none, none, none, none)
    return tuple(x[..., None] + _BRANCHES for x in fam)


def domain_hits_critical(intr, s: PerturbationScenario, u, v):
    """Boolean mask of pixels whose critical values meet the closed domain."""
    lo, hi = s.domain
    crit = critical_array(intr, s.kind, s.z, u, v)
    with np.errstate(invalid="ignore"):
        return np.any((crit >= lo) & (crit <= hi), axis=-1)


def _with_endpoints(lo, hi, angles):
    inside = angles[(angles >= lo) & (angles <= hi)]
    return sorted({float(lo), float(hi), *(float(x) for x in inside)})


def gradient_sup_candidates(intr: CameraIntrinsics, s: PerturbationScenario, p):
    """Finite sets containing the argmax of ``|du0|`` and ``|dv0|`` over the domain."""
    u, v = (float(x) for x in p)
    if domain_hits_critical(intr, s, u, v):
        raise DomainContainsCritical(f"domain {s.domain} meets a critical value at {p}")
    lo, hi = s.domain
    gu, gv, _, _ = stationary_angles(intr, s.kind, u, v)
    return _with_endpoints(lo, hi, gu), _with_endpoints(lo, hi, gv)


def coordinate_extremum_candidates(intr: CameraIntrinsics, s: PerturbationScenario, p):
    """Finite sets containing the argmin/argmax of ``u0`` and ``v0`` over the domain."""
    u, v = (float(x) for x in p)
    lo, hi = s.domain
    _, _, eu, ev = stationary_angles(intr, s.kind, u, v)
    return _with_endpoints(lo, hi, eu), _with_endpoints(lo, hi, ev)


def candidates_in(lo, hi, angles: np.ndarray) -> np.ndarray:
    """Stack ``lo``, ``hi`` and the angles inside ``[lo, hi]`` (others -> ``lo``).

    ``lo``/``hi`` have shape ``(N,)`` and ``angles`` shape ``(N, k)``.
    """
    lo = np.asarray(lo, dtype=float)[:, None]
    hi = np.asarray(hi, dtype=float)[:, None]
    with np.errstate(invalid="ignore"):
        ok = (angles >= lo) & (angles <= hi)
    inner = np.where(ok, angles, lo)
    return np.concatenate([lo, hi, inner], axis=1)


__all__: Sequence[str] = [
    "ScenarioKind", "CameraIntrinsics", "Pose", "PlaneWorld", "PixelCoord",
    "PerturbationScenario", "general_homography", "scenario_inverse_homography",
    "preimage", "preimage_gradient", "critical_set", "gradient_sup_candidates",
    "coordinate_extremum_candidates", "body_rotation",
]
