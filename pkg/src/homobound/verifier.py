"""Incomplete robustness verification of small dense ReLU networks.

Two abstractions are offered:

* ``interval`` propagates per-pixel boxes ``[min LB*, max UB*]`` (IBP).
* ``linear`` runs once per partition piece of ``B`` and keeps every neuron
  bounded by lines in ``kappa``.  Unstable ReLUs use the triangle upper
  line and a 0/1 lower slope.  Concrete pre-activation bounds are the
  intersection of the symbolic bounds with the IBP box on the same piece.

Network files are JSON::

    {"format": "homobound-net", "version": 1, "input_dim": 2,
     "layers": [
        {"weight": [[1.0, -1.0], [0.5, 0.5]], "bias": [0.0, 0.1], "relu": true},
        {"weight": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0], "relu": false}
     ]}

``weight`` is row-major with shape ``(out, in)``; inputs are images
flattened row by row.  The last layer must not have a ReLU.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bounds.synthesis import BoundSet
from .errors import DimensionMismatch, SchemaError
from .imaging import Image, render

NET_FORMAT = "homobound-net"


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    relu: bool = False


@dataclass(frozen=True)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise SchemaError("network has no layers")
        object.__setattr__(self, "layers", layers)
        for k, L in enumerate(layers):
            if L.weight.ndim != 2 or L.bias.shape != (L.weight.shape[0],):
                raise DimensionMismatch(f"layer {k}: weight {L.weight.shape} vs bias {L.bias.shape}")
            if k and L.weight.shape[1] != layers[k - 1].weight.shape[0]:
                raise DimensionMismatch(
                    f"layer {k} expects {L.weight.shape[1]} inputs, "
                    f"layer {k - 1} gives {layers[k - 1].weight.shape[0]}"
                )
        if layers[-1].relu:
            raise SchemaError("final layer must not apply ReLU")

    @classmethod
    def from_arrays(cls, specs):
        """``specs``: iterable of ``(W, b, relu)``."""
        return cls(tuple(Layer(np.asarray(W, float), np.asarray(b, float).ravel(), bool(r))
                         for W, b, r in specs))

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def forward(self, x):
        """Logits for a flat input (or a batch of rows)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"input has {x.shape[-1]} entries, network expects {self.input_dim}")
        for L in self.layers:
            x = x @ L.weight.T + L.bias
            if L.relu:
                x = np.maximum(x, 0.0)
        return x

    def to_json(self) -> str:
        return json.dumps({
            "format": NET_FORMAT, "version": 1, "input_dim": self.input_dim,
            "layers": [{"weight": L.weight.tolist(), "bias": L.bias.tolist(), "relu": L.relu}
                       for L in self.layers],
        })


def parse_network(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"network file is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != NET_FORMAT:
        raise SchemaError(f"expected a {NET_FORMAT} document")
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise SchemaError("'layers' must be a non-empty list")
    specs = []
    for k, L in enumerate(layers):
        try:
            W = np.array(L["weight"], dtype=float)
            b = np.array(L["bias"], dtype=float)
            relu = L.get("relu", False)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"layer {k}: {exc}") from exc
        if not isinstance(relu, bool):
            raise SchemaError(f"layer {k}: 'relu' must be a boolean")
        if W.ndim != 2 or b.ndim != 1:
            raise DimensionMismatch(f"layer {k}: weight must be 2-D and bias 1-D")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise SchemaError(f"layer {k}: non-finite parameters")
        specs.append((W, b, relu))
    net = Network.from_arrays(specs)
    if "input_dim" in doc and int(doc["input_dim"]) != net.input_dim:
        raise DimensionMismatch(f"input_dim {doc['input_dim']} does not match first layer")
    return net


def load_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


# --------------------------------------------------------------------------
# abstractions


def intervals_from_bounds(bs: BoundSet, subdomain=None):
    """Per-pixel ``(lo, hi)`` arrays of the sound bounds, clipped to [0, 1]."""
    lo = np.empty(len(bs))
    hi = np.empty(len(bs))
    a, b = (None, None) if subdomain is None else subdomain
    for k, pb in enumerate(bs.bounds):
        lo[k], hi[k] = pb.value_range(a, b)
    return np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)


def _affine_interval(W, b, lo, hi):
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    return Wp @ lo + Wn @ hi + b, Wp @ hi + Wn @ lo + b


def _check_input(net: Network, n):
    if n != net.input_dim:
        raise DimensionMismatch(f"{n} inputs for a network expecting {net.input_dim}")


def ibp_layers(net: Network, lo, hi):
    """Pre-activation boxes of every layer."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    _check_input(net, lo.shape[0])
    out = []
    for L in net.layers:
        lo, hi = _affine_interval(L.weight, L.bias, lo, hi)
        out.append((lo, hi))
        if L.relu:
            lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    return out


def ibp_forward(net: Network, intervals):
    """Output logit intervals for input boxes ``(lo, hi)``."""
    return ibp_layers(net, *intervals)[-1]


def _margin_interval(net: Network, inputs, boxes, label):
    """Lower bounds of ``logit_label - logit_c`` from the box feeding the last layer."""
    last = net.layers[-1]
    if len(net.layers) == 1:
        lo, hi = inputs
    else:
        lo, hi = boxes[-2]
        if net.layers[-2].relu:
            lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    D = last.weight[label] - last.weight
    d = last.bias[label] - last.bias
    return _affine_interval(D, d, lo, hi)[0]


@dataclass
class SymbolicBound:
    """Per-neuron lines ``a * kappa + c`` bounding a layer on ``[k0, k1]``."""

    k0: float
    k1: float
    low_a: np.ndarray
    low_c: np.ndarray
    up_a: np.ndarray
    up_c: np.ndarray
    lo: np.ndarray = field(default=None)
    hi: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.lo is None:
            self.lo = np.minimum(self.low_a * self.k0, self.low_a * self.k1) + self.low_c
        if self.hi is None:
            self.hi = np.maximum(self.up_a * self.k0, self.up_a * self.k1) + self.up_c

    def lower(self, kappa):
        return self.low_a * kappa + self.low_c

    def upper(self, kappa):
        return self.up_a * kappa + self.up_c


def _line_min(a, c, k0, k1):
    return np.minimum(a * k0, a * k1) + c


def _affine_symbolic(W, b, s: SymbolicBound):
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    la = Wp @ s.low_a + Wn @ s.up_a
    lc = Wp @ s.low_c + Wn @ s.up_c + b
    ua = Wp @ s.up_a + Wn @ s.low_a
    uc = Wp @ s.up_c + Wn @ s.low_c + b
    return la, lc, ua, uc


def _relu_symbolic(s: SymbolicBound):
    l, u = s.lo, s.hi
    active = l >= 0
    dead = u <= 0
    unstable = ~(active | dead)
    # upper: chord through (l, 0) and (u, u)
    lam_u = np.where(unstable, u / np.where(unstable, u - l, 1.0), active.astype(float))
    mu_u = np.where(unstable, -lam_u * l, 0.0)
    lam_l = np.where(unstable, (u > -l).astype(float), active.astype(float))
    ua, uc = lam_u * s.up_a, lam_u * s.up_c + mu_u
    la, lc = lam_l * s.low_a, lam_l * s.low_c
    return SymbolicBound(s.k0, s.k1, la, lc, ua, uc,
                         np.maximum(l, 0.0), np.maximum(u, 0.0))


def _input_symbolic(bs: BoundSet, piece: int, k0, k1):
    n = len(bs)
    la, lc, ua, uc = (np.empty(n) for _ in range(4))
    for k, pb in enumerate(bs.bounds):
        # any single line of the envelope is itself a valid bound on all of B
        sl, su = pb.lower[piece], pb.upper[piece]
        la[k], lc[k] = sl.w, sl.b - pb.shift_lower
        ua[k], uc[k] = su.w, su.b + pb.shift_upper
    return SymbolicBound(k0, k1, la, lc, ua, uc)


def _linear_pass(net: Network, bs: BoundSet, piece: int, label=None):
    k0, k1 = bs.bounds[0].partition[piece]
    s = _input_symbolic(bs, piece, k0, k1)
    _check_input(net, len(s.lo))
    inputs = intervals_from_bounds(bs, (k0, k1))
    boxes = ibp_layers(net, *inputs)
    margin = None
    for idx, L in enumerate(net.layers):
        last = idx == len(net.layers) - 1
        if last and label is not None:
            D = L.weight[label] - L.weight
            d = L.bias[label] - L.bias
            la, lc, _, _ = _affine_symbolic(D, d, s)
            margin = _line_min(la, lc, k0, k1)
        la, lc, ua, uc = _affine_symbolic(L.weight, L.bias, s)
        blo, bhi = boxes[idx]
        s = SymbolicBound(k0, k1, la, lc, ua, uc)
        s.lo = np.maximum(s.lo, blo)
        s.hi = np.minimum(s.hi, bhi)
        if L.relu:
            s = _relu_symbolic(s)
    return s, margin, inputs, boxes


def linear_forward(net: Network, bs: BoundSet, subdomain=0) -> SymbolicBound:
    """Output bounds linear in ``kappa`` on one partition piece.

    ``subdomain`` is a piece index or the ``(lo, hi)`` of a piece.
    """
    return _linear_pass(net, bs, _piece_index(bs, subdomain))[0]


def _piece_index(bs: BoundSet, subdomain) -> int:
    parts = bs.bounds[0].partition
    if isinstance(subdomain, (int, np.integer)):
        if not 0 <= subdomain < len(parts):
            raise IndexError(f"piece {subdomain} out of range")
        return int(subdomain)
    key = (float(subdomain[0]), float(subdomain[1]))
    for k, p in enumerate(parts):
        if np.allclose(p, key, rtol=0, atol=1e-12):
            return k
    raise ValueError(f"{subdomain} is not a partition piece {parts}")


# --------------------------------------------------------------------------
# verdicts


class Status(str, Enum):
    ROBUST = "Robust"
    UNKNOWN = "Unknown"


class Mode(str, Enum):
    INTERVAL = "interval"
    LINEAR = "linear"


@dataclass
class VerificationOutcome:
    status: Status
    margins: np.ndarray                 # lower bound of logit_true - logit_c (inf at c = true)
    witness_kappa: float | None = None
    witness_image: Image | None = None
    witness_flips: bool = False         # candidate actually changes the argmax
    worst_piece: tuple | None = None

    @property
    def robust(self) -> bool:
        return self.status is Status.ROBUST


def _margins(net, bs, label, mode: Mode):
    if mode is Mode.INTERVAL:
        inputs = intervals_from_bounds(bs)
        boxes = ibp_layers(net, *inputs)
        return _margin_interval(net, inputs, boxes, label), bs.bounds[0].domain
    others = np.arange(net.output_dim) != label
    worst, worst_piece = None, None
    for piece, (k0, k1) in enumerate(bs.bounds[0].partition):
        _, sym, inputs, boxes = _linear_pass(net, bs, piece, label)
        m = np.maximum(sym, _margin_interval(net, inputs, boxes, label))
        if worst is None or m[others].min(initial=np.inf) < worst[others].min(initial=np.inf):
            worst_piece = (k0, k1)
        worst = m if worst is None else np.minimum(worst, m)
    return worst, worst_piece


def verify_robust(net: Network, bs: BoundSet, true_label: int, mode="interval",
                  image: Image | None = None) -> VerificationOutcome:
    """Robust iff every margin lower bound is positive.

    When the answer is Unknown and ``image`` is given, the curve is sampled at
    the ends and midpoint of the weakest piece to propose a witness ``kappa``.
    """
    mode = Mode(mode)
    if not 0 <= true_label < net.output_dim:
        raise ValueError(f"label {true_label} outside 0..{net.output_dim - 1}")
    _check_input(net, len(bs))
    m, piece = _margins(net, bs, true_label, mode)
    m = np.asarray(m, dtype=float).copy()
    m[true_label] = np.inf
    if net.output_dim == 1 or np.all(m > 0):
        return VerificationOutcome(Status.ROBUST, m, worst_piece=piece)
    out = VerificationOutcome(Status.UNKNOWN, m, worst_piece=piece)
    if image is not None:
        k0, k1 = piece
        best = None
        for k in (k0, 0.5 * (k0 + k1), k1):
            img_k = render(image, bs.intr, bs.scenario, k)
            logits = net.forward(img_k.pixels.ravel())
            gap = logits[true_label] - np.delete(logits, true_label).max()
            if best is None or gap < best[0]:
                best = (gap, k, img_k)
        out.witness_kappa, out.witness_image = float(best[1]), best[2]
        out.witness_flips = bool(best[0] < 0)
    return out


__all__ = ["Layer", "Network", "parse_network", "load_network", "intervals_from_bounds",
           "ibp_forward", "ibp_layers", "linear_forward", "SymbolicBound", "Status", "Mode",
           "VerificationOutcome", "verify_robust"]
