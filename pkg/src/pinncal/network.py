"""Fully connected tanh networks with input/output range normalization.

Networks map real coordinates (mm) to real displacements (mm). Internally
the inputs are affinely mapped to [-1, 1], and the raw network output in
[-1, 1] is affinely mapped back to the displacement range. First and second
derivatives w.r.t. the real inputs are propagated through the layers
alongside the values, with the constant Jacobians of both affine maps folded
in, so the returned derivatives belong to the real-unit function.

Each network has a single output neuron; in 2D two independent networks
(one per displacement component) share the input normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tape import Node, Tape, tanh


class ConfigurationError(ValueError):
    pass


@dataclass
class FeedForwardNet:
    """Weights stored as (fan_in, fan_out) matrices; hidden layers tanh,
    output layer identity."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def glorot_normal_init(layer_sizes: list[int], seed: int) -> FeedForwardNet:
    """Zero-mean normal weights with variance 2/(fan_in+fan_out), zero biases."""
    if any(s < 1 for s in layer_sizes):
        raise ConfigurationError(f"layer sizes must be >= 1, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FeedForwardNet(list(layer_sizes), weights, biases)


@dataclass
class NormalizationSpec:
    """Input and output ranges; the affine transforms map them onto [-1, 1]."""

    x_min: np.ndarray
    x_max: np.ndarray
    u_min: float
    u_max: float

    def __post_init__(self):
        self.x_min = np.atleast_1d(np.asarray(self.x_min, dtype=np.float64))
        self.x_max = np.atleast_1d(np.asarray(self.x_max, dtype=np.float64))
        if np.any(self.x_max <= self.x_min) or self.u_max <= self.u_min:
            raise ConfigurationError("degenerate normalization range")

    @property
    def input_scale(self) -> np.ndarray:
        """d(normalized input)/d(real input), per dimension."""
        return 2.0 / (self.x_max - self.x_min)

    @property
    def output_scale(self) -> float:
        """d(real output)/d(raw output)."""
        return 0.5 * (self.u_max - self.u_min)


def spec_from_data(coords: np.ndarray, displacements: np.ndarray) -> NormalizationSpec:
    """Ranges taken from the training data (coordinates and one displacement
    component)."""
    coords = np.atleast_2d(coords)
    return NormalizationSpec(
        x_min=coords.min(axis=0), x_max=coords.max(axis=0),
        u_min=float(np.min(displacements)), u_max=float(np.max(displacements)))


def transform_in(x: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    return 2.0 * (x - spec.x_min) / (spec.x_max - spec.x_min) - 1.0


def transform_out(u_raw: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    return (spec.u_max - spec.u_min) * (u_raw + 1.0) / 2.0 + spec.u_min


@dataclass
class NormalizedNetwork:
    net: FeedForwardNet
    spec: NormalizationSpec

    def __post_init__(self):
        if self.net.layer_sizes[-1] != 1:
            raise ConfigurationError("normalized networks are scalar-valued")
        if self.net.layer_sizes[0] != self.spec.x_min.size:
            raise ConfigurationError("input size does not match normalization")


def _propagate(xn, seeds, weights, biases, d_in, normalized: bool):
    """Forward pass carrying (value, first, second) derivative channels.

    Works on plain arrays and on tape Nodes alike; `xn` is the normalized
    input of shape (N, d_in) and `seeds` its constant first derivatives
    w.r.t. the real inputs. Returns raw (pre-retransform) channels.
    """
    pairs = [(j, k) for j in range(d_in) for k in range(j, d_in)]
    y = xn
    first = list(seeds)
    second = {p: None for p in pairs}  # None means identically zero
    n_layers = len(weights)
    for i, (w, b) in enumerate(zip(weights, biases)):
        y = y @ w + b
        first = [d @ w for d in first]
        second = {p: (s @ w if s is not None else None)
                  for p, s in second.items()}
        if i < n_layers - 1:
            a = tanh(y)
            t = 1.0 - a * a
            curv = -2.0 * a * t
            second = {
                (j, k): ((t * second[(j, k)] if second[(j, k)] is not None
                          else None))
                for j, k in pairs}
            for j, k in pairs:
                term = curv * first[j] * first[k]
                second[(j, k)] = term if second[(j, k)] is None \
                    else second[(j, k)] + term
            first = [t * d for d in first]
            y = a
    return y, first, second


def _seed_arrays(n_points: int, spec: NormalizationSpec) -> list[np.ndarray]:
    d_in = spec.x_min.size
    scale = spec.input_scale
    seeds = []
    for k in range(d_in):
        s = np.zeros((n_points, d_in))
        s[:, k] = scale[k]
        seeds.append(s)
    return seeds


def evaluate(nn: NormalizedNetwork, x: np.ndarray):
    """Displacement values with exact first and second derivatives.

    Returns (u, jac, hess) of shapes (N,), (N, d_in) and (N, d_in, d_in);
    the Hessian is symmetric by construction.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d_in = x.shape
    xn = transform_in(x, nn.spec)
    y, first, second = _propagate(
        xn, _seed_arrays(n, nn.spec), nn.net.weights, nn.net.biases,
        d_in, normalized=True)
    s_out = nn.spec.output_scale
    u = transform_out(y[:, 0], nn.spec)
    jac = np.stack([s_out * d[:, 0] for d in first], axis=1)
    hess = np.zeros((n, d_in, d_in))
    for (j, k), s in second.items():
        val = s_out * s[:, 0] if s is not None else np.zeros(n)
        hess[:, j, k] = val
        hess[:, k, j] = val
    return u, jac, hess


def evaluate_on_tape(tape: Tape, nn: NormalizedNetwork, x: np.ndarray,
                     weights: list[Node], biases: list[Node],
                     need_second: bool = True):
    """Tape-recorded evaluation for parameter-gradient computation.

    Returns (u, first, second) where u is an (N, 1) Node in real units,
    `first` a list of d_in Nodes and `second` a dict over index pairs
    (j, k), j <= k, of Nodes (already scaled to real units).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d_in = x.shape
    xn = tape.constant(transform_in(x, nn.spec))
    seeds = [tape.constant(s) for s in _seed_arrays(n, nn.spec)]
    y, first, second = _propagate(xn, seeds, weights, biases, d_in,
                                  normalized=True)
    s_out = nn.spec.output_scale
    u = s_out * y + (s_out + nn.spec.u_min)
    first = [s_out * d for d in first]
    if need_second:
        second = {p: (s_out * s if s is not None else tape.constant(np.zeros((n, 1))))
                  for p, s in second.items()}
    else:
        second = {}
    return u, first, second


def raw_network_on_tape(tape: Tape, net: FeedForwardNet, x: np.ndarray,
                        weights: list[Node], biases: list[Node]):
    """Un-normalized evaluation (standard-mode baseline): real coordinates in,
    raw outputs and derivative channels out."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d_in = x.shape
    seeds = []
    for k in range(d_in):
        s = np.zeros((n, d_in))
        s[:, k] = 1.0
        seeds.append(s)
    xn = tape.constant(x)
    y, first, second = _propagate(xn, [tape.constant(s) for s in seeds],
                                  weights, biases, d_in, normalized=False)
    second = {p: (s if s is not None else tape.constant(np.zeros((n, 1))))
              for p, s in second.items()}
    return y, first, second


# -- parameter flattening -------------------------------------------------

def pack_parameters(net: FeedForwardNet) -> np.ndarray:
    """Layer-major flattening: W^1 (row-major), b^1, W^2, b^2, ..."""
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)

def unpack_parameters(net: FeedForwardNet, vec: np.ndarray) -> FeedForwardNet:
    """Inverse of pack_parameters; returns a new network."""
    weights, biases, off = [], [], 0
    for w, b in zip(net.weights, net.biases):
        weights.append(vec[off:off + w.size].reshape(w.shape).copy())
        off += w.size
        biases.append(vec[off:off + b.size].copy())
        off += b.size
    if off != vec.size:
        raise ValueError(f"parameter vector length {vec.size}, expected {off}")
    return FeedForwardNet(list(net.layer_sizes), weights, biases)


# -- checkpointing --------------------------------------------------------

def save_checkpoint(path, nn: NormalizedNetwork, correction_factors: dict):
    doc = {
        "layer_sizes": nn.net.layer_sizes,
        "weights": [w.tolist() for w in nn.net.weights],
        "biases": [b.tolist() for b in nn.net.biases],
        "normalization": {
            "x_min": nn.spec.x_min.tolist(),
            "x_max": nn.spec.x_max.tolist(),
            "u_min": nn.spec.u_min,
            "u_max": nn.spec.u_max,
        },
        "correction_factors": correction_factors,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    net = FeedForwardNet(
        doc["layer_sizes"],
        [np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        [np.asarray(b, dtype=np.float64) for b in doc["biases"]])
    norm = doc["normalization"]
    spec = NormalizationSpec(np.asarray(norm["x_min"]), np.asarray(norm["x_max"]),
                             norm["u_min"], norm["u_max"])
    return NormalizedNetwork(net, spec), doc["correction_factors"]
