"""Feedforward controller networks and Taylor-model propagation through them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from os import PathLike
from typing import Any, Mapping, Sequence

import numpy as np

from .bernstein import DEFAULT_BERNSTEIN_ORDER, DEFAULT_STEPS, Activation, compose_activation
from .tmcore import TaylorModel, tm_bounds, tm_linear_combination

OPTIMIZED = "optimized"
ALWAYS_BERNSTEIN = "always-bernstein"
MODES = (OPTIMIZED, ALWAYS_BERNSTEIN)


class NetworkLoadError(ValueError):
    """Raised when a weight document does not describe a valid network."""


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    biases: np.ndarray
    activation: Activation

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D matrix (out x in)")
        if b.shape != (w.shape[0],):
            raise ValueError(f"weights have {w.shape[0]} rows but {b.size} biases")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite weight or bias")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise ValueError(f"layer {i} expects {layers[i].in_dim} inputs but layer "
                                 f"{i - 1} produces {layers[i - 1].out_dim}")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def __call__(self, x) -> np.ndarray:
        """Exact (double precision) forward pass; accepts one point or a batch."""
        h = np.asarray(x, dtype=float)
        for layer in self.layers:
            h = layer.activation(h @ layer.weights.T + layer.biases)
        return h

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {"weights": layer.weights.tolist(), "biases": layer.biases.tolist(),
                 "activation": layer.activation.value}
                for layer in self.layers
            ],
        }


def load_network(doc: Mapping[str, Any] | str | PathLike) -> Network:
    """Build a validated :class:`Network` from a weight document or a JSON file path.

    Errors name the offending layer (and entry, where there is one).
    """
    if not isinstance(doc, Mapping):
        try:
            with open(doc) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkLoadError(f"{doc}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, Mapping) or "layers" not in doc:
        raise NetworkLoadError("network document must be an object with a 'layers' list")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise NetworkLoadError("'layers' must be a non-empty list")
    layers = []
    expected_in = doc.get("input_dim")
    if expected_in is not None and (not isinstance(expected_in, int) or expected_in < 1):
        raise NetworkLoadError("'input_dim' must be a positive integer")
    for idx, raw in enumerate(raw_layers):
        where = f"layer {idx}"
        if not isinstance(raw, Mapping):
            raise NetworkLoadError(f"{where}: expected an object")
        for key in ("weights", "biases", "activation"):
            if key not in raw:
                raise NetworkLoadError(f"{where}: missing '{key}'")
        try:
            act = Activation.parse(raw["activation"])
        except ValueError as exc:
            raise NetworkLoadError(f"{where}: {exc}") from None
        w = raw["weights"]
        if not isinstance(w, list) or not w or not all(isinstance(r, list) for r in w):
            raise NetworkLoadError(f"{where}: 'weights' must be a non-empty list of rows")
        widths = {len(r) for r in w}
        if len(widths) != 1:
            raise NetworkLoadError(f"{where}: weight rows have differing lengths {sorted(widths)}")
        try:
            w_arr = np.array(w, dtype=float)
            b_arr = np.array(raw["biases"], dtype=float)
        except (TypeError, ValueError):
            raise NetworkLoadError(f"{where}: weights and biases must be numbers") from None
        if b_arr.ndim != 1 or b_arr.shape[0] != w_arr.shape[0]:
            raise NetworkLoadError(f"{where}: dimension mismatch, {w_arr.shape[0]} weight rows "
                                   f"but {b_arr.size} biases")
        bad = np.argwhere(~np.isfinite(w_arr))
        if bad.size:
            r, c = bad[0]
            raise NetworkLoadError(f"{where}: non-finite weight at [{r}][{c}]")
        bad = np.flatnonzero(~np.isfinite(b_arr))
        if bad.size:
            raise NetworkLoadError(f"{where}: non-finite bias at [{bad[0]}]")
        prev = expected_in if idx == 0 else layers[-1].out_dim
        if prev is not None and w_arr.shape[1] != prev:
            raise NetworkLoadError(f"{where}: dimension mismatch, expects {w_arr.shape[1]} inputs "
                                   f"but receives {prev}")
        layers.append(Layer(w_arr, b_arr, act))
    return Network(tuple(layers))


def save_network(net: Network, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh, indent=1)


def affine_step(tms: Sequence[TaylorModel], layer: Layer) -> list[TaylorModel]:
    """Pre-activation models ``W @ tms + b`` for one layer."""
    if len(tms) != layer.in_dim:
        raise ValueError(f"layer expects {layer.in_dim} inputs, got {len(tms)}")
    return tm_linear_combination(tms, layer.weights, layer.biases)


def relu_propagate(t: TaylorModel, k: int = DEFAULT_BERNSTEIN_ORDER,
                   m: int = DEFAULT_STEPS) -> TaylorModel:
    """Three-case ReLU law: exact zero, identity, or Bernstein enclosure."""
    rng = tm_bounds(t)
    if rng.hi <= 0.0:
        return TaylorModel.zero(t.domain, t.order)
    if rng.lo >= 0.0:
        return t
    return compose_activation(t, Activation.RELU, k, m)


def activate(t: TaylorModel, act: Activation, k: int = DEFAULT_BERNSTEIN_ORDER,
             m: int = DEFAULT_STEPS, mode: str = OPTIMIZED) -> TaylorModel:
    if act is Activation.LINEAR:
        return t
    if act is Activation.RELU and mode == OPTIMIZED:
        return relu_propagate(t, k, m)
    return compose_activation(t, act, k, m)


def network_reach(net: Network, input_tms: Sequence[TaylorModel],
                  k: int = DEFAULT_BERNSTEIN_ORDER, m: int = DEFAULT_STEPS,
                  mode: str = OPTIMIZED) -> list[TaylorModel]:
    """Propagate Taylor models through every layer of ``net``.

    ``k`` and ``m`` are the Bernstein order and sampling steps; the
    truncation order is carried by the input models.  ``mode`` selects the
    three-case ReLU law (``"optimized"``) or Bernstein enclosures for every
    ReLU neuron (``"always-bernstein"``).
    """
    if mode not in MODES:
        raise ValueError(f"unknown propagation mode {mode!r}; expected one of {MODES}")
    if len(input_tms) != net.input_dim:
        raise ValueError(f"network expects {net.input_dim} inputs, got {len(input_tms)}")
    tms = list(input_tms)
    for layer in net.layers:
        pre = affine_step(tms, layer)
        tms = [activate(t, layer.activation, k, m, mode) for t in pre]
    return tms


def sign_definite_fraction(net: Network, input_tms: Sequence[TaylorModel],
                           k: int = DEFAULT_BERNSTEIN_ORDER, m: int = DEFAULT_STEPS) -> float:
    """Share of ReLU neurons whose pre-activation bounds do not straddle zero."""
    tms = list(input_tms)
    total = definite = 0
    for layer in net.layers:
        pre = affine_step(tms, layer)
        if layer.activation is Activation.RELU:
            for t in pre:
                rng = tm_bounds(t)
                total += 1
                definite += rng.hi <= 0.0 or rng.lo >= 0.0
        tms = [activate(t, layer.activation, k, m) for t in pre]
    return definite / total if total else math.nan
