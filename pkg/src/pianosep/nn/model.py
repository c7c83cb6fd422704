"""Heterogeneous SAGE encoder with staff, voice-edge and chord-edge heads."""

from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..graph import N_FEATURES, RELATIONS, CandidateSet, InputGraph, OutputGraph
from . import autograd as ag

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass(frozen=True)
class ModelConfig:
    hidden_size: int = 256
    num_conv_layers: int = 3
    mlp_hidden_size: Optional[int] = None  # defaults to hidden_size
    activation: str = "relu"
    chord_threshold: float = 0.5
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1 or self.num_conv_layers < 1:
            raise ValueError("hidden_size and num_conv_layers must be >= 1")
        if self.mlp_hidden_size is not None and self.mlp_hidden_size < 1:
            raise ValueError("mlp_hidden_size must be >= 1")
        if not 0.0 < self.chord_threshold < 1.0:
            raise ValueError("chord_threshold must lie in (0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def mlp_width(self) -> int:
        return self.mlp_hidden_size or self.hidden_size

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(config: ModelConfig) -> "OrderedDict[str, tuple[int, ...]]":
    h, m = config.hidden_size, config.mlp_width
    shapes: OrderedDict[str, tuple[int, ...]] = OrderedDict()
    shapes["input.weight"] = (N_FEATURES, h)
    shapes["input.bias"] = (h,)
    for layer in range(config.num_conv_layers):
        for rel in RELATIONS:
            shapes[f"conv{layer}.{rel}.weight"] = (2 * h, h)
            shapes[f"conv{layer}.{rel}.bias"] = (h,)
    for head, fan_in in (("staff", h), ("voice", 2 * h)):
        shapes[f"{head}.0.weight"] = (fan_in, m)
        shapes[f"{head}.0.bias"] = (m,)
        shapes[f"{head}.1.weight"] = (m, 1)
        shapes[f"{head}.1.bias"] = (1,)
    return shapes


class ParamStore(OrderedDict):
    """Name -> float64 array, in a fixed order, plus the owning config."""

    def __init__(self, config: ModelConfig, arrays=None):
        super().__init__()
        self.config = config
        if arrays is not None:
            for k, v in arrays.items():
                self[k] = np.asarray(v, dtype=np.float64)

    @classmethod
    def init(cls, config: ModelConfig) -> "ParamStore":
        """Glorot-uniform weights, zero biases, seeded by ``config.seed``."""
        rng = np.random.default_rng(config.seed)
        store = cls(config)
        for name, shape in param_shapes(config).items():
            if name.endswith(".bias"):
                store[name] = np.zeros(shape)
            else:
                bound = np.sqrt(6.0 / (shape[0] + shape[1]))
                store[name] = rng.uniform(-bound, bound, size=shape)
        return store

    def copy(self) -> "ParamStore":
        return ParamStore(self.config, {k: v.copy() for k, v in self.items()})

    def count(self, prefix: str = "") -> int:
        return int(sum(v.size for k, v in self.items() if k.startswith(prefix)))

    def counts(self) -> dict[str, int]:
        encoder = self.count("input") + self.count("conv")
        decoder = self.count("staff") + self.count("voice")
        return {"encoder": encoder, "decoder": decoder, "total": encoder + decoder}

    def equals(self, other: "ParamStore") -> bool:
        return (self.config == other.config and list(self) == list(other)
                and all(np.array_equal(self[k], other[k]) for k in self))


def _activate(x: ag.Tensor, kind: str) -> ag.Tensor:
    if kind == "relu":
        return ag.relu(x)
    if kind == "tanh":
        return ag.tanh(x)
    return x


def sage_layer_forward(graph: InputGraph, h: ag.Tensor, layer: dict, activation: str = "relu",
                       activate: bool = True) -> ag.Tensor:
    """One heterogeneous SAGE layer.

    ``layer`` maps relation -> (weight, bias). For every relation the
    in-neighbour embeddings are summed, concatenated to the node's own
    embedding and projected; the per-relation projections are summed before
    the activation.
    """
    n = graph.node_count
    if h.value.shape[0] != n:
        raise ValueError(f"embedding has {h.value.shape[0]} rows for {n} nodes")
    terms = []
    for rel in RELATIONS:
        weight, bias = layer[rel]
        if weight.value.shape[0] != 2 * h.value.shape[1]:
            raise ValueError(f"{rel}: weight expects input width {weight.value.shape[0] // 2}, "
                             f"got {h.value.shape[1]}")
        src, dst = graph.edges[rel]
        agg = ag.scatter_sum(ag.gather(h, src), dst, n)
        terms.append(ag.add(ag.matmul(ag.concat([h, agg]), weight), bias))
    out = ag.add_n(terms)
    return _activate(out, activation) if activate else out


def as_tensors(params: ParamStore) -> dict[str, ag.Tensor]:
    return {k: ag.param(v) for k, v in params.items()}


def encoder_forward(graph: InputGraph, tensors: dict[str, ag.Tensor], config: ModelConfig,
                    rng: Optional[np.random.Generator] = None) -> ag.Tensor:
    """Input projection then ``num_conv_layers`` SAGE layers; the last is left linear."""
    if graph.features.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features per node")
    h = ag.add(ag.matmul(ag.const(graph.features), tensors["input.weight"]), tensors["input.bias"])
    for layer in range(config.num_conv_layers):
        params = {rel: (tensors[f"conv{layer}.{rel}.weight"], tensors[f"conv{layer}.{rel}.bias"])
                  for rel in RELATIONS}
        last = layer == config.num_conv_layers - 1
        h = sage_layer_forward(graph, h, params, config.activation, activate=not last)
        if not last and rng is not None:
            h = ag.dropout(h, config.dropout, rng)
    return h


def _mlp(x: ag.Tensor, tensors: dict, head: str, activation: str) -> ag.Tensor:
    hidden = ag.add(ag.matmul(x, tensors[f"{head}.0.weight"]), tensors[f"{head}.0.bias"])
    hidden = _activate(hidden, activation)
    logit = ag.add(ag.matmul(hidden, tensors[f"{head}.1.weight"]), tensors[f"{head}.1.bias"])
    return ag.sigmoid(ag.reshape(logit, (-1,)))


@dataclass
class PredictionSet:
    staff_prob: np.ndarray
    voice_prob: np.ndarray
    chord_prob: np.ndarray


def decode_tensors(h: ag.Tensor, cands: CandidateSet, tensors: dict, config: ModelConfig):
    n = h.value.shape[0]
    for arr in (cands.voice, cands.chord):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("candidate index out of range")
    staff = _mlp(h, tensors, "staff", config.activation)
    voice = chord = None
    if len(cands.voice):
        pair = ag.concat([ag.gather(h, cands.voice[:, 0]), ag.gather(h, cands.voice[:, 1])])
        voice = _mlp(pair, tensors, "voice", config.activation)
    if len(cands.chord):
        cos = ag.cosine_rows(ag.gather(h, cands.chord[:, 0]), ag.gather(h, cands.chord[:, 1]))
        chord = ag.affine(cos, 0.5, 0.5)
    return staff, voice, chord


def decode(h, cands: CandidateSet, params: ParamStore, config: Optional[ModelConfig] = None
           ) -> PredictionSet:
    """Probabilities for staff (per note), voice candidates and chord candidates."""
    config = config or params.config
    if not isinstance(h, ag.Tensor):
        h = ag.const(h)
    tensors = {k: ag.const(v) for k, v in params.items()}
    staff, voice, chord = decode_tensors(h, cands, tensors, config)
    return PredictionSet(staff.value.copy(),
                         voice.value.copy() if voice is not None else np.zeros(0),
                         chord.value.copy() if chord is not None else np.zeros(0))


def embed(graph: InputGraph, params: ParamStore) -> np.ndarray:
    tensors = {k: ag.const(v) for k, v in params.items()}
    return encoder_forward(graph, tensors, params.config).value


def predict(graph: InputGraph, cands: CandidateSet, params: ParamStore) -> PredictionSet:
    return decode(embed(graph, params), cands, params)


@dataclass
class Targets:
    staff: np.ndarray
    voice: np.ndarray
    chord: np.ndarray

    @classmethod
    def from_truth(cls, truth: OutputGraph, cands: CandidateSet) -> "Targets":
        voice_set = set(truth.voice_edges)
        chord_set = set(truth.chord_edges)
        voice = np.array([(int(u), int(v)) in voice_set for u, v in cands.voice], dtype=np.float64)
        chord = np.array([(int(u), int(v)) in chord_set for u, v in cands.chord], dtype=np.float64)
        missing_v = len(voice_set) - int(voice.sum())
        missing_c = len(chord_set) - int(chord.sum())
        if missing_v or missing_c:
            raise ValueError(f"{missing_v} voice / {missing_c} chord truth edges are not candidates")
        return cls(np.asarray(truth.staff, dtype=np.float64), voice, chord)


def loss_tensors(probs, targets: Targets, eps: float = 1e-7):
    """Unweighted sum of the three mean BCE terms; returns (total, components)."""
    staff, voice, chord = probs
    parts = {}
    for name, p, t in (("staff", staff, targets.staff), ("voice", voice, targets.voice),
                       ("chord", chord, targets.chord)):
        if p is None or p.value.size == 0:
            if t.size:
                raise ValueError(f"{name} targets without predictions")
            warnings.warn(f"empty {name} candidate set; head contributes 0", RuntimeWarning,
                          stacklevel=2)
            continue
        parts[name] = ag.bce(p, t, eps)
    total = ag.add_n(list(parts.values())) if parts else ag.const(0.0)
    return total, {k: float(v.value) for k, v in parts.items()}


def loss(predictions: PredictionSet, targets: Targets, eps: float = 1e-7) -> float:
    """Loss value of already-computed probabilities (no gradients)."""
    probs = tuple(ag.const(x) if x.size else None for x in
                  (predictions.staff_prob, predictions.voice_prob, predictions.chord_prob))
    total, _ = loss_tensors(probs, targets, eps)
    return float(total.value)


def loss_and_grad(params: ParamStore, graph: InputGraph, cands: CandidateSet, targets: Targets,
                  rng: Optional[np.random.Generator] = None):
    """Forward, loss and exact gradients for every parameter.

    Returns ``(loss, components, grads)`` with ``grads`` keyed like ``params``.
    """
    tensors = as_tensors(params)
    h = encoder_forward(graph, tensors, params.config, rng)
    total, parts = loss_tensors(decode_tensors(h, cands, tensors, params.config), targets)
    grads = OrderedDict()
    if total.requires_grad:
        ag.backward(total)
    for k, t in tensors.items():
        grads[k] = t.grad if t.grad is not None else np.zeros_like(t.value)
    return float(total.value), parts, grads


def loss_value(params: ParamStore, graph: InputGraph, cands: CandidateSet, targets: Targets) -> float:
    tensors = {k: ag.const(v) for k, v in params.items()}
    h = encoder_forward(graph, tensors, params.config)
    total, _ = loss_tensors(decode_tensors(h, cands, tensors, params.config), targets)
    return float(total.value)
