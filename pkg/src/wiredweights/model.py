"""Transformer topology, quantized weight storage and the synthetic generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prng import uniform_signed

DEFAULT_SCALE_EXP = -3
LAYER_MATRICES = ("W_q", "W_k", "W_v", "W_1", "W_2", "W_3")


def signed_range(width: int) -> tuple[int, int]:
    return -(1 << (width - 1)), (1 << (width - 1)) - 1


@dataclass(frozen=True)
class TransformerTopology:
    n_layers: int
    d_model: int
    d_ffn: int
    vocab_size: int
    activation_width: int = 8
    weight_width: int = 4
    transfer_width: int = 16

    def __post_init__(self):
        # n_layers may be 0 (embedding + head only); everything else must be positive
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        for name in ("d_model", "d_ffn", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("activation_width", "weight_width", "transfer_width"):
            w = getattr(self, name)
            if not 2 <= w <= 32:
                raise ValueError(f"{name}={w} outside 2..32")

    def matrix_shape(self, name: str) -> tuple[int, int]:
        d, f = self.d_model, self.d_ffn
        return {
            "W_q": (d, d), "W_k": (d, d), "W_v": (d, d),
            "W_1": (d, f), "W_3": (d, f), "W_2": (f, d),
            "embedding": (self.vocab_size, d), "head": (d, self.vocab_size),
        }[name]


PRESETS = {
    "tiny": TransformerTopology(n_layers=2, d_model=8, d_ffn=16, vocab_size=32),
    "llama2-7b": TransformerTopology(n_layers=32, d_model=4096, d_ffn=11008, vocab_size=32000),
    "tinyllama-1.1b": TransformerTopology(n_layers=22, d_model=2048, d_ffn=5632, vocab_size=32000),
}


def preset(name: str) -> TransformerTopology:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown topology preset {name!r}; known: {sorted(PRESETS)}") from None


@dataclass(frozen=True, eq=False)
class QuantizedWeightMatrix:
    """Row-major INT-w grid; real value of element (i, j) is ``values[i, j] * 2**scale_exp``."""

    values: np.ndarray
    scale_exp: int = DEFAULT_SCALE_EXP
    width: int = 4

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int64)
        if v.ndim != 2:
            raise ValueError("weight matrix must be 2-D")
        lo, hi = signed_range(self.width)
        if v.size and (v.min() < lo or v.max() > hi):
            raise ValueError(f"weight values outside signed {self.width}-bit range [{lo}, {hi}]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def dequantize(self) -> np.ndarray:
        return self.values * 2.0 ** self.scale_exp

    def __eq__(self, other):
        if not isinstance(other, QuantizedWeightMatrix):
            return NotImplemented
        return (self.scale_exp == other.scale_exp and self.width == other.width
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"QuantizedWeightMatrix({self.rows}x{self.cols}, scale_exp={self.scale_exp})"


@dataclass(frozen=True)
class LayerWeights:
    W_q: QuantizedWeightMatrix
    W_k: QuantizedWeightMatrix
    W_v: QuantizedWeightMatrix
    W_1: QuantizedWeightMatrix
    W_2: QuantizedWeightMatrix
    W_3: QuantizedWeightMatrix

    def matrices(self):
        return [(name, getattr(self, name)) for name in LAYER_MATRICES]


@dataclass(frozen=True)
class ModelBundle:
    topology: TransformerTopology
    layers: tuple[LayerWeights, ...]
    embedding: QuantizedWeightMatrix
    head: QuantizedWeightMatrix
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        topo = self.topology
        if len(self.layers) != topo.n_layers:
            raise ValueError(f"expected {topo.n_layers} layers, got {len(self.layers)}")
        checks = [("embedding", self.embedding), ("head", self.head)]
        for layer in self.layers:
            checks.extend(layer.matrices())
        for name, m in checks:
            if m.values.shape != topo.matrix_shape(name):
                raise ValueError(f"{name} has shape {m.values.shape}, topology wants {topo.matrix_shape(name)}")

    def all_matrices(self):
        """``(label, matrix)`` in file order: embedding, per-layer matrices, head."""
        out = [("embedding", self.embedding)]
        for i, layer in enumerate(self.layers):
            out.extend((f"layer{i}.{n}", m) for n, m in layer.matrices())
        out.append(("head", self.head))
        return out


def generate_synthetic(topology: TransformerTopology, seed: int,
                       scale_exp: int = DEFAULT_SCALE_EXP) -> ModelBundle:
    """Uniform INT-w weights from SplitMix64; matrix k uses stream k of ``seed``."""
    w = topology.weight_width
    stream = iter(range(1 << 30))

    def draw(name):
        r, c = topology.matrix_shape(name)
        vals = uniform_signed(seed, r * c, w, stream=next(stream)).reshape(r, c)
        return QuantizedWeightMatrix(vals, scale_exp, w)

    embedding = draw("embedding")
    layers = tuple(LayerWeights(**{n: draw(n) for n in LAYER_MATRICES}) for _ in range(topology.n_layers))
    head = draw("head")
    return ModelBundle(topology, layers, embedding, head, meta={"seed": seed})


def count_params(model) -> int:
    """Element count over every matrix.  Accepts a bundle or a bare topology."""
    topo = model.topology if isinstance(model, ModelBundle) else model
    per_layer = sum(np.prod(topo.matrix_shape(n)) for n in LAYER_MATRICES)
    emb = np.prod(topo.matrix_shape("embedding")) + np.prod(topo.matrix_shape("head"))
    return int(topo.n_layers * per_layer + emb)
