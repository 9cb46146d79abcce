"""Bit-exact integer reference for the transformer the device and host compute together.

Fixed-point conventions (all held in :class:`QuantSpec`):

* the residual stream and FFN intermediates live on an ``activation_width``
  grid with step ``2**act_exp``;
* Q, K, V, attention outputs and logits use ``transfer_width`` words with
  step ``2**transfer_exp`` (what crosses the host/device link);
* every grid change is an arithmetic right shift (floor) or left shift,
  followed by a saturating clamp.  Clamp events are counted in
  :class:`QuantStats`, never hidden.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .model import ModelBundle, QuantizedWeightMatrix, TransformerTopology, signed_range


@dataclass(frozen=True)
class QuantSpec:
    act_width: int = 8
    act_exp: int = -4
    transfer_width: int = 16
    transfer_exp: int = -8
    residual: bool = True
    activation: str = "relu"  # "relu" keeps the device exact-integer; "silu" is float diagnostics
    fan_in_shift: bool = True

    def stage_shift(self, fan_in: int) -> int:
        """Extra right shift after a matrix product: ceil(log2(fan_in) / 2) when enabled.

        A fixed power-of-two gain that keeps random-weight products inside
        the activation range; there are no normalization layers.
        """
        return math.ceil(math.log2(max(fan_in, 1)) / 2) if self.fan_in_shift else 0

    @classmethod
    def for_topology(cls, topo: TransformerTopology, **kw) -> "QuantSpec":
        return cls(act_width=topo.activation_width, transfer_width=topo.transfer_width, **kw)

    def acc_width(self, w_width: int, fan_in: int) -> int:
        return self.act_width + w_width + math.ceil(math.log2(max(fan_in, 1)))


@dataclass
class QuantStats:
    clamps: Counter = field(default_factory=Counter)
    values: Counter = field(default_factory=Counter)

    def record(self, stage: str, n_clamped: int, n_total: int):
        self.clamps[stage] += n_clamped
        self.values[stage] += n_total

    @property
    def total_clamps(self) -> int:
        return sum(self.clamps.values())


@dataclass(frozen=True, eq=False)
class ActivationVector:
    values: np.ndarray
    width: int
    scale_exp: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64).ravel()
        lo, hi = signed_range(self.width)
        if v.size and (v.min() < lo or v.max() > hi):
            raise ValueError(f"activation outside signed {self.width}-bit range")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def dequantize(self) -> np.ndarray:
        return self.values * 2.0 ** self.scale_exp

    def __eq__(self, other):
        return (isinstance(other, ActivationVector) and self.width == other.width
                and self.scale_exp == other.scale_exp and np.array_equal(self.values, other.values))


def shift_to_grid(values, from_exp: int, to_exp: int) -> np.ndarray:
    """Move integers from grid ``2**from_exp`` to ``2**to_exp``, flooring."""
    v = np.asarray(values, dtype=np.int64)
    s = to_exp - from_exp
    return v >> s if s >= 0 else v << -s


def clamp(values, width: int, stats: QuantStats | None = None, stage: str = "") -> np.ndarray:
    lo, hi = signed_range(width)
    v = np.asarray(values, dtype=np.int64)
    out = np.clip(v, lo, hi)
    if stats is not None:
        stats.record(stage, int(np.count_nonzero(out != v)), int(v.size))
    return out


def requantize(x: ActivationVector, to_exp: int, width: int,
               stats: QuantStats | None = None, stage: str = "") -> ActivationVector:
    return ActivationVector(clamp(shift_to_grid(x.values, x.scale_exp, to_exp), width, stats, stage),
                            width, to_exp)


def requantize_float(real, to_exp: int, width: int,
                     stats: QuantStats | None = None, stage: str = "") -> ActivationVector:
    ints = np.floor(np.asarray(real, dtype=np.float64) / 2.0 ** to_exp).astype(np.int64)
    return ActivationVector(clamp(ints, width, stats, stage), width, to_exp)


def project(W, x, quant: QuantSpec, to_exp: int, width: int, stats=None, stage="", matvec=None):
    """Matrix product followed by the stage shift and requantization."""
    acc = (matvec or matvec_int)(W, x)
    gain = quant.stage_shift(W.rows)
    acc = ActivationVector(acc.values, acc.width, acc.scale_exp - gain)
    return requantize(acc, to_exp, width, stats, stage)


def matvec_int(W: QuantizedWeightMatrix, x: ActivationVector, acc_width: int | None = None) -> ActivationVector:
    """``y = x @ W`` in exact integers; result grid is ``x.scale_exp + W.scale_exp``."""
    if x.values.size != W.rows:
        raise ValueError(f"shape mismatch: x has {x.values.size} elements, W has {W.rows} rows")
    need = x.width + W.width + math.ceil(math.log2(max(W.rows, 1)))
    if acc_width is None:
        acc_width = need
    elif acc_width < need:
        raise ValueError(f"acc_width {acc_width} < {need} required for fan-in {W.rows}")
    y = x.values @ W.values
    return ActivationVector(y, acc_width, x.scale_exp + W.scale_exp)


def attention_host(q: ActivationVector, k_cache, v_cache, d_k: int | None = None,
                   quant: QuantSpec | None = None, stats: QuantStats | None = None) -> ActivationVector:
    """Single-head softmax(q K^T / sqrt(d_k)) V in float64, requantized to the V grid."""
    if not k_cache or not v_cache:
        raise ValueError("attention over an empty cache")
    if len(k_cache) != len(v_cache):
        raise ValueError("key/value cache lengths differ")
    d = q.values.size
    if any(k.values.size != d for k in k_cache) or any(v.values.size != d for v in v_cache):
        raise ValueError("cache vector dimension does not match query")
    quant = quant or QuantSpec()
    d_k = d_k or d
    K = np.stack([k.dequantize() for k in k_cache])
    V = np.stack([v.dequantize() for v in v_cache])
    scores = K @ q.dequantize() / math.sqrt(d_k)
    e = np.exp(scores - scores.max())
    p = e / e.sum()
    out = p @ V
    v_exp = v_cache[0].scale_exp
    return requantize_float(out, v_exp, quant.transfer_width, stats, "attention")


def relu(x: ActivationVector) -> ActivationVector:
    return ActivationVector(np.maximum(x.values, 0), x.width, x.scale_exp)


def ffn_device(x: ActivationVector, W_1, W_2, W_3, activation: str | None = None,
               quant: QuantSpec | None = None, stats: QuantStats | None = None,
               matvec=None) -> ActivationVector:
    """``W_2 (sigma(W_1 x) * (W_3 x))`` with every intermediate on the activation grid."""
    quant = quant or QuantSpec()
    activation = activation or quant.activation
    mv = matvec or matvec_int
    aw, ae = quant.act_width, quant.act_exp
    if activation == "relu":
        gate = relu(project(W_1, x, quant, ae, aw, stats, "ffn_gate", mv))
    elif activation == "silu":
        acc = mv(W_1, x)
        r = acc.dequantize() * 2.0 ** -quant.stage_shift(W_1.rows)
        gate = requantize_float(r / (1.0 + np.exp(-r)), ae, aw, stats, "ffn_gate")
    else:
        raise ValueError(f"unknown activation {activation!r}")
    up = project(W_3, x, quant, ae, aw, stats, "ffn_up", mv)
    prod = ActivationVector(gate.values * up.values, 2 * aw, 2 * ae)
    h = requantize(prod, ae, aw, stats, "ffn_product")
    return project(W_2, h, quant, ae, aw, stats, "ffn_out", mv)


def residual_add(x: ActivationVector, delta: ActivationVector, quant: QuantSpec,
                 stats: QuantStats | None = None, stage: str = "residual") -> ActivationVector:
    d = shift_to_grid(delta.values, delta.scale_exp, x.scale_exp)
    return ActivationVector(clamp(x.values + d, x.width, stats, stage), x.width, x.scale_exp)


class KvCache:
    """Per-layer key/value history on the transfer grid.  Single writer."""

    def __init__(self, n_layers: int):
        self.keys = [[] for _ in range(n_layers)]
        self.values = [[] for _ in range(n_layers)]

    def append(self, layer: int, k: ActivationVector, v: ActivationVector):
        self.keys[layer].append(k)
        self.values[layer].append(v)

    @property
    def seq_len(self) -> int:
        lens = {len(k) for k in self.keys} | {len(v) for v in self.values}
        if len(lens) > 1:
            raise RuntimeError(f"inconsistent cache lengths {sorted(lens)}")
        return lens.pop() if lens else 0

    def layer_lengths(self):
        return [len(k) for k in self.keys]


# Pipeline stages.  forward_token chains them directly; the split-brain
# simulator runs the same stages on either side of a message link.

def embed(bundle: ModelBundle, token_id: int, quant: QuantSpec, stats=None) -> ActivationVector:
    if not 0 <= token_id < bundle.topology.vocab_size:
        raise ValueError(f"token {token_id} outside vocabulary of {bundle.topology.vocab_size}")
    row = bundle.embedding.values[token_id]
    e = ActivationVector(row, bundle.embedding.width, bundle.embedding.scale_exp)
    return requantize(e, quant.act_exp, quant.act_width, stats, "embed")


def qkv_projection(layer, x, quant, stats=None, matvec=None):
    tw, te = quant.transfer_width, quant.transfer_exp
    return tuple(project(W, x, quant, te, tw, stats, f"qkv_{n}", matvec)
                 for n, W in (("q", layer.W_q), ("k", layer.W_k), ("v", layer.W_v)))


def post_attention(layer, x, attn, quant, stats=None, matvec=None):
    """Residual with the attention output, FFN, residual with the FFN output."""
    if quant.residual:
        h = residual_add(x, attn, quant, stats, "residual_attn")
    else:
        h = requantize(attn, quant.act_exp, quant.act_width, stats, "attn_to_act")
    f = ffn_device(h, layer.W_1, layer.W_2, layer.W_3, quant=quant, stats=stats, matvec=matvec)
    return residual_add(h, f, quant, stats, "residual_ffn") if quant.residual else f


def output_head(bundle, x, quant, stats=None, matvec=None):
    return project(bundle.head, x, quant, quant.transfer_exp, quant.transfer_width, stats, "logits", matvec)


def forward_token(bundle: ModelBundle, token_id: int, kv_cache: KvCache,
                  quant: QuantSpec | None = None, stats: QuantStats | None = None) -> ActivationVector:
    """One autoregressive step: appends one K/V per layer and returns INT16 logits."""
    quant = quant or QuantSpec.for_topology(bundle.topology)
    x = embed(bundle, token_id, quant, stats)
    for i, layer in enumerate(bundle.layers):
        q, k, v = qkv_projection(layer, x, quant, stats)
        kv_cache.append(i, k, v)
        a = attention_host(q, kv_cache.keys[i], kv_cache.values[i], quant=quant, stats=stats)
        x = post_attention(layer, x, a, quant, stats)
    return output_head(bundle, x, quant, stats)


def _categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), probs.size - 1))


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def sample(logits, strategy: str = "greedy", seed=None, k: int = 1, p: float = 1.0) -> int:
    """Pick the next token.

    ``greedy`` is argmax with lowest-index tie-break.  ``top_k`` and
    ``nucleus`` restrict the candidate set (ties broken toward lower
    indices), renormalise, and draw by inverse CDF in index order, so
    ``nucleus`` with ``p=1`` reproduces a plain categorical draw.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    z = logits.dequantize() if isinstance(logits, ActivationVector) else np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty logits")
    if strategy == "greedy":
        return int(np.argmax(z))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = _softmax(z)
    order = np.argsort(-z, kind="stable")
    if strategy == "top_k":
        if k < 1:
            raise ValueError("top_k needs k >= 1")
        keep = order[:k]
    elif strategy == "nucleus":
        if not 0 < p <= 1:
            raise ValueError("nucleus needs 0 < p <= 1")
        cum = np.cumsum(probs[order])
        hit = np.nonzero(cum >= p)[0]
        # p == 1 keeps everything even when rounding lets the prefix sum hit 1.0 early
        keep = order[: hit[0] + 1] if hit.size and p < 1 else order
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    mask = np.zeros(z.size, dtype=bool)
    mask[keep] = True
    return _categorical(np.where(mask, probs, 0.0), rng)
