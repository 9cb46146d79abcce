"""Host/device split inference: traffic accounting, link latency, and a functional token loop.

The host keeps the KV cache, runs attention and samples; the device runs every
linear projection.  Per layer the device sends K and V up, the host sends the
attention output down; after the last layer the device sends logits up.

Q also has to reach the host for attention, and the host has to send the
token embedding down once per token.  Neither appears in the analytic
per-token profile, so the simulator carries them in separate, unaccounted
messages and reports their bytes on their own.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import reference as ref
from .model import ModelBundle, TransformerTopology, count_params
from .synth import eval_layer, synth_layer

PIPELINE_STAGES = ("input", "qkv_projection", "output_serdes", "attention_receive", "ffn", "output")
NETLIST_PARAM_LIMIT = 250_000


@dataclass(frozen=True)
class InterfaceSpec:
    name: str
    effective_bytes_per_sec: float
    phy_cost_usd: float = 0.0
    line_rate_gbps: float = 0.0

    def __post_init__(self):
        if not self.effective_bytes_per_sec > 0:
            raise ValueError("effective_bytes_per_sec must be > 0")


INTERFACES = {
    "pcie3x4": InterfaceSpec("PCIe 3.0 x4", 4e9, 15, 32),
    "tb4": InterfaceSpec("Thunderbolt 4", 5e9, 30, 40),
    "usb3": InterfaceSpec("USB 3.0", 3e8, 5, 5),
    "usb4": InterfaceSpec("USB 4.0", 2e9, 10, 40),
}


def interface(name_or_spec, overrides: dict | None = None) -> InterfaceSpec:
    spec = name_or_spec if isinstance(name_or_spec, InterfaceSpec) else None
    if spec is None:
        try:
            spec = INTERFACES[name_or_spec]
        except KeyError:
            raise ValueError(f"unknown interface {name_or_spec!r}; known: {sorted(INTERFACES)}") from None
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class LatencyBudget:
    device_compute_s: float = 64e-6
    host_attention_s: float = 5e-3

    def __post_init__(self):
        if self.device_compute_s < 0 or self.host_attention_s < 0:
            raise ValueError("latencies must be >= 0")


@dataclass(frozen=True)
class TrafficProfile:
    n_layers: int
    kv_up_bytes_per_layer: int
    attn_down_bytes_per_layer: int
    logits_bytes: int

    @property
    def total_bytes_per_token(self) -> int:
        return self.n_layers * (self.kv_up_bytes_per_layer + self.attn_down_bytes_per_layer) + self.logits_bytes

    def paper_mode_bytes(self) -> int:
        """Per-layer terms rounded in KiB, logits in decimal KB, total read back as decimal KB.

        This reproduces ``(16 + 8) * 32 + 64 = 832 KB`` for the 7B topology.
        """
        kib = round(self.kv_up_bytes_per_layer / 1024) + round(self.attn_down_bytes_per_layer / 1024)
        kb = self.n_layers * kib + round(self.logits_bytes / 1000)
        return kb * 1000


def word_bytes(width: int) -> int:
    return math.ceil(width / 8)


def per_token_traffic(topology: TransformerTopology) -> TrafficProfile:
    b = word_bytes(topology.transfer_width)
    d = topology.d_model
    return TrafficProfile(topology.n_layers, 2 * d * b, d * b, topology.vocab_size * b)


def sustained_bandwidth(profile, tok_rate: float, paper_mode: bool = False) -> float:
    if tok_rate < 0:
        raise ValueError("tok_rate must be >= 0")
    nbytes = profile if isinstance(profile, (int, float)) else (
        profile.paper_mode_bytes() if paper_mode else profile.total_bytes_per_token)
    return nbytes * tok_rate


def token_latency(profile, iface: InterfaceSpec, budget: LatencyBudget | None = None,
                  paper_mode: bool = False) -> dict:
    budget = budget or LatencyBudget()
    nbytes = profile if isinstance(profile, (int, float)) else (
        profile.paper_mode_bytes() if paper_mode else profile.total_bytes_per_token)
    transfer = nbytes / iface.effective_bytes_per_sec
    total = transfer + budget.device_compute_s + budget.host_attention_s
    return {"transfer_s": transfer, "total_s": total, "tok_per_s": 1.0 / total}


ATTENTION_SCENARIOS = {"npu": 5e-3, "cpu-low": 50e-3, "cpu-high": 100e-3}


def throughput_scenarios(profile, iface: InterfaceSpec, budget: LatencyBudget | None = None,
                         paper_mode: bool = False, scenarios: dict | None = None) -> dict:
    budget = budget or LatencyBudget()
    scenarios = scenarios or ATTENTION_SCENARIOS
    out = {}
    for key, name in (("npu", "npu_offload_tps"), ("cpu-low", "cpu_low_tps"), ("cpu-high", "cpu_high_tps")):
        b = replace(budget, host_attention_s=scenarios[key])
        out[name] = token_latency(profile, iface, b, paper_mode)["tok_per_s"]
    return out


# -- functional simulation -------------------------------------------------


@dataclass(frozen=True)
class Message:
    layer: int  # -1 for per-token messages outside the layer loop
    stage: str
    direction: str  # "up" = device -> host, "down" = host -> device
    kind: str
    nbytes: int
    accounted: bool = True


class NetlistDevice:
    """Evaluates every device matrix product on its synthesized hardwired netlist."""

    def __init__(self):
        self._cache = {}

    def __call__(self, W, x):
        key = (id(W), x.width)
        nl = self._cache.get(key)
        if nl is None:
            nl = synth_layer(W, in_width=x.width)
            self._cache[key] = (nl, W)  # hold W so its id stays unique
        else:
            nl = nl[0]
        y = eval_layer(nl, x.values)[0]
        need = x.width + W.width + math.ceil(math.log2(max(W.rows, 1)))
        return ref.ActivationVector(y, need, x.scale_exp + W.scale_exp)


class Device:
    """Stateless device side: receives vectors, returns projections."""

    def __init__(self, bundle: ModelBundle, quant: ref.QuantSpec, backend: str = "matvec",
                 stats: ref.QuantStats | None = None):
        self.bundle, self.quant, self.stats = bundle, quant, stats
        self.backend = backend
        self.matvec = NetlistDevice() if backend == "netlist" else ref.matvec_int

    def qkv(self, i, x):
        return ref.qkv_projection(self.bundle.layers[i], x, self.quant, self.stats, self.matvec)

    def finish_layer(self, i, x, attn):
        return ref.post_attention(self.bundle.layers[i], x, attn, self.quant, self.stats, self.matvec)

    def head(self, x):
        return ref.output_head(self.bundle, x, self.quant, self.stats, self.matvec)


class Host:
    def __init__(self, bundle: ModelBundle, quant: ref.QuantSpec, stats=None):
        self.bundle, self.quant, self.stats = bundle, quant, stats
        self.cache = ref.KvCache(bundle.topology.n_layers)

    def embed(self, token):
        return ref.embed(self.bundle, token, self.quant, self.stats)

    def attend(self, i, q, k, v):
        self.cache.append(i, k, v)
        return ref.attention_host(q, self.cache.keys[i], self.cache.values[i], quant=self.quant, stats=self.stats)


def _nbytes(vec) -> int:
    return len(vec) * word_bytes(vec.width)


def _split_brain_step(host: Host, device: Device, token: int, events: list | None):
    msgs = []

    def send(layer, stage, direction, kind, vec, accounted=True):
        m = Message(layer, stage, direction, kind, _nbytes(vec), accounted)
        msgs.append(m)
        return vec

    x = send(-1, "input", "down", "embedding", host.embed(token), accounted=False)
    for i in range(host.bundle.topology.n_layers):
        q, k, v = device.qkv(i, x)
        send(i, "output_serdes", "up", "q", q, accounted=False)
        kv = ref.ActivationVector(np.concatenate([k.values, v.values]), k.width, k.scale_exp)
        send(i, "output_serdes", "up", "kv", kv)
        attn = send(i, "attention_receive", "down", "attn", host.attend(i, q, k, v))
        x = device.finish_layer(i, x, attn)
        if events is not None:
            events.extend((i, s) for s in PIPELINE_STAGES)
    logits = send(-1, "output", "up", "logits", device.head(x))
    return logits, msgs


@dataclass
class GenerationResult:
    tokens: list
    per_token_stats: list
    totals: dict
    final_logits: ref.ActivationVector | None = None
    cache_lengths: list = field(default_factory=list)
    events: list | None = None


def _pick_backend(bundle, backend):
    if backend == "auto":
        backend = "netlist" if count_params(bundle) <= NETLIST_PARAM_LIMIT else "matvec"
    if backend == "netlist" and count_params(bundle) > NETLIST_PARAM_LIMIT:
        warnings.warn(f"model has {count_params(bundle)} parameters, above the netlist limit "
                      f"{NETLIST_PARAM_LIMIT}; falling back to matvec device", RuntimeWarning)
        backend = "matvec"
    return backend


def simulate_generation(bundle: ModelBundle, prompt_tokens, n_new_tokens: int, mode: str = "split_brain",
                        iface: InterfaceSpec | str = "pcie3x4", budget: LatencyBudget | None = None,
                        seed: int = 0, strategy: str = "greedy", k: int = 1, p: float = 1.0,
                        backend: str = "auto", quant: ref.QuantSpec | None = None,
                        keep_events: bool = False) -> GenerationResult:
    """Generate ``n_new_tokens`` after ``prompt_tokens``.

    Every prompt token and every generated token is pushed through one
    forward step, so the KV cache ends at ``len(prompt) + n_new_tokens``.
    Timing is the closed-form link model applied to each step's accounted
    bytes.
    """
    prompt = list(prompt_tokens)
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if n_new_tokens < 1:
        raise ValueError("n_new_tokens must be >= 1")
    if mode not in ("split_brain", "monolithic"):
        raise ValueError(f"unknown mode {mode!r}")
    iface = interface(iface)
    budget = budget or LatencyBudget()
    quant = quant or ref.QuantSpec.for_topology(bundle.topology)
    stats = ref.QuantStats()
    profile = per_token_traffic(bundle.topology)
    rng = np.random.default_rng(seed)

    events = [] if keep_events else None
    if mode == "split_brain":
        backend = _pick_backend(bundle, backend)
        host, device = Host(bundle, quant, stats), Device(bundle, quant, backend, stats)
        cache = host.cache

        def step(tok):
            return _split_brain_step(host, device, tok, events)
    else:
        backend = "reference"
        cache = ref.KvCache(bundle.topology.n_layers)

        def step(tok):
            return ref.forward_token(bundle, tok, cache, quant, stats), []

    per_token = []

    def run(tok, phase):
        logits, msgs = step(tok)
        lat = token_latency(profile, iface, budget)
        per_token.append({
            "phase": phase,
            "token": tok,
            "accounted_bytes": sum(m.nbytes for m in msgs if m.accounted) if msgs else profile.total_bytes_per_token,
            "unaccounted_bytes": sum(m.nbytes for m in msgs if not m.accounted),
            "q_bytes": sum(m.nbytes for m in msgs if m.kind == "q"),
            "messages": len(msgs),
            **lat,
        })
        return logits

    logits = None
    for tok in prompt:
        logits = run(tok, "prefill")
    generated = []
    for _ in range(n_new_tokens):
        tok = ref.sample(logits, strategy, rng, k=k, p=p)
        generated.append(tok)
        logits = run(tok, "decode")

    totals = {
        "mode": mode,
        "backend": backend,
        "interface": iface.name,
        "steps": len(per_token),
        "accounted_bytes": sum(s["accounted_bytes"] for s in per_token),
        "unaccounted_bytes": sum(s["unaccounted_bytes"] for s in per_token),
        "simulated_time_s": sum(s["total_s"] for s in per_token),
        "transfer_time_s": sum(s["transfer_s"] for s in per_token),
        "clamp_events": stats.total_clamps,
        "clamps_by_stage": dict(stats.clamps),
        "profile": {**asdict(profile), "total_bytes_per_token": profile.total_bytes_per_token},
    }
    totals["tok_per_s"] = totals["steps"] / totals["simulated_time_s"]
    return GenerationResult(generated, per_token, totals, logits, cache.layer_lengths(), events)
