"""
Split inference: weights on a device, attention on the host
==========================================================

The device holds every linear projection; the host keeps the KV cache,
runs attention and samples.  Each layer sends K and V up and the attention
result down, and the head sends logits up once per token.
"""

from wiredweights.model import TransformerTopology, generate_synthetic, preset
from wiredweights.splitbrain import (INTERFACES, per_token_traffic, simulate_generation, sustained_bandwidth,
                                     throughput_scenarios, token_latency)

# Byte budget for a 7B-class topology.
prof = per_token_traffic(preset("llama2-7b"))
print(f"{prof.total_bytes_per_token:,} B per token exact, {prof.paper_mode_bytes():,} B with mixed KB units")
print(f"at 20 tok/s: {sustained_bandwidth(prof, 20) / 1e6:.2f} MB/s "
      f"({sustained_bandwidth(prof, 20, paper_mode=True) / 1e6:.2f} MB/s mixed units)")

for key, iface in INTERFACES.items():
    r = token_latency(prof, iface)
    s = throughput_scenarios(prof, iface)
    print(f"{iface.name:14s} transfer {r['transfer_s'] * 1e3:5.2f} ms  total {r['total_s'] * 1e3:5.2f} ms  "
          f"{r['tok_per_s']:6.1f} tok/s   host 50/100 ms: {s['cpu_low_tps']:.1f}/{s['cpu_high_tps']:.1f}")

# The functional loop on a small model: the device side runs on synthesized
# netlists, and the token stream matches the single-process reference.
bundle = generate_synthetic(TransformerTopology(n_layers=3, d_model=16, d_ffn=32, vocab_size=64), seed=11)
kw = dict(seed=11, strategy="nucleus", p=0.9)
split = simulate_generation(bundle, [1, 2, 3], 50, "split_brain", **kw)
mono = simulate_generation(bundle, [1, 2, 3], 50, "monolithic", **kw)
print("tokens:", split.tokens[:16], "...")
print("identical to reference:", split.tokens == mono.tokens, "| device backend:", split.totals["backend"])
print("accounted bytes per step:", {s["accounted_bytes"] for s in split.per_token_stats},
      "| Q bytes per step, carried apart:", split.per_token_stats[0]["q_bytes"])
print("KV cache length per layer:", split.cache_lengths)
