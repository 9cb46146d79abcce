"""
Constant multipliers from canonical signed digits
=================================================

A weight that is fixed at synthesis time needs no multiplier: the product
``q * x`` is a handful of shifted copies of ``x`` added or subtracted.
Recoding ``q`` into canonical signed digits keeps that handful small.
"""

import numpy as np

from wiredweights.csd import csd_encode, csd_stats, plan_weight
from wiredweights.netlist import count_gates, evaluate, structural_stats
from wiredweights.synth import synth_const_mac

# Every INT4 weight, its two's-complement bits and its CSD digits (T is -1).
print(f"{'q':>3}  {'binary':>6}  {'csd':>6}  terms")
for q in range(-8, 8):
    plan = plan_weight(q, 0)
    terms = " ".join(f"{'+' if s > 0 else '-'}x<<{k}" for s, k in plan.int_terms()) or "0"
    print(f"{q:>3}  {q & 0xF:04b}    {str(csd_encode(q, 4)):>6}  {terms}")

# CSD never uses more nonzero digits than plain binary; on average it saves
# about a third of them.
for w in (4, 8, 12):
    s = csd_stats(w)
    print(f"width {w:2d}: binary {s['mean_nonzero_binary']:.3f}  csd {s['mean_nonzero_csd']:.3f}  "
          f"saving {s['reduction_ratio']:.1%}")

# A hardwired MAC for q = 7 is one subtractor feeding an accumulator.
mac = synth_const_mac(plan_weight(7, -3))
print(structural_stats(mac))
print(count_gates(mac).as_dict())

# Drive it with a short input stream and watch the running sum.
xs = np.array([3, -1, 10, 0, -128])
print([int(o["y"][0]) for o in evaluate(mac, {"x": xs[:, None]}, cycles=len(xs))],
      "expected", np.cumsum(7 * xs).tolist())
