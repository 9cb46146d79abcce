"""
A 64-128-64 network, hardwired and generic
=========================================

The hardwired build spends a constant multiplier on each of the 16,384
weights; the baseline streams weights from memory through one generic MAC
per output.  Both are plain Verilog; the hardwired one is checked against
an integer oracle through its netlists.
"""

import numpy as np

from wiredweights.rtl import emit_network_rtl, eval_network, network_netlists, network_reference, network_weights

mats = network_weights((64, 128, 64), seed=1)
nls = network_netlists(mats)
x = np.random.default_rng(4).integers(-128, 128, size=(1000, 64))
print("netlists match the integer oracle:", bool(np.array_equal(eval_network(nls, mats, x), network_reference(mats, x))))

for variant in ("hardwired", "generic_baseline"):
    art = emit_network_rtl((64, 128, 64), variant, seed=1)
    s = art.stats
    print(f"{variant:17s} {len(art.source_text) / 1e6:5.2f} MB  modules {s['modules']}")
    print(f"{'':17s} MAC ops {s['mac_ops']}, sites {s.get('mac_sites', '-')}, "
          f"instantiated {s.get('mac_sites_instantiated', '-')}, adders {s.get('adds', '-')}, "
          f"subtractors {s.get('subs', '-')}")
    print(f"{'':17s} sha256 {art.sha256}")
