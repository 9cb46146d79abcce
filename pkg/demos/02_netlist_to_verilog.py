"""
From a neuron's weights to Verilog
==================================

Sixty-four random INT4 weights become one combinational dot product with a
registered output.  The netlist is simulated against plain integer
arithmetic before any Verilog is written, and the testbench expectations
come from the same simulator.
"""

from pathlib import Path

import numpy as np

from wiredweights.netlist import count_gates, evaluate, structural_stats
from wiredweights.prng import uniform_signed
from wiredweights.rtl import emit_netlist_rtl, emit_testbench, make_vectors
from wiredweights.synth import synth_neuron, mac_gate_comparison

w = uniform_signed(1, 64, 4)
neuron = synth_neuron(w, name="neuron")
print("weights:", w.tolist())
print("structure:", structural_stats(neuron))

# Bit-exactness on a batch of random activations; the register adds one cycle.
x = np.random.default_rng(0).integers(-128, 128, size=(10_000, 64))
y = evaluate(neuron, {f"x{i}": x[:, i] for i in range(64)}, cycles=2)[1]["y"]
print("matches x @ w on 10,000 vectors:", bool(np.array_equal(y, x @ w)))

art = emit_netlist_rtl(neuron, "neuron")
print(f"{len(art.source_text.splitlines())} lines of Verilog, sha256 {art.sha256[:16]}")
vectors = make_vectors(neuron, [{f"x{i}": int(v) for i, v in enumerate(row)} for row in x[:8]])
tb = emit_testbench(art, vectors)

out = Path("build_demo")
out.mkdir(exist_ok=True)
art.write(out)
(out / "neuron_tb.v").write_text(tb)
print("wrote", sorted(p.name for p in out.iterdir()))

# Per MAC, the hardwired units are several times smaller than a generic one.
t = mac_gate_comparison()
print(f"mean hardwired MAC {t['hardwired_mean']['total']:.1f} NAND2, generic {t['generic']['total']:.1f}, "
      f"ratio {t['ratio']:.2f}")
print("this neuron:", count_gates(neuron).as_dict())
