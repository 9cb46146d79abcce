"""
What a hardwired model costs in silicon
=======================================

Energy per MAC, die area from bits per weight, wafer economics and
amortized cost, all driven by the packaged constants file.  Point
``WIREDWEIGHTS_CONFIG`` at an edited copy to try other assumptions.
"""

from wiredweights import analytics as an
from wiredweights import reports as rp
from wiredweights.config import load_config

cfg = load_config()

for arch in ("gpu_fp16", "gpu_int8", "ita"):
    e = an.mac_energy(arch, cfg.energy)
    print(f"{arch:9s} {e['total']:7.2f} pJ/MAC  (dram {e['dram']}, wire {e['wire']}, compute {e['compute']})")
print(f"int8 GPU / hardwired: {an.energy_ratio(cfg.energy):.1f}x")
print(f"streaming 7B FP16 weights once: {an.dram_fetch_energy(7e9 * 2):.2f} J")

for name in ("tinyllama-1.1b", "llama2-7b"):
    m = cfg.model(name)
    a = an.die_area(m.params, m.area_config(cfg.area))
    print(name, {k: round(v, 1) for k, v in a.items()})

die = an.unit_cost(520, cfg.cost)
print(f"520 mm^2: {die.dies_per_wafer} dies per wafer, ${die.die_cost:.2f} per good die, ${die.total:.2f} packaged")

costs = rp.unit_costs(cfg)
for v in cfg.volumes:
    print(f"{v:>9,} units: 1.1B ${an.amortized_cost(costs['tinyllama-1.1b'], v):7.2f}   "
          f"7B ${an.amortized_cost(costs['llama2-7b'], v):7.2f}")

area7 = an.die_area(7e9, cfg.model("llama2-7b").area_config(cfg.area))["final_mm2"]
for w in cfg.power["density_w"]:
    print(f"{w} W over {area7:.0f} mm^2: {an.power_density(w, area7):.3f} mW/mm^2")

# The same numbers, laid out next to the published ones.
print(rp.render([rp.volume_table(cfg), rp.density_table(cfg)], "markdown"))
