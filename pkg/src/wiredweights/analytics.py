"""Analytical energy, power, area and cost models for hardwired-weight silicon."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

PJ = 1e-12

# per-MAC energy components in pJ: dram, sram, wire, mac
TABLE_ENERGY = {
    "gpu_fp16": {"dram": 320.0, "sram": 0.0, "wire": 80.0, "mac": 1.1},
    "gpu_int8": {"dram": 160.0, "sram": 0.0, "wire": 40.0, "mac": 1.0},
    "ita": {"dram": 0.0, "sram": 0.0, "wire": 4.0, "mac": 0.05},
}
# bits fetched from DRAM per weight, bits moved on chip per operand
ARCH_BITS = {
    "gpu_fp16": {"weight_bits": 16, "operand_bits": 16},
    "gpu_int8": {"weight_bits": 8, "operand_bits": 8},
    "ita": {"weight_bits": 0, "operand_bits": 8},
}


def _nonneg(obj, names):
    for n in names:
        if getattr(obj, n) < 0:
            raise ValueError(f"{type(obj).__name__}.{n} must be >= 0")


@dataclass(frozen=True)
class EnergyModelConfig:
    dram_pj_per_bit: float = 20.0
    wire_cap_ff_per_um: float = 0.2
    wire_len_um: float = 5000.0
    vdd: float = 0.9
    freq_hz: float = 5e8
    alpha: float = 0.15
    leakage_w_per_gate: float = 1e-8
    arch: dict = field(default_factory=lambda: {k: dict(v) for k, v in TABLE_ENERGY.items()})

    def __post_init__(self):
        _nonneg(self, ("dram_pj_per_bit", "wire_cap_ff_per_um", "wire_len_um", "vdd",
                       "freq_hz", "alpha", "leakage_w_per_gate"))
        for name, comp in self.arch.items():
            if any(v < 0 for v in comp.values()):
                raise ValueError(f"negative energy constant for {name}")


@dataclass(frozen=True)
class AreaModelConfig:
    bits_per_param: int = 4
    um2_per_bit: float = 0.12
    routing_mult: float = 1.4
    control_mult: float = 1.15
    optimization_factor: float = 1.0

    def __post_init__(self):
        if self.routing_mult < 1 or self.control_mult < 1:
            raise ValueError("routing and control multipliers must be >= 1")
        if not 0 < self.optimization_factor <= 1:
            raise ValueError("optimization_factor must be in (0, 1]")
        _nonneg(self, ("bits_per_param", "um2_per_bit"))


@dataclass(frozen=True)
class CostModelConfig:
    wafer_cost_usd: float = 4500.0
    wafer_diameter_mm: float = 300.0
    yield_rate: float = 0.75
    packaging_usd: float = 8.0
    testing_usd: float = 4.0
    interposer_usd: float = 35.0
    assembly_usd: float = 12.0
    nre_usd: float = 2.5e6
    # scales the subtractive edge-loss term; 0.7 puts a 520 mm^2 die at 115 per 300 mm wafer
    edge_loss_k: float = 0.7

    def __post_init__(self):
        if not 0 < self.yield_rate <= 1:
            raise ValueError("yield_rate must be in (0, 1]")
        _nonneg(self, ("wafer_cost_usd", "wafer_diameter_mm", "packaging_usd", "testing_usd",
                       "interposer_usd", "assembly_usd", "nre_usd", "edge_loss_k"))


# -- energy ---------------------------------------------------------------

def dram_fetch_energy(model_bytes: float, pj_per_bit: float = 20.0) -> float:
    """Joules to stream ``model_bytes`` from DRAM once."""
    if model_bytes < 0 or pj_per_bit < 0:
        raise ValueError("inputs must be >= 0")
    return model_bytes * 8 * pj_per_bit * PJ


def physical_wire_energy(cfg: EnergyModelConfig | None = None) -> dict:
    """Energy of one full-swing transition on the average on-chip route."""
    cfg = cfg or EnergyModelConfig()
    c_pf = cfg.wire_cap_ff_per_um * cfg.wire_len_um * 1e-3
    e_pj = c_pf * cfg.vdd ** 2
    return {"c_load_pf": c_pf, "pj_per_transition": e_pj, "pj_per_bit_activity": cfg.alpha * e_pj}


def dynamic_power(c_load_f: float, cfg: EnergyModelConfig | None = None) -> float:
    """alpha * C * Vdd^2 * f, in watts."""
    cfg = cfg or EnergyModelConfig()
    return cfg.alpha * c_load_f * cfg.vdd ** 2 * cfg.freq_hz


def mac_energy(arch: str, cfg: EnergyModelConfig | None = None, mode: str = "table") -> dict:
    """Per-MAC energy breakdown in pJ.

    ``table`` returns the published per-component constants.  ``physical``
    rebuilds the DRAM term from bits x pJ/bit and the wire term from the
    capacitance model; compute stays at the table constant, having no
    physical model here.
    """
    cfg = cfg or EnergyModelConfig()
    if arch not in cfg.arch:
        raise ValueError(f"unknown architecture {arch!r}; known: {sorted(cfg.arch)}")
    c = cfg.arch[arch]
    if mode == "table":
        parts = {"dram": c["dram"], "sram": c.get("sram", 0.0), "wire": c["wire"], "compute": c["mac"]}
    elif mode == "physical":
        bits = ARCH_BITS[arch]
        parts = {
            "dram": bits["weight_bits"] * cfg.dram_pj_per_bit,
            "sram": c.get("sram", 0.0),
            "wire": bits["operand_bits"] * physical_wire_energy(cfg)["pj_per_bit_activity"],
            "compute": c["mac"],
        }
    else:
        raise ValueError(f"unknown energy mode {mode!r}")
    parts["total"] = parts["dram"] + parts["sram"] + parts["wire"] + parts["compute"]
    return parts


def energy_ratio(cfg: EnergyModelConfig | None = None, baseline: str = "gpu_int8", mode: str = "table") -> float:
    return mac_energy(baseline, cfg, mode)["total"] / mac_energy("ita", cfg, mode)["total"]


def token_energy(params_count: float, arch: str, cfg: EnergyModelConfig | None = None) -> float:
    """Joules per token at one MAC per parameter."""
    return params_count * mac_energy(arch, cfg)["total"] * PJ


# -- power ----------------------------------------------------------------

def device_power(params_count: float, tok_rate: float, mac_pj: float, gate_count: float,
                 cfg: EnergyModelConfig | None = None) -> dict:
    cfg = cfg or EnergyModelConfig()
    if min(params_count, tok_rate, mac_pj, gate_count) < 0:
        raise ValueError("inputs must be >= 0")
    dyn = params_count * mac_pj * PJ * tok_rate
    leak = gate_count * cfg.leakage_w_per_gate
    return {"dynamic_w": dyn, "leakage_w": leak, "total_w": dyn + leak}


def system_power(device_w: float, serdes_w: float, host_w_range) -> tuple[float, float]:
    lo, hi = host_w_range
    return device_w + serdes_w + lo, device_w + serdes_w + hi


def power_density(power_w: float, area_mm2: float) -> float:
    """mW per mm^2."""
    if area_mm2 <= 0:
        raise ValueError("area must be > 0")
    return power_w * 1000.0 / area_mm2


# -- area -----------------------------------------------------------------

def die_area(params_count: float, cfg: AreaModelConfig | None = None) -> dict:
    cfg = cfg or AreaModelConfig()
    if params_count < 0:
        raise ValueError("params_count must be >= 0")
    raw = params_count * cfg.bits_per_param * cfg.um2_per_bit * 1e-6
    routed = raw * cfg.routing_mult
    ctrl = routed * cfg.control_mult
    return {"raw_mm2": raw, "routed_mm2": routed, "with_control_mm2": ctrl,
            "final_mm2": ctrl * cfg.optimization_factor}


def memory_area_mm2(nbytes: float, um2_per_bit: float) -> float:
    return nbytes * 8 * um2_per_bit * 1e-6


# -- cost -----------------------------------------------------------------

def dies_per_wafer(die_mm2: float, cfg: CostModelConfig | None = None) -> int:
    """floor(wafer_area / A - k * pi * d / sqrt(2 A))."""
    cfg = cfg or CostModelConfig()
    if die_mm2 <= 0:
        raise ValueError("die area must be > 0")
    d = cfg.wafer_diameter_mm
    wafer_area = math.pi * (d / 2) ** 2
    if die_mm2 > wafer_area:
        warnings.warn(f"die of {die_mm2} mm^2 larger than the {d} mm wafer", RuntimeWarning)
        return 0
    n = wafer_area / die_mm2 - cfg.edge_loss_k * math.pi * d / math.sqrt(2 * die_mm2)
    return max(int(math.floor(n)), 0)


@dataclass(frozen=True)
class CostBreakdown:
    dies_per_wafer: int
    good_dies: float
    die_cost: float
    chiplets: int
    silicon: float
    packaging: float
    testing: float
    interposer: float
    assembly: float

    @property
    def total(self) -> float:
        return self.silicon + self.packaging + self.testing + self.interposer + self.assembly


def unit_cost(die_mm2: float, cfg: CostModelConfig | None = None, chiplets: int = 1,
              die_cost_usd: float | None = None, **extras) -> CostBreakdown:
    """Unit cost from wafer economics.

    ``die_cost_usd`` replaces the wafer-derived per-die cost (for quoted
    chiplet prices).  ``extras`` may override ``packaging_usd``,
    ``testing_usd``, ``interposer_usd`` and ``assembly_usd``.
    """
    cfg = cfg or CostModelConfig()
    if chiplets < 1:
        raise ValueError("chiplets must be >= 1")
    unknown = set(extras) - {"packaging_usd", "testing_usd", "interposer_usd", "assembly_usd"}
    if unknown:
        raise TypeError(f"unknown cost extras {sorted(unknown)}")
    get = lambda k: extras.get(k, getattr(cfg, k))
    dpw = dies_per_wafer(die_mm2, cfg)
    good = dpw * cfg.yield_rate
    if die_cost_usd is None:
        if dpw == 0:
            raise ValueError(f"no dies of {die_mm2} mm^2 fit on the wafer")
        die_cost_usd = cfg.wafer_cost_usd / good
    multi = chiplets > 1
    return CostBreakdown(
        dies_per_wafer=dpw, good_dies=good, die_cost=die_cost_usd, chiplets=chiplets,
        silicon=chiplets * die_cost_usd,
        packaging=get("packaging_usd"), testing=get("testing_usd"),
        interposer=get("interposer_usd") if multi else 0.0,
        assembly=get("assembly_usd") if multi else 0.0,
    )


def amortized_cost(unit_cost_usd: float, volume: float, nre_usd: float = 2.5e6) -> float:
    if volume < 1:
        raise ValueError("volume must be >= 1")
    return unit_cost_usd + nre_usd / volume
