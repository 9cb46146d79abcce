"""Computed-versus-published report tables and their json / csv / markdown renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from . import analytics as an
from .config import ModelEntry, ConstantSet, load_config
from .csd import csd_stats
from .model import preset
from .splitbrain import per_token_traffic, throughput_scenarios, token_latency
from .synth import mac_gate_comparison

FORMATS = ("json", "csv", "markdown")
GATE_RATIO_BRACKET = (3.5, 6.0)


@dataclass
class Table:
    key: str
    title: str
    columns: list
    rows: list
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"key": self.key, "title": self.title, "columns": list(self.columns),
                "rows": [list(r) for r in self.rows], "notes": list(self.notes)}


def _num(v, nd=6):
    if isinstance(v, float):
        return round(v, nd)
    return v


def _delta(computed, published):
    if computed is None or published is None:
        return None
    return _num(computed - published)


def _cmp(label, computed, published, unit=""):
    return [label, _num(computed), _num(published), _delta(computed, published), unit]


CMP_COLS = ["quantity", "computed", "published", "delta", "unit"]


# -- sections ------------------------------------------------------------

def gate_table(cfg: ConstantSet) -> Table:
    r = mac_gate_comparison(cfg.gates)
    lo, hi = GATE_RATIO_BRACKET
    exp = cfg.expected
    verdict = "IN RANGE" if lo <= r["ratio"] <= hi else "OUT OF RANGE"
    rows = [
        ["hardwired INT8xINT4 MAC, mean over 16 weights", _num(r["hardwired_mean"]["total"]), None, None, "NAND2"],
        ["generic INT8xINT8 MAC", _num(r["generic"]["total"]), None, None, "NAND2"],
        _cmp("gate ratio generic / hardwired", r["ratio"], exp.get("gate_ratio"), "x"),
        ["FPGA LUT ratio (reference only)", None, exp.get("gate_ratio_fpga"), None, "x"],
    ]
    notes = [f"ratio verdict: {verdict} [{lo}, {hi}]; the published 4.85x is bracketed, not matched",
             "the published absolute counts (243 / 1,180 gates) use an unstated cost table"]
    return Table("gates", "Gate count per MAC", CMP_COLS, rows, notes)


def csd_table() -> Table:
    rows = []
    for w in (4, 8, 12):
        s = csd_stats(w)
        rows.append([w, _num(s["mean_nonzero_binary"]), _num(s["mean_nonzero_csd"]), _num(s["reduction_ratio"])])
    return Table("csd", "CSD nonzero-digit reduction (exhaustive)",
                 ["width", "mean binary popcount", "mean CSD nonzeros", "reduction"], rows,
                 ["baseline is the two's-complement bit pattern; published range 30-40%"])


def energy_table(cfg: ConstantSet) -> Table:
    exp = cfg.expected.get("energy_totals_pj", {})
    rows = []
    for arch in ("gpu_fp16", "gpu_int8", "ita"):
        e = an.mac_energy(arch, cfg.energy, "table")
        rows.append([arch, "table", e["dram"], e["sram"], e["wire"], e["compute"], _num(e["total"]),
                     exp.get(arch), _delta(e["total"], exp.get(arch))])
    for arch in ("gpu_fp16", "gpu_int8", "ita"):
        e = an.mac_energy(arch, cfg.energy, "physical")
        rows.append([arch, "physical", _num(e["dram"]), e["sram"], _num(e["wire"]), e["compute"],
                     _num(e["total"]), None, None])
    ratio = an.energy_ratio(cfg.energy)
    wire = an.physical_wire_energy(cfg.energy)
    fetch = an.dram_fetch_energy(14e9, cfg.energy.dram_pj_per_bit)
    notes = [
        f"improvement gpu_int8 / ita: {ratio:.2f}x (published {cfg.expected.get('energy_ratio')}x)",
        f"DRAM fetch of a 14 GB FP16 7B model: {fetch:.4f} J/token "
        f"(published {cfg.expected.get('dram_fetch_j_7b_fp16')} J)",
        f"physical wire model: C = {wire['c_load_pf']:.3f} pF, {wire['pj_per_transition']:.3f} pJ per transition, "
        f"{wire['pj_per_bit_activity']:.4f} pJ per bit at alpha {cfg.energy.alpha}",
        "no SRAM energy constant is given, so E_SRAM is held at 0",
        "physical mode is an order-of-magnitude check only",
    ]
    return Table("energy", "Energy per MAC (pJ)",
                 ["arch", "mode", "dram", "sram", "wire", "compute", "total", "published total", "delta"],
                 rows, notes)


def power_table(cfg: ConstantSet, model: str = "llama2-7b") -> Table:
    m = cfg.model(model)
    ita = an.mac_energy("ita", cfg.energy)["total"]
    dev = an.device_power(m.params, cfg.power["tok_rate"], ita, 0, cfg.energy)
    lo, hi = an.system_power(cfg.power["device_w"], cfg.power["serdes_w"], cfg.power["host_w"])
    lo_c, hi_c = an.system_power(dev["total_w"], cfg.power["serdes_w"], cfg.power["host_w"])
    exp_sys = cfg.expected.get("system_power_w", [None, None])
    rows = [
        _cmp(f"device dynamic power at {cfg.power['tok_rate']:g} tok/s", dev["dynamic_w"],
             cfg.expected.get("device_power_w"), "W"),
        _cmp("system power low (published device power)", lo, exp_sys[0], "W"),
        _cmp("system power high (published device power)", hi, exp_sys[1], "W"),
        ["system power range (computed device power)", f"{lo_c:.3f}-{hi_c:.3f}", None, None, "W"],
    ]
    notes = ["dynamic-only device power does not reach the published 1.13 W; the remainder is unexplained",
             "leakage needs a gate count; none is assumed here"]
    return Table("power", f"Power ({model})", CMP_COLS, rows, notes)


def _params(cfg, model, params):
    if params is not None:
        return ModelEntry(params=float(params))
    return cfg.model(model)


def area_table(cfg: ConstantSet, model: str, params: float | None = None) -> Table:
    m = _params(cfg, model, params)
    a = an.die_area(m.params, m.area_config(cfg.area))
    key = {"tinyllama-1.1b": "area_chain_1b", "llama2-7b": "area_chain_7b"}.get(model)
    exp = cfg.expected.get(key, []) if params is None else []
    labels = ["raw storage", "with routing", "with control", "final (optimized)"]
    vals = [a["raw_mm2"], a["routed_mm2"], a["with_control_mm2"], a["final_mm2"]]
    if len(exp) == 3:  # 7B publishes raw, routing+control, final
        exp = [exp[0], None, exp[1], exp[2]]
    exp = list(exp) + [None] * (4 - len(exp))
    rows = [_cmp(lab, v, e, "mm^2") for lab, v, e in zip(labels, vals, exp)]
    notes = [f"optimization_factor = {m.optimization_factor} (made explicit; the published "
             "850->520 and 5410->3680 steps imply 0.61 and 0.68, which no single factor reproduces)"]
    if model == "tinyllama-1.1b" and params is None:
        notes.append("published routed figure 739 is 739.2 before rounding")
    return Table(f"area:{model}", f"Die area chain ({model if params is None else f'{params:g} params'})",
                 CMP_COLS, rows, notes)


def cost_table(cfg: ConstantSet, model: str, params: float | None = None) -> Table:
    m = _params(cfg, model, params)
    area = an.die_area(m.params, m.area_config(cfg.area))["final_mm2"]
    exp = cfg.expected if params is None else {}
    if area <= 0:
        return Table(f"cost:{model}", f"Unit cost ({model})", CMP_COLS,
                     [["final die area", 0.0, None, None, "mm^2"]],
                     ["zero silicon area: no wafer economics to evaluate"])
    rows = []
    notes = []
    if m.chiplets == 1:
        dpw = an.dies_per_wafer(area, cfg.cost)
        rows.append(_cmp("dies per wafer", dpw, exp.get("dies_per_wafer"), "dies"))
        dc = exp.get("die_cost", [None, None])
        uc = exp.get("unit_cost_1b", [None, None])
        for y, pd, pu in ((cfg.cost.yield_rate, dc[0], uc[0]), (0.60, dc[1], uc[1])):
            c = an.unit_cost(area, _with_yield(cfg.cost, y), 1, **m.cost_extras())
            rows.append(_cmp(f"die cost at {y:.0%} yield", c.die_cost, pd, "USD"))
            rows.append(_cmp(f"unit cost at {y:.0%} yield", c.total, pu, "USD"))
        notes.append(f"edge-loss scale k = {cfg.cost.edge_loss_k}; k = 1 gives "
                     f"{an.dies_per_wafer(area, _with_k(cfg.cost, 1.0))} dies")
    else:
        chip = area / m.chiplets
        derived = an.unit_cost(chip, cfg.cost, m.chiplets, **m.cost_extras())
        quoted = an.unit_cost(chip, cfg.cost, m.chiplets, m.chiplet_die_cost_usd, **m.cost_extras())
        rows.append(["chiplet area", _num(chip), None, None, "mm^2"])
        rows.append(["chiplet die cost from wafer economics", _num(derived.die_cost), None, None, "USD"])
        rows.append(["chiplet die cost used (published quote)", _num(quoted.die_cost), None, None, "USD"])
        rows.append(["interposer", quoted.interposer, None, None, "USD"])
        rows.append(["assembly", quoted.assembly, None, None, "USD"])
        rows.append(["testing", quoted.testing, None, None, "USD"])
        rows.append(_cmp("unit cost", quoted.total, exp.get("unit_cost_7b"), "USD"))
        rows.append(["unit cost with wafer-derived chiplets", _num(derived.total), None, None, "USD"])
        notes.append("the published per-chiplet $14 is not derivable from the wafer model; "
                     "it is taken from config and the derived figure is shown beside it")
    return Table(f"cost:{model}", f"Unit cost ({model})", CMP_COLS, rows, notes)


def _with_yield(c, y):
    return an.CostModelConfig(**{**c.__dict__, "yield_rate": y})


def _with_k(c, k):
    return an.CostModelConfig(**{**c.__dict__, "edge_loss_k": k})


def unit_costs(cfg: ConstantSet) -> dict:
    out = {}
    for name, m in cfg.models.items():
        area = an.die_area(m.params, m.area_config(cfg.area))["final_mm2"]
        if m.chiplets == 1:
            out[name] = an.unit_cost(area, cfg.cost, 1, **m.cost_extras()).total
        else:
            out[name] = an.unit_cost(area / m.chiplets, cfg.cost, m.chiplets, m.chiplet_die_cost_usd,
                                     **m.cost_extras()).total
    return out


def volume_table(cfg: ConstantSet) -> Table:
    uc = unit_costs(cfg)
    e1 = cfg.expected.get("amortized_1b", [])
    e7 = cfg.expected.get("amortized_7b", [])
    rows = []
    for i, v in enumerate(cfg.volumes):
        a1 = an.amortized_cost(uc["tinyllama-1.1b"], v, cfg.cost.nre_usd)
        a7 = an.amortized_cost(uc["llama2-7b"], v, cfg.cost.nre_usd)
        p1 = e1[i] if i < len(e1) else None
        p7 = e7[i] if i < len(e7) else None
        rows.append([v, _num(cfg.cost.nre_usd / v), _num(a1), p1, _delta(a1, p1), _num(a7), p7, _delta(a7, p7)])
    return Table("volume", "Amortized unit cost by volume",
                 ["volume", "NRE per unit", "1.1B computed", "1.1B published", "1.1B delta",
                  "7B computed", "7B published", "7B delta"], rows,
                 ["1.1B unit cost uses 75% yield with packaging and testing"])


def traffic_table(cfg: ConstantSet) -> Table:
    prof = per_token_traffic(preset("llama2-7b"))
    exact = prof.total_bytes_per_token
    pub_b = prof.paper_mode_bytes()
    kb = cfg.expected.get("traffic_kb")
    rate = cfg.power["tok_rate"]
    rows = [
        ["K,V up per layer", prof.kv_up_bytes_per_layer, None, None, "B"],
        ["attention down per layer", prof.attn_down_bytes_per_layer, None, None, "B"],
        ["logits up", prof.logits_bytes, None, None, "B"],
        _cmp("per-token total, exact", float(exact), kb * 1024 if kb else None, "B"),
        _cmp("per-token total, paper-mode", float(pub_b), kb * 1000 if kb else None, "B"),
        _cmp(f"sustained bandwidth at {rate:g} tok/s, paper-mode",
             an_mb(pub_b * rate), cfg.expected.get("bandwidth_mb_s"), "MB/s"),
        _cmp(f"sustained bandwidth at {rate:g} tok/s, exact", an_mb(exact * rate),
             cfg.expected.get("bandwidth_mb_s"), "MB/s"),
    ]
    notes = ["the published total counts layer terms in KiB and logits in decimal KB; both readings are shown",
             "Q is not in the published byte count; the simulator carries it separately"]
    return Table("traffic", "Per-token link traffic (llama2-7b)", CMP_COLS, rows, notes)


def an_mb(b):
    return b / 1e6


def latency_table(cfg: ConstantSet) -> Table:
    prof = per_token_traffic(preset("llama2-7b"))
    exp = cfg.expected.get("latency_ms", {})
    rows = []
    for key, iface in cfg.interfaces.items():
        r = token_latency(prof, iface, cfg.budget)
        e = exp.get(key, [None, None, None])
        rows.append([iface.name, iface.line_rate_gbps, iface.phy_cost_usd,
                     _num(r["transfer_s"] * 1e3), e[0], _num(r["total_s"] * 1e3), e[1],
                     _num(r["tok_per_s"], 3), e[2], _num((r["tok_per_s"] - e[2]) / e[2] * 100, 3) if e[2] else None])
    return Table("latency", "Link latency per token (llama2-7b, exact bytes)",
                 ["interface", "Gbps", "PHY cost", "transfer ms", "published", "total ms", "published",
                  "tok/s", "published", "tok/s delta %"], rows,
                 [f"includes {cfg.budget.device_compute_s * 1e6:g} us device compute and "
                  f"{cfg.budget.host_attention_s * 1e3:g} ms host attention"])


def scenario_table(cfg: ConstantSet) -> Table:
    prof = per_token_traffic(preset("llama2-7b"))
    exp = cfg.expected.get("scenario_tps", {})
    rows = []
    for key, iface in cfg.interfaces.items():
        s = throughput_scenarios(prof, iface, cfg.budget, scenarios=cfg.scenarios)
        rows.append([iface.name, _num(s["npu_offload_tps"], 3), _num(s["cpu_low_tps"], 3),
                     _num(s["cpu_high_tps"], 3)])
    rows.append(["published", exp.get("npu"), exp.get("cpu-low"), exp.get("cpu-high")])
    return Table("scenarios", "Throughput by host attention latency (tok/s)",
                 ["interface", f"npu {cfg.scenarios['npu'] * 1e3:g} ms",
                  f"cpu-low {cfg.scenarios['cpu-low'] * 1e3:g} ms",
                  f"cpu-high {cfg.scenarios['cpu-high'] * 1e3:g} ms"], rows)


def density_table(cfg: ConstantSet, area_mm2: float | None = None, compare: bool = True) -> Table:
    if area_mm2 is None:
        m = cfg.model("llama2-7b")
        area_mm2 = an.die_area(m.params, m.area_config(cfg.area))["final_mm2"]
    exp = cfg.expected.get("power_density", [None, None]) if compare else [None] * len(cfg.power["density_w"])
    rows = []
    for w, e in zip(cfg.power["density_w"], exp):
        d = an.power_density(w, area_mm2) if area_mm2 > 0 else None
        rows.append(_cmp(f"{w:g} W over {area_mm2:.0f} mm^2", d, e, "mW/mm^2"))
    return Table("density", "Power density", CMP_COLS, rows)


def edram_table(cfg: ConstantSet) -> Table:
    nb = cfg.edram["kv_bytes"]
    u = cfg.edram["um2_per_bit"]
    dec = an.memory_area_mm2(nb, u)
    mib = an.memory_area_mm2(nb / 1e6 * 2 ** 20, u)
    exp = cfg.expected.get("edram_mm2")
    rows = [_cmp("on-device KV cache, 256 MB decimal", dec, exp, "mm^2"),
            _cmp("on-device KV cache, 256 MiB", mib, exp, "mm^2")]
    return Table("edram", "On-device KV cache area (report only)", CMP_COLS, rows,
                 ["the published 51.2 mm^2 does not follow from 256 MB x 0.02 um^2/bit under either byte unit"])


def fpga_reference_table(cfg: ConstantSet) -> Table:
    f = cfg.expected.get("fpga_luts", {})
    rows = [["64->128->64 network, BRAM baseline", f.get("network_baseline")],
            ["64->128->64 network, hardwired", f.get("network_hardwired")],
            ["64 generic MACs", f.get("mac64_generic")],
            ["64 hardwired MACs", f.get("mac64_hardwired")]]
    return Table("fpga", "Published FPGA LUT counts (reference text, not modelled)", ["design", "LUTs"], rows,
                 ["structural gate counts cannot be converted to LUTs without vendor mapping"])


def estimate_report(model: str, cfg: ConstantSet | None = None, params: float | None = None) -> list[Table]:
    cfg = cfg or load_config()
    tables = [energy_table(cfg), area_table(cfg, model, params), cost_table(cfg, model, params)]
    m = _params(cfg, model, params)
    area = an.die_area(m.params, m.area_config(cfg.area))["final_mm2"]
    tables.append(density_table(cfg, area, compare=model == "llama2-7b" and params is None))
    return tables


def full_report(cfg: ConstantSet | None = None) -> list[Table]:
    cfg = cfg or load_config()
    return [
        gate_table(cfg), csd_table(), energy_table(cfg), power_table(cfg),
        area_table(cfg, "tinyllama-1.1b"), area_table(cfg, "llama2-7b"),
        cost_table(cfg, "tinyllama-1.1b"), cost_table(cfg, "llama2-7b"),
        volume_table(cfg), traffic_table(cfg), latency_table(cfg), scenario_table(cfg),
        density_table(cfg), edram_table(cfg), fpga_reference_table(cfg),
    ]


# -- rendering -----------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render(tables, fmt: str = "markdown", meta: dict | None = None) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    if fmt == "json":
        doc = {"meta": meta or {}, "tables": [t.as_dict() for t in tables]}
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for t in tables:
            w.writerow(["table"] + t.columns)
            for r in t.rows:
                w.writerow([t.key] + [_cell(v) for v in r])
        return buf.getvalue()
    out = []
    for t in tables:
        out.append(f"## {t.title}\n")
        out.append("| " + " | ".join(t.columns) + " |")
        out.append("|" + "---|" * len(t.columns))
        for r in t.rows:
            out.append("| " + " | ".join(_cell(v) for v in r) + " |")
        for n in t.notes:
            out.append(f"\n> {n}")
        out.append("")
    return "\n".join(out) + "\n"
