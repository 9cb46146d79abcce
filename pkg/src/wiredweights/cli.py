"""Command-line front end: compile, estimate, simulate, report.

Exit status is 0 on success, 1 when a computation fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reports as rp
from .config import ConfigError, load_config
from .itw import WeightFileError, load_bundle
from .model import PRESETS, count_params, generate_synthetic, preset
from .netlist import NetlistError, count_gates, structural_stats
from .prng import uniform_signed
from .rtl import emit_generic_layer_rtl, emit_netlist_rtl, emit_network_rtl, make_vectors, emit_testbench
from .splitbrain import per_token_traffic, simulate_generation, throughput_scenarios, token_latency
from .synth import synth_generic_mac, synth_layer, synth_neuron

VARIANTS = ("hardwired", "generic")
ESTIMATE_MODELS = ("tinyllama-1.1b", "llama2-7b", "custom")
FUNCTIONAL_LIMIT = 250_000


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write(out_dir: Path, name: str, text: str, written: list):
    p = out_dir / name
    p.write_text(text)
    written.append(p.name)


# -- compile -------------------------------------------------------------

def _neuron_weights(seed: int, fan_in: int = 64):
    return uniform_signed(seed, fan_in, 4, stream=0)


def cmd_compile(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written, summary = [], {"variant": args.variant, "modules": []}
    generic = args.variant == "generic"
    target = args.synthetic

    if target == "neuron":
        w = _neuron_weights(args.seed)
        nl = synth_neuron(w, mode=args.mode, name="neuron")
        art = emit_netlist_rtl(nl, "neuron")
        gates = count_gates(nl).as_dict()
        if generic:
            g = synth_generic_mac(8, 8, 20)
            gates = {k: v * len(w) for k, v in count_gates(g).as_dict().items()}
        _write(out, "neuron.v", art.source_text, written)
        _write(out, "neuron.json", art.sidecar(), written)
        _write(out, "neuron.netlist", nl.dump(), written)
        _write(out, "neuron_gates.json", json.dumps(gates, indent=2) + "\n", written)
        if args.testbench:
            rng = np.random.default_rng(args.seed)
            sets = [{f"x{i}": int(v) for i, v in enumerate(rng.integers(-128, 128, 64))} for _ in range(10)]
            _write(out, "neuron_tb.v", emit_testbench(art, make_vectors(nl, sets)), written)
        summary["modules"].append({"name": "neuron", "gates": gates, "stats": structural_stats(nl)})
    elif target == "network":
        art = emit_network_rtl((64, 128, 64), "generic_baseline" if generic else "hardwired", args.seed)
        _write(out, f"{art.module_name}.v", art.source_text, written)
        _write(out, f"{art.module_name}.json", art.sidecar(), written)
        summary["modules"].append({"name": art.module_name, "stats": art.stats})
    else:
        if args.weights:
            bundle = load_bundle(args.weights)
            n = count_params(bundle)
        else:
            n = count_params(preset(target))
        if n > FUNCTIONAL_LIMIT:
            raise ValueError(f"{n} weights is beyond what this compiler emits as flat RTL ({FUNCTIONAL_LIMIT})")
        if not args.weights:
            bundle = generate_synthetic(preset(target), args.seed)
        report = {}
        device = [(f"l{li}_{mname}", li, m) for li, layer in enumerate(bundle.layers)
                  for mname, m in layer.matrices()]
        device.append(("head", len(bundle.layers), bundle.head))
        for name, li, m in device:
            if generic:
                art = emit_generic_layer_rtl(m, name)
                g = count_gates(synth_generic_mac(m.width, 8, 20)).as_dict()
                report[name] = {k: v * m.rows * m.cols for k, v in g.items()}
            else:
                nl = synth_layer(m, mode=args.mode, register_output=True, name=name, layer_index=li)
                art = emit_netlist_rtl(nl, name)
                _write(out, f"{name}.netlist", nl.dump(), written)
                report[name] = count_gates(nl).as_dict()
            _write(out, f"{name}.v", art.source_text, written)
            _write(out, f"{name}.json", art.sidecar(), written)
            summary["modules"].append({"name": name, "gates": report[name]})
        _write(out, "gate_report.json", json.dumps(report, indent=2) + "\n", written)
    summary["files"] = written
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


# -- estimate ------------------------------------------------------------

def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    if args.model == "custom":
        if args.params is None:
            raise UsageError("--model custom needs --params")
        tables = rp.estimate_report("custom", cfg, params=args.params)
    else:
        if args.params is not None:
            raise UsageError("--params only applies to --model custom")
        tables = rp.estimate_report(args.model, cfg)
    _emit(rp.render(tables, args.format, {"command": "estimate", "model": args.model,
                                          "config": cfg.source}), args.out)
    return 0


# -- simulate ------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.interface not in cfg.interfaces:
        raise UsageError(f"unknown interface {args.interface!r}; known: {', '.join(cfg.interfaces)}")
    iface = cfg.interfaces[args.interface]
    topo = preset(args.model)
    budget = type(cfg.budget)(cfg.budget.device_compute_s, cfg.scenarios[args.attention])
    prof = per_token_traffic(topo)
    lat = token_latency(prof, iface, budget)
    rows = [
        ["interface", iface.name],
        ["host attention ms", cfg.scenarios[args.attention] * 1e3],
        ["bytes per token", prof.total_bytes_per_token],
        ["transfer ms", round(lat["transfer_s"] * 1e3, 6)],
        ["total ms", round(lat["total_s"] * 1e3, 6)],
        ["tok/s", round(lat["tok_per_s"], 6)],
    ]
    if prof.paper_mode_bytes():
        rows.insert(3, ["bytes per token, paper-mode", prof.paper_mode_bytes()])
    scen = throughput_scenarios(prof, iface, cfg.budget, scenarios=cfg.scenarios)
    rows += [[k, round(v, 6)] for k, v in scen.items()]
    notes = []
    status = 0

    small = count_params(topo) <= FUNCTIONAL_LIMIT
    if args.verify and not small:
        raise ValueError(f"--verify runs the functional loop, which needs a model under {FUNCTIONAL_LIMIT} "
                         f"parameters; {args.model} has {count_params(topo)}")
    if small:
        bundle = generate_synthetic(topo, args.seed)
        prompt = [int(t) % topo.vocab_size for t in uniform_signed(args.seed, args.prompt_len, 16, stream=99)]
        kw = dict(iface=iface, budget=budget, seed=args.seed, strategy=args.strategy, k=args.top_k, p=args.top_p)
        sb = simulate_generation(bundle, prompt, args.tokens, "split_brain", **kw)
        exact = all(s["accounted_bytes"] == prof.total_bytes_per_token for s in sb.per_token_stats)
        rows += [["tokens generated", len(sb.tokens)],
                 ["device backend", sb.totals["backend"]],
                 ["simulated accounted bytes", sb.totals["accounted_bytes"]],
                 ["simulated unaccounted bytes (Q, embedding)", sb.totals["unaccounted_bytes"]],
                 ["byte accounting", "EXACT" if exact else "MISMATCH"],
                 ["simulated time s", round(sb.totals["simulated_time_s"], 9)]]
        if args.verify:
            mono = simulate_generation(bundle, prompt, args.tokens, "monolithic", **kw)
            verdict = "EQUIVALENT" if mono.tokens == sb.tokens else "DIVERGENT"
            rows.append(["split-brain vs monolithic", f"{verdict} over {args.tokens} tokens"])
            if verdict != "EQUIVALENT":
                notes.append("token sequences differ")
                status = 1
        rows.append(["tokens", " ".join(map(str, sb.tokens))])
    else:
        notes.append("functional loop skipped for a model this large; latency is analytic")
    table = rp.Table("simulate", f"Split inference, {args.model}", ["quantity", "value"], rows, notes)
    _emit(rp.render([table], args.format, {"command": "simulate", "seed": args.seed}), args.out)
    return status


# -- report --------------------------------------------------------------

def cmd_report(args) -> int:
    cfg = load_config(args.config)
    tables = rp.full_report(cfg)
    _emit(rp.render(tables, args.format, {"command": "report", "config": cfg.source}), args.out)
    return 0


# -- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wiredweights", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--config", help="constants file (default: $WIREDWEIGHTS_CONFIG or packaged)")
        if fmt:
            sp.add_argument("--format", choices=rp.FORMATS, default="markdown")
            sp.add_argument("--out", help="write to this file instead of stdout")

    c = sub.add_parser("compile", help="synthesize weights to netlists, RTL and gate reports")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--weights", help="packed weight file")
    src.add_argument("--synthetic", choices=sorted(PRESETS) + ["neuron", "network"],
                     help="synthetic topology, a 64-input neuron, or the 64-128-64 network")
    c.add_argument("--seed", type=int, default=1)
    c.add_argument("--variant", choices=VARIANTS, default="hardwired")
    c.add_argument("--mode", choices=("csd", "binary"), default="csd")
    c.add_argument("--testbench", action="store_true", help="also emit a self-checking testbench (neuron)")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compile)

    e = sub.add_parser("estimate", help="energy, area, cost and power density for a model")
    e.add_argument("--model", choices=ESTIMATE_MODELS, default="tinyllama-1.1b")
    e.add_argument("--params", type=float, help="parameter count for --model custom")
    common(e)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="link latency, throughput and the functional token loop")
    s.add_argument("--model", choices=sorted(PRESETS), default="llama2-7b")
    s.add_argument("--interface", default="pcie3x4")
    s.add_argument("--attention", choices=("npu", "cpu-low", "cpu-high"), default="npu")
    s.add_argument("--tokens", type=int, default=16)
    s.add_argument("--prompt-len", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--strategy", choices=("greedy", "top_k", "nucleus"), default="greedy")
    s.add_argument("--top-k", type=int, default=4)
    s.add_argument("--top-p", type=float, default=0.9)
    s.add_argument("--verify", action="store_true", help="also run the monolithic reference and compare")
    common(s)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="every reproduced table, computed next to published")
    r.add_argument("--all", action="store_true", default=True, help="include every section (default)")
    common(r)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if getattr(args, "tokens", 1) < 1 or getattr(args, "prompt_len", 1) < 1:
            raise UsageError("--tokens and --prompt-len must be >= 1")
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"wiredweights: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, NetlistError, ConfigError, WeightFileError, OSError, KeyError) as e:
        print(f"wiredweights: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
