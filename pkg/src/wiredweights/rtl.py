"""Deterministic Verilog-2001 emission for netlists and the two-layer prototype network.

Every wire is declared ``signed`` but arithmetic never relies on implicit
sign handling: operands are explicitly sign-extended (or truncated) to the
result width, so each ``+``/``-`` is a plain modular operation on equal-width
vectors, exactly matching the two's-complement wrap of ``evaluate``.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import QuantizedWeightMatrix, signed_range
from .netlist import Netlist, NetlistError, evaluate, structural_stats
from .prng import uniform_signed
from .synth import eval_layer, synth_layer

VARIANTS = ("hardwired", "generic_baseline")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_KNOWN = {"input", "shift", "and", "add", "sub", "neg", "reg", "const", "output"}


@dataclass(frozen=True)
class RtlArtifact:
    module_name: str
    source_text: str
    variant: str
    stats: dict = field(default_factory=dict)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def sidecar(self) -> str:
        return json.dumps({"module": self.module_name, "variant": self.variant,
                           "sha256": self.sha256, "stats": self.stats}, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        v = out / f"{self.module_name}.v"
        j = out / f"{self.module_name}.json"
        v.write_text(self.source_text)
        j.write_text(self.sidecar())
        return [v, j]


def _check_ident(name):
    if not _IDENT.match(name):
        raise NetlistError(f"not a Verilog identifier: {name!r}")
    return name


def _decl(w):
    return f"[{w - 1}:0]"


def fit(ref: str, have: int, want: int) -> str:
    """Sign-extend or truncate the expression ``ref`` from ``have`` to ``want`` bits."""
    if have == want:
        return ref
    if have < want:
        msb = f"{ref}[{have - 1}]" if have > 1 else ref
        return f"{{{{{want - have}{{{msb}}}}}, {ref}}}"
    return f"{ref}[{want - 1}:0]"


def arithmetic_ops(text: str) -> dict:
    """Count binary ``+``/``-`` and unary negations in ``assign`` lines."""
    plus = minus = neg = 0
    for line in text.splitlines():
        line = line.split("//")[0]
        if not line.strip().startswith("assign"):
            continue
        rhs = line.split("=", 1)[1]
        plus += rhs.count(" + ")
        minus += rhs.count(" - ")
        neg += len(re.findall(r"=\s*-", line))
    return {"plus": plus, "minus": minus, "negate": neg}


def _feedback_regs(netlist: Netlist) -> set:
    """Registers whose next state depends on their own current value."""
    nodes = netlist.nodes
    out = set()
    for r in netlist.by_kind("reg"):
        seen, stack = set(), [r.inputs[0]]
        while stack:
            nid = stack.pop()
            if nid == r.id:
                out.add(r.id)
                break
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(nodes[nid].inputs)
    return out


def pipeline_latency(netlist: Netlist) -> int:
    """Register stages on the longest feed-forward input->output path.

    State registers (accumulators) sit on a feedback loop and add no latency.
    """
    nodes = netlist.nodes
    fb = _feedback_regs(netlist)
    depth = {}

    def walk(nid):
        if nid in depth:
            return depth[nid]
        n = nodes[nid]
        if n.kind == "reg":
            r = 0 if nid in fb else 1 + walk(n.inputs[0])
        else:
            r = max((walk(i) for i in n.inputs), default=0)
        depth[nid] = r
        return r

    return max((walk(n.id) for n in netlist.outputs), default=0)


def _names(netlist: Netlist):
    names = {}
    used = set()
    for n in netlist.nodes:
        if n.kind in ("input", "output"):
            nm = _check_ident(n.name)
        elif n.name and _IDENT.match(n.name) and n.kind != "reg":
            nm = n.name
        else:
            nm = f"n{n.id}"
        if nm in used or nm in ("clk", "rst"):
            nm = f"n{n.id}"
        used.add(nm)
        names[n.id] = nm
    return names


def emit_netlist_rtl(netlist: Netlist, module_name: str | None = None) -> RtlArtifact:
    module_name = _check_ident(module_name or netlist.name)
    nodes = netlist.nodes
    bad = sorted({n.kind for n in nodes} - _KNOWN)
    if bad:
        raise NetlistError(f"cannot emit node kind(s) {bad}")
    nm = _names(netlist)
    regs = netlist.by_kind("reg")
    ports, port_widths = [], {}
    if regs:
        ports += ["input wire clk", "input wire rst"]
        port_widths.update(clk=["input", 1], rst=["input", 1])
    for n in netlist.inputs:
        ports.append(f"input wire signed {_decl(n.width)} {nm[n.id]}")
        port_widths[nm[n.id]] = ["input", n.width]
    for n in netlist.outputs:
        ports.append(f"output wire signed {_decl(n.width)} {nm[n.id]}")
        port_widths[nm[n.id]] = ["output", n.width]

    decls, body = [], []
    for nid in netlist._order:
        n = nodes[nid]
        if n.kind in ("input", "output"):
            continue
        ins = [nodes[i] for i in n.inputs]
        if n.kind == "reg":
            decls.append(f"reg signed {_decl(n.width)} {nm[nid]};")
            continue
        decls.append(f"wire signed {_decl(n.width)} {nm[nid]};")
        w = n.width
        if n.kind == "const":
            rhs = f"{{{w}{{1'b0}}}}"
        elif n.kind == "shift":
            a = ins[0]
            rhs = f"{{{nm[a.id]}, {n.shift}'b0}}"
            rhs = fit(rhs, a.width + n.shift, w) if a.width + n.shift != w else rhs
        elif n.kind in ("add", "sub"):
            op = "+" if n.kind == "add" else "-"
            a, b = ins
            rhs = f"{fit(nm[a.id], a.width, w)} {op} {fit(nm[b.id], b.width, w)}"
        elif n.kind == "neg":
            a = ins[0]
            rhs = f"-{fit(nm[a.id], a.width, w)}"
        elif n.kind == "and":
            a, b = ins
            rhs = f"{fit(nm[a.id], a.width, w)} & {{{w}{{{nm[b.id]}[{n.shift}]}}}}"
        body.append(f"assign {nm[nid]} = {rhs};")
    for n in netlist.outputs:
        a = nodes[n.inputs[0]]
        body.append(f"assign {nm[n.id]} = {fit(nm[a.id], a.width, n.width)};")

    banks = {}
    for r in regs:
        banks.setdefault(r.role or "pipeline_register", []).append(r)
    always = []
    for role in sorted(banks):
        rs = banks[role]
        always.append(f"// register bank: {role}")
        always.append("always @(posedge clk) begin")
        always.append("  if (rst) begin")
        always += [f"    {nm[r.id]} <= {{{r.width}{{1'b0}}}};" for r in rs]
        always.append("  end else begin")
        for r in rs:
            d = nodes[r.inputs[0]]
            always.append(f"    {nm[r.id]} <= {fit(nm[d.id], d.width, r.width)};")
        always.append("  end")
        always.append("end")

    lines = [
        f"// {module_name}: generated by wiredweights from netlist {netlist.name}",
        f"// netlist sha256 {netlist.content_hash()}",
        "`default_nettype none",
        f"module {module_name} (",
        ",\n".join(f"  {p}" for p in ports),
        ");",
    ]
    lines += [f"  {d}" for d in decls]
    lines += [f"  {s}" for s in body]
    lines += [f"  {s}" for s in always]
    lines += ["endmodule", "`default_nettype wire", ""]
    text = "\n".join(lines)

    st = structural_stats(netlist)
    stats = {
        "module_count": 1,
        "modules": [module_name],
        "port_widths": port_widths,
        "latency_cycles": pipeline_latency(netlist),
        "netlist_sha256": netlist.content_hash(),
        "adds": st["adds"], "subs": st["subs"], "negates": st["negates"],
        "registers": st["registers"],
        "arithmetic_ops": arithmetic_ops(text),
    }
    return RtlArtifact(module_name, text, "hardwired", stats)


# -- testbench ------------------------------------------------------------

def make_vectors(netlist: Netlist, input_sets) -> list[tuple[dict, dict]]:
    """Pair each input assignment with the outputs ``evaluate`` predicts after the pipeline fills."""
    cycles = pipeline_latency(netlist) + 1
    vecs = []
    for ins in input_sets:
        out = evaluate(netlist, {k: int(v) for k, v in ins.items()}, cycles=cycles)[-1]
        vecs.append((dict(ins), {k: int(v[0]) for k, v in out.items()}))
    return vecs


def _lit(v: int, w: int) -> str:
    return f"{w}'h{v & ((1 << w) - 1):x}"


def emit_testbench(artifact: RtlArtifact, vectors) -> str:
    """Self-checking testbench: reset, apply each vector, clock through the pipeline, compare."""
    pw = artifact.stats["port_widths"]
    ins = [p for p, (d, _) in pw.items() if d == "input" and p not in ("clk", "rst")]
    outs = [p for p, (d, _) in pw.items() if d == "output"]
    clocked = "clk" in pw
    lat = artifact.stats.get("latency_cycles", 0)
    for i, (vin, vout) in enumerate(vectors):
        for name, val in list(vin.items()) + list(vout.items()):
            if name not in pw or name in ("clk", "rst"):
                raise NetlistError(f"vector {i}: no port named {name!r}")
            w = pw[name][1]
            lo, hi = signed_range(w)
            if not lo <= int(val) <= hi:
                raise NetlistError(f"vector {i}: {name}={val} does not fit {w} bits")
        if set(vin) != set(ins):
            raise NetlistError(f"vector {i}: inputs {sorted(vin)} do not match ports {sorted(ins)}")

    m = artifact.module_name
    L = ["`default_nettype none", f"module {m}_tb;"]
    if clocked:
        L += ["  reg clk = 1'b0;", "  reg rst = 1'b1;", "  always #5 clk = ~clk;"]
    for p in ins:
        L.append(f"  reg signed {_decl(pw[p][1])} {p} = {pw[p][1]}'h0;")
    for p in outs:
        L.append(f"  wire signed {_decl(pw[p][1])} {p};")
    L.append("  integer errors = 0;")
    conns = ([".clk(clk)", ".rst(rst)"] if clocked else []) + [f".{p}({p})" for p in ins + outs]
    L.append(f"  {m} dut ({', '.join(conns)});")
    L.append("  initial begin")
    for i, (vin, vout) in enumerate(vectors):
        if clocked:
            L += ["    rst = 1'b1;", "    @(posedge clk); #1;", "    rst = 1'b0;"]
        for p in ins:
            L.append(f"    {p} = {_lit(int(vin[p]), pw[p][1])};")
        L += ["    @(posedge clk); #1;"] * (lat if clocked else 0)
        L.append("    #1;")
        for p, v in vout.items():
            lit = _lit(int(v), pw[p][1])
            L.append(f"    if ({p} !== {lit}) begin errors = errors + 1; "
                     f"$display(\"FAIL vector {i} {p} got %h want {lit}\", {p}); end")
    L.append(f"    if (errors == 0) $display(\"PASS {len(vectors)} vectors\");")
    L.append("    $finish;")
    L += ["  end", "endmodule", "`default_nettype wire", ""]
    return "\n".join(L)


# -- prototype network ----------------------------------------------------

def network_weights(sizes=(64, 128, 64), seed: int = 1, scale_exp: int = -3, width: int = 4):
    """Random signed ``width``-bit weight matrices for the dense stack ``sizes``."""
    if any(s <= 0 for s in sizes) or len(sizes) < 2:
        raise ValueError("layer sizes must be positive, at least two")
    mats = []
    for k, (r, c) in enumerate(zip(sizes[:-1], sizes[1:])):
        vals = uniform_signed(seed, r * c, width, stream=k).reshape(r, c)
        mats.append(QuantizedWeightMatrix(vals, scale_exp, width))
    return mats


def inter_shift(m: QuantizedWeightMatrix) -> int:
    """Right shift applied to a layer's integer output before the next layer."""
    return -m.scale_exp + math.ceil(math.log2(max(m.rows, 1)) / 2)


def requantize_int(y, shift: int, width: int = 8) -> np.ndarray:
    lo, hi = signed_range(width)
    return np.clip(np.asarray(y, dtype=np.int64) >> shift, lo, hi)


def network_reference(mats, x, in_width: int = 8) -> np.ndarray:
    """Integer oracle for the stack: ``x @ W`` per layer, floor-shift and saturate between layers."""
    h = np.atleast_2d(np.asarray(x, dtype=np.int64))
    for k, m in enumerate(mats):
        h = h @ m.values
        if k < len(mats) - 1:
            h = requantize_int(h, inter_shift(m), in_width)
    return h


def network_netlists(mats, in_width: int = 8):
    return [synth_layer(m, in_width, mode="csd", register_output=True, name=f"layer{k}", layer_index=k)
            for k, m in enumerate(mats)]


def eval_network(netlists, mats, x, in_width: int = 8) -> np.ndarray:
    h = np.atleast_2d(np.asarray(x, dtype=np.int64))
    for k, (nl, m) in enumerate(zip(netlists, mats)):
        h = eval_layer(nl, h)
        if k < len(mats) - 1:
            h = requantize_int(h, inter_shift(m), in_width)
    return h


def _requant_module(name):
    return f"""module {name} #(parameter AW = 20, parameter OW = 8, parameter S = 0) (
  input wire signed [AW-1:0] a,
  output wire signed [OW-1:0] y
);
  localparam signed [AW-1:0] HI = (1 << (OW - 1)) - 1;
  localparam signed [AW-1:0] LO = -(1 << (OW - 1));
  wire signed [AW-1:0] t = a >>> S;
  assign y = (t > HI) ? HI[OW-1:0] : ((t < LO) ? LO[OW-1:0] : t[OW-1:0]);
endmodule
"""


def _flat(prefix, n, w):
    return [f"{prefix}{i}" for i in range(n)], w


def _hardwired_network(mats, name, in_width):
    nls = network_netlists(mats, in_width)
    arts = [emit_netlist_rtl(nl, f"{name}_layer{k}") for k, nl in enumerate(nls)]
    rq = f"{name}_requant"
    top = [f"module {name} (", "  input wire clk,", "  input wire rst,"]
    ports = [f"  input wire signed {_decl(in_width)} x{i}" for i in range(mats[0].rows)]
    last = nls[-1]
    ports += [f"  output wire signed {_decl(o.width)} y{j}" for j, o in enumerate(last.outputs)]
    top.append(",\n".join(ports))
    top.append(");")
    prev = [f"x{i}" for i in range(mats[0].rows)]
    for k, (nl, art) in enumerate(zip(nls, arts)):
        final = k == len(nls) - 1
        outs = [f"y{j}" if final else f"l{k}_y{j}" for j in range(mats[k].cols)]
        if not final:
            for j, o in enumerate(nl.outputs):
                top.append(f"  wire signed {_decl(o.width)} l{k}_y{j};")
                top.append(f"  wire signed {_decl(in_width)} l{k}_h{j};")
        conns = [".clk(clk)", ".rst(rst)"] + [f".x{i}({p})" for i, p in enumerate(prev)]
        conns += [f".y{j}({o})" for j, o in enumerate(outs)]
        top.append(f"  {art.module_name} u_layer{k} (")
        top.append(",\n".join(f"    {c}" for c in conns))
        top.append("  );")
        if not final:
            s = inter_shift(mats[k])
            for j, o in enumerate(nl.outputs):
                top.append(f"  {rq} #(.AW({o.width}), .OW({in_width}), .S({s})) "
                           f"u_rq{k}_{j} (.a(l{k}_y{j}), .y(l{k}_h{j}));")
            prev = [f"l{k}_h{j}" for j in range(mats[k].cols)]
    top.append("endmodule")
    parts = [a.source_text for a in arts] + [_requant_module(rq), "\n".join(top) + "\n"]
    nonzero = int(sum(np.count_nonzero(m.values) for m in mats))
    stats = {
        "module_count": len(arts) + 2,
        "modules": [a.module_name for a in arts] + [rq, name],
        "layers": [[m.rows, m.cols] for m in mats],
        "mac_ops": int(sum(m.rows * m.cols for m in mats)),
        "mac_sites": int(sum(m.rows * m.cols for m in mats)),
        "mac_sites_instantiated": nonzero,
        "pruned_sites": int(sum(m.rows * m.cols for m in mats)) - nonzero,
        "adds": sum(a.stats["adds"] for a in arts),
        "subs": sum(a.stats["subs"] for a in arts),
        "layer_netlist_sha256": [nl.content_hash() for nl in nls],
        "latency_cycles": len(nls),
        "port_widths": {**{f"x{i}": ["input", in_width] for i in range(mats[0].rows)},
                        **{f"y{j}": ["output", o.width] for j, o in enumerate(last.outputs)}},
    }
    return parts, stats


def _generic_mac_module(name):
    return f"""module {name} #(parameter IW = 8, parameter WW = 4, parameter AW = 20) (
  input wire clk,
  input wire rst,
  input wire clr,
  input wire en,
  input wire signed [IW-1:0] x,
  input wire signed [WW-1:0] w,
  output reg signed [AW-1:0] acc
);
  always @(posedge clk) begin
    if (rst || clr) acc <= {{AW{{1'b0}}}};
    else if (en) acc <= acc + x * w;
  end
endmodule
"""


def _generic_layer_module(name, mac, m: QuantizedWeightMatrix, in_width, acc_width):
    R, C, W = m.rows, m.cols, m.width
    aw = max((R - 1).bit_length(), 1)
    L = [
        f"module {name} (",
        "  input wire clk,",
        "  input wire rst,",
        "  input wire start,",
        f"  input wire [{R * in_width - 1}:0] x_flat,",
        f"  output wire [{C * acc_width - 1}:0] y_flat,",
        "  output reg done",
        ");",
        f"  // weight memory, synchronous read, one word per (row, col)",
        f"  reg signed [{W - 1}:0] wmem [0:{R * C - 1}];",
        "  initial begin",
    ]
    flat = m.values.reshape(-1)
    L += [f"    wmem[{i}] = {_lit(int(v), W)};" for i, v in enumerate(flat)]
    L += [
        "  end",
        f"  reg [{aw - 1}:0] row;",
        "  reg busy, busy_q, last_q;",
        f"  reg signed [{in_width - 1}:0] x_q;",
        "  always @(posedge clk) begin",
        "    if (rst) begin",
        "      row <= 0; busy <= 1'b0; busy_q <= 1'b0; last_q <= 1'b0; done <= 1'b0;",
        "    end else begin",
        "      busy_q <= busy;",
        f"      last_q <= busy && (row == {R - 1});",
        "      done <= last_q;",
        "      x_q <= x_flat[row * " + str(in_width) + " +: " + str(in_width) + "];",
        "      if (start) begin row <= 0; busy <= 1'b1; end",
        f"      else if (busy) begin if (row == {R - 1}) busy <= 1'b0; else row <= row + 1'b1; end",
        "    end",
        "  end",
        "  genvar j;",
        "  generate",
        f"    for (j = 0; j < {C}; j = j + 1) begin : col",
        f"      reg signed [{W - 1}:0] w_q;",
        f"      always @(posedge clk) w_q <= wmem[row * {C} + j];",
        f"      {mac} #(.IW({in_width}), .WW({W}), .AW({acc_width})) u_mac (",
        "        .clk(clk), .rst(rst), .clr(start), .en(busy_q), .x(x_q), .w(w_q),",
        f"        .acc(y_flat[j * {acc_width} +: {acc_width}])",
        "      );",
        "    end",
        "  endgenerate",
        "endmodule",
        "",
    ]
    return "\n".join(L)


def _generic_network(mats, name, in_width):
    from .synth import dot_acc_width

    mac = f"{name}_mac"
    rq = f"{name}_requant"
    parts = [_generic_mac_module(mac), _requant_module(rq)]
    accs = [dot_acc_width(in_width, m.width, m.rows) for m in mats]
    for k, (m, aw) in enumerate(zip(mats, accs)):
        parts.append(_generic_layer_module(f"{name}_layer{k}", mac, m, in_width, aw))
    n_in, n_out = mats[0].rows, mats[-1].cols
    T = [f"module {name} (", "  input wire clk,", "  input wire rst,", "  input wire start,",
         f"  input wire [{n_in * in_width - 1}:0] x_flat,",
         f"  output wire [{n_out * accs[-1] - 1}:0] y_flat,", "  output wire done", ");"]
    prev, prev_start = "x_flat", "start"
    for k, (m, aw) in enumerate(zip(mats, accs)):
        final = k == len(mats) - 1
        y = "y_flat" if final else f"l{k}_y"
        d = "done" if final else f"l{k}_done"
        if not final:
            T.append(f"  wire [{m.cols * aw - 1}:0] {y};")
            T.append(f"  wire {d};")
        T.append(f"  {name}_layer{k} u_layer{k} (.clk(clk), .rst(rst), .start({prev_start}), "
                 f".x_flat({prev}), .y_flat({y}), .done({d}));")
        if not final:
            h = f"l{k}_h"
            T.append(f"  wire [{m.cols * in_width - 1}:0] {h};")
            T.append("  genvar g" + str(k) + ";")
            T.append(f"  generate for (g{k} = 0; g{k} < {m.cols}; g{k} = g{k} + 1) begin : rq{k}")
            T.append(f"    {rq} #(.AW({aw}), .OW({in_width}), .S({inter_shift(m)})) u_rq "
                     f"(.a({y}[g{k} * {aw} +: {aw}]), .y({h}[g{k} * {in_width} +: {in_width}]));")
            T.append("  end endgenerate")
            prev, prev_start = h, d
    T += ["endmodule", ""]
    parts.append("\n".join(T))
    macs = int(sum(m.rows * m.cols for m in mats))
    stats = {
        "module_count": len(mats) + 3,
        "modules": [mac, rq] + [f"{name}_layer{k}" for k in range(len(mats))] + [name],
        "layers": [[m.rows, m.cols] for m in mats],
        "mac_ops": macs,
        "mac_units": int(sum(m.cols for m in mats)),
        "weight_memory_words": macs,
        "latency_cycles": int(sum(m.rows + 3 for m in mats)),
    }
    return parts, stats


def emit_network_rtl(mats_or_sizes=(64, 128, 64), variant: str = "hardwired", seed: int = 1,
                     name: str = "proto_net", in_width: int = 8) -> RtlArtifact:
    """Emit the dense stack as one self-contained Verilog file.

    ``mats_or_sizes`` is a list of weight matrices or a tuple of layer sizes
    (weights then drawn from ``seed``).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    _check_ident(name)
    if all(isinstance(s, (int, np.integer)) for s in mats_or_sizes):
        mats = network_weights(tuple(int(s) for s in mats_or_sizes), seed)
    else:
        mats = list(mats_or_sizes)
    if variant == "hardwired":
        parts, stats = _hardwired_network(mats, name, in_width)
    else:
        parts, stats = _generic_network(mats, name, in_width)
    header = (f"// {name}: {variant} network "
              f"{'x'.join(str(s) for s in [mats[0].rows] + [m.cols for m in mats])}, generated by wiredweights\n")
    text = header + "\n".join(parts)
    return RtlArtifact(name, text, variant, stats)


def emit_generic_layer_rtl(m: QuantizedWeightMatrix, name: str = "layer", in_width: int = 8) -> RtlArtifact:
    """Baseline for one matrix: ``cols`` runtime-weight MACs streaming ``rows`` inputs from weight memory."""
    from .synth import dot_acc_width

    _check_ident(name)
    aw = dot_acc_width(in_width, m.width, m.rows)
    mac = f"{name}_mac"
    text = (f"// {name}: generic_baseline layer {m.rows}x{m.cols}, generated by wiredweights\n"
            + _generic_mac_module(mac) + "\n" + _generic_layer_module(name, mac, m, in_width, aw))
    stats = {"module_count": 2, "modules": [mac, name], "mac_ops": m.rows * m.cols,
             "mac_units": m.cols, "weight_memory_words": m.rows * m.cols,
             "port_widths": {"x_flat": ["input", m.rows * in_width], "y_flat": ["output", m.cols * aw]}}
    return RtlArtifact(name, text, "generic_baseline", stats)
