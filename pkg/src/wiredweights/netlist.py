"""Bit-width-typed shift/add netlists: construction, simulation, costing.

Node kinds
----------
``input``      primary input, ``width`` bits signed
``shift``      constant left shift by ``shift`` bits (pure wiring)
``and``        partial-product row: ``a`` if bit ``shift`` of ``b`` is set, else 0
``add``/``sub`` two-operand adder / subtractor
``neg``        two's-complement negation
``reg``        D flip-flop bank, reset value 0; its D input may be connected later
``const``      constant (only zero is ever emitted, for eliminated units)
``output``     primary output

Values are signed two's-complement integers; every node result is wrapped to
its declared width.  Simulation is vectorised with int64 numpy arrays, so a
single ``evaluate`` call can sweep thousands of input vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from graphlib import TopologicalSorter

import numpy as np

ARITH = ("add", "sub", "neg", "and")
ROLES = ("shift_add_tree", "accumulator", "pipeline_register")


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    width: int
    inputs: tuple[int, ...] = ()
    shift: int = 0
    role: str = ""
    name: str = ""


def wrap(values, width: int):
    """Reduce to the signed ``width``-bit two's-complement range."""
    m = 1 << width
    h = 1 << (width - 1)
    return ((np.asarray(values, dtype=np.int64) + h) % m) - h


class NetlistBuilder:
    def __init__(self, name: str, acc_width: int = 48):
        self.name = name
        self.acc_width = acc_width
        self._nodes: list[Node] = []
        self._reg_d: dict[int, int] = {}

    def _emit(self, kind, width, inputs=(), shift=0, role="", name="") -> int:
        nid = len(self._nodes)
        self._nodes.append(Node(nid, kind, width, tuple(inputs), shift, role, name))
        return nid

    def width(self, nid: int) -> int:
        return self._nodes[nid].width

    def input(self, name: str, width: int) -> int:
        return self._emit("input", width, name=name)

    def const_zero(self, width: int = 1) -> int:
        return self._emit("const", width)

    def shift(self, a: int, k: int) -> int:
        if k < 0:
            raise NetlistError("only left shifts are wiring; fold right shifts into the output scale")
        if k == 0:
            return a
        return self._emit("shift", self.width(a) + k, (a,), shift=k)

    def _binary(self, kind, a, b, role, width=None):
        w = width or min(max(self.width(a), self.width(b)) + 1, self.acc_width)
        return self._emit(kind, w, (a, b), role=role)

    def add(self, a, b, role="shift_add_tree", width=None):
        return self._binary("add", a, b, role, width)

    def sub(self, a, b, role="shift_add_tree", width=None):
        return self._binary("sub", a, b, role, width)

    def neg(self, a, role="shift_add_tree"):
        return self._emit("neg", min(self.width(a) + 1, self.acc_width), (a,), role=role)

    def and_bit(self, a, b, bit, role="shift_add_tree"):
        return self._emit("and", self.width(a), (a, b), shift=bit, role=role)

    def reg(self, width, d=None, role="pipeline_register", name="") -> int:
        nid = self._emit("reg", width, (), role=role, name=name)
        if d is not None:
            self.connect(nid, d)
        return nid

    def connect(self, reg: int, d: int):
        if self._nodes[reg].kind != "reg":
            raise NetlistError("connect() targets register nodes only")
        self._reg_d[reg] = d

    def label(self, nid: int, name: str) -> int:
        """Name an arithmetic or wiring node (inputs keep their port names)."""
        n = self._nodes[nid]
        if n.kind not in ("input", "output") and not n.name:
            self._nodes[nid] = Node(n.id, n.kind, n.width, n.inputs, n.shift, n.role, name)
        return nid

    def output(self, a: int, name: str, width=None) -> int:
        return self._emit("output", width or self.width(a), (a,), name=name)

    def build(self, **attrs) -> "Netlist":
        nodes = list(self._nodes)
        for r, d in self._reg_d.items():
            n = nodes[r]
            nodes[r] = Node(n.id, n.kind, n.width, (d,), n.shift, n.role, n.name)
        missing = [n.id for n in nodes if n.kind == "reg" and not n.inputs]
        if missing:
            raise NetlistError(f"registers without D input: {missing}")
        return Netlist(self.name, tuple(nodes), attrs)


@dataclass(frozen=True, eq=False)
class Netlist:
    name: str
    nodes: tuple[Node, ...]
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        order = self._topo_order()
        object.__setattr__(self, "_order", order)
        self._check_reachability()

    def _topo_order(self):
        ts = TopologicalSorter()
        for n in self.nodes:
            # register outputs act as sources within a cycle
            ts.add(n.id, *(() if n.kind == "reg" else n.inputs))
        try:
            return tuple(ts.static_order())
        except Exception as exc:
            raise NetlistError(f"combinational loop in {self.name}: {exc}") from None

    def _check_reachability(self):
        reach = set()
        for nid in self._order:
            n = self.nodes[nid]
            if n.kind == "input":
                reach.add(nid)
        # propagate through registers too: iterate to a fixed point
        changed = True
        while changed:
            changed = False
            for n in self.nodes:
                if n.id not in reach and n.inputs and any(i in reach for i in n.inputs):
                    reach.add(n.id)
                    changed = True
        for n in self.nodes:
            if n.kind == "output" and n.id not in reach and not self._is_const_cone(n.id):
                raise NetlistError(f"output {n.name} unreachable from any input")

    def _is_const_cone(self, nid):
        # an eliminated output is driven from a const node; a bare register loop is not
        seen, stack = set(), [nid]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            if self.nodes[i].kind == "const":
                return True
            stack.extend(self.nodes[i].inputs)
        return False

    @property
    def inputs(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == "input"]

    @property
    def outputs(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == "output"]

    def by_kind(self, kind):
        return [n for n in self.nodes if n.kind == kind]

    def dump(self) -> str:
        """Deterministic text form: one node per line, then attributes."""
        lines = [f"netlist {self.name}"]
        for k in sorted(self.attrs):
            lines.append(f"attr {k}={self.attrs[k]}")
        for n in self.nodes:
            parts = [f"n{n.id}", n.kind, f"w={n.width}"]
            if n.inputs:
                parts.append("in=" + ",".join(f"n{i}" for i in n.inputs))
            if n.kind in ("shift", "and"):
                parts.append(f"k={n.shift}")
            if n.role:
                parts.append(f"role={n.role}")
            if n.name:
                parts.append(f"name={n.name}")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()


class _Compiled:
    """Levelised form of a netlist: one numpy operation per (level, kind)."""

    def __init__(self, netlist: Netlist):
        nodes = netlist.nodes
        level = {}
        for nid in netlist._order:
            n = nodes[nid]
            if n.kind in ("input", "reg", "const"):
                level[nid] = 0
            else:
                level[nid] = 1 + max(level[i] for i in n.inputs)
        self.size = len(nodes)
        self.input_ids = {n.name: n.id for n in netlist.inputs}
        self.reg_ids = np.array([n.id for n in netlist.by_kind("reg")], dtype=np.int64)
        self.reg_d = np.array([nodes[r].inputs[0] for r in self.reg_ids], dtype=np.int64)
        self.reg_w = np.array([nodes[r].width for r in self.reg_ids], dtype=np.int64)
        self.outputs = [(n.name, n.id) for n in netlist.outputs]
        groups = {}
        for n in nodes:
            if level[n.id]:
                groups.setdefault((level[n.id], n.kind), []).append(n)
        self.steps = []
        for (lvl, kind), group in sorted(groups.items()):
            ids = np.array([n.id for n in group], dtype=np.int64)
            a = np.array([n.inputs[0] for n in group], dtype=np.int64)
            b = np.array([n.inputs[1] if len(n.inputs) > 1 else 0 for n in group], dtype=np.int64)
            k = np.array([n.shift for n in group], dtype=np.int64)[:, None]
            w = np.array([n.width for n in group], dtype=np.int64)
            self.steps.append((kind, ids, a, b, k, w))


def _wrap_rows(v, widths):
    h = (np.int64(1) << (widths - 1))[:, None]
    return ((v + h) & (2 * h - 1)) - h


def _compiled(netlist: Netlist) -> _Compiled:
    c = netlist.__dict__.get("_compiled")
    if c is None:
        c = _Compiled(netlist)
        object.__setattr__(netlist, "_compiled", c)
    return c


def evaluate(netlist: Netlist, inputs: dict, cycles: int = 1) -> list[dict]:
    """Simulate ``cycles`` clock cycles and return the outputs seen in each cycle.

    ``inputs`` maps input names to an integer, a 1-D array (a batch of
    independent vectors, held for every cycle) or, with ``cycles > 1``, a 2-D
    array shaped ``(cycles, batch)`` giving per-cycle values.  Outputs are
    sampled after combinational settling and before the clock edge, so a
    value that passes through one register shows up one cycle later.
    """
    names = {n.name: n for n in netlist.inputs}
    unbound = sorted(set(names) - set(inputs))
    if unbound:
        raise NetlistError(f"unbound inputs: {unbound}")
    extra = sorted(set(inputs) - set(names))
    if extra:
        raise NetlistError(f"unknown inputs: {extra}")

    seqs = {}
    batch = 1
    for name, val in inputs.items():
        a = np.asarray(val, dtype=np.int64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        if a.shape[0] not in (1, cycles):
            raise NetlistError(f"input {name}: per-cycle array has {a.shape[0]} rows for {cycles} cycles")
        w = names[name].width
        lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
        if a.size and (a.min() < lo or a.max() > hi):
            raise NetlistError(f"input {name} value outside signed {w}-bit range")
        seqs[name] = a
        batch = max(batch, a.shape[1])

    c = _compiled(netlist)
    vals = np.zeros((c.size, batch), dtype=np.int64)
    state = np.zeros((len(c.reg_ids), batch), dtype=np.int64)
    results = []
    for t in range(cycles):
        for name, a in seqs.items():
            vals[c.input_ids[name]] = a[t if a.shape[0] > 1 else 0]
        if len(c.reg_ids):
            vals[c.reg_ids] = state
        for kind, ids, a, b, k, w in c.steps:
            if kind == "add":
                v = vals[a] + vals[b]
            elif kind == "sub":
                v = vals[a] - vals[b]
            elif kind == "shift":
                v = vals[a] << k
            elif kind == "neg":
                v = -vals[a]
            elif kind == "and":
                v = np.where((vals[b] >> k) & 1, vals[a], 0)
            elif kind == "output":
                v = vals[a]
            else:
                raise NetlistError(f"unknown node kind {kind}")
            vals[ids] = _wrap_rows(v, w)
        results.append({name: vals[nid].copy() for name, nid in c.outputs})
        if len(c.reg_ids):
            state = _wrap_rows(vals[c.reg_d], c.reg_w)
    return results


@dataclass(frozen=True)
class GateCostTable:
    nand2_per_fulladder_bit: float = 7.0
    nand2_per_register_bit: float = 6.0
    nand2_per_negate_bit: float = 1.5
    nand2_per_and_bit: float = 1.33
    shift_cost: float = 0.0

    def __post_init__(self):
        if self.shift_cost != 0:
            raise ValueError("shifts are wiring; shift_cost must be 0")
        for name in ("nand2_per_fulladder_bit", "nand2_per_register_bit",
                     "nand2_per_negate_bit", "nand2_per_and_bit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class GateReport:
    breakdown: dict

    @property
    def total(self) -> float:
        return sum(self.breakdown.values())

    def as_dict(self):
        return {"total": self.total, **self.breakdown}


def node_cost(n: Node, table: GateCostTable) -> float:
    if n.kind in ("add", "sub"):
        return n.width * table.nand2_per_fulladder_bit
    if n.kind == "neg":
        return n.width * table.nand2_per_negate_bit
    if n.kind == "and":
        return n.width * table.nand2_per_and_bit
    if n.kind == "reg":
        return n.width * table.nand2_per_register_bit
    if n.kind == "shift":
        return table.shift_cost
    return 0.0


def count_gates(netlist: Netlist, table: GateCostTable | None = None) -> GateReport:
    table = table or GateCostTable()
    breakdown = dict.fromkeys(ROLES, 0.0)
    for n in netlist.nodes:
        c = node_cost(n, table)
        if c:
            role = n.role or ("pipeline_register" if n.kind == "reg" else "shift_add_tree")
            breakdown[role] += c
    return GateReport(breakdown)


def structural_stats(netlist: Netlist) -> dict:
    counts = {k: len(netlist.by_kind(k)) for k in ("add", "sub", "neg", "and", "reg", "shift")}
    depth = {}
    for nid in netlist._order:
        n = netlist.nodes[nid]
        if n.kind in ("input", "reg", "const"):
            depth[nid] = 0
            continue
        d = max((depth[i] for i in n.inputs), default=0)
        depth[nid] = d + (1 if n.kind in ARITH else 0)
    return {
        "adds": counts["add"],
        "subs": counts["sub"],
        "negates": counts["neg"],
        "ands": counts["and"],
        "registers": counts["reg"],
        "register_bits": sum(n.width for n in netlist.by_kind("reg")),
        "wires": counts["shift"],
        "depth": max(depth.values(), default=0),
    }
