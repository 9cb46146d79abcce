"""Netlist synthesis for hardwired and generic multiply-accumulate structures."""

from __future__ import annotations

import math

import numpy as np

from .csd import ShiftAddPlan, plan_weight
from .netlist import GateCostTable, Netlist, NetlistBuilder, NetlistError, count_gates
from .model import QuantizedWeightMatrix

CMP_IN_WIDTH = 8
CMP_ACC_WIDTH = 20
CMP_GENERIC_W_WIDTH = 8


def signed_bits(magnitude: int) -> int:
    """Width of the smallest signed word holding both ``+magnitude`` and ``-magnitude``."""
    return max(magnitude.bit_length() + 1, 1)


def dot_acc_width(in_width: int, w_width: int, fan_in: int) -> int:
    return in_width + w_width + math.ceil(math.log2(max(fan_in, 1)))


def _merge(b: NetlistBuilder, leaves, role="shift_add_tree"):
    """Balanced binary merge of ``(sign, node)`` leaves; returns one ``(sign, node)``."""
    level = list(leaves)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            (sa, a), (sb, bb) = level[i], level[i + 1]
            if sa == sb:
                nxt.append((sa, b.add(a, bb, role)))
            elif sa > 0:
                nxt.append((1, b.sub(a, bb, role)))
            else:
                nxt.append((1, b.sub(bb, a, role)))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _const_product(b: NetlistBuilder, x: int, plan: ShiftAddPlan, label=""):
    """Shift wires plus the combiner tree for one constant; ``None`` if the weight is zero."""
    if not plan.terms:
        return None
    leaves = [(sign, b.shift(x, k)) for sign, k in plan.int_terms()]
    sign, root = _merge(b, leaves)
    if label:
        b.label(root, label)
    return sign, root


def synth_const_mac(plan: ShiftAddPlan, in_width: int = 8, acc_width: int = CMP_ACC_WIDTH,
                    accumulate: bool = True, name: str = "const_mac") -> Netlist:
    """Hardwired multiply(-accumulate) for the constant described by ``plan``.

    With ``accumulate`` the output is ``acc + q*x`` where ``acc`` is the
    20-bit (by default) accumulator register, so after ``t`` cycles it holds
    the running sum.  Without it the netlist is the bare constant multiplier.
    Output values are on the weight's integer grid (``q * x``).
    """
    q = plan.integer()
    need = signed_bits(abs(q) << (in_width - 1))
    if acc_width < need:
        raise NetlistError(f"accumulator of {acc_width} bits too narrow; weight {q} needs {need} bits")
    b = NetlistBuilder(name, acc_width=acc_width)
    x = b.input("x", in_width)
    prod = _const_product(b, x, plan)
    if prod is None:
        b.output(b.const_zero(), "y", width=acc_width if accumulate else 1)
        return b.build(q=q, scale_exp=plan.scale_exp, accumulate=accumulate)
    sign, p = prod
    if accumulate:
        acc = b.reg(acc_width, role="pipeline_register", name="acc")
        op = b.add if sign > 0 else b.sub
        nxt = op(acc, p, role="accumulator", width=acc_width)
        b.connect(acc, nxt)
        b.output(nxt, "y")
    else:
        b.output(p if sign > 0 else b.neg(p), "y")
    return b.build(q=q, scale_exp=plan.scale_exp, accumulate=accumulate)


def synth_generic_mac(w_width: int = CMP_GENERIC_W_WIDTH, in_width: int = 8,
                      acc_width: int = CMP_ACC_WIDTH, name: str = "generic_mac") -> Netlist:
    """Weight-stationary array-multiplier MAC with the weight as a runtime input.

    The weight is latched in an operand register, so the product in cycle
    ``t`` uses the weight presented in cycle ``t-1``.  Partial-product rows
    of ``in_width`` bits are summed by a ripple cascade; the sign row
    (weight MSB, weight ``-2**(w_width-1)``) is subtracted.
    """
    if acc_width < in_width + w_width:
        raise NetlistError(f"accumulator of {acc_width} bits too narrow; need {in_width + w_width}")
    b = NetlistBuilder(name, acc_width=acc_width)
    x = b.input("x", in_width)
    w = b.input("w", w_width)
    wreg = b.reg(w_width, w, role="pipeline_register", name="w_reg")
    rows = [b.shift(b.and_bit(x, wreg, i), i) for i in range(w_width)]
    s = rows[0]
    for i in range(1, w_width):
        s = (b.sub if i == w_width - 1 else b.add)(s, rows[i])
    acc = b.reg(acc_width, role="pipeline_register", name="acc")
    nxt = b.add(acc, s, role="accumulator", width=acc_width)
    b.connect(acc, nxt)
    b.output(nxt, "y")
    return b.build(w_width=w_width, accumulate=True)


def _dot_into(b: NetlistBuilder, xs, weights, scale_exp, mode, w_width, labels):
    leaves = []
    for x, q, label in zip(xs, weights, labels):
        prod = _const_product(b, x, plan_weight(int(q), scale_exp, mode, w_width), label)
        if prod is not None:
            leaves.append(prod)
    if not leaves:
        return None
    return _merge(b, leaves)


def synth_dot(weights, in_width: int = 8, scale_exp: int = -3, mode: str = "csd",
              w_width: int = 4, register_output: bool = True, name: str = "dot") -> Netlist:
    """Single-cycle hardwired dot product: one constant multiplier per nonzero weight, balanced merge."""
    weights = [int(q) for q in weights]
    n = len(weights)
    b = NetlistBuilder(name, acc_width=dot_acc_width(in_width, w_width, n))
    xs = [b.input(f"x{i}", in_width) for i in range(n)]
    root = _dot_into(b, xs, weights, scale_exp, mode, w_width, [f"w0_{i}_0" for i in range(n)])
    _finish_output(b, root, "y", register_output)
    return b.build(fan_in=n, scale_exp=scale_exp, mode=mode)


def _finish_output(b, root, name, register_output):
    if root is None:
        node = b.const_zero()
    else:
        sign, node = root
        if sign < 0:
            node = b.neg(node)
    if register_output:
        node = b.reg(b.width(node), node, role="pipeline_register", name=f"{name}_q")
    b.output(node, name)


def synth_neuron(weights, in_width: int = 8, fan_in: int = 64, **kw) -> Netlist:
    """64-input neuron: the dot product plus one output register."""
    if len(weights) != fan_in:
        raise NetlistError(f"neuron expects {fan_in} weights, got {len(weights)}")
    return synth_dot(weights, in_width, name=kw.pop("name", "neuron"), **kw)


def synth_layer(m: QuantizedWeightMatrix, in_width: int = 8, mode: str = "csd",
                register_output: bool = True, name: str = "layer", layer_index: int = 0) -> Netlist:
    """``y = x @ W``: one hardwired dot product per column of ``W``, sharing the inputs."""
    b = NetlistBuilder(name, acc_width=dot_acc_width(in_width, m.width, m.rows))
    xs = [b.input(f"x{i}", in_width) for i in range(m.rows)]
    for j in range(m.cols):
        labels = [f"w{layer_index}_{i}_{j}" for i in range(m.rows)]
        root = _dot_into(b, xs, m.values[:, j], m.scale_exp, mode, m.width, labels)
        _finish_output(b, root, f"y{j}", register_output)
    return b.build(rows=m.rows, cols=m.cols, scale_exp=m.scale_exp, mode=mode)


def eval_layer(netlist: Netlist, x) -> np.ndarray:
    """Run a layer netlist on one activation vector (or a batch, rows = vectors)."""
    from .netlist import evaluate

    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    ins = {f"x{i}": x[:, i] for i in range(x.shape[1])}
    registered = bool(netlist.by_kind("reg"))
    out = evaluate(netlist, ins, cycles=2 if registered else 1)[-1]
    cols = netlist.attrs.get("cols", len(out))
    y = np.stack([out[f"y{j}"] for j in range(cols)], axis=1)
    return y


def mac_gate_comparison(table: GateCostTable | None = None, mode: str = "csd") -> dict:
    """Mean hardwired INT8xINT4 MAC vs generic INT8xINT8 MAC under one cost table."""
    table = table or GateCostTable()
    per_weight = {}
    for q in range(-8, 8):
        mac = synth_const_mac(plan_weight(q, 0, mode), CMP_IN_WIDTH, CMP_ACC_WIDTH)
        per_weight[q] = count_gates(mac, table).as_dict()
    keys = per_weight[0].keys()
    mean = {k: float(np.mean([r[k] for r in per_weight.values()])) for k in keys}
    generic = count_gates(synth_generic_mac(CMP_GENERIC_W_WIDTH, CMP_IN_WIDTH, CMP_ACC_WIDTH),
                          table).as_dict()
    return {
        "hardwired_mean": mean,
        "hardwired_per_weight": per_weight,
        "generic": generic,
        "ratio": generic["total"] / mean["total"],
        "published_ratio": 4.85,
        "fpga_ratio": 1.81,
    }
