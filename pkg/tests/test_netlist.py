import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiredweights.netlist import (GateCostTable, Netlist, NetlistBuilder, NetlistError, Node, count_gates,
                                  evaluate, structural_stats, wrap)


def small_adder():
    b = NetlistBuilder("adder", acc_width=12)
    x = b.input("x", 8)
    y = b.input("y", 8)
    s = b.add(b.shift(x, 2), y)
    b.output(s, "s")
    return b.build()


@given(st.integers(-2**40, 2**40), st.integers(2, 32))
def test_wrap_matches_twos_complement(v, w):
    got = int(wrap(v, w))
    assert -(1 << (w - 1)) <= got < 1 << (w - 1)
    assert (got - v) % (1 << w) == 0


def test_evaluate_combinational_batch():
    nl = small_adder()
    x = np.arange(-128, 128)
    y = np.arange(127, -129, -1)
    out = evaluate(nl, {"x": x, "y": y})
    assert len(out) == 1
    assert np.array_equal(out[0]["s"], 4 * x + y)


def test_node_width_growth():
    nl = small_adder()
    widths = {n.kind: n.width for n in nl.nodes}
    assert widths["shift"] == 10 and widths["add"] == 11


def test_wraps_at_declared_width():
    b = NetlistBuilder("narrow", acc_width=4)
    x = b.input("x", 4)
    b.output(b.add(x, x, width=4), "y")
    nl = b.build()
    assert evaluate(nl, {"x": 7})[0]["y"].tolist() == [-2]


def test_register_delays_one_cycle():
    b = NetlistBuilder("pipe")
    x = b.input("x", 8)
    r = b.reg(8, x)
    b.output(r, "q")
    nl = b.build()
    seq = np.array([[5], [6], [7]])
    out = [o["q"].item() for o in evaluate(nl, {"x": seq}, cycles=3)]
    assert out == [0, 5, 6]


def test_accumulator_feedback():
    b = NetlistBuilder("acc", acc_width=16)
    x = b.input("x", 8)
    acc = b.reg(16, role="pipeline_register")
    nxt = b.add(acc, x, role="accumulator", width=16)
    b.connect(acc, nxt)
    b.output(nxt, "y")
    nl = b.build()
    out = [o["y"].item() for o in evaluate(nl, {"x": np.array([[1], [2], [3], [4]])}, cycles=4)]
    assert out == [1, 3, 6, 10]


def test_and_node_selects_bit():
    b = NetlistBuilder("pp")
    x = b.input("x", 8)
    w = b.input("w", 4)
    b.output(b.and_bit(x, w, 2), "y")
    nl = b.build()
    ws = np.arange(-8, 8)
    y = evaluate(nl, {"x": np.full(16, 9), "w": ws})[0]["y"]
    assert np.array_equal(y, np.where((ws >> 2) & 1, 9, 0))


def test_errors():
    nl = small_adder()
    with pytest.raises(NetlistError, match="unbound"):
        evaluate(nl, {"x": 1})
    with pytest.raises(NetlistError, match="unknown"):
        evaluate(nl, {"x": 1, "y": 1, "z": 1})
    with pytest.raises(NetlistError, match="outside"):
        evaluate(nl, {"x": 128, "y": 0})
    with pytest.raises(NetlistError, match="rows"):
        evaluate(nl, {"x": np.zeros((2, 3), dtype=int), "y": 0}, cycles=3)
    b = NetlistBuilder("r")
    b.input("x", 4)
    b.reg(4)
    with pytest.raises(NetlistError, match="without D"):
        b.build()
    with pytest.raises(NetlistError):
        NetlistBuilder("s").shift(0, -1)


def test_combinational_loop_rejected():
    nodes = (Node(0, "input", 4, name="x"), Node(1, "add", 5, (0, 2)), Node(2, "add", 5, (1, 0)),
             Node(3, "output", 5, (2,), name="y"))
    with pytest.raises(NetlistError, match="loop"):
        Netlist("loop", nodes)


def test_unreachable_output_rejected():
    nodes = (Node(0, "input", 4, name="x"), Node(1, "reg", 4, (1,)), Node(2, "output", 4, (1,), name="y"))
    with pytest.raises(NetlistError, match="unreachable"):
        Netlist("dead", nodes)
    pair = (Node(0, "input", 4, name="x"), Node(1, "reg", 4, (2,)), Node(2, "reg", 4, (1,)),
            Node(3, "output", 4, (2,), name="y"))
    with pytest.raises(NetlistError, match="unreachable"):
        Netlist("dead_pair", pair)


def test_constant_output_allowed():
    nodes = (Node(0, "input", 4, name="x"), Node(1, "const", 1), Node(2, "output", 1, (1,), name="y"))
    assert evaluate(Netlist("zero", nodes), {"x": 3})[0]["y"].tolist() == [0]


def test_gate_cost_by_role():
    b = NetlistBuilder("c", acc_width=20)
    x = b.input("x", 8)
    t = b.sub(b.shift(x, 3), x)  # 12-bit subtractor
    acc = b.reg(20)
    b.connect(acc, b.add(acc, t, role="accumulator", width=20))
    b.output(acc, "y")
    g = count_gates(b.build())
    assert g.breakdown == {"shift_add_tree": 12 * 7.0, "accumulator": 20 * 7.0, "pipeline_register": 20 * 6.0}
    assert g.total == 84 + 140 + 120
    cheap = count_gates(b.build(), GateCostTable(nand2_per_fulladder_bit=1, nand2_per_register_bit=0))
    assert cheap.total == 32


def test_cost_table_validation():
    with pytest.raises(ValueError):
        GateCostTable(shift_cost=1)
    with pytest.raises(ValueError):
        GateCostTable(nand2_per_register_bit=-1)


def test_structural_stats_and_hash():
    nl = small_adder()
    s = structural_stats(nl)
    assert (s["adds"], s["subs"], s["wires"], s["depth"], s["registers"]) == (1, 0, 1, 1, 0)
    assert nl.content_hash() == small_adder().content_hash()
    assert "n3 add w=11 in=n2,n1" in nl.dump()
