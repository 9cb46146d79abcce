import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiredweights.csd import plan_weight
from wiredweights.model import QuantizedWeightMatrix
from wiredweights.netlist import NetlistError, count_gates, evaluate, structural_stats
from wiredweights.synth import (eval_layer, mac_gate_comparison, synth_const_mac, synth_dot, synth_generic_mac, synth_layer,
                                synth_neuron)

X8 = np.arange(-128, 128)


@pytest.mark.parametrize("mode", ["csd", "binary"])
@pytest.mark.parametrize("q", range(-8, 8))
def test_bare_multiplier_exhaustive(q, mode):
    nl = synth_const_mac(plan_weight(q, 0, mode), accumulate=False)
    assert np.array_equal(evaluate(nl, {"x": X8})[0]["y"], q * X8)


def test_zero_weight_has_no_logic():
    nl = synth_const_mac(plan_weight(0, 0))
    assert count_gates(nl).total == 0
    assert evaluate(nl, {"x": X8})[0]["y"].tolist() == [0] * 256


def test_adder_counts_follow_plan():
    # 7 = 8 - 1: one subtractor in csd, two adders from three binary bits
    csd = structural_stats(synth_const_mac(plan_weight(7, 0), accumulate=False))
    bn = structural_stats(synth_const_mac(plan_weight(7, 0, "binary"), accumulate=False))
    assert (csd["adds"], csd["subs"]) == (0, 1)
    assert bn["adds"] + bn["subs"] == 2
    # a single-term weight is just wiring
    one = structural_stats(synth_const_mac(plan_weight(4, 0), accumulate=False))
    assert one["adds"] + one["subs"] + one["negates"] == 0


def test_accumulator_too_narrow():
    with pytest.raises(NetlistError):
        synth_const_mac(plan_weight(-8, 0), acc_width=8)
    with pytest.raises(NetlistError):
        synth_generic_mac(8, 8, 12)


@settings(max_examples=25, deadline=None)
@given(st.integers(-8, 7), st.lists(st.integers(-128, 127), min_size=1, max_size=40))
def test_accumulating_mac_running_sum(q, xs):
    nl = synth_const_mac(plan_weight(q, -3))
    out = evaluate(nl, {"x": np.array(xs)[:, None]}, cycles=len(xs))
    assert [o["y"].item() for o in out] == list(np.cumsum(np.array(xs) * q))


def test_generic_mac_exhaustive_int4_weights():
    g = synth_generic_mac(4, 8, 20)
    xx, ww = np.meshgrid(X8, np.arange(-8, 8), indexing="ij")
    y = evaluate(g, {"x": xx.ravel(), "w": ww.ravel()}, cycles=2)[1]["y"]
    assert np.array_equal(y, xx.ravel() * ww.ravel())


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(-8, 7), min_size=1, max_size=24), st.integers(0, 2**31))
def test_dot_matches_oracle(w, seed):
    rng = np.random.default_rng(seed)
    xs = rng.integers(-128, 128, size=(64, len(w)))
    nl = synth_dot(w)
    y = evaluate(nl, {f"x{i}": xs[:, i] for i in range(len(w))}, cycles=2)[1]["y"]
    assert np.array_equal(y, xs @ np.array(w))


def test_neuron_fan_in_checked():
    with pytest.raises(NetlistError):
        synth_neuron([1, 2, 3])


def test_all_zero_neuron():
    nl = synth_neuron([0] * 64)
    y = evaluate(nl, {f"x{i}": 5 for i in range(64)}, cycles=2)[1]["y"]
    assert y.tolist() == [0]


def test_layer_matches_matmul():
    rng = np.random.default_rng(0)
    m = QuantizedWeightMatrix(rng.integers(-8, 8, size=(12, 5)), -3)
    nl = synth_layer(m, layer_index=2)
    x = rng.integers(-128, 128, size=(100, 12))
    assert np.array_equal(eval_layer(nl, x), x @ m.values)
    labels = [n.name for n in nl.nodes if n.kind not in ("input", "output", "reg") and n.name]
    assert labels and all(re.fullmatch(r"w2_\d+_\d+", s) for s in labels)


def test_layer_column_with_all_zero_weights():
    m = QuantizedWeightMatrix(np.array([[0, 3], [0, -2]]))
    nl = synth_layer(m)
    assert eval_layer(nl, [[10, 4]]).tolist() == [[0, 22]]


def test_mac_gate_ratio_and_breakdown():
    t = mac_gate_comparison()
    assert 3.5 <= t["ratio"] <= 6.0
    assert t["published_ratio"] == 4.85 and t["fpga_ratio"] == 1.81
    g = t["generic"]
    assert g["pipeline_register"] == (20 + 8) * 6.0
    assert t["hardwired_per_weight"][0]["total"] == 0
    assert t["hardwired_mean"]["total"] == pytest.approx(
        np.mean([r["total"] for r in t["hardwired_per_weight"].values()]))


def test_csd_cheaper_than_binary_on_average():
    assert (mac_gate_comparison(mode="csd")["hardwired_mean"]["total"]
            < mac_gate_comparison(mode="binary")["hardwired_mean"]["total"])
