import json
from pathlib import Path

import numpy as np
import pytest

from wiredweights.csd import ShiftAddPlan, plan_weight
from wiredweights.model import QuantizedWeightMatrix
from wiredweights.netlist import NetlistBuilder, NetlistError, evaluate, structural_stats
from wiredweights.prng import uniform_signed
from wiredweights.rtl import (arithmetic_ops, emit_generic_layer_rtl, emit_netlist_rtl, emit_network_rtl,
                              emit_testbench, eval_network, fit, make_vectors, network_netlists,
                              network_reference, network_weights, pipeline_latency)
from wiredweights.synth import synth_const_mac, synth_generic_mac, synth_neuron

GOLDEN = Path(__file__).parent / "golden"


def seed1_neuron():
    return synth_neuron(uniform_signed(1, 64, 4, stream=0), name="neuron")


def test_neuron_golden_text():
    art = emit_netlist_rtl(seed1_neuron(), "neuron")
    assert art.source_text == (GOLDEN / "neuron_seed1.v").read_text()


def test_neuron_golden_netlist_against_oracle():
    # the golden is only trusted because its netlist computes the exact dot product
    nl = seed1_neuron()
    w = uniform_signed(1, 64, 4, stream=0)
    xs = np.random.default_rng(2).integers(-128, 128, size=(3000, 64))
    y = evaluate(nl, {f"x{i}": xs[:, i] for i in range(64)}, cycles=2)[1]["y"]
    assert np.array_equal(y, xs @ w)
    header = (GOLDEN / "neuron_seed1.v").read_text().splitlines()[1]
    assert header.endswith(nl.content_hash())


def test_network_golden_hash_and_oracle():
    art = emit_network_rtl((64, 128, 64), seed=1)
    assert art.sha256 == (GOLDEN / "proto_net_seed1.sha256").read_text().strip()
    mats = network_weights((64, 128, 64), seed=1)
    nls = network_netlists(mats)
    assert [n.content_hash() for n in nls] == art.stats["layer_netlist_sha256"]
    x = np.random.default_rng(3).integers(-128, 128, size=(200, 64))
    assert np.array_equal(eval_network(nls, mats, x), network_reference(mats, x))


def test_network_reference_by_hand():
    a = QuantizedWeightMatrix(np.array([[7, -8], [7, 7]]), -3)
    b = QuantizedWeightMatrix(np.array([[1], [2]]), -3)
    x = np.array([[127, 127]])
    # layer 0: [1778, -127]; shift 3 + ceil(log2(2)/2) = 4; floor then saturate: [111, -8]
    assert network_reference([a, b], x).tolist() == [[111 - 16]]


def test_network_stats():
    art = emit_network_rtl((64, 128, 64), seed=1)
    s = art.stats
    assert s["mac_ops"] == s["mac_sites"] == 16384
    assert s["mac_sites_instantiated"] + s["pruned_sites"] == 16384
    assert s["latency_cycles"] == 2
    assert set(s["modules"]) == {"proto_net_layer0", "proto_net_layer1", "proto_net_requant", "proto_net"}


def test_network_deterministic_and_seed_sensitive():
    assert emit_network_rtl((8, 4, 2), seed=5).source_text == emit_network_rtl((8, 4, 2), seed=5).source_text
    assert emit_network_rtl((8, 4, 2), seed=5).sha256 != emit_network_rtl((8, 4, 2), seed=6).sha256


def test_all_zero_network_has_no_arithmetic():
    z = QuantizedWeightMatrix(np.zeros((2, 2), dtype=int))
    art = emit_network_rtl([z, z])
    assert art.stats["adds"] == art.stats["subs"] == art.stats["mac_sites_instantiated"] == 0
    layers = art.source_text.split("module proto_net_requant")[0]
    assert arithmetic_ops(layers) == {"plus": 0, "minus": 0, "negate": 0}


def test_network_rejects_bad_sizes():
    with pytest.raises(ValueError):
        emit_network_rtl((64,))
    with pytest.raises(ValueError):
        emit_network_rtl((4, 4), variant="analog")


def test_zero_weight_mac_tied_low():
    art = emit_netlist_rtl(synth_const_mac(plan_weight(0, -3)), "zero_mac")
    assert arithmetic_ops(art.source_text) == {"plus": 0, "minus": 0, "negate": 0}
    assert "1'b0" in art.source_text and "always" not in art.source_text


def test_two_term_plan_has_one_adder():
    plan = ShiftAddPlan(((1, -2), (1, -3)), -3)
    art = emit_netlist_rtl(synth_const_mac(plan, accumulate=False), "mac3")
    assert arithmetic_ops(art.source_text) == {"plus": 1, "minus": 0, "negate": 0}


@pytest.mark.parametrize("q", range(-8, 8))
def test_operator_count_matches_structure(q):
    nl = synth_const_mac(plan_weight(q, -3))
    s = structural_stats(nl)
    ops = arithmetic_ops(emit_netlist_rtl(nl, "m").source_text)
    assert (ops["plus"], ops["minus"], ops["negate"]) == (s["adds"], s["subs"], s["negates"])


def test_neuron_operator_count():
    nl = seed1_neuron()
    s = structural_stats(nl)
    ops = arithmetic_ops(emit_netlist_rtl(nl).source_text)
    assert ops["plus"] + ops["minus"] == s["adds"] + s["subs"]


def test_fit():
    assert fit("a", 4, 4) == "a"
    assert fit("a", 4, 6) == "{{2{a[3]}}, a}"
    assert fit("a", 6, 4) == "a[3:0]"


def test_latency():
    assert pipeline_latency(seed1_neuron()) == 1
    assert pipeline_latency(synth_const_mac(plan_weight(3, 0))) == 0
    assert pipeline_latency(synth_generic_mac()) == 1


def test_bad_identifiers():
    with pytest.raises(NetlistError):
        emit_netlist_rtl(seed1_neuron(), "2bad")
    b = NetlistBuilder("ports")
    b.output(b.input("x y", 4), "y")
    with pytest.raises(NetlistError):
        emit_netlist_rtl(b.build(), "ok")


def test_sidecar_and_write(tmp_path):
    art = emit_netlist_rtl(seed1_neuron(), "neuron")
    meta = json.loads(art.sidecar())
    assert meta["sha256"] == art.sha256 and meta["stats"]["latency_cycles"] == 1
    paths = art.write(tmp_path)
    assert [p.name for p in paths] == ["neuron.v", "neuron.json"]
    assert paths[0].read_text() == art.source_text


def test_vectors_use_evaluate():
    nl = seed1_neuron()
    rng = np.random.default_rng(0)
    sets = [{f"x{i}": int(v) for i, v in enumerate(rng.integers(-128, 128, 64))} for _ in range(10)]
    vecs = make_vectors(nl, sets)
    w = uniform_signed(1, 64, 4, stream=0)
    for ins, outs in vecs:
        assert outs["y"] == sum(ins[f"x{i}"] * int(w[i]) for i in range(64))


def test_testbench_text():
    nl = seed1_neuron()
    art = emit_netlist_rtl(nl, "neuron")
    tb = emit_testbench(art, make_vectors(nl, [{f"x{i}": 1 for i in range(64)}]))
    assert "module neuron_tb" in tb and "neuron dut" in tb and "!==" in tb
    assert "PASS 1 vectors" in tb
    empty = emit_testbench(art, [])
    assert "$finish" in empty


def test_testbench_mismatch_rejected():
    nl = seed1_neuron()
    art = emit_netlist_rtl(nl, "neuron")
    with pytest.raises(NetlistError):
        emit_testbench(art, [({"x0": 1}, {"y": 0})])
    with pytest.raises(NetlistError):
        emit_testbench(art, [({f"x{i}": 1000 for i in range(64)}, {"y": 0})])


# -- compile checks (skipped when pyslang is unavailable) -------------------

def test_compiles_neuron_and_testbench(slang):
    nl = seed1_neuron()
    art = emit_netlist_rtl(nl, "neuron")
    tb = emit_testbench(art, make_vectors(nl, [{f"x{i}": (-1) ** i * i for i in range(64)}]))
    assert slang(art.source_text + tb) == []


@pytest.mark.parametrize("q", [-8, -1, 0, 3, 7])
def test_compiles_macs(slang, q):
    assert slang(emit_netlist_rtl(synth_const_mac(plan_weight(q, -3)), "mac").source_text) == []


def test_compiles_generic(slang):
    assert slang(emit_netlist_rtl(synth_generic_mac(), "gmac").source_text) == []
    m = QuantizedWeightMatrix(np.random.default_rng(1).integers(-8, 8, (6, 3)))
    assert slang(emit_generic_layer_rtl(m, "glayer").source_text) == []


def test_compiles_small_networks(slang):
    for variant in ("hardwired", "generic_baseline"):
        assert slang(emit_network_rtl((8, 16, 8), variant, seed=2).source_text) == []
    z = QuantizedWeightMatrix(np.zeros((2, 2), dtype=int))
    assert slang(emit_network_rtl([z, z]).source_text) == []


def test_generic_network_structure():
    art = emit_network_rtl((64, 128, 64), "generic_baseline", seed=1)
    text = art.source_text
    assert "acc <= acc + x * w;" in text
    assert "wmem" in text and art.stats["mac_ops"] == 16384


@pytest.mark.parametrize("variant", ["hardwired", "generic_baseline"])
def test_compiles_prototype_network(slang, variant):
    assert slang(emit_network_rtl((64, 128, 64), variant, seed=1).source_text) == []
