"""Hardwired-weight inference: CSD synthesis, netlists, RTL, split host/device simulation, cost models."""

from .csd import ShiftAddPlan, csd_encode, plan_weight, prune_weights
from .model import ModelBundle, QuantizedWeightMatrix, TransformerTopology, count_params, generate_synthetic, preset
from .netlist import GateCostTable, Netlist, NetlistError, count_gates, evaluate, structural_stats

__version__ = "0.1.0"

__all__ = [
    "GateCostTable", "ModelBundle", "Netlist", "NetlistError", "QuantizedWeightMatrix", "ShiftAddPlan",
    "TransformerTopology", "count_gates", "count_params", "csd_encode", "evaluate", "generate_synthetic",
    "plan_weight", "preset", "prune_weights", "structural_stats",
]
