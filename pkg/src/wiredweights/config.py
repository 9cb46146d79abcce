"""Strict loader for the constants file that drives estimators and reports."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .analytics import AreaModelConfig, CostModelConfig, EnergyModelConfig
from .netlist import GateCostTable
from .splitbrain import InterfaceSpec, LatencyBudget

ENV_VAR = "WIREDWEIGHTS_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelEntry:
    params: float
    optimization_factor: float = 1.0
    chiplets: int = 1
    chiplet_die_cost_usd: float | None = None
    packaging_usd: float | None = None
    testing_usd: float | None = None

    def area_config(self, base: AreaModelConfig) -> AreaModelConfig:
        return AreaModelConfig(base.bits_per_param, base.um2_per_bit, base.routing_mult,
                               base.control_mult, self.optimization_factor)

    def cost_extras(self) -> dict:
        out = {}
        if self.packaging_usd is not None:
            out["packaging_usd"] = self.packaging_usd
        if self.testing_usd is not None:
            out["testing_usd"] = self.testing_usd
        return out


@dataclass(frozen=True)
class ConstantSet:
    energy: EnergyModelConfig
    area: AreaModelConfig
    cost: CostModelConfig
    gates: GateCostTable
    budget: LatencyBudget
    scenarios: dict
    interfaces: dict
    power: dict
    edram: dict
    volumes: tuple
    models: dict
    expected: dict = field(default_factory=dict)
    source: str = ""

    def model(self, name: str) -> ModelEntry:
        try:
            return self.models[name]
        except KeyError:
            raise ConfigError(f"model {name!r} not in config; known: {sorted(self.models)}") from None


def _names(cls, skip=()):
    return {f.name for f in fields(cls)} - set(skip)


def _take(table, where, required, optional=()):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = set(table) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    missing = set(required) - set(table)
    if missing:
        raise ConfigError(f"missing key(s) in [{where}]: {', '.join(sorted(missing))}")
    return table


def _build(cls, table, where, required=None, optional=(), **extra):
    required = _names(cls, optional) - set(extra) if required is None else required
    _take(table, where, required, optional)
    try:
        return cls(**table, **extra)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{where}]: {e}") from None


SECTIONS = ("energy", "area", "cost", "gates", "latency", "interfaces", "power",
            "edram", "volumes", "models", "expected")


def parse_config(doc: dict, source: str = "<memory>") -> ConstantSet:
    _take(doc, "top level", set(SECTIONS) - {"expected"}, ("expected",))

    energy = dict(doc["energy"])
    arch = energy.pop("arch", None)
    if arch is None:
        raise ConfigError("missing key(s) in [energy]: arch")
    arch = {name: dict(_take(comp, f"energy.arch.{name}", ("dram", "sram", "wire", "mac")))
            for name, comp in arch.items()}
    energy_cfg = _build(EnergyModelConfig, energy, "energy", arch=arch)
    area = _build(AreaModelConfig, doc["area"], "area", optional=("optimization_factor",))
    cost = _build(CostModelConfig, doc["cost"], "cost")
    gates = _build(GateCostTable, doc["gates"], "gates", optional=("shift_cost",))

    lat = dict(doc["latency"])
    scenarios = lat.pop("scenarios", None)
    if scenarios is None:
        raise ConfigError("missing key(s) in [latency]: scenarios")
    _take(scenarios, "latency.scenarios", ("npu", "cpu-low", "cpu-high"))
    budget = _build(LatencyBudget, lat, "latency")

    interfaces = {k: _build(InterfaceSpec, v, f"interfaces.{k}") for k, v in doc["interfaces"].items()}
    if not interfaces:
        raise ConfigError("[interfaces] is empty")
    power = dict(_take(doc["power"], "power", ("tok_rate", "serdes_w", "host_w", "device_w", "density_w")))
    edram = dict(_take(doc["edram"], "edram", ("kv_bytes", "um2_per_bit")))
    volumes = tuple(int(v) for v in _take(doc["volumes"], "volumes", ("units",))["units"])
    models = {k: _build(ModelEntry, v, f"models.{k}", required={"params"},
                        optional=_names(ModelEntry) - {"params"})
              for k, v in doc["models"].items()}
    return ConstantSet(energy_cfg, area, cost, gates, budget, dict(scenarios), interfaces, power,
                       edram, volumes, models, dict(doc.get("expected", {})), source)


def default_config_path():
    return resources.files("wiredweights") / "data" / "paper.toml"


def load_config(path=None) -> ConstantSet:
    """Load ``path``, else ``$WIREDWEIGHTS_CONFIG``, else the packaged constants."""
    path = path or os.environ.get(ENV_VAR) or None
    if path is None:
        src = default_config_path()
        text, source = src.read_text(encoding="utf-8"), "paper.toml (packaged)"
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        text, source = p.read_text(encoding="utf-8"), str(p)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: {e}") from None
    return parse_config(doc, source)
