"""Run configuration: JSON in, validated parameter objects out.

Every parameter has a default (the reference device table or a documented
assumption); a config file only needs the fields it overrides.  The same
schema covers geometry, device models, timing, and power, so one file
drives simulation, sweeps, and validation reproducibly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .devices import (
    EnergyParams,
    LossParams,
    MdlModel,
    ModeConverterModel,
    MrModel,
    OpcmCellModel,
)
from .errors import ConfigError
from .memory import MemoryGeometry
from .perf import PowerParams, TimingParams

__all__ = ["SimulationModels", "RunConfig", "load_config", "default_config_dict"]


def default_config_dict() -> dict:
    with resources.files("photonic_pim.data").joinpath("defaults.json").open() as fh:
        return json.load(fh)


def load_calibration_dict() -> dict:
    with resources.files("photonic_pim.data").joinpath("calibration.json").open() as fh:
        return json.load(fh)


@dataclass(frozen=True)
class SimulationModels:
    """All device/timing/power models of one run, validated as a set."""

    cell: OpcmCellModel
    loss: LossParams
    energy: EnergyParams
    mr: MrModel
    mdl: MdlModel
    mode_converter: ModeConverterModel
    timing: TimingParams
    power: PowerParams


@dataclass
class RunConfig:
    geometry: MemoryGeometry
    models: SimulationModels
    workload: str = "resnet18"
    operand_bits: int = 4
    exact_mode: bool = False
    seed: int = 0
    out_dir: str = "out"
    workers: int = 1
    dse_candidates: tuple = (1, 2, 4, 8, 16, 32, 64)

    def __post_init__(self) -> None:
        if self.operand_bits not in (4, 8):
            raise ConfigError("operand_bits must be 4 or 8")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.models.mdl.count_per_subarray != self.geometry.cols_per_subarray:
            raise ConfigError(
                "laser count per subarray must equal the subarray column count"
            )
        if self.geometry.bit_density != self.models.cell.bit_density:
            raise ConfigError("geometry and cell model disagree on bit density")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, path + key + ".")
        else:
            out[key] = value
    return out


def _build(cls, section: dict, name: str):
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} configuration: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    base = default_config_dict()
    merged = _merge(base, doc)
    geometry = _build(MemoryGeometry, merged["geometry"], "geometry")
    cell_section = dict(merged["cell"])
    cell_section.setdefault("bit_density", geometry.bit_density)
    models = SimulationModels(
        cell=_build(OpcmCellModel, cell_section, "cell"),
        loss=_build(LossParams, merged["loss"], "loss"),
        energy=_build(EnergyParams, merged["energy"], "energy"),
        mr=_build(MrModel, merged["mr"], "mr"),
        mdl=_build(MdlModel, merged["mdl"], "mdl"),
        mode_converter=_build(ModeConverterModel, merged["mode_converter"], "mode_converter"),
        timing=_build(TimingParams, merged["timing"], "timing"),
        power=_build(PowerParams, merged["power"], "power"),
    )
    run = merged["run"]
    return RunConfig(
        geometry=geometry,
        models=models,
        workload=run.get("workload", "resnet18"),
        operand_bits=run.get("bits", 4),
        exact_mode=run.get("exact_mode", False),
        seed=run.get("seed", 0),
        out_dir=run.get("out_dir", "out"),
        workers=run.get("workers", 1),
        dse_candidates=tuple(run.get("dse_candidates", (1, 2, 4, 8, 16, 32, 64))),
    )


def load_config(path: str | None = None) -> RunConfig:
    """Config file (or defaults when ``path`` is None) -> validated RunConfig."""
    if path is None:
        return config_from_dict({})
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return config_from_dict(doc)
