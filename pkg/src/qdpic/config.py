"""Strict-schema experiment configuration documents (JSON)."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .detection import DetectorModel
from .errors import InvalidConfigError
from .source import SourceModel

SCENARIOS = ("hbt", "hom-scan", "suppression-law", "bell-tomography", "loss-budget")
CIRCUIT_NAMES = ("dft4", "bell", "identity")

# allowed keys of "params" per scenario, with the accepted JSON types
PARAMS: dict[str, dict[str, tuple[type, ...]]] = {
    "hbt": {"num_side_peaks": (int,), "target_g2": (int, float), "bin_width_ps": (int, float), "write_tags": (bool,)},
    "hom-scan": {"phases": (list,), "num_phases": (int,), "switch_efficiency": (int, float), "visibility": (int, float)},
    "suppression-law": {"visibility": (int, float), "simulate_pairs": (int,)},
    "bell-tomography": {"visibility": (int, float)},
    "loss-budget": {"stages": (list,)},
}

TOP_LEVEL = {"scenario", "seed", "output_dir", "source", "detector", "circuit", "pulses", "shots", "params", "sweep"}
SWEEPABLE = TOP_LEVEL - {"scenario", "output_dir", "sweep"}


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(d: Any, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise InvalidConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise InvalidConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _check_type(value, types: tuple[type, ...], where: str) -> None:
    # bool is an int subclass; only accept it where bool is listed explicitly
    if isinstance(value, bool) and bool not in types:
        raise InvalidConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        raise InvalidConfigError(f"{where}: expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int = 0
    output_dir: str = "results"
    source: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    circuit: Any = "dft4"
    pulses: int = 1_000_000
    shots: int = 10_000
    params: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    base_dir: str = field(default=".", compare=False, repr=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        _check_keys(d, TOP_LEVEL, "config")
        if "scenario" not in d:
            raise InvalidConfigError("config: missing required key 'scenario'")
        scenario = d["scenario"]
        if scenario not in SCENARIOS:
            raise InvalidConfigError(f"config.scenario: {scenario!r} not one of {', '.join(SCENARIOS)}")
        cfg = cls(scenario=scenario, base_dir=str(base_dir), **{k: copy.deepcopy(v) for k, v in d.items() if k != "scenario"})
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "source": copy.deepcopy(self.source),
            "detector": copy.deepcopy(self.detector),
            "circuit": copy.deepcopy(self.circuit),
            "pulses": self.pulses,
            "shots": self.shots,
            "params": copy.deepcopy(self.params),
            "sweep": copy.deepcopy(self.sweep),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def validate(self) -> None:
        _check_type(self.seed, (int,), "config.seed")
        _check_type(self.output_dir, (str,), "config.output_dir")
        _check_type(self.pulses, (int,), "config.pulses")
        _check_type(self.shots, (int,), "config.shots")
        if self.pulses < 1 or self.shots < 1:
            raise InvalidConfigError("config.pulses and config.shots must be >= 1")
        _check_keys(self.source, _field_names(SourceModel), "config.source")
        _check_keys(self.detector, _field_names(DetectorModel), "config.detector")
        for section, cls in (("source", SourceModel), ("detector", DetectorModel)):
            for k, v in getattr(self, section).items():
                _check_type(v, (int, float), f"config.{section}.{k}")
            try:
                cls(**getattr(self, section))
            except ValueError as exc:
                raise InvalidConfigError(f"config.{section}: {exc}") from None
        self._validate_circuit()
        allowed = PARAMS[self.scenario]
        _check_keys(self.params, set(allowed), f"config.params ({self.scenario})")
        for k, v in self.params.items():
            _check_type(v, allowed[k], f"config.params.{k}")
        if self.scenario == "loss-budget":
            stages = self.params.get("stages")
            if not stages:
                raise InvalidConfigError("config.params.stages: loss-budget needs a non-empty stage list")
            for i, st in enumerate(stages):
                _check_keys(st, {"label", "loss_db", "efficiency"}, f"config.params.stages[{i}]")
        if not isinstance(self.sweep, list):
            raise InvalidConfigError("config.sweep: expected a list")
        for i, over in enumerate(self.sweep):
            _check_keys(over, SWEEPABLE, f"config.sweep[{i}]")
            merged = self.with_overrides(over, sweep=[])
            merged.validate()

    def _validate_circuit(self) -> None:
        c = self.circuit
        if isinstance(c, str):
            if c not in CIRCUIT_NAMES:
                raise InvalidConfigError(f"config.circuit: {c!r} not one of {', '.join(CIRCUIT_NAMES)}")
        elif isinstance(c, dict):
            _check_keys(c, {"mesh_file"}, "config.circuit")
            path = self.resolve(c.get("mesh_file", ""))
            if not path.is_file():
                raise InvalidConfigError(f"config.circuit.mesh_file: {path} does not exist")
        else:
            raise InvalidConfigError("config.circuit: expected a circuit name or {'mesh_file': path}")

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def with_overrides(self, overrides: dict, **extra) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in overrides.items():
            if isinstance(v, dict) and isinstance(d.get(k), dict):
                d[k] = {**d[k], **v}
            else:
                d[k] = copy.deepcopy(v)
        d.update(extra)
        return ExperimentConfig(base_dir=self.base_dir, **d)

    def source_model(self) -> SourceModel:
        return SourceModel(**self.source)

    def detector_model(self) -> DetectorModel:
        return DetectorModel(**self.detector)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file; JSON syntax errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.from_dict(data, base_dir=path.parent)
    except TypeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
