"""Experiment configuration: YAML schema, presets and validation.

Schema (all keys optional except where noted)::

    problem:     {kind: newsvendor, holding: 5, backlog: 1, dim: 2}
    family:      {kind: gaussian_scaled_mean, theta0: 3.0}
    directions:  [prod_sq, {name: prod_centered_sq}, {name: score_linear, beta: [1.0]},
                  {name: linear, gamma: [2, -1], label: lin}]
    tilt:        exponential | relu_linear | smooth_g
    alphas:      [2.0, 0.5, 0.1]
    ns:          [200, 1000]
    replications: 500
    seed:        20240917
    resolution:  512          # grid nodes per axis for tilted sampling
    width:       8.0          # grid half-width in standard deviations
    workers:     1
    output:      {dir: results}

``dim`` of the family is taken from the problem.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .perturbation import TiltKind

PRESETS: dict[str, dict[str, Any]] = {
    "default": {
        "problem": {"kind": "newsvendor", "holding": 5.0, "backlog": 1.0, "dim": 2},
        "family": {"kind": "gaussian_scaled_mean", "theta0": 3.0},
        "directions": ["prod_sq", "prod_centered_sq"],
        "tilt": "exponential",
        "alphas": [2.0, 0.5, 0.1],
        "ns": [200, 1000],
        "replications": 500,
    },
    # normal location family at 0 with u(z) = z = s_0(z) under the positive-part tilt
    "example1": {
        "problem": {"kind": "newsvendor", "holding": 5.0, "backlog": 1.0, "dim": 1},
        "family": {"kind": "gaussian_scaled_mean", "theta0": 0.0},
        "directions": [{"name": "score_linear", "beta": [1.0], "label": "example1"}],
        "tilt": "relu_linear",
        "alphas": [0.3],
        "ns": [10000],
        "replications": 200,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: dict(PRESETS["default"]["problem"]))
    family: dict = field(default_factory=lambda: dict(PRESETS["default"]["family"]))
    directions: list = field(default_factory=lambda: list(PRESETS["default"]["directions"]))
    tilt: str = "exponential"
    alphas: list = field(default_factory=lambda: [2.0, 0.5, 0.1])
    ns: list = field(default_factory=lambda: [200, 1000])
    replications: int = 500
    seed: int = 20240917
    resolution: int = 512
    width: float = 8.0
    workers: int = 1
    output: dict = field(default_factory=lambda: {"dir": "results"})

    def __post_init__(self):
        validate(self)

    @property
    def dim(self) -> int:
        return int(self.problem.get("dim", 1))

    @property
    def theta0(self) -> float:
        return float(self.family.get("theta0", 0.0))

    @property
    def direction_labels(self) -> list[str]:
        labels = []
        for spec in self.directions:
            if isinstance(spec, str):
                base = spec
            else:
                base = spec.get("label", spec["name"])
            label, k = base, 2
            while label in labels:
                label, k = f"{base}_{k}", k + 1
            labels.append(label)
        return labels

    def direction_specs(self) -> list[dict]:
        out = []
        for spec in self.directions:
            spec = {"name": spec} if isinstance(spec, str) else dict(spec)
            spec.pop("label", None)
            out.append(spec)
        return out

    def override(self, **kwargs) -> "ExperimentConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "problem": dict(self.problem),
            "family": dict(self.family),
            "directions": copy.deepcopy(list(self.directions)),
            "tilt": self.tilt,
            "alphas": list(self.alphas),
            "ns": list(self.ns),
            "replications": self.replications,
            "seed": self.seed,
            "resolution": self.resolution,
            "width": self.width,
            "workers": self.workers,
            "output": dict(self.output),
        }


def validate(cfg: ExperimentConfig) -> None:
    if not cfg.directions:
        raise ConfigError("directions must be non-empty")
    if not cfg.alphas or any(float(a) <= 0 for a in cfg.alphas):
        raise ConfigError("alphas must be a non-empty list of positive numbers")
    if not cfg.ns or any(int(n) < 1 for n in cfg.ns):
        raise ConfigError("ns must be a non-empty list of positive integers")
    if int(cfg.replications) < 2:
        raise ConfigError("replications must be >= 2")
    if int(cfg.resolution) < 8:
        raise ConfigError("resolution must be >= 8")
    try:
        TiltKind(cfg.tilt)
    except ValueError as exc:
        raise ConfigError(f"unknown tilt {cfg.tilt!r}") from exc
    if cfg.problem.get("kind", "newsvendor") != "newsvendor":
        raise ConfigError("only the newsvendor problem is available")
    if not 1 <= cfg.dim <= 3:
        raise ConfigError("problem dim must be 1, 2 or 3")
    for spec in cfg.directions:
        if not isinstance(spec, (str, dict)) or (isinstance(spec, dict) and "name" not in spec):
            raise ConfigError(f"bad direction entry {spec!r}")


def from_mapping(data: dict | None, preset: str | None = None) -> ExperimentConfig:
    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    base = copy.deepcopy(PRESETS[preset]) if preset else {}
    data = dict(data or {})
    unknown = set(data) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, val in data.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **val}
        else:
            base[key] = val
    try:
        return ExperimentConfig(**base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load(path: str | Path | None = None, preset: str | None = None) -> ExperimentConfig:
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    data = None
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
    return from_mapping(data, preset or ("default" if path is None else None))
