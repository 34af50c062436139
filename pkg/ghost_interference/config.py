from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import yaml

from .oracle import GridSpec, PROJECTIONS
from .schema import ConfigError, Geometry, PathDetector, SourceParams, UnknownConfigKey

MODES = ("analytic", "oracle", "both")

# ---------- Keys ----------
FLOAT_KEYS = {
    "source.sigma_per_m", "source.omega_m",
    "geometry.z0_m", "geometry.epsilon_m", "geometry.lambda_m", "geometry.L1_m", "geometry.L2_m",
    "detector.g12", "detector.g13", "detector.g23",
    "detector.phase12", "detector.phase13", "detector.phase23",
    "run.grid_span_m", "run.z2_window_m", "run.slack",
}
INT_KEYS = {"run.grid_n", "run.samples", "run.seed", "run.sweep_count"}
BOOL_KEYS = {"run.neglect_beta", "run.exact_gamma", "run.two_slit", "run.progress"}
STR_KEYS = {"run.mode", "run.projection", "run.pattern_source"}
REQUIRED = {"source.sigma_per_m", "source.omega_m", "geometry.z0_m", "geometry.epsilon_m",
            "geometry.lambda_m", "geometry.L1_m", "geometry.L2_m"}
KNOWN = FLOAT_KEYS | INT_KEYS | BOOL_KEYS | STR_KEYS


@dataclass(frozen=True)
class RunConfig:
    mode: str = "analytic"
    grid_n: int = 1024
    grid_span_m: Optional[float] = None      # None -> default_grid
    z2_window_m: float = 0.05
    samples: int = 2001
    neglect_beta: bool = True
    exact_gamma: bool = False
    seed: int = 0
    sweep_count: int = 0
    two_slit: bool = False
    slack: float = 1e-9
    projection: str = "gaussian"
    pattern_source: str = "analytic"
    progress: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}; got {self.mode!r}")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"run.projection must be one of {PROJECTIONS}; got {self.projection!r}")
        if self.pattern_source not in ("analytic", "pattern", "oracle"):
            raise ConfigError(f"run.pattern_source must be analytic, pattern or oracle; got {self.pattern_source!r}")
        if self.samples < 16:
            raise ConfigError(f"run.samples must be >= 16; got {self.samples}")
        if not (self.z2_window_m > 0 and math.isfinite(self.z2_window_m)):
            raise ConfigError(f"run.z2_window_m must be finite and > 0; got {self.z2_window_m}")
        if self.sweep_count < 0:
            raise ConfigError(f"run.sweep_count must be >= 0; got {self.sweep_count}")
        if self.slack < 0:
            raise ConfigError(f"run.slack must be >= 0; got {self.slack}")

    def grid(self) -> Optional[GridSpec]:
        if self.grid_span_m is None:
            return None
        return GridSpec.square(self.grid_n, self.grid_span_m)


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceParams
    geometry: Geometry
    detector: Optional[PathDetector] = None
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def slits(self) -> str:
        return "AC" if self.run.two_slit else "ABC"


# ---------- Parsing ----------
def _flatten(obj: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in FLOAT_KEYS:
            return float(value)
        if key in INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(float(value)) if isinstance(value, str) else int(value)
        if key in BOOL_KEYS:
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("true", "yes", "1", "on"):
                return True
            if s in ("false", "no", "0", "off"):
                return False
            raise ValueError("not a boolean")
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: cannot read {value!r} ({e})")


def _detector(flat: Dict[str, Any], two_slit: bool) -> Optional[PathDetector]:
    if "detector.g12" not in flat:
        if any(k.startswith("detector.") for k in flat):
            raise ConfigError("detector section needs detector.g12")
        return None
    phases = (flat.get("detector.phase12", 0.0), flat.get("detector.phase13", 0.0), flat.get("detector.phase23", 0.0))
    if two_slit:
        return PathDetector.from_overlaps(flat["detector.g12"], phases=phases)
    for k in ("detector.g13", "detector.g23"):
        if k not in flat:
            raise ConfigError(f"three-slit detector needs {k}")
    return PathDetector.from_overlaps(flat["detector.g12"], flat["detector.g13"], flat["detector.g23"], phases)


def parse_config(mapping: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(mapping, dict):
        raise ConfigError(f"config must be a mapping of dotted keys; got {type(mapping).__name__}")
    flat = _flatten(mapping)
    unknown = sorted(set(flat) - KNOWN)
    if unknown:
        raise UnknownConfigKey(f"unknown config keys: {unknown}")
    missing = sorted(REQUIRED - set(flat))
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    flat = {k: _coerce(k, v) for k, v in flat.items()}
    source = SourceParams(flat["source.sigma_per_m"], flat["source.omega_m"])
    geom = Geometry(flat["geometry.z0_m"], flat["geometry.epsilon_m"], flat["geometry.lambda_m"],
                    flat["geometry.L1_m"], flat["geometry.L2_m"])
    run = RunConfig(**{k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("run.")})
    return ExperimentConfig(source, geom, _detector(flat, run.two_slit), run)


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping; got {type(data).__name__}")
    data = _flatten(data)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    """Flat dotted-key YAML for a parsed config."""
    g, s, r = cfg.geometry, cfg.source, cfg.run
    out: Dict[str, Any] = {
        "source.sigma_per_m": s.sigma, "source.omega_m": s.omega,
        "geometry.z0_m": g.z0, "geometry.epsilon_m": g.epsilon, "geometry.lambda_m": g.lam,
        "geometry.L1_m": g.L1, "geometry.L2_m": g.L2,
    }
    if cfg.detector is not None:
        gram = cfg.detector.gram
        pairs = (("12", 0, 1), ("13", 0, 2), ("23", 1, 2))[:1 if cfg.detector.n_paths == 2 else 3]
        for tag, i, j in pairs:
            out[f"detector.g{tag}"] = float(abs(gram[i, j]))
        for tag, i, j in pairs:
            out[f"detector.phase{tag}"] = float(np.angle(gram[i, j]))
    for k, v in r.__dict__.items():
        if v is not None:
            out[f"run.{k}"] = v
    return yaml.safe_dump(out, sort_keys=False)
