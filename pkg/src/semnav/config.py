"""Episode configuration and the key-value config file format.

Files are plain text: `key = value` per line, '#' starts a comment. Keys
mirror the EpisodeConfig field names; per-class detector confidences use
`det_confidence.<class_name> = <float>`. Every algorithm constant the stack
uses is settable here (documented in docs/formats.md).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path as FsPath


class ConfigError(ValueError):
    pass


@dataclass
class EpisodeConfig:
    # episode limits
    max_steps: int = 500
    success_radius_m: float = 1.0
    seed: int = 0
    # ablation switches
    stl: bool = True
    mol: bool = True
    tpm: bool = True
    vm: bool = True
    # pluggable components
    scorer: str = "oracle"            # oracle | remote
    predictor: str = "heuristic"      # heuristic | remote
    predictor_endpoint: str = "127.0.0.1:7201"
    predictor_timeout_s: float = 1.0
    scorer_endpoint: str = "127.0.0.1:7202"
    scorer_timeout_s: float = 1.0
    frontier_policy: str = "dar"      # dar | random
    # sensing geometry
    fov_deg: float = 79.0
    max_range_m: float = 5.0
    angular_step_deg: float = 1.0
    radial_step_cells: float = 0.5
    # value map
    value_d_max_m: float = 5.0
    gaussian_sigma: float = 0.85
    weighted_score: str = "cosine"    # cosine | uniform
    # policy constants
    dar_epsilon: float = 1e-6
    sci_conf_threshold: float = 0.6
    lock_conf_threshold: float = 0.7
    lock_neighborhood: int = 5
    n_targets: int = 3
    waypoint_lookahead_m: float = 1.0
    # scene-score oracle
    score_s_max: float = 1.0
    score_lambda_m: float = 2.0
    score_noise: float = 0.0
    # detection oracle noise
    det_base_confidence: float = 0.9
    det_confidence_sigma: float = 0.05
    false_negative_rate: float = 0.05
    false_positive_rate: float = 0.0
    false_positive_confidence: float = 0.5
    det_per_class: dict[str, float] = field(default_factory=dict)
    # co-occurrence prior
    prior_file: str | None = None

    def validate(self) -> None:
        if self.max_steps <= 0:
            raise ConfigError("max_steps must be positive")
        if not (self.tpm or self.vm):
            raise ConfigError("at least one of tpm/vm must be enabled")
        if not (self.stl or self.mol):
            raise ConfigError("at least one of stl/mol must be enabled")
        if self.scorer not in ("oracle", "remote"):
            raise ConfigError(f"unknown scorer {self.scorer!r}")
        if self.predictor not in ("heuristic", "remote"):
            raise ConfigError(f"unknown predictor {self.predictor!r}")
        if self.frontier_policy not in ("dar", "random"):
            raise ConfigError(f"unknown frontier_policy {self.frontier_policy!r}")
        if self.weighted_score not in ("cosine", "uniform"):
            raise ConfigError(f"unknown weighted_score {self.weighted_score!r}")
        if self.success_radius_m <= 0 or self.max_range_m <= 0:
            raise ConfigError("radii must be positive")
        if self.n_targets < 1:
            raise ConfigError("n_targets must be >= 1")

    def ablation_string(self) -> str:
        on = [name for name, flag in
              (("stl", self.stl), ("mol", self.mol), ("tpm", self.tpm), ("vm", self.vm))
              if flag]
        return ",".join(on)


_BOOL_FIELDS = {"stl", "mol", "tpm", "vm"}
_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


def _parse_bool(value: str, key: str) -> bool:
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"bad boolean for {key!r}: {value!r}")


def parse_config(text: str) -> EpisodeConfig:
    cfg = EpisodeConfig()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value': {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("det_confidence."):
            cfg.det_per_class[key.split(".", 1)[1]] = float(value)
            continue
        if not hasattr(cfg, key) or key == "det_per_class":
            raise ConfigError(f"unknown config key {key!r}")
        if key in _BOOL_FIELDS:
            setattr(cfg, key, _parse_bool(value, key))
        elif key == "ablation":
            raise ConfigError("use individual stl/mol/tpm/vm keys in files")
        else:
            current = getattr(cfg, key)
            if isinstance(current, bool):
                setattr(cfg, key, _parse_bool(value, key))
            elif isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value if value != "none" else None)
    return cfg


def load_config(path: str | FsPath) -> EpisodeConfig:
    return parse_config(FsPath(path).read_text(encoding="utf-8"))


def config_to_text(cfg: EpisodeConfig) -> str:
    lines = []
    for f in dataclasses.fields(EpisodeConfig):
        value = getattr(cfg, f.name)
        if f.name == "det_per_class":
            for name, conf in sorted(value.items()):
                lines.append(f"det_confidence.{name} = {conf:g}")
            continue
        if isinstance(value, bool):
            lines.append(f"{f.name} = {'on' if value else 'off'}")
        elif value is None:
            lines.append(f"{f.name} = none")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
