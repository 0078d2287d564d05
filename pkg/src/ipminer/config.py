"""Pipeline configuration: flat ``key = value`` files with named presets.

A file may start from a preset (``preset = ngsim``) and override any key.
Environment variables ``IPMINER_<KEY>`` override the file.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .evipm import EvipmConfig
from .geometry import InteractionParams
from .scenarios import ScenarioSpec
from .sipm import MiningThresholds
from .trajectory import FormatDescriptor

ENV_PREFIX = "IPMINER_"
STAGES = ("events", "sipm", "evipm")

PRESETS: dict[str, dict[str, object]] = {
    "ngsim": dict(
        r_agent=1.83, d_search=25.0, eps_move=0.1, eps_dir=5.0, eps_align=2.0,
        eps_parallel=4.0, eps_dist=0.1, eps_route=4.0, eps_vel=0.15 / 3.6, eps_lat=3.25,
        t_supp=0.8, t_min=20, t_e_supp=0.9, min_jc=0.6, t_win=150, tick=0.1,
    ),
    "campus": dict(
        r_agent=0.6, d_search=10.0, eps_move=1e-4, eps_dir=13.0, eps_align=1.0,
        eps_parallel=13.0, eps_dist=0.01, eps_route=13.0, eps_vel=0.005, eps_lat=1.2,
        t_supp=0.8, t_min=25, t_e_supp=0.9, min_jc=0.6, t_win=300, tick=0.04,
    ),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    params: InteractionParams = field(default_factory=InteractionParams)
    thresholds: MiningThresholds = field(default_factory=MiningThresholds)
    evipm: EvipmConfig = field(default_factory=EvipmConfig)
    input: Path | None = None
    format: str = "canonical"
    units: str = "m"
    tick: float = 0.1
    delimiter: str = ","
    scenario: ScenarioSpec | None = None
    output: Path = Path("ipminer-out")
    stages: tuple[str, ...] = STAGES
    workers: int = 1
    grid_cell: float = 5.0
    max_agents: int | None = None
    literal_opposite_flanking: bool = False
    preset: str | None = None

    def __post_init__(self):
        if self.format not in ("canonical", "ngsim"):
            raise ConfigError(f"format must be 'canonical' or 'ngsim', got {self.format!r}")
        if tuple(self.stages) != STAGES[:len(self.stages)] or not self.stages:
            raise ConfigError(f"stages must be a non-empty prefix of {', '.join(STAGES)}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.grid_cell > 0:
            raise ConfigError("grid_cell must be positive")
        if self.max_agents is not None and self.max_agents < 2:
            raise ConfigError("max_agents must be at least 2")

    def format_descriptor(self) -> FormatDescriptor:
        if self.format == "ngsim":
            return FormatDescriptor.ngsim(tick_duration=self.tick, agent_radius=self.params.r_agent,
                                          delimiter=self.delimiter)
        return FormatDescriptor(units=self.units, tick_duration=self.tick, delimiter=self.delimiter,
                                agent_radius=self.params.r_agent)

    def settings(self) -> dict:
        """Every setting that can change the results, as plain JSON values."""
        out = {
            "params": asdict(self.params),
            "thresholds": asdict(self.thresholds),
            "evipm": asdict(self.evipm),
            "input": str(self.input) if self.input else None,
            "format": self.format, "units": self.units, "tick": self.tick,
            "delimiter": self.delimiter,
            "scenario": asdict(self.scenario) if self.scenario else None,
            "stages": list(self.stages), "grid_cell": self.grid_cell,
            "max_agents": self.max_agents,
            "literal_opposite_flanking": self.literal_opposite_flanking,
        }
        return out

    def digest(self) -> str:
        blob = json.dumps(self.settings(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_PARAM_KEYS = {f.name for f in fields(InteractionParams)}
_THRESHOLD_KEYS = {"t_min", "t_supp"}
_EVIPM_KEYS = {"t_win", "min_jc", "t_e_supp", "max_len"}
_SCENARIO_KEYS = {"scenario": "kind", "n_agents": "n_agents", "duration": "duration",
                  "noise": "noise", "seed": "seed", "flank_duration": "flank_duration",
                  "crossing_angle": "crossing_angle"}
_PLAIN_KEYS = {"input", "format", "units", "tick", "delimiter", "output", "stages", "workers",
               "grid_cell", "max_agents", "literal_opposite_flanking", "preset"}
KNOWN_KEYS = _PARAM_KEYS | _THRESHOLD_KEYS | _EVIPM_KEYS | set(_SCENARIO_KEYS) | _PLAIN_KEYS

_INT_KEYS = {"t_min", "t_win", "max_len", "workers", "max_agents", "n_agents", "duration", "seed"}
_STR_KEYS = {"input", "format", "units", "delimiter", "output", "stages", "scenario", "preset"}
_BOOL_KEYS = {"literal_opposite_flanking"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if key in ("max_agents", "duration") and raw.lower() in ("", "none"):
        return None
    try:
        return int(raw) if key in _INT_KEYS else float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[ipminer]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return dict(parser["ipminer"])


def resolve(values: Mapping[str, str], base_dir: Path | None = None,
            env: Mapping[str, str] | None = None) -> PipelineConfig:
    """Build a config from raw string values, applying preset and env overrides."""
    raw = dict(values)
    if env:
        for k, v in env.items():
            if k.startswith(ENV_PREFIX):
                raw[k[len(ENV_PREFIX):].lower()] = v
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged: dict[str, object] = {}
    preset = raw.get("preset", "").strip() or None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    for key, value in raw.items():
        merged[key] = _coerce(key, value)
    merged["preset"] = preset

    try:
        params = InteractionParams(**{k: float(merged[k]) for k in _PARAM_KEYS if k in merged})
        thresholds = MiningThresholds(**{k: merged[k] for k in _THRESHOLD_KEYS if k in merged})
        evipm = EvipmConfig(**{k: merged[k] for k in _EVIPM_KEYS if k in merged})
        scenario = None
        if "scenario" in merged:
            kw = {attr: merged[key] for key, attr in _SCENARIO_KEYS.items() if key in merged}
            if "tick" in merged:
                kw["tick"] = float(merged["tick"])
            scenario = ScenarioSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    def path(key):
        if key not in merged:
            return None
        p = Path(str(merged[key]))
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    input_path = path("input")
    if input_path is None and scenario is None:
        raise ConfigError("config needs either 'input' (a trajectory file) or 'scenario'")
    stages = tuple(s.strip() for s in str(merged.get("stages", ",".join(STAGES))).split(",") if s.strip())
    kwargs = dict(
        params=params, thresholds=thresholds, evipm=evipm, input=input_path,
        format=merged.get("format", "canonical"), units=merged.get("units", "m"),
        tick=float(merged.get("tick", 0.1)), delimiter=merged.get("delimiter", ","),
        scenario=scenario, stages=stages, workers=merged.get("workers", 1),
        grid_cell=float(merged.get("grid_cell", 5.0)), max_agents=merged.get("max_agents"),
        literal_opposite_flanking=merged.get("literal_opposite_flanking", False), preset=preset,
    )
    if "output" in merged:
        kwargs["output"] = path("output")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path, env: Mapping[str, str] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve(parse_config_text(text), path.parent,
                   os.environ if env is None else env)


def with_overrides(config: PipelineConfig, **changes) -> PipelineConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(config, **changes) if changes else config
