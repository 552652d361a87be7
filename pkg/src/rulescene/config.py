"""Tunable constants and the run configuration file.

Every numeric knob used by generation, simulation and monitoring lives here
with its default, so tests and the CLI share one source of truth. The run
config file is INI (stdlib configparser); see docs/formats.md.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .backends import BackendConfig

CONFIG_ENV = "TARGET_CONFIG"


@dataclass(frozen=True)
class Thresholds:
    """Violation-check constants; see monitor.py for how each is used."""

    stop_speed_mps: float = 0.1       # "stopped" means slower than this
    stop_dwell_s: float = 0.5         # must dwell this long to count as a stop
    stop_zone_m: float = 3.0          # distance before the stop line that counts
    yield_horizon_s: float = 3.0      # ego entering this soon before the NPC is a cut-off
    decel_drop_mps: float = 2.0       # required speed drop across a trigger region
    min_gap_m: float = 5.0            # floor of the safe following distance
    headway_s: float = 2.0            # time headway behind the lead vehicle
    lane_margin_m: float = 0.3        # tolerated centerline offset short of the edge
    speed_tolerance_mps: float = 0.5  # grace over the posted limit
    debounce_frames: int = 2          # consecutive frames before a violation counts
    wet_weather_multiplier: float = 1.5


@dataclass(frozen=True)
class GenConfig:
    """Scenario-generation constants."""

    nearby_radius_m: float = 30.0   # NPC routes searched this far from the ego route
    turn_threshold_deg: float = 30.0   # direction change below this is "go forward"
    turn_max_deg: float = 150.0        # beyond this it is a U-turn, not a turn
    opposite_dot: float = -0.7         # direction dot-product for "opposite"
    destination_margin_m: float = 40.0  # destination at least this far past the region
    spawn_gap_m: float = 9.0           # minimum spacing between spawn points
    sign_lookback_routes: int = 2      # predecessor routes searched for signs
    conflict_box_m: float = 7.0        # fallback conflict-region half size
    npc_speed_mps: float = 6.0         # scripted vehicle cruise speed
    pedestrian_speed_mps: float = 1.5
    npc_chain_m: float = 200.0         # how far moving NPC routes are extended


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step simulation constants."""

    dt_s: float = 0.05
    time_limit_s: float = 60.0
    accel_min: float = -8.0
    accel_max: float = 4.0
    curvature_max: float = 0.3      # |curvature| bound, 1/m
    destination_radius_m: float = 3.0
    collision_grace_s: float = 1.0  # sim keeps running this long after a collision
    cruise_speed_mps: float = 8.0

    def __post_init__(self):
        if self.dt_s <= 0 or self.time_limit_s <= 0:
            raise ValueError("dt and time limit must be positive")


# footprint (length, width) per actor type token; unknown types use car size
ACTOR_FOOTPRINTS: dict[str, tuple[float, float]] = {
    "car": (4.5, 2.0),
    "truck": (8.0, 2.5),
    "bus": (10.0, 2.5),
    "train": (20.0, 3.0),
    "bicycle": (1.8, 0.6),
    "pedestrian": (0.6, 0.6),
}


def actor_footprint(actor_type: str) -> tuple[float, float]:
    return ACTOR_FOOTPRINTS.get(actor_type, ACTOR_FOOTPRINTS["car"])


# ---------------------------------------------------------------------------
# run configuration file

class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    catalog_path: str | None = None   # None = packaged default
    map_dir: str = "maps"
    output_dir: str = "out"
    seed: int = 0
    backend: BackendConfig = field(default_factory=BackendConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    gen: GenConfig = field(default_factory=GenConfig)
    sim: SimConfig = field(default_factory=SimConfig)


def _coerce(value: str, template):
    if isinstance(template, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return type(template)(value)


def _fill(cls_default, section: configparser.SectionProxy | None, path_keys=()) -> dict:
    out = {}
    if section is None:
        return out
    names = {f.name: getattr(cls_default, f.name) for f in dataclasses.fields(cls_default)}
    for key in section:
        if key not in names:
            raise ConfigError(f"unknown config key: {key}")
        if key in path_keys:
            out[key] = section[key]
        else:
            try:
                out[key] = _coerce(section[key], names[key])
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {section[key]!r}") from e
    return out


def load_run_config(path: str | Path | None = None) -> RunConfig:
    """Load a run config file.

    Resolution order: explicit path, then the TARGET_CONFIG environment
    variable, then built-in defaults. Referenced paths must exist.
    """
    if path is None:
        env = os.environ.get(CONFIG_ENV)
        if env:
            path = env
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(p.read_text("utf-8"))
    except configparser.Error as e:
        raise ConfigError(f"{p}: {e}") from e

    known = {"paths", "backend", "thresholds", "gen", "sim"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    paths = parser["paths"] if parser.has_section("paths") else None
    base: dict = {}
    if paths is not None:
        for key in paths:
            if key == "catalog":
                base["catalog_path"] = paths[key]
            elif key == "maps":
                base["map_dir"] = paths[key]
            elif key == "output":
                base["output_dir"] = paths[key]
            elif key == "seed":
                base["seed"] = int(paths[key])
            else:
                raise ConfigError(f"unknown config key: paths.{key}")

    backend_kwargs = _fill(
        BackendConfig(),
        parser["backend"] if parser.has_section("backend") else None,
        path_keys=("fixture_dir", "endpoint", "model", "kind"),
    )
    cfg = RunConfig(
        **base,
        backend=BackendConfig(**backend_kwargs),
        thresholds=Thresholds(
            **_fill(Thresholds(), parser["thresholds"] if parser.has_section("thresholds") else None)
        ),
        gen=GenConfig(**_fill(GenConfig(), parser["gen"] if parser.has_section("gen") else None)),
        sim=SimConfig(**_fill(SimConfig(), parser["sim"] if parser.has_section("sim") else None)),
    )

    root = p.parent
    for label, rel in (("catalog", cfg.catalog_path), ("maps", cfg.map_dir)):
        if rel is None:
            continue
        resolved = (root / rel) if not Path(rel).is_absolute() else Path(rel)
        if not resolved.exists():
            raise ConfigError(f"config path does not exist: {label} = {rel}")
    return cfg


def resolve_config_path(cfg_path: str | Path | None, rel: str) -> Path:
    """Paths in a config file are relative to the file, else to the cwd."""
    p = Path(rel)
    if p.is_absolute():
        return p
    if cfg_path is not None:
        return Path(cfg_path).parent / p
    return p
