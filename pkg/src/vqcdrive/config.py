"""Experiment configuration: one JSON document, exhaustively validated.

Unknown keys are rejected (no silent typo drift), defaults fill every
omitted field, and the resolved configuration echoes back to JSON such that
reloading the echo reproduces the identical resolved configuration.
"""

import json
from dataclasses import dataclass, fields
from typing import Optional

from .env import EnvConfig
from .errors import ConfigError
from .learner import AgentConfig
from .radio import RadioConfig
from .traffic import IdmParams, RoadConfig

BACKENDS = ("vqc", "neural")
DEFAULT_LR = {"vqc": 1e-3, "neural": 5e-4}
SWEEP_PARAMETERS = ("n_background", "desired_velocity")
INIT_SCHEMES = ("uniform", "zero")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    repetitions: int

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(
                f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}"
            )
        if len(self.values) == 0:
            raise ValueError("sweep values must be non-empty")
        if self.repetitions < 1:
            raise ValueError("sweep repetitions must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    backend: str = "vqc"
    episodes: int = 200
    seed: int = 0
    output_dir: Optional[str] = None
    trace: bool = False
    env: EnvConfig = EnvConfig()
    agent: AgentConfig = AgentConfig()
    road: RoadConfig = RoadConfig()
    idm: IdmParams = IdmParams()
    radio: RadioConfig = RadioConfig()
    circuit_init: str = "uniform"
    circuit_init_scale: float = 0.1
    sweep: Optional[SweepSpec] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.circuit_init not in INIT_SCHEMES:
            raise ValueError(f"circuit init must be one of {INIT_SCHEMES}")
        if self.circuit_init_scale < 0:
            raise ValueError("circuit init_scale must be >= 0")


_INT_FIELDS = {
    "episodes", "seed", "horizon", "n_background", "batch_size", "capacity",
    "target_sync_period", "warmup", "lanes", "action_repeat", "quota_rf",
    "quota_thz", "repetitions",
}
_BOOL_FIELDS = {"trace", "double_q", "rf_fading"}


def _coerce(section: str, key: str, value):
    path = f"{section}.{key}" if section else key
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{path}' must be a boolean, got {value!r}")
        return value
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{path}' must be an integer, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"config key '{path}' has the wrong type ({value!r})")
    return value


def _build_section(section_name: str, cls, doc: dict, skip=()):
    allowed = {f.name for f in fields(cls)} - set(skip)
    kwargs = {}
    for key, value in doc.items():
        if key not in allowed:
            raise ConfigError(
                f"unknown config key '{section_name}.{key}' "
                f"(allowed: {', '.join(sorted(allowed))})"
            )
        kwargs[key] = _coerce(section_name, key, value)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config section '{section_name}': {exc}") from exc


def config_from_dict(doc: dict) -> TrainConfig:
    """Resolve a raw configuration dict into a validated TrainConfig."""
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a JSON object, got {type(doc).__name__}")
    known_top = {"backend", "episodes", "seed", "output_dir", "trace",
                 "env", "agent", "traffic", "radio", "circuit", "sweep"}
    for key in doc:
        if key not in known_top:
            raise ConfigError(
                f"unknown config key '{key}' (allowed: {', '.join(sorted(known_top))})"
            )
    for section in ("env", "agent", "traffic", "radio", "circuit", "sweep"):
        if section in doc and not isinstance(doc[section], dict):
            raise ConfigError(f"config key '{section}' must be an object")

    backend = doc.get("backend", "vqc")
    if backend not in BACKENDS:
        raise ConfigError(f"config key 'backend' must be one of {BACKENDS}, got {backend!r}")

    env_doc = dict(doc.get("env", {}))
    agent_doc = dict(doc.get("agent", {}))
    traffic_doc = dict(doc.get("traffic", {}))
    radio_doc = dict(doc.get("radio", {}))
    circuit_doc = dict(doc.get("circuit", {}))
    sweep_doc = doc.get("sweep")

    if agent_doc.get("lr") is None:
        agent_doc["lr"] = DEFAULT_LR[backend]

    idm_doc = traffic_doc.pop("idm", {})
    if not isinstance(idm_doc, dict):
        raise ConfigError("config key 'traffic.idm' must be an object")
    if "v0" in idm_doc:
        raise ConfigError(
            "config key 'traffic.idm.v0' is driven by 'env.desired_velocity'"
        )

    env_cfg = _build_section("env", EnvConfig, env_doc, skip=("seed",))
    agent_cfg = _build_section("agent", AgentConfig, agent_doc)
    road_cfg = _build_section("traffic", RoadConfig, traffic_doc)
    idm_cfg = _build_section("traffic.idm", IdmParams, idm_doc, skip=("v0",))
    radio_cfg = _build_section("radio", RadioConfig, radio_doc)

    allowed_circuit = {"init", "init_scale"}
    for key in circuit_doc:
        if key not in allowed_circuit:
            raise ConfigError(f"unknown config key 'circuit.{key}'")

    sweep = None
    if sweep_doc is not None:
        allowed_sweep = {"parameter", "values", "repetitions"}
        for key in sweep_doc:
            if key not in allowed_sweep:
                raise ConfigError(f"unknown config key 'sweep.{key}'")
        values = sweep_doc.get("values", [])
        if not isinstance(values, list):
            raise ConfigError("config key 'sweep.values' must be a list")
        try:
            sweep = SweepSpec(
                parameter=sweep_doc.get("parameter", ""),
                values=tuple(values),
                repetitions=_coerce("sweep", "repetitions",
                                    sweep_doc.get("repetitions", 1)),
            )
        except ValueError as exc:
            raise ConfigError(f"config section 'sweep': {exc}") from exc

    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("config key 'output_dir' must be a string or null")

    try:
        return TrainConfig(
            backend=backend,
            episodes=_coerce("", "episodes", doc.get("episodes", 200)),
            seed=_coerce("", "seed", doc.get("seed", 0)),
            output_dir=output_dir,
            trace=_coerce("", "trace", doc.get("trace", False)),
            env=env_cfg,
            agent=agent_cfg,
            road=road_cfg,
            idm=idm_cfg,
            radio=radio_cfg,
            circuit_init=circuit_doc.get("init", "uniform"),
            circuit_init_scale=circuit_doc.get("init_scale", 0.1),
            sweep=sweep,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_raw(path) -> dict:
    """Read a JSON config file; an empty file means all defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return doc


def load_config(path) -> TrainConfig:
    return config_from_dict(load_raw(path))


def _dataclass_dict(obj, skip=()) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj) if f.name not in skip}


def config_to_dict(cfg: TrainConfig) -> dict:
    """Resolved configuration as a plain dict; loadable by config_from_dict."""
    doc = {
        "backend": cfg.backend,
        "episodes": cfg.episodes,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "trace": cfg.trace,
        "env": _dataclass_dict(cfg.env, skip=("seed",)),
        "agent": _dataclass_dict(cfg.agent),
        "traffic": {**_dataclass_dict(cfg.road),
                    "idm": _dataclass_dict(cfg.idm, skip=("v0",))},
        "radio": _dataclass_dict(cfg.radio),
        "circuit": {"init": cfg.circuit_init, "init_scale": cfg.circuit_init_scale},
    }
    if cfg.sweep is not None:
        doc["sweep"] = {
            "parameter": cfg.sweep.parameter,
            "values": list(cfg.sweep.values),
            "repetitions": cfg.sweep.repetitions,
        }
    return doc


def write_echo(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
