"""Experiment configuration.

A config file is a single JSON object. Every field is optional; missing
fields take the defaults below (``qpwcheck defaults`` prints them). CLI flags
override the file, and ``--set section.key=value`` overrides anything.
Precedence, lowest first: defaults, config file, dedicated flags, ``--set``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .encoding import BitString, EncodingParams, HashSpec
from .errors import ParameterError
from .protocol import ProtocolParams
from .swaptest import RngSeed

EXPERIMENTS = ("protocol_run", "attack_eval", "bound_verify", "sweep")
ATTACK_KINDS = ("fixed_state", "naive_replay", "dictionary")
SWEEP_AXES = ("D", "s", "c", "B", "n")


class ConfigError(ParameterError):
    pass


@dataclass
class ParamsConfig:
    m: int = 16
    n: int = 8
    d: int = 3
    s: int = 10
    r_bits: int | None = None
    c_max: int | None = None
    # "sha256/trunc<n>" when omitted
    hash: str | None = None
    randomness_mode: str = "interleave"
    seed: int = 0
    weak_bits: int | None = None
    regime_ratio: float = 0.25


@dataclass
class AttackConfig:
    kind: str = "fixed_state"
    # fixed_state trial state: search | phi0 | mixed | random
    trial: str = "search"
    candidates: int = 16
    sample: int | None = None
    # batch (vectorized) or protocol (full session objects)
    engine: str = "batch"
    B: int = 16
    c: int = 0
    force_collision: bool = False


@dataclass
class BoundsConfig:
    c: int = 1
    mode: str = "ideal_hash"
    samples: int | None = None


@dataclass
class SweepSpec:
    axis: str = "s"
    values: list = field(default_factory=list)
    experiment: str = "attack_eval"


@dataclass
class OutputConfig:
    path: str | None = None
    format: str = "json"
    timestamp: bool = True


@dataclass
class ExperimentConfig:
    experiment: str = "protocol_run"
    params: ParamsConfig = field(default_factory=ParamsConfig)
    alice_password: str | None = None
    bob_password: str | None = None
    trials: int = 1000
    attack: AttackConfig = field(default_factory=AttackConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output: OutputConfig = field(default_factory=OutputConfig)
    schema_version: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.attack.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack.kind must be one of {ATTACK_KINDS}")
        if self.attack.engine not in ("batch", "protocol"):
            raise ConfigError("attack.engine must be 'batch' or 'protocol'")
        if self.attack.trial not in ("search", "phi0", "mixed", "random"):
            raise ConfigError("attack.trial must be search, phi0, mixed or random")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.output.format not in ("json", "csv"):
            raise ConfigError("output.format must be json or csv")
        if self.experiment == "sweep":
            sw = self.sweep
            if sw.axis not in SWEEP_AXES:
                raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}")
            if not sw.values:
                raise ConfigError("sweep.values is empty")
            if sw.experiment not in ("attack_eval", "bound_verify"):
                raise ConfigError("sweep.experiment must be attack_eval or bound_verify")
            for v in sw.values:
                _check_axis_value(sw.axis, v)
        return self

    def protocol_params(self) -> ProtocolParams:
        p = self.params
        try:
            enc = EncodingParams(p.m, p.n, p.d, p.r_bits)
            spec = HashSpec.parse(p.hash) if p.hash else enc.default_hash()
            return ProtocolParams(
                enc, p.s, c_max=p.c_max, randomness_mode=p.randomness_mode,
                seed=RngSeed(p.seed), hash_spec=spec, weak_bits=p.weak_bits,
                regime_ratio=p.regime_ratio,
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def passwords(self, params: ProtocolParams) -> tuple[BitString, BitString]:
        """Alice's and Bob's passwords; random (and equal) when not set."""
        m = params.encoding.m
        try:
            alice = (BitString.parse(self.alice_password, m) if self.alice_password is not None
                     else BitString.random(params.seed.generator(8), m))
            bob = BitString.parse(self.bob_password, m) if self.bob_password is not None else alice
        except ValueError as exc:
            raise ConfigError(f"bad password: {exc}") from exc
        return alice, bob

    def to_dict(self) -> dict:
        return asdict(self)


def _check_axis_value(axis: str, v) -> None:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"sweep value {v!r} for axis {axis} must be an integer")
    if axis == "D" and (v < 2 or v & (v - 1)):
        raise ConfigError(f"D = {v} must be a power of two >= 2")
    if axis in ("s", "B", "n") and v < 1:
        raise ConfigError(f"{axis} = {v} must be positive")
    if axis == "c" and v < 0:
        raise ConfigError(f"c = {v} must be non-negative")


def _merge(obj, data: dict, where: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    names = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key {where + key!r}")
        current = getattr(obj, key)
        if is_dataclass(current):
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(obj, key, value)
    return obj


def from_dict(data: dict) -> ExperimentConfig:
    return _merge(ExperimentConfig(), data).validate()


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _merge(ExperimentConfig(), data)


def apply_override(cfg: ExperimentConfig, assignment: str) -> ExperimentConfig:
    """Apply ``section.key=value``; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    data: dict = value
    for part in reversed(key.strip().split(".")):
        data = {part: data}
    return _merge(cfg, data)


def with_axis_value(cfg: ExperimentConfig, axis: str, value: int) -> ExperimentConfig:
    """Copy of ``cfg`` with one sweep axis set."""
    params, attack, bounds = replace(cfg.params), replace(cfg.attack), replace(cfg.bounds)
    if axis == "D":
        params.d = int(math.log2(value))
    elif axis == "s":
        params.s = value
    elif axis == "n":
        params.n = value
        if params.hash:
            params.hash = str(HashSpec.parse(params.hash).with_bits(value))
    elif axis == "B":
        attack.B = value
    elif axis == "c":
        attack.c = value
        bounds.c = value
    return replace(cfg, params=params, attack=attack, bounds=bounds)
