# SPDX-License-Identifier: MIT

"""Run configuration: flat `section.key = value` text validated by pydantic."""

import os
from pathlib import Path
from typing import Literal, override

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..core.core_basics import ConfigError

DEFAULT_CONFIG_FILE = "effmaster.conf"
SECTIONS = ("model", "state", "evolve", "sweep", "flags", "outputs")
INTEGER_PARAMETERS = frozenset({"cutoff", "cutoff_a", "cutoff_b", "atoms"})
STATE_KINDS = {"fock": 1, "coherent": 1, "spin": 1, "spin_coherent": 2}


def format_float(value: float) -> str:
    """17 significant digits, the precision of every number written out."""
    return format(float(value), ".17g")


def parse_state_spec(spec: str) -> tuple[str, list[float]]:
    """`coherent 1.0` -> ("coherent", [1.0])."""
    tokens = spec.split()
    if not tokens or tokens[0] not in STATE_KINDS:
        raise ConfigError(f"unknown state spec '{spec}'; use one of {sorted(STATE_KINDS)}")
    kind, args = tokens[0], tokens[1:]
    if len(args) != STATE_KINDS[kind]:
        raise ConfigError(f"state '{kind}' takes {STATE_KINDS[kind]} value(s), got '{spec}'")
    try:
        return kind, [float(a) for a in args]
    except ValueError as e:
        raise ConfigError(f"state spec '{spec}' has a non-numeric value") from e


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    name: Literal["coupled_oscillators", "second_harmonic", "dicke"] = "coupled_oscillators"
    parameters: dict[str, float] = Field(default_factory=dict)

    def preset_kwargs(self) -> dict[str, float | int]:
        return {
            k: int(v) if k in INTEGER_PARAMETERS else v for k, v in self.parameters.items()
        }


class StateSection(_Section):
    factors: dict[str, str] = Field(default_factory=dict)

    @field_validator("factors")
    @classmethod
    def _normalize(cls, factors: dict[str, str]) -> dict[str, str]:
        out: dict[str, str] = {}
        for key, spec in factors.items():
            kind, values = parse_state_spec(spec)
            out[key] = " ".join([kind, *(format_float(v) for v in values)])
        return out


class EvolveSection(_Section):
    t_final: float = Field(default=10.0, ge=0)
    dt: float = Field(default=0.01, gt=0)
    samples: int = Field(default=101, ge=2)
    observables: list[str] = Field(default_factory=list)


class SweepSection(_Section):
    g: list[float] = Field(default_factory=list)
    workers: int = Field(default=4, ge=1)


class FlagsSection(_Section):
    apply_rwa: bool = False
    vacuum_reduction: str | None = None
    truncation_order: Literal[1, 2] = 2
    frame: Literal["detuning", "full"] = "detuning"
    max_degree: int = Field(default=3, ge=0)
    support_tol: float | None = Field(default=1e-6, gt=0)
    guard_threshold: float = Field(default=0.1, gt=0)
    keep_tol: float = Field(default=1e-6, gt=0)


class OutputsSection(_Section):
    dir: str = "effmaster_out"


class RunConfig(_Section):
    model: ModelSection = Field(default_factory=ModelSection)
    state: StateSection = Field(default_factory=StateSection)
    evolve: EvolveSection = Field(default_factory=EvolveSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    flags: FlagsSection = Field(default_factory=FlagsSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{value}'")


def parse_text(text: str) -> dict[str, str]:
    """Flat dotted keys; `#` starts a comment; a key may appear once."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        section = key.split(".", 1)[0]
        if "." not in key or section not in SECTIONS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        entries[key] = value
    return entries


def _build(entries: dict[str, str]) -> RunConfig:
    data: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    parameters: dict[str, float] = {}
    factors: dict[str, str] = {}
    for key, value in entries.items():
        section, name = key.split(".", 1)
        match section, name:
            case "model", "name":
                data["model"]["name"] = value
            case "model", _:
                try:
                    parameters[name] = float(value)
                except ValueError as e:
                    raise ConfigError(f"{key}: expected a number, got '{value}'") from e
            case "state", _:
                factors[name] = value
            case "evolve", "observables":
                data["evolve"]["observables"] = _split_list(value)
            case "sweep", "g":
                data["sweep"]["g"] = _split_list(value)
            case "flags", "apply_rwa":
                data["flags"]["apply_rwa"] = _parse_bool(key, value)
            case "flags", "truncation_order":
                try:
                    data["flags"]["truncation_order"] = int(value)
                except ValueError as e:
                    raise ConfigError(f"{key}: expected 1 or 2, got '{value}'") from e
            case "flags", ("vacuum_reduction" | "support_tol") if value.lower() == "none":
                data["flags"][name] = None
            case _:
                data[section][name] = value
    data["model"]["parameters"] = parameters
    data["state"]["factors"] = factors
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def _canonical_value(value: object) -> str:
    match value:
        case None:
            return "none"
        case bool():
            return "true" if value else "false"
        case int():
            return str(value)
        case float():
            return format_float(value)
        case list():
            return ",".join(_canonical_value(v) for v in value)
        case _:
            return str(value)


class Config:
    """Configuration manager for effmaster runs."""

    def __init__(self, config_file: str | Path | None = DEFAULT_CONFIG_FILE, text: str | None = None):
        self.config_file: str | None = None if config_file is None else str(config_file)
        if text is None and self.config_file is not None:
            path = Path(self.config_file)
            if path.exists():
                try:
                    text = path.read_text(encoding="utf-8")
                except OSError as e:
                    print(f"Warning: Could not load config file {config_file}: {e}")
            else:
                print(f"Warning: config file {config_file} not found, using defaults")
        self._entries: dict[str, str] = parse_text(text or "")
        self.run: RunConfig = _build(self._entries)

    @classmethod
    def from_text(cls, text: str) -> "Config":
        return cls(config_file=None, text=text)

    def flat(self) -> dict[str, str]:
        """Every setting, defaults included, as canonical dotted key/value strings."""
        run = self.run
        out: dict[str, str] = {"model.name": run.model.name}
        for k, v in run.model.parameters.items():
            out[f"model.{k}"] = _canonical_value(v)
        for k, v in run.state.factors.items():
            out[f"state.{k}"] = v
        for section in ("evolve", "sweep", "flags", "outputs"):
            for k, v in getattr(run, section).model_dump().items():
                out[f"{section}.{k}"] = _canonical_value(v)
        return out

    def canonical(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.flat().items()))

    def header_lines(self) -> list[str]:
        return [f"{k} = {v}" for k, v in sorted(self.flat().items())]

    def with_overrides(self, **overrides: str) -> "Config":
        """A copy with dotted keys replaced, e.g. with_overrides(**{"model.g": "0.1"})."""
        entries = dict(self._entries)
        entries.update(overrides)
        copy = Config.from_text("".join(f"{k} = {v}\n" for k, v in entries.items()))
        copy.config_file = self.config_file
        return copy

    @override
    def __str__(self) -> str:
        return f"Config(model={self.run.model.name}, file={self.config_file})"


def resolve_config_value(
    cli_value: int | str | float | None,
    config_value: int | str | float | None,
    env_var: str | None = None,
) -> int | str | float | None:
    """Resolve configuration value with priority: CLI > ENV > Config > Default."""
    if cli_value is not None:
        return cli_value

    if env_var and os.getenv(env_var):
        return os.getenv(env_var)

    if config_value is not None:
        return config_value

    return None
