"""Scenario file parsing and serialization.

Scenarios are TOML: top-level scalars plus one table per configuration
group. Every key is optional and falls back to the documented default; a
minimal file only names what it changes. Unknown keys are rejected (with the
offending line where it can be located) so a typo in a noise parameter never
silently runs with defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .simulate import (
    HorizonCfg,
    LimitsCfg,
    NoiseCfg,
    ObstacleCfg,
    RatesCfg,
    SafetyCfg,
    Scenario,
    VehicleCfg,
    WorkspaceCfg,
)


class ScenarioError(ValueError):
    pass


_TABLES = {
    "workspace": WorkspaceCfg,
    "vehicle": VehicleCfg,
    "limits": LimitsCfg,
    "horizon": HorizonCfg,
    "rates": RatesCfg,
    "obstacle": ObstacleCfg,
    "noise": NoiseCfg,
    "safety": SafetyCfg,
}
_SCALARS = ("name", "seed", "mode", "duration", "start", "goal")


def _line_of(text: str, token: str) -> str:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if token in line:
            return f" (line {lineno})"
    return ""


def _coerce(target_type, value, path: str, text: str):
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(
                f"{path} must be a number{_line_of(text, path.split('.')[-1])}"
            )
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(
                f"{path} must be an integer{_line_of(text, path.split('.')[-1])}"
            )
        return int(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ScenarioError(
                f"{path} must be a string{_line_of(text, path.split('.')[-1])}"
            )
        return value
    return value


def _fill_dataclass(cls, table: dict, prefix: str, text: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in fields:
            raise ScenarioError(
                f"unknown key {prefix}.{key}{_line_of(text, key)}"
            )
        ftype = fields[key].type
        base = {"float": float, "int": int, "str": str}.get(ftype, None)
        kwargs[key] = _coerce(base, value, f"{prefix}.{key}", text) if base else value
    return cls(**kwargs)


def parse_scenario_text(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc

    kwargs = {}
    for key, value in doc.items():
        if key in _TABLES:
            if not isinstance(value, dict):
                raise ScenarioError(f"{key} must be a table{_line_of(text, key)}")
            kwargs[key] = _fill_dataclass(_TABLES[key], value, key, text)
        elif key in _SCALARS:
            kwargs[key] = value
        else:
            raise ScenarioError(f"unknown key {key}{_line_of(text, key)}")

    if "seed" in kwargs:
        kwargs["seed"] = _coerce(int, kwargs["seed"], "seed", text)
    if "duration" in kwargs:
        kwargs["duration"] = _coerce(float, kwargs["duration"], "duration", text)
    for key in ("start", "goal"):
        if key in kwargs:
            vec = kwargs[key]
            if not isinstance(vec, list) or len(vec) != 6:
                raise ScenarioError(
                    f"{key} must be a 6-element array{_line_of(text, key)}"
                )
            kwargs[key] = [float(v) for v in vec]

    scenario = Scenario(**kwargs)
    try:
        scenario.validate()
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc
    return scenario


def parse_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"scenario file not found: {p}")
    return parse_scenario_text(p.read_text(), source=str(p))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def serialize_scenario(scenario: Scenario) -> str:
    """Scenario back to TOML; parse(serialize(s)) equals s."""
    lines = [
        f"name = {_fmt(scenario.name)}",
        f"seed = {_fmt(scenario.seed)}",
        f"mode = {_fmt(scenario.mode)}",
    ]
    if scenario.duration is not None:
        lines.append(f"duration = {_fmt(float(scenario.duration))}")
    lines.append(f"start = {_fmt(list(scenario.start))}")
    lines.append(f"goal = {_fmt(list(scenario.goal))}")
    for table_name, cls in _TABLES.items():
        cfg = getattr(scenario, table_name)
        lines.append("")
        lines.append(f"[{table_name}]")
        for f in dataclasses.fields(cls):
            value = getattr(cfg, f.name)
            if isinstance(value, (list, tuple)):
                value = [list(v) if isinstance(v, (list, tuple)) else v for v in value]
            lines.append(f"{f.name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(serialize_scenario(scenario))
