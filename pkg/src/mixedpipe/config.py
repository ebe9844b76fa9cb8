"""Flat ``section.key = value`` configuration files and scenario presets.

Example::

    # dam break in a horizontal pipe
    profile.length = 100 m
    profile.radius = 1 m
    mesh.cells = 200
    time.t_end = 10 s
    bc.left.kind = wall
    bc.right.kind = wall
    init.0.x_end = 50 m
    init.0.level = 0.5 m
    init.1.level = -0.5 m

Values are SI. A trailing unit token is optional, and when present it must
be the SI unit of the field. Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from typing import Any

from .closures import ClosureError, FluidConstants
from .solver import BC_KINDS, BoundaryCondition, ProfileSpec, Region, SimConfig

__all__ = ["ConfigError", "parse_config", "serialize", "preset", "PRESETS"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


# key -> (type, unit); type is float, int, str or "ints"
_PROFILE = {
    "file": (str, None),
    "length": (float, "m"),
    "radius": (float, "m"),
    "radius_out": (float, "m"),
    "slope": (float, "1"),
    "bump_amplitude": (float, "1"),
    "bed_bump": (float, "m"),
    "bump_center": (float, "m"),
    "bump_width": (float, "m"),
    "samples": (int, None),
}
_TIME = {
    "cfl": (float, "1"),
    "t_end": (float, "s"),
    "output_every": (float, "s"),
    "max_steps": (int, None),
}
_FLUID = {
    "rho0": (float, "kg/m^3"),
    "beta0": (float, "Pa^-1"),
    "g": (float, "m/s^2"),
    "Ks": (float, "m^(1/3)/s"),
}
_BC = {
    "kind": (str, None),
    "level": (float, "m"),
    "ratio": (float, "1"),
    "discharge": (float, "m^3/s"),
    "close_time": (float, "s"),
}
_REGION = {
    "x_end": (float, "m"),
    "level": (float, "m"),
    "ratio": (float, "1"),
    "head": (float, "m"),
    "velocity": (float, "m/s"),
    "discharge": (float, "m^3/s"),
    "hump_amplitude": (float, "m"),
    "hump_center": (float, "m"),
    "hump_width": (float, "m"),
}
_SIMPLE = {
    "profile": _PROFILE,
    "mesh": {"cells": (int, None)},
    "time": _TIME,
    "fluid": _FLUID,
    "output": {"probes": ("ints", None)},
}
_REQUIRED = ("time.t_end",)
_LINE = re.compile(r"^([A-Za-z0-9_.]+)\s*=\s*(.*)$")


def _schema(key: str) -> tuple[Any, str | None]:
    parts = key.split(".")
    if len(parts) == 2 and parts[0] in _SIMPLE and parts[1] in _SIMPLE[parts[0]]:
        return _SIMPLE[parts[0]][parts[1]]
    if len(parts) == 3 and parts[0] == "bc" and parts[1] in ("left", "right") and parts[2] in _BC:
        return _BC[parts[2]]
    if len(parts) == 3 and parts[0] == "init" and parts[1].isdigit() and parts[2] in _REGION:
        return _REGION[parts[2]]
    raise ConfigError(key, "unknown key")


def _convert(key: str, raw: str, kind, unit: str | None):
    raw = raw.strip()
    if not raw:
        raise ConfigError(key, "empty value")
    if kind is str:
        return raw
    if kind == "ints":
        try:
            return tuple(int(p) for p in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(key, f"expected a list of integers, got {raw!r}") from None
    tokens = raw.split()
    if len(tokens) > 2:
        raise ConfigError(key, f"expected a number and an optional unit, got {raw!r}")
    if len(tokens) == 2:
        if unit is None or tokens[1] != unit:
            expected = f"'{unit}'" if unit else "no unit"
            raise ConfigError(key, f"unit {tokens[1]!r} not accepted, expected {expected}")
    try:
        value = kind(tokens[0])
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {tokens[0]!r}") from None
    if kind is float and math.isnan(value):
        raise ConfigError(key, "NaN is not a valid value")
    return value


def _tokenize(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if m is None:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {line!r}")
        key, raw = m.groups()
        kind, unit = _schema(key)
        if key in values:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        values[key] = _convert(key, raw, kind, unit)
    return values


def _section(values: dict[str, Any], prefix: str) -> dict[str, Any]:
    n = len(prefix) + 1
    return {k[n:]: v for k, v in values.items() if k.startswith(prefix + ".")}


def _build(path: str, factory, kwargs: dict[str, Any]):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (ValueError, ClosureError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(text: str) -> SimConfig:
    """Parse and validate a configuration text.

    Raises
    ------
    ConfigError
        Unknown or duplicate keys, malformed values, wrong units, missing
        required keys or out-of-range parameters; the message starts with
        the key path.
    """
    values = _tokenize(text)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(key, "missing required key")

    profile = _build("profile", ProfileSpec, _section(values, "profile"))
    fluid = _build("fluid", FluidConstants, _section(values, "fluid"))
    bcs = {}
    for side in ("left", "right"):
        kw = _section(values, f"bc.{side}")
        if "kind" in kw and kw["kind"] not in BC_KINDS:
            raise ConfigError(f"bc.{side}.kind", f"unknown kind {kw['kind']!r}; expected one of {BC_KINDS}")
        bcs[side] = _build(f"bc.{side}", BoundaryCondition, kw)

    idx = sorted({int(k.split(".")[1]) for k in values if k.startswith("init.")})
    if idx and idx != list(range(len(idx))):
        raise ConfigError("init", f"regions must be numbered 0..{len(idx) - 1}, got {idx}")
    regions = tuple(_build(f"init.{i}", Region, _section(values, f"init.{i}")) for i in idx)
    for i, reg in enumerate(regions[:-1]):
        if not math.isfinite(reg.x_end):
            raise ConfigError(f"init.{i}.x_end", "only the last region may extend to the pipe end")

    kwargs: dict[str, Any] = dict(profile=profile, fluid=fluid, bc_left=bcs["left"], bc_right=bcs["right"])
    if regions:
        kwargs["init"] = regions
    if "mesh.cells" in values:
        kwargs["cells"] = values["mesh.cells"]
    for k, v in _section(values, "time").items():
        kwargs[k] = v
    if "output.probes" in values:
        kwargs["probes"] = values["output.probes"]
    cfg = _sim_config(**kwargs)
    _check_ranges(cfg)
    return cfg


def _sim_config(**kwargs) -> SimConfig:
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        for key, word in (("output.probes", "probe"), ("time.cfl", "cfl"), ("time.t_end", "t_end"),
                          ("time.output_every", "output_every"), ("mesh.cells", "cells"),
                          ("time.max_steps", "max_steps"), ("bc", "periodic")):
            if msg.startswith(word):
                raise ConfigError(key, msg) from None
        raise


def _check_ranges(cfg: SimConfig) -> None:
    """Checks that need the built geometry (reservoir level against R)."""
    prof = cfg.profile.build()
    X0, X1 = 0.0, prof.length
    for side, bc, X in (("left", cfg.bc_left, X0), ("right", cfg.bc_right, X1)):
        if bc.kind == "reservoir" and bc.level is not None:
            R = float(prof.radius(X))
            if abs(bc.level) > R:
                raise ConfigError(f"bc.{side}.level",
                                  f"reservoir level {bc.level} outside section [-{R:g}, {R:g}]")


def _fmt(v) -> str:
    if isinstance(v, bool):
        raise TypeError("booleans are not config values")
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(str(int(p)) for p in v)
    return str(v)


def serialize(config: SimConfig) -> str:
    """Text form of ``config``; ``parse_config(serialize(c)) == c``."""
    lines: list[str] = []
    for name in _PROFILE:
        v = getattr(config.profile, name)
        if v is not None and v != getattr(ProfileSpec(), name):
            lines.append(f"profile.{name} = {_fmt(v)}")
    lines.append(f"mesh.cells = {config.cells}")
    for name in _TIME:
        v = getattr(config, name)
        if v is not None:
            lines.append(f"time.{name} = {_fmt(v)}")
    for name in _FLUID:
        lines.append(f"fluid.{name} = {_fmt(getattr(config.fluid, name))}")
    for side, bc in (("left", config.bc_left), ("right", config.bc_right)):
        for name in _BC:
            v = getattr(bc, name)
            if v is not None:
                lines.append(f"bc.{side}.{name} = {_fmt(v)}")
    for i, reg in enumerate(config.init):
        for name in _REGION:
            v = getattr(reg, name)
            if v is None or (name != "level" and v == getattr(Region(level=0.0), name)):
                continue
            lines.append(f"init.{i}.{name} = {_fmt(v)}")
    if config.probes:
        lines.append(f"output.probes = {_fmt(config.probes)}")
    return "\n".join(lines) + "\n"


def _still_water() -> SimConfig:
    return SimConfig(
        profile=ProfileSpec(length=100.0, radius=1.0), cells=100, t_end=10.0, output_every=1.0,
        init=(Region(level=0.2),), probes=(50,),
    )


def _dam_break() -> SimConfig:
    return SimConfig(
        profile=ProfileSpec(length=100.0, radius=1.0), cells=200, t_end=10.0, output_every=0.5,
        init=(Region(x_end=50.0, level=0.5), Region(level=-0.5)), probes=(50, 100, 150),
    )


def _water_hammer() -> SimConfig:
    return SimConfig(
        profile=ProfileSpec(length=1000.0, radius=1.0), cells=200, t_end=8.5, output_every=0.005,
        bc_left=BoundaryCondition("reservoir", ratio=1.0),
        bc_right=BoundaryCondition("valve", discharge=math.pi, close_time=0.0),
        init=(Region(ratio=1.0, velocity=1.0),), probes=(100, 199),
    )


def _pipe_filling() -> SimConfig:
    return SimConfig(
        profile=ProfileSpec(length=100.0, radius=0.5), cells=100, t_end=2.0, output_every=0.05,
        bc_left=BoundaryCondition("reservoir", ratio=1.001), bc_right=BoundaryCondition("wall"),
        init=(Region(level=0.0),), probes=(25, 50, 75),
    )


def _varying_section() -> SimConfig:
    return SimConfig(
        profile=ProfileSpec(length=50.0, radius=1.0, bump_amplitude=0.1, bump_center=25.0, bump_width=20.0),
        cells=100, t_end=800.0, output_every=50.0,
        bc_left=BoundaryCondition("discharge", discharge=1.0),
        bc_right=BoundaryCondition("reservoir", level=0.3),
        init=(Region(head=0.3, discharge=1.0),), probes=(25, 50, 75),
    )


PRESETS = {
    "still-water": _still_water,
    "dam-break-fs": _dam_break,
    "water-hammer": _water_hammer,
    "pipe-filling": _pipe_filling,
    "varying-section-steady": _varying_section,
}


def preset(name: str) -> SimConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
