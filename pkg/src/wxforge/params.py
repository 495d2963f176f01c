"""Per-family augmentation parameter records and the intensity tables.

Each augmentation family has a flat parameter record (a frozen dataclass)
whose fields carry range metadata. Intensity levels 1..5 are rows of a
versioned TOML table shipped with the package; presets saved from the
preview service live in the same file under a ``custom`` namespace, so
hand calibration feeds batch generation directly.

Note the level-to-parameter mappings are repo-authored calibration choices,
tuned by visual inspection; treat them as defaults, not measurements.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import (
    LevelOutOfRangeError,
    ParamRangeError,
    ParseError,
    UnknownFamilyError,
)

FAMILIES = (
    "overcast",
    "dense_fog",
    "shadow_sunglare",
    "rain_streaks",
    "wet_street_lens_droplets",
    "puddles",
    "rain_composition",
)

LEVELS = (1, 2, 3, 4, 5)


def _meta(kind: str, lo=None, hi=None, step=None) -> dict:
    return {"kind": kind, "min": lo, "max": hi, "step": step}


@dataclass(frozen=True)
class OvercastParams:
    """Gray-sky desaturation: global desaturation plus sky recoloring."""

    amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    sky_gray: tuple[int, int, int] = field(metadata=_meta("rgb"))
    sky_weight: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class FogParams:
    """Distance fog: exponential extinction toward an airlight color."""

    beta: float = field(metadata=_meta("float", 0.0, 1.0, 0.0005))
    airlight: tuple[int, int, int] = field(metadata=_meta("rgb"))
    blur_sigma_max: float = field(metadata=_meta("float", 0.0, 16.0, 0.1))
    overcast_amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class SunParams:
    """Sun glare, saturation lift, and projected object shadows."""

    elevation: float = field(metadata=_meta("float", 0.05, math.pi / 2, 0.01))
    glare_sigma: float = field(metadata=_meta("float", 1.0, 400.0, 1.0))
    glare_gain: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    saturation_boost: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    shadow_strength: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class RainStreakParams:
    """Particle rain streaks over an overcast base."""

    count: float = field(metadata=_meta("float", 0.0, 5000.0, 10.0))  # per megapixel
    length_px: tuple[float, float] = field(metadata=_meta("range", 1.0, 200.0, 1.0))
    angle_mean: float = field(metadata=_meta("float", 0.0, math.pi, 0.01))
    angle_jitter: float = field(metadata=_meta("float", 0.0, 0.8, 0.01))
    alpha: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    streak_color: tuple[int, int, int] = field(metadata=_meta("rgb"))
    overcast_amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class ReflectionParams:
    """Wet-street mirror reflections, optionally with lens droplets."""

    reflectivity: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    roughness_blur: float = field(metadata=_meta("float", 0.0, 16.0, 0.1))
    droplet_count: int = field(metadata=_meta("int", 0, 500, 1))
    droplet_radius_px: tuple[float, float] = field(metadata=_meta("range", 1.0, 100.0, 1.0))
    droplet_alpha: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    overcast_amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class PuddleParams:
    """Noise-shaped road puddles with mirror reflections."""

    noise_frequency: float = field(metadata=_meta("float", 0.001, 1.0, 0.001))
    threshold: float = field(metadata=_meta("float", -1.0, 1.0, 0.01))
    reflectivity: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    overcast_amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


@dataclass(frozen=True)
class RainCompositionParams:
    """Composite rain: overcast, reflections, light fog, streaks, droplets."""

    overcast_amount: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    sky_weight: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    sky_gray: tuple[int, int, int] = field(metadata=_meta("rgb"))
    reflectivity: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    roughness_blur: float = field(metadata=_meta("float", 0.0, 16.0, 0.1))
    fog_beta: float = field(metadata=_meta("float", 0.0, 1.0, 0.0005))
    fog_airlight: tuple[int, int, int] = field(metadata=_meta("rgb"))
    fog_blur_sigma_max: float = field(metadata=_meta("float", 0.0, 16.0, 0.1))
    streak_count: float = field(metadata=_meta("float", 0.0, 5000.0, 10.0))
    streak_length_px: tuple[float, float] = field(metadata=_meta("range", 1.0, 200.0, 1.0))
    streak_angle_mean: float = field(metadata=_meta("float", 0.0, math.pi, 0.01))
    streak_angle_jitter: float = field(metadata=_meta("float", 0.0, 0.8, 0.01))
    streak_alpha: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))
    streak_color: tuple[int, int, int] = field(metadata=_meta("rgb"))
    droplet_count: int = field(metadata=_meta("int", 0, 500, 1))
    droplet_radius_px: tuple[float, float] = field(metadata=_meta("range", 1.0, 100.0, 1.0))
    droplet_alpha: float = field(metadata=_meta("float", 0.0, 1.0, 0.01))


PARAM_TYPES: dict[str, type] = {
    "overcast": OvercastParams,
    "dense_fog": FogParams,
    "shadow_sunglare": SunParams,
    "rain_streaks": RainStreakParams,
    "wet_street_lens_droplets": ReflectionParams,
    "puddles": PuddleParams,
    "rain_composition": RainCompositionParams,
}


def validate_params(family: str, params) -> None:
    """Check every field of a parameter record against its declared range.

    Raises :class:`ParamRangeError` naming the offending field.
    """
    cls = param_type(family)
    if not isinstance(params, cls):
        raise ParamRangeError("params", f"expected {cls.__name__}")
    for f in fields(cls):
        meta = f.metadata
        value = getattr(params, f.name)
        kind = meta.get("kind")
        if kind in ("float", "int"):
            lo, hi = meta.get("min"), meta.get("max")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ParamRangeError(f.name, f"expected a number, got {value!r}")
            if lo is not None and value < lo:
                raise ParamRangeError(f.name, f"{value} below minimum {lo}")
            if hi is not None and value > hi:
                raise ParamRangeError(f.name, f"{value} above maximum {hi}")
        elif kind == "rgb":
            if (
                not isinstance(value, (tuple, list))
                or len(value) != 3
                or any(not (0 <= int(c) <= 255) for c in value)
            ):
                raise ParamRangeError(f.name, f"expected RGB triple 0..255, got {value!r}")
        elif kind == "range":
            if (
                not isinstance(value, (tuple, list))
                or len(value) != 2
                or value[0] > value[1]
            ):
                raise ParamRangeError(f.name, f"expected [lo, hi] with lo <= hi, got {value!r}")
            lo, hi = meta.get("min"), meta.get("max")
            if lo is not None and value[0] < lo:
                raise ParamRangeError(f.name, f"{value[0]} below minimum {lo}")
            if hi is not None and value[1] > hi:
                raise ParamRangeError(f.name, f"{value[1]} above maximum {hi}")


def param_type(family: str) -> type:
    try:
        return PARAM_TYPES[family]
    except KeyError:
        raise UnknownFamilyError(f"unknown family {family!r}") from None


def family_schema(family: str) -> dict:
    """Machine-readable field schema for one family (drives UI forms)."""
    cls = param_type(family)
    level3 = None
    try:
        level3 = params_to_dict(default_tables().row(family, 3))
    except Exception:
        pass
    out = []
    for f in fields(cls):
        entry = {"name": f.name, **{k: v for k, v in f.metadata.items() if v is not None}}
        if level3 is not None:
            entry["default"] = level3[f.name]
        out.append(entry)
    return {"family": family, "fields": out}


def params_to_dict(params) -> dict:
    d = {}
    for f in fields(params):
        v = getattr(params, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def params_from_dict(family: str, data: dict):
    """Build and validate a family record from plain JSON/TOML values."""
    cls = param_type(family)
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ParamRangeError(sorted(unknown)[0], "unknown parameter field")
    missing = set(known) - set(data)
    if missing:
        raise ParamRangeError(sorted(missing)[0], "missing parameter field")
    kwargs: dict[str, Any] = {}
    for name, f in known.items():
        v = data[name]
        kind = f.metadata.get("kind")
        if kind == "rgb":
            try:
                v = tuple(int(c) for c in v)
            except (TypeError, ValueError):
                raise ParamRangeError(name, f"expected RGB triple, got {v!r}") from None
        elif kind == "range":
            try:
                v = tuple(float(c) for c in v)
            except (TypeError, ValueError):
                raise ParamRangeError(name, f"expected [lo, hi], got {v!r}") from None
        elif kind == "int":
            if not isinstance(v, (int, float)) or isinstance(v, bool) or int(v) != v:
                raise ParamRangeError(name, f"expected an integer, got {v!r}")
            v = int(v)
        kwargs[name] = v
    params = cls(**kwargs)
    validate_params(family, params)
    return params


# ---------------------------------------------------------------------------
# Intensity tables


@dataclass(frozen=True)
class Preset:
    """Named custom parameter row saved from the preview service."""

    name: str
    family: str
    params: Any
    note: str = ""
    created_at: str = ""


class IntensityTables:
    """Family x level parameter rows plus custom presets."""

    def __init__(self, rows: dict[str, dict[int, Any]], presets: dict[str, dict[str, Preset]],
                 version: int = 1, path: Path | None = None):
        self.rows = rows
        self.presets = presets
        self.version = version
        self.path = path

    def row(self, family: str, level: int):
        if family not in PARAM_TYPES:
            raise UnknownFamilyError(f"unknown family {family!r}")
        if level not in LEVELS:
            raise LevelOutOfRangeError(f"level must be 1..5, got {level}")
        try:
            return self.rows[family][level]
        except KeyError:
            raise ParseError(f"tables define no row for {family} level {level}") from None

    def preset(self, family: str, name: str) -> Preset:
        try:
            return self.presets[family][name]
        except KeyError:
            raise ParseError(f"no preset {name!r} for family {family!r}") from None

    def find_preset(self, ref: str, family: str | None = None) -> Preset:
        """Resolve ``custom/<name>`` (or plain name), optionally scoped by family."""
        name = ref.split("/", 1)[1] if ref.startswith("custom/") else ref
        if family is not None:
            return self.preset(family, name)
        matches = [p[name] for p in self.presets.values() if name in p]
        if not matches:
            raise ParseError(f"no preset named {name!r}")
        if len(matches) > 1:
            raise ParseError(f"preset name {name!r} is ambiguous; pass --family")
        return matches[0]

    def add_preset(self, preset: Preset) -> None:
        family_presets = self.presets.setdefault(preset.family, {})
        if preset.name in family_presets:
            from .errors import DuplicatePresetError

            raise DuplicatePresetError(
                f"preset {preset.name!r} already exists for {preset.family}"
            )
        validate_params(preset.family, preset.params)
        family_presets[preset.name] = preset


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ParseError(f"cannot serialize {type(v).__name__} to TOML")


def dump_tables(tables: IntensityTables) -> str:
    """Serialize tables to TOML (restricted scalar/array subset)."""
    lines = [f"version = {tables.version}", ""]
    for family in FAMILIES:
        for level in LEVELS:
            row = tables.rows.get(family, {}).get(level)
            if row is None:
                continue
            lines.append(f"[{family}.{level}]")
            for key, value in params_to_dict(row).items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
    for family in sorted(tables.presets):
        for name, preset in sorted(tables.presets[family].items()):
            lines.append(f'[custom.{family}."{name}"]')
            if preset.note:
                lines.append(f"note = {_toml_value(preset.note)}")
            if preset.created_at:
                lines.append(f"created_at = {_toml_value(preset.created_at)}")
            for key, value in params_to_dict(preset.params).items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
    return "\n".join(lines)


def parse_tables(text: str, path: Path | None = None) -> IntensityTables:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"invalid tables file: {exc}") from exc
    version = int(doc.pop("version", 1))
    custom = doc.pop("custom", {})
    rows: dict[str, dict[int, Any]] = {}
    for family, levels in doc.items():
        if family not in PARAM_TYPES:
            raise ParseError(f"unknown family section [{family}]")
        if not isinstance(levels, dict):
            raise ParseError(f"section [{family}] must contain level sub-tables")
        for level_key, data in levels.items():
            try:
                level = int(level_key)
            except ValueError:
                raise ParseError(f"bad level key [{family}.{level_key}]") from None
            if level not in LEVELS:
                raise ParseError(f"level must be 1..5, got [{family}.{level_key}]")
            rows.setdefault(family, {})[level] = params_from_dict(family, data)
    presets: dict[str, dict[str, Preset]] = {}
    for family, named in custom.items():
        if family not in PARAM_TYPES:
            raise ParseError(f"unknown family in [custom.{family}]")
        for name, data in named.items():
            data = dict(data)
            note = data.pop("note", "")
            created_at = data.pop("created_at", "")
            presets.setdefault(family, {})[name] = Preset(
                name=name,
                family=family,
                params=params_from_dict(family, data),
                note=note,
                created_at=created_at,
            )
    return IntensityTables(rows, presets, version=version, path=path)


def load_tables(path) -> IntensityTables:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        from .errors import IoError

        raise IoError(f"cannot read tables file {p}: {exc}") from exc
    return parse_tables(text, path=p)


def save_tables(tables: IntensityTables, path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dump_tables(tables))


_DEFAULT_TABLES: IntensityTables | None = None


def default_tables() -> IntensityTables:
    """The package's shipped intensity tables (loaded once)."""
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        text = (
            importlib.resources.files("wxforge")
            .joinpath("data/intensity_tables.toml")
            .read_text()
        )
        _DEFAULT_TABLES = parse_tables(text)
    return _DEFAULT_TABLES


def resolve_intensity(family: str, level: int, tables: IntensityTables | None = None):
    """Parameter record for one family at one intensity level."""
    t = tables if tables is not None else default_tables()
    return t.row(family, level)


def subset_name(family: str, level) -> str:
    return f"{family}_{level}"


def parse_subset_name(name: str) -> tuple[str, int | str]:
    """Split ``<family>_<level>`` back into its parts."""
    for family in sorted(PARAM_TYPES, key=len, reverse=True):
        prefix = family + "_"
        if name.startswith(prefix):
            tail = name[len(prefix):]
            if tail.isdigit():
                return family, int(tail)
            return family, tail
    raise ParseError(f"subset name {name!r} does not start with a known family")
