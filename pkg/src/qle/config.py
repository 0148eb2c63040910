"""Run configuration: a YAML mapping with a fixed schema tag and strict keys."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ValidationError
from .reference import build_reference, load_radial_table

__all__ = [
    "SCHEMA",
    "ReferenceSpec",
    "SurfaceSpec",
    "ResolutionSpec",
    "ToleranceSpec",
    "RunConfig",
    "load_config",
    "parse_config",
]

SCHEMA = "qle-config-v1"


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ValidationError(f"{where} must be a mapping")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown keys in {where}", keys=unknown)


def _float_list(value, where):
    if value is None:
        return ()
    if not isinstance(value, (list, tuple)):
        raise ValidationError(f"{where} must be a list of numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where} must be a list of numbers") from exc


def _number(value, where):
    if isinstance(value, bool):
        raise ValidationError(f"{where} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where} must be a number") from exc


def _block_from(cls, raw, where, convert):
    allowed = [f.name for f in fields(cls)]
    raw = {} if raw is None else raw
    _check_keys(raw, allowed, where)
    optional = {f.name for f in fields(cls) if f.default is None}
    return cls(**{k: convert(k, v) for k, v in raw.items() if not (v is None and k in optional)})


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "schwarzschild"
    mass: float = 1.0
    cosmological_constant: float = 0.0
    table: str | None = None

    def build(self, base_dir=Path(".")):
        table = None
        if self.table is not None:
            path = Path(self.table)
            table = load_radial_table(path if path.is_absolute() else base_dir / path)
        return build_reference(self.kind, self.mass, self.cosmological_constant, table=table)

    @classmethod
    def parse(cls, raw, where):
        def conv(k, v):
            if k in ("kind", "table"):
                if not isinstance(v, str):
                    raise ValidationError(f"{where}.{k} must be a string")
                return v
            return _number(v, f"{where}.{k}")

        return _block_from(cls, raw, where, conv)


@dataclass(frozen=True)
class SurfaceSpec:
    """``round`` (radius), ``profile`` (Legendre series of R(x) and q(x)) or
    ``metric`` (radius^2 (1 + sum c_l P_l) times the unit round metric).

    ``tau`` are the Legendre coefficients of the time function in the
    reference; ``world_tau`` those of the physical surface in the world.
    """

    type: str = "round"
    radius: float = 4.0
    R: tuple = ()
    q: tuple = ()
    conformal: tuple = ()
    tau: tuple = ()
    world_tau: tuple = ()
    data_file: str | None = None

    @classmethod
    def parse(cls, raw):
        def conv(k, v):
            if k == "type":
                if v not in ("round", "profile", "metric"):
                    raise ValidationError("surface.type must be round, profile or metric")
                return v
            if k == "data_file":
                if not isinstance(v, str):
                    raise ValidationError("surface.data_file must be a path")
                return v
            if k == "radius":
                return _number(v, "surface.radius")
            return _float_list(v, f"surface.{k}")

        spec = _block_from(cls, raw, "surface", conv)
        if spec.type == "profile" and not spec.R:
            raise ValidationError("profile surfaces need R coefficients")
        if spec.radius <= 0:
            raise ValidationError("surface.radius must be positive")
        return spec


@dataclass(frozen=True)
class ResolutionSpec:
    n: int = 48
    lmax: int = 32
    radial_points: int = 64
    collar: float | None = None

    @classmethod
    def parse(cls, raw):
        def conv(k, v):
            if k == "collar":
                val = _number(v, "resolution.collar")
                if val <= 0:
                    raise ValidationError("resolution.collar must be positive")
                return val
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValidationError(f"resolution.{k} must be an integer")
            if v < 8:
                raise ValidationError(f"resolution.{k} must be at least 8")
            return v

        return _block_from(cls, raw, "resolution", conv)


@dataclass(frozen=True)
class ToleranceSpec:
    isometry: float = 1e-8
    embedding: float = 1e-9
    gradient: float = 1e-6
    identity: float = 1e-9
    criticality: float = 1e-7
    fd_relative: float = 1e-2
    positivity: float = 1e-8

    @classmethod
    def parse(cls, raw):
        def conv(k, v):
            val = _number(v, f"tolerances.{k}")
            if not val > 0:
                raise ValidationError(f"tolerances.{k} must be positive")
            return val

        return _block_from(cls, raw, "tolerances", conv)


@dataclass(frozen=True)
class RunConfig:
    schema: str = SCHEMA
    seed: int = 0
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    world: ReferenceSpec | None = None
    surface: SurfaceSpec = field(default_factory=SurfaceSpec)
    resolution: ResolutionSpec = field(default_factory=ResolutionSpec)
    tolerances: ToleranceSpec = field(default_factory=ToleranceSpec)
    options: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def echo(self):
        """Plain mapping of the parsed configuration, for reports."""

        def block(obj):
            if obj is None:
                return None
            return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}

        return {
            "schema": self.schema,
            "seed": self.seed,
            "reference": block(self.reference),
            "world": block(self.world),
            "surface": block(self.surface),
            "resolution": block(self.resolution),
            "tolerances": block(self.tolerances),
            "options": _plain(self.options),
        }


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_plain(x) for x in v]
    return v


TOP_KEYS = ("schema", "seed", "reference", "world", "surface", "resolution", "tolerances", "options")


def parse_config(raw, base_dir=Path(".")):
    if not isinstance(raw, dict):
        raise ValidationError("configuration must be a mapping")
    _check_keys(raw, TOP_KEYS, "configuration")
    if raw.get("schema") != SCHEMA:
        raise ValidationError("schema must be " + SCHEMA, found=raw.get("schema"))
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed must be a nonnegative integer")
    options = raw.get("options") or {}
    if not isinstance(options, dict):
        raise ValidationError("options must be a mapping")
    world = raw.get("world")
    return RunConfig(
        schema=SCHEMA,
        seed=seed,
        reference=ReferenceSpec.parse(raw.get("reference"), "reference"),
        world=None if world is None else ReferenceSpec.parse(world, "world"),
        surface=SurfaceSpec.parse(raw.get("surface")),
        resolution=ResolutionSpec.parse(raw.get("resolution")),
        tolerances=ToleranceSpec.parse(raw.get("tolerances")),
        options=dict(options),
        base_dir=Path(base_dir),
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError("cannot read configuration", path=str(path)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError("configuration is not valid YAML", path=str(path)) from exc
    return parse_config(raw, path.parent)
