"""Parameter sweeps over scenarios, one table row per parameter tuple."""

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np

from .energy import energy_density, quasilocal_energy
from .errors import QLEError, ValidationError
from .scenario import build_scenario
from .variation import first_variation_density, second_variation

__all__ = ["PARAMETERS", "RESULT_COLUMNS", "parse_parameters", "apply_parameter", "sweep"]

PARAMETERS = ("radius", "mass", "reference_mass", "tau_amplitude", "conformal_amplitude")
RESULT_COLUMNS = (
    "status",
    "reason",
    "energy",
    "graph_energy",
    "rho_min",
    "rho_max",
    "E_V_sup",
    "E_tau_sup",
    "second_variation",
)


def _values(name, spec):
    if isinstance(spec, dict):
        extra = set(spec) - {"start", "stop", "num"}
        if extra or not {"start", "stop", "num"} <= set(spec):
            raise ValidationError(f"range for {name} needs start, stop and num")
        num = spec["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 0:
            raise ValidationError(f"range for {name} needs a nonnegative integer num")
        return [float(v) for v in np.linspace(float(spec["start"]), float(spec["stop"]), num)]
    if isinstance(spec, list):
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"values for {name} must be numbers") from exc
    raise ValidationError(f"values for {name} must be a list or a range")


def parse_parameters(raw):
    """``{name: values}`` with one or two names; values a list or ``{start, stop, num}``."""
    if not isinstance(raw, dict) or not 1 <= len(raw) <= 2:
        raise ValidationError("sweep needs one or two parameters")
    unknown = sorted(set(raw) - set(PARAMETERS))
    if unknown:
        raise ValidationError("unknown sweep parameters", keys=unknown)
    return [(name, _values(name, spec)) for name, spec in raw.items()]


def apply_parameter(cfg, name, value):
    s = cfg.surface
    if name == "radius":
        return replace(cfg, surface=replace(s, radius=value))
    if name == "mass":
        if cfg.world is None:
            raise ValidationError("a mass sweep needs a world block")
        return replace(cfg, world=replace(cfg.world, mass=value))
    if name == "reference_mass":
        return replace(cfg, reference=replace(cfg.reference, mass=value))
    if name == "tau_amplitude":
        return replace(cfg, surface=replace(s, tau=tuple(value * c for c in s.tau)))
    return replace(cfg, surface=replace(s, conformal=tuple(value * c for c in s.conformal)))


def _point(cfg, direction, dshift):
    sc = build_scenario(cfg)
    emb = sc.embed()
    br = quasilocal_energy(sc.data, emb, tol=cfg.tolerances.isometry)
    rho = energy_density(sc.data, emb, tol=cfg.tolerances.isometry)
    fv = first_variation_density(sc.data, emb)
    row = {
        "energy": br.energy,
        "graph_energy": br.graph_energy,
        "rho_min": float(rho.min()),
        "rho_max": float(rho.max()),
        "E_V_sup": float(np.max(np.abs(fv.E_V))),
        "E_tau_sup": float(np.max(np.abs(fv.E_tau))),
        "second_variation": None,
    }
    if direction is not None:
        surf = sc.slice_surface
        f = sc.field(direction)
        row["second_variation"] = second_variation(surf, f, dshift, fd_check=False).value
    return row


def sweep(cfg, parameters, *, direction=None, dshift=0.0):
    """Evaluate every parameter tuple; failures are recorded in the row."""
    names = [n for n, _ in parameters]
    rows = []
    for combo in itertools.product(*(vals for _, vals in parameters)):
        row = dict(zip(names, combo))
        try:
            point_cfg = cfg
            for name, value in zip(names, combo):
                point_cfg = apply_parameter(point_cfg, name, value)
            row.update(status="ok", reason="", **_point(point_cfg, direction, dshift))
        except QLEError as exc:
            row.update({c: None for c in RESULT_COLUMNS})
            row.update(status="error", reason=exc.reason)
        rows.append(row)
    return names + list(RESULT_COLUMNS), rows
