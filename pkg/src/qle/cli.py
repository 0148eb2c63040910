"""Command line: ``qle <command> --config <path> [--out dir] [--seed n]``.

Each command writes ``<command>.json`` (byte-stable for a fixed config) and
``<command>.timings.json`` into the output directory.  Exit codes: 0 success,
2 invalid input, 3 numerical failure, 4 failed acceptance check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import acceptance
from . import surface as sk
from .config import load_config
from .embedding import identity_suite
from .energy import energy_density, quasilocal_energy, write_physical_data
from .errors import ConvergenceError, QLEError, ValidationError
from .reference import check_vacuum_static, null_convergence_min_eig
from .reilly import (
    cmc_stability_eigen,
    collar_extrapolation,
    dirichlet_residual,
    dirichlet_solve,
    make_domain,
    reilly_function_sides,
    reilly_identity_sides,
)
from .scenario import build_scenario
from .sweep import parse_parameters, sweep
from .variation import (
    directional_derivative,
    fd_directional_derivative,
    first_variation_density,
    optimize_tau,
    second_variation,
    variation_identity_suite,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------
def _plain(obj):
    """JSON-safe copy: numpy to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def save_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")


def save_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else _cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _options(cfg, allowed):
    unknown = sorted(set(cfg.options) - set(allowed))
    if unknown:
        raise ValidationError("unknown options for this command", keys=unknown)
    return {k: cfg.options.get(k, v) for k, v in allowed.items()}


def _coeff_lists(value, where):
    if not isinstance(value, list) or not all(isinstance(v, list) for v in value):
        raise ValidationError(f"{where} must be a list of coefficient lists")
    return [[float(c) for c in v] for v in value]


def _sup(a):
    return float(np.max(np.abs(a)))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_energy(cfg, out):
    opts = _options(cfg, {"dump_fields": False, "write_data": None})
    sc = build_scenario(cfg)
    emb = sc.embed()
    br = quasilocal_energy(sc.data, emb, tol=cfg.tolerances.isometry)
    rho = energy_density(sc.data, emb, tol=cfg.tolerances.isometry)
    if opts["dump_fields"]:
        header = ["u", "rho", "reference_density", "physical_density", "tau"]
        cols = [sc.grid.u, rho, br.reference_density, br.physical_density, emb.tau]
        save_csv(out / "energy_fields.csv", header, zip(*cols))
    if opts["write_data"]:
        out.mkdir(parents=True, exist_ok=True)
        write_physical_data(out / str(opts["write_data"]), sc.data)
    return {
        **br.as_dict(),
        "rho_min": float(rho.min()),
        "rho_max": float(rho.max()),
        "solver": emb.solve_info,
    }


def cmd_first_variation(cfg, out):
    opts = _options(cfg, {"directions": [[0.0, 0.0, 1.0]], "dshift": 0.0, "fd_check": True, "h": 1e-3})
    sc = build_scenario(cfg)
    emb = sc.embed()
    rep = first_variation_density(sc.data, emb)
    lmax = min(cfg.resolution.lmax, sc.grid.n - 1)
    modes = sk.legendre_coefficients(sc.grid, rep.E_tau)[: lmax + 1]
    directions = []
    for coeffs in _coeff_lists(opts["directions"], "options.directions"):
        dtau = sc.field(coeffs)
        formula = directional_derivative(sc.data, emb, dtau, opts["dshift"]).dE_ds
        entry = {"coefficients": coeffs, "formula": formula}
        if opts["fd_check"]:
            fd = fd_directional_derivative(sc.data, emb, dtau, float(opts["h"]), opts["dshift"])
            entry.update(fd=fd, mismatch=abs(fd - formula))
        directions.append(entry)
    return {
        "E_V_sup": _sup(rep.E_V),
        "E_tau_sup": _sup(rep.E_tau),
        "E_tau_modes": modes,
        "criticality_residual": _sup(rep.E_V) + _sup(rep.E_tau),
        "critical": _sup(rep.E_V) + _sup(rep.E_tau) <= cfg.tolerances.criticality,
        "rho_sup": _sup(rep.rho),
        "directions": directions,
    }


def cmd_second_variation(cfg, out):
    default = [[0.0] * ell + [1.0] for ell in range(1, 7)]
    opts = _options(cfg, {"directions": default, "dshift": 0.0, "fd_check": True, "h": 0.02})
    sc = build_scenario(cfg)
    surf = sc.slice_surface
    rows = []
    for coeffs in _coeff_lists(opts["directions"], "options.directions"):
        rep = second_variation(
            surf,
            sc.field(coeffs),
            float(opts["dshift"]),
            fd_check=bool(opts["fd_check"]),
            h=float(opts["h"]),
            rel_tol=cfg.tolerances.fd_relative,
        )
        rows.append({"coefficients": coeffs, **rep.as_dict()})
    values = [r["value"] for r in rows]
    return {
        "directions": rows,
        "min_value": min(values) if values else None,
        "nonnegative": all(v >= -cfg.tolerances.positivity for v in values),
    }


def cmd_optimize(cfg, out):
    opts = _options(cfg, {"lmax": 8, "max_iter": 50})
    sc = build_scenario(cfg)
    res = optimize_tau(
        sc.data,
        sc.reference,
        sc.tau,
        lmax=int(opts["lmax"]),
        tol=cfg.tolerances.gradient,
        max_iter=int(opts["max_iter"]),
    )
    result = {
        "converged": res.converged,
        "reason": res.reason,
        "energy": res.energy,
        "iterations": res.iterations,
        "tau_coefficients": res.coefficients,
        "gradient": res.gradient,
        "residuals": res.residuals,
        "history": res.history,
    }
    if not res.converged:
        raise _Partial(result, ConvergenceError("optimization did not converge", stop=res.reason))
    return result


def _domain(cfg, ref, opts, n):
    return make_domain(
        ref,
        float(opts["r_out"] or cfg.surface.radius),
        r_in=opts["r_in"],
        n_u=n,
        n_r=n,
        collar=cfg.resolution.collar,
    )


def cmd_reilly_check(cfg, out):
    opts = _options(cfg, {"r_in": None, "r_out": None, "forms": 5, "resolutions": [16, 32, 64]})
    ref = cfg.reference.build(cfg.base_dir)
    rng = np.random.default_rng(cfg.seed)
    center = 0.5 * ((opts["r_in"] or 0.0) + float(opts["r_out"] or cfg.surface.radius))
    table = []
    for k in range(int(opts["forms"])):
        Y = acceptance.random_one_form(rng, center=center)
        for n in opts["resolutions"]:
            r = reilly_identity_sides(_domain(cfg, ref, opts, int(n)), Y)
            rel = r["mismatch"] / max(abs(r["boundary"]), abs(r["bulk"]), 1e-300)
            table.append({"form": k, "n": int(n), "relative_mismatch": rel, **r})
    dom = _domain(cfg, ref, opts, cfg.resolution.radial_points)
    tau = 0.1 * sk.legendre_field(dom.grid, rng.normal(size=6))
    sol = dirichlet_solve(dom, tau, L=cfg.resolution.lmax)
    func = reilly_function_sides(dom, sol)
    result = {"domain": dom.labels, "one_forms": table, "function": func}
    if dom.inner == "horizon":
        result["collar"] = collar_extrapolation(
            dom, lambda d: reilly_function_sides(d, sol)["boundary"]
        )
    return result


def cmd_dirichlet(cfg, out):
    opts = _options(cfg, {"r_in": None, "r_out": None, "dump_modes": False})
    ref = cfg.reference.build(cfg.base_dir)
    dom = _domain(cfg, ref, opts, cfg.resolution.radial_points)
    coeffs = np.asarray(cfg.surface.tau or [0.0])
    sol = dirichlet_solve(dom, coeffs, L=cfg.resolution.lmax)
    f = sol.sample(dom)
    zeta = dom.lobatto[0]
    V = ref.V(dom.radius(zeta))[:, None]
    interior = V[:, 0] > 0
    tau_grid = sk.legendre_field(dom.grid, coeffs)
    boundary = f[-1] - V[-1, 0] * tau_grid
    if opts["dump_modes"]:
        header = ["R"] + [f"g_{ell}" for ell in range(sol.L + 1)]
        rows = zip(dom.radius(sol.zeta), *sol.modes)
        save_csv(out / "dirichlet_modes.csv", header, rows)
    return {
        "domain": dom.labels,
        "residual": dirichlet_residual(sol),
        "boundary_error": _sup(boundary),
        "inner_value_sup": _sup(sol.radial_values(dom.zeta_in)),
        "max_ratio_f_over_V": _sup(f[interior] / V[interior]),
        "max_tau": _sup(tau_grid),
    }


def cmd_stability(cfg, out):
    _options(cfg, {})
    sc = build_scenario(cfg)
    rep = cmc_stability_eigen(sc.slice_surface, min(cfg.resolution.lmax, sc.grid.n - 1))
    return {
        "min_eigenvalue": rep.min_eigenvalue,
        "stable": rep.stable,
        "eigenvalues": rep.eigenvalues,
        "rayleigh_by_mode": rep.rayleigh_by_mode,
    }


def cmd_identity_suite(cfg, out):
    _options(cfg, {})
    sc = build_scenario(cfg)
    emb = sc.embed()
    br = quasilocal_energy(sc.data, emb, tol=cfg.tolerances.isometry)
    rng = np.random.default_rng(cfg.seed)
    surf = sc.slice_surface
    beta = 0.1 * sc.field(rng.normal(size=5))
    P_u = 0.1 * sc.grid.sin_u * sc.field(rng.normal(size=4))
    ref = sc.reference
    return {
        "embedding": identity_suite(emb),
        "energy_paths": br.path_mismatch,
        "variation": variation_identity_suite(surf, beta, P_u),
        "reference": {
            "vacuum": check_vacuum_static(ref, ref.cosmological_constant, seed=cfg.seed)
            if ref.closed_form
            else None,
            "null_convergence_min_eig": null_convergence_min_eig(ref, seed=cfg.seed),
        },
    }


def cmd_sweep(cfg, out):
    opts = _options(cfg, {"parameters": None, "second_variation": None, "dshift": 0.0})
    if opts["parameters"] is None:
        raise ValidationError("sweep needs options.parameters")
    params = parse_parameters(opts["parameters"])
    direction = opts["second_variation"]
    if direction is not None:
        direction = _coeff_lists([direction], "options.second_variation")[0]
    header, rows = sweep(cfg, params, direction=direction, dshift=float(opts["dshift"]))
    save_csv(out / "sweep.csv", header, ([r[h] for h in header] for r in rows))
    failures = sum(r["status"] != "ok" for r in rows)
    return {"columns": header, "rows": len(rows), "failures": failures, "table": "sweep.csv"}


def cmd_verify_all(cfg, out):
    opts = _options(cfg, {"checks": None})
    numbers = opts["checks"]
    if numbers is not None and not set(numbers) <= set(acceptance.CHECKS):
        raise ValidationError("unknown acceptance checks", checks=numbers)
    results, timings = [], {}
    for res in acceptance.run_all(cfg.seed, numbers):
        print(res.line())
        results.append(res.as_dict())
        timings[str(res.number)] = res.seconds
    passed = all(r["passed"] for r in results)
    # per-check seconds are timing data and stay out of the main report
    for r in results:
        r["measured"] = {k: v for k, v in r["measured"].items() if "seconds" not in k}
        r["cases"] = [
            {k: v for k, v in c.items() if k != "seconds"} if isinstance(c, dict) else c
            for c in r["cases"]
        ]
    result = {"checks": results, "all_passed": passed}
    if not passed:
        raise _Partial(result, None, exit_code=EXIT_ACCEPTANCE, timings=timings)
    return result, timings


COMMANDS = {
    "energy": cmd_energy,
    "first-variation": cmd_first_variation,
    "second-variation": cmd_second_variation,
    "optimize": cmd_optimize,
    "reilly-check": cmd_reilly_check,
    "dirichlet": cmd_dirichlet,
    "stability": cmd_stability,
    "identity-suite": cmd_identity_suite,
    "sweep": cmd_sweep,
    "verify-all": cmd_verify_all,
}


class _Partial(Exception):
    """A command finished with a report but must exit non-zero."""

    def __init__(self, result, error, exit_code=EXIT_NUMERIC, timings=None):
        super().__init__("partial result")
        self.result, self.error, self.exit_code, self.timings = result, error, exit_code, timings


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="qle", description="Quasi-local energy in static references")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--seed", type=int, default=None)
    return p


def _error_payload(exc):
    return {"type": type(exc).__name__, "reason": exc.reason, "details": exc.details}


def run(command, config_path, out=Path("."), seed=None):
    """Execute one command and return the exit code."""
    out = Path(out)
    report = {"command": command}
    timings = {}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        cfg = load_config(config_path)
        if seed is not None:
            if seed < 0:
                raise ValidationError("seed must be a nonnegative integer")
            cfg = replace(cfg, seed=seed)
        report["config"] = cfg.echo()
        value = COMMANDS[command](cfg, out)
        result, extra = value if isinstance(value, tuple) else (value, {})
        report["results"] = result
        timings.update(extra)
    except _Partial as part:
        report["results"] = part.result
        timings.update(part.timings or {})
        code = part.exit_code
        if part.error is not None:
            report["error"] = _error_payload(part.error)
    except QLEError as exc:
        report["error"] = _error_payload(exc)
        code = exc.exit_code
    timings["total_seconds"] = time.perf_counter() - t0
    report["exit_code"] = code
    save_json(out / f"{command}.json", report)
    save_json(out / f"{command}.timings.json", timings)
    if "error" in report:
        print(json.dumps(_plain(report["error"]), sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
