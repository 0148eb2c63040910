import csv
import json

import numpy as np
import pytest
import yaml

from qle.cli import main
from qle.config import load_config, parse_config
from qle.errors import ValidationError


def base(**over):
    raw = {
        "schema": "qle-config-v1",
        "reference": {"kind": "schwarzschild", "mass": 1.0},
        "surface": {"type": "round", "radius": 4.0},
        "resolution": {"n": 24},
    }
    raw.update(over)
    return raw


def run(tmp_path, command, raw, name="out"):
    cfg = tmp_path / f"{name}.yaml"
    cfg.write_text(yaml.safe_dump(raw))
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out)])
    report = json.loads((out / f"{command}.json").read_text())
    return code, report, out


# -- configuration -----------------------------------------------------------


@pytest.mark.parametrize(
    "raw, reason",
    [
        (base(extra=1), "unknown keys"),
        (base(surface={"radius": 4.0, "colour": "red"}), "unknown keys"),
        (base(schema="qle-config-v0"), "schema"),
        (base(resolution={"n": 6}), "at least 8"),
        (base(resolution={"lmax": 7.5}), "integer"),
        (base(tolerances={"isometry": 0.0}), "positive"),
        (base(tolerances={"gradient": -1e-3}), "positive"),
        (base(seed=-1), "seed"),
        (base(surface={"type": "cube"}), "surface.type"),
        (base(surface={"type": "profile"}), "R coefficients"),
    ],
)
def test_invalid_configs_rejected(raw, reason):
    with pytest.raises(ValidationError) as err:
        parse_config(raw)
    assert reason in err.value.reason


def test_defaults_and_echo_roundtrip():
    cfg = parse_config({"schema": "qle-config-v1"})
    assert cfg.resolution.n == 48 and cfg.tolerances.isometry == 1e-8
    again = parse_config({k: v for k, v in cfg.echo().items() if v is not None})
    assert again.echo() == cfg.echo()


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: [unclosed\n")
    with pytest.raises(ValidationError):
        load_config(bad)


# -- commands ----------------------------------------------------------------


def test_identity_energy_is_zero(tmp_path):
    code, rep, out = run(tmp_path, "energy", base())
    assert code == 0
    assert abs(rep["results"]["energy"]) <= 1e-10
    assert (out / "energy.timings.json").exists()
    assert "total_seconds" not in json.dumps(rep)


def test_negative_mass_exit_2(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "energy", base(reference={"kind": "schwarzschild", "mass": -1.0}))
    assert code == 2
    assert rep["error"]["reason"] == "mass must be nonnegative"
    assert "mass must be nonnegative" in capsys.readouterr().err


def test_unknown_option_exit_2(tmp_path):
    code, rep, _ = run(tmp_path, "energy", base(options={"dump_feilds": True}))
    assert code == 2
    assert rep["error"]["details"]["keys"] == ["dump_feilds"]


def test_energy_matches_closed_form_and_dumps_fields(tmp_path):
    raw = base(
        reference={"kind": "minkowski"},
        world={"kind": "schwarzschild", "mass": 1.0},
        options={"dump_fields": True},
    )
    code, rep, out = run(tmp_path, "energy", raw)
    assert code == 0
    assert rep["results"]["energy"] == pytest.approx(4.0 * (1 - np.sqrt(0.5)), abs=1e-10)
    with open(out / "energy_fields.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["u", "rho", "reference_density", "physical_density", "tau"]
    assert len(rows) == 25


def test_written_data_file_reproduces_energy(tmp_path):
    raw = base(
        reference={"kind": "minkowski"},
        world={"kind": "schwarzschild", "mass": 1.0},
        options={"write_data": "data.csv"},
    )
    _, first, out = run(tmp_path, "energy", raw, name="a")
    raw2 = base(reference={"kind": "minkowski"}, surface={"data_file": str(out / "data.csv")})
    code, second, _ = run(tmp_path, "energy", raw2, name="b")
    assert code == 0
    assert second["results"]["energy"] == pytest.approx(first["results"]["energy"], abs=1e-10)


def test_optimize_exit_codes(tmp_path):
    raw = base(
        reference={"kind": "minkowski"},
        world={"kind": "schwarzschild", "mass": 1.0},
        surface={"type": "round", "radius": 4.0, "world_tau": [0, 0, 0.3], "tau": [0, 0.2]},
        options={"max_iter": 1, "lmax": 4},
    )
    code, rep, _ = run(tmp_path, "optimize", raw, name="short")
    assert code == 3
    assert rep["error"]["details"]["stop"] == "max iterations"
    assert rep["results"]["converged"] is False
    raw["options"]["max_iter"] = 50
    code, rep, _ = run(tmp_path, "optimize", raw, name="long")
    assert code == 0 and rep["results"]["converged"]


def test_reports_are_byte_stable(tmp_path):
    raw = base(options={"directions": [[0, 1], [0, 0, 1]]})
    _, _, a = run(tmp_path, "first-variation", raw, name="a")
    _, _, b = run(tmp_path, "first-variation", raw, name="b")
    assert (a / "first-variation.json").read_bytes() == (b / "first-variation.json").read_bytes()


@pytest.mark.parametrize(
    "command", ["second-variation", "stability", "identity-suite", "dirichlet", "reilly-check"]
)
def test_commands_run_on_default_scenario(tmp_path, command):
    raw = base(resolution={"n": 16, "radial_points": 24, "lmax": 12})
    if command == "reilly-check":
        raw["options"] = {"forms": 1, "resolutions": [16, 24]}
    code, rep, _ = run(tmp_path, command, raw)
    assert code == 0, rep.get("error")
    assert rep["command"] == command


def test_verify_all_subset(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "verify-all", base(options={"checks": [10]}))
    assert code == 0
    assert rep["results"]["all_passed"]
    assert capsys.readouterr().out.startswith("[PASS] 10")


# -- sweeps ------------------------------------------------------------------


def read_sweep(out):
    with open(out / "sweep.csv") as fh:
        return list(csv.DictReader(fh)), open(out / "sweep.csv").readline().strip()


def test_empty_sweep_writes_header_only(tmp_path):
    raw = base(options={"parameters": {"radius": {"start": 3, "stop": 10, "num": 0}}})
    code, rep, out = run(tmp_path, "sweep", raw)
    assert code == 0 and rep["results"]["rows"] == 0
    rows, header = read_sweep(out)
    assert rows == [] and header.startswith("radius,status,reason,energy")


def test_sweep_radius_matches_closed_form(tmp_path):
    raw = base(
        reference={"kind": "minkowski"},
        world={"kind": "schwarzschild", "mass": 1.0},
        options={"parameters": {"radius": [3.0, 5.0, 10.0]}},
    )
    code, _, out = run(tmp_path, "sweep", raw)
    assert code == 0
    for row in read_sweep(out)[0]:
        R = float(row["radius"])
        assert abs(float(row["energy"]) - R * (1 - np.sqrt(1 - 2 / R))) <= 1e-8


def test_sweep_tau_amplitude_is_even(tmp_path):
    raw = base(
        reference={"kind": "minkowski"},
        world={"kind": "schwarzschild", "mass": 1.0},
        surface={"type": "round", "radius": 5.0, "tau": [0, 0, 1.0]},
        options={"parameters": {"tau_amplitude": [-0.2, -0.1, 0.1, 0.2]}},
    )
    code, _, out = run(tmp_path, "sweep", raw)
    assert code == 0
    E = [float(r["energy"]) for r in read_sweep(out)[0]]
    assert abs(E[0] - E[3]) <= 1e-9 and abs(E[1] - E[2]) <= 1e-9


def test_sweep_records_failures_in_row(tmp_path):
    raw = base(options={"parameters": {"reference_mass": [1.0, -1.0]}})
    code, rep, out = run(tmp_path, "sweep", raw)
    assert code == 0 and rep["results"]["failures"] == 1
    rows = read_sweep(out)[0]
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"] == "error" and rows[1]["reason"] == "mass must be nonnegative"
    assert rows[1]["energy"] == ""


def test_sweep_rejects_unknown_parameter(tmp_path):
    code, rep, _ = run(tmp_path, "sweep", base(options={"parameters": {"spin": [0.1]}}))
    assert code == 2 and rep["error"]["details"]["keys"] == ["spin"]
