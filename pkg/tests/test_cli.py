"""End-to-end tests of the batch front end.

These drive main() with argv lists and real temp directories, asserting
exit codes, machine-readable error records, and the determinism contract
(same config + seed => byte-identical files, worker count included).
"""

import json

import numpy as np
import pytest

from serrin_torsion.cli import (
    ConfigError,
    main,
    manifold_spec,
    parse_grid,
    parse_point,
    parse_points,
    validate_radii,
)
from serrin_torsion.reduced import constants


# -- config parsing units ----------------------------------------------------


def test_parse_grid_comma_list():
    assert parse_grid("0.05, 0.1,0.2", "eps") == [0.05, 0.1, 0.2]


def test_parse_grid_log_range():
    vals = parse_grid("0.02:0.2:8", "eps")
    assert len(vals) == 8
    assert np.allclose(vals, np.geomspace(0.02, 0.2, 8))


def test_parse_grid_linear_range():
    assert np.allclose(parse_grid("0.1:0.3:3:lin", "t"), [0.1, 0.2, 0.3])


def test_parse_grid_rejects_junk():
    with pytest.raises(ConfigError):
        parse_grid("0.1:0.2", "eps")
    with pytest.raises(ConfigError):
        parse_grid("0.1:0.2:4:cubic", "eps")
    with pytest.raises(ConfigError):
        parse_grid("a,b", "eps")
    with pytest.raises(ConfigError):
        parse_grid("0:0.2:4", "eps")


def test_validate_radii_bounds():
    assert validate_radii([0.5], "eps") == [0.5]
    with pytest.raises(ConfigError):
        validate_radii([0.6], "eps")
    with pytest.raises(ConfigError):
        validate_radii([0.0], "eps")


def test_parse_points_and_dimension_mismatch():
    assert parse_points("0,0 ; 0.3,0.1", 2) == [[0.0, 0.0], [0.3, 0.1]]
    with pytest.raises(ConfigError):
        parse_point("0.1,0.2,0.3", 2)
    with pytest.raises(ConfigError):
        parse_points(" ; ", 2)


def test_manifold_spec_validation():
    assert manifold_spec({"run": {"manifold": "round", "curvature": "2.0"}}) == {
        "manifold": "round",
        "dimension": 2,
        "curvature": 2.0,
    }
    with pytest.raises(ConfigError):
        manifold_spec({"run": {"manifold": "conformal", "dimension": "3"}})
    with pytest.raises(ConfigError):
        manifold_spec({"run": {"manifold": "saddle"}})
    with pytest.raises(ConfigError):
        manifold_spec({"run": {"dimension": "1"}})


# -- verify-constants ---------------------------------------------------------


def test_verify_constants_prints_table(capsys):
    assert main(["verify-constants"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "N alpha beta J1 c"
    assert len(out) == 6  # header + N = 2..6
    alpha, beta, J1, c = constants(2)
    assert out[1] == "2 %r %r %r %r" % (alpha, beta, J1, c)


def test_verify_constants_rejects_dimension_one(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[constants]\nn_min = 1\n")
    assert main(["verify-constants", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "config_error"
    assert err["error"]["subcommand"] == "verify-constants"


# -- sweep ---------------------------------------------------------------------


FLAT_SWEEP = """
[run]
manifold = flat
dimension = 2

[sweep]
points = 0,0
eps = 0.05, 0.1
"""


def _run_sweep(tmp_path, cfg_text, name, extra=()):
    cfg = tmp_path / (name + ".ini")
    cfg.write_text(cfg_text)
    out = tmp_path / name
    code = main(
        ["sweep", "--config", str(cfg), "--out", str(out), *extra]
    )
    return code, out


def test_flat_sweep_exit_zero_and_deterministic(tmp_path):
    code1, out1 = _run_sweep(tmp_path, FLAT_SWEEP, "a")
    code2, out2 = _run_sweep(tmp_path, FLAT_SWEEP, "b")
    code3, out3 = _run_sweep(tmp_path, FLAT_SWEEP, "c", ("--workers", "2"))
    assert code1 == code2 == code3 == 0
    csv1 = (out1 / "sweep.csv").read_bytes()
    assert csv1 == (out2 / "sweep.csv").read_bytes()
    assert csv1 == (out3 / "sweep.csv").read_bytes()
    json1 = (out1 / "sweep.json").read_bytes()
    assert json1 == (out3 / "sweep.json").read_bytes()
    payload = json.loads(json1)
    assert payload["invariants_ok"] is True
    assert payload["summaries"][0]["max_v_norm"] < 1e-10
    header = csv1.decode().splitlines()[0]
    assert header == "p0,p1,eps,v0,v_norm,a_norm,J,volume,area,phi_eps,F,steps"


def test_sweep_rejects_eps_outside_envelope(tmp_path, capsys):
    bad = FLAT_SWEEP.replace("0.05, 0.1", "0.6")
    cfg = tmp_path / "bad.ini"
    cfg.write_text(bad)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert "outside (0, 0.5]" in err["error"]["message"]


def test_sweep_requires_config(capsys):
    assert main(["sweep"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "config_error"


ROUND_SWEEP = """
[run]
manifold = round
dimension = 2
curvature = 1.0

[sweep]
points = 0,0,1
eps = 0.1, 0.2
"""


def test_round_sweep_takes_ambient_points(tmp_path):
    code, out = _run_sweep(tmp_path, ROUND_SWEEP, "round")
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("p0,p1,p2,eps")
    payload = json.loads((out / "sweep.json").read_text())
    assert payload["summaries"][0]["v_norm_slope"] > 1.9


def test_round_sweep_rejects_off_sphere_point(tmp_path, capsys):
    code, _ = _run_sweep(
        tmp_path, ROUND_SWEEP.replace("0,0,1", "0,0,2"), "off"
    )
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert "sphere" in err["error"]["message"]


# -- solve ----------------------------------------------------------------------


def test_solve_writes_flat_record(tmp_path):
    cfg = tmp_path / "solve.ini"
    cfg.write_text(
        "[run]\nmanifold = flat\n\n[solve]\npoint = 0,0\neps = 0.1\n"
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    rec = json.loads((out / "solve.json").read_text())
    alpha = constants(2)[0]
    assert abs(rec["phi_eps"] - alpha) < 1e-9
    assert rec["a_norm"] < 1e-12
    assert rec["manifold"] == {"manifold": "flat", "dimension": 2}
    assert (out / "solve.log").exists()


# -- find-critical then foliate --------------------------------------------------


CONF_RUN = "[run]\nmanifold = conformal\ndimension = 2\n"


@pytest.fixture(scope="module")
def critical_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("critical")
    cfg = tmp / "crit.ini"
    cfg.write_text(CONF_RUN + "\n[find-critical]\neps = 0.1\n")
    out = tmp / "out"
    code = main(["find-critical", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    return out / "find_critical.json"


def test_find_critical_json_contents(critical_run):
    payload = json.loads(critical_run.read_text())
    row = payload["rows"][0]
    assert row["a_norm"] < 1e-9
    assert row["dist_over_eps2"] < 1.0
    assert payload["reference"]["eps"] == 0.1
    assert len(payload["reference"]["point"]) == 2
    assert "limit_point" in payload
    csv_path = critical_run.parent / "find_critical.csv"
    header = csv_path.read_text().splitlines()[0]
    assert header == "eps,p0,p1,a_norm,solves,dist_over_eps2"


def test_foliate_from_critical_run(tmp_path, critical_run):
    cfg = tmp_path / "fol.ini"
    cfg.write_text(
        CONF_RUN + "\n[foliate]\ncritical = %s\nt_grid = 0.02:0.12:8\n" % critical_run
    )
    out = tmp_path / "out"
    assert main(["foliate", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "foliation.json").read_text())
    cert = payload["certificate"]
    assert cert["nested"] is True
    assert 0.999 <= cert["slope_zero_min"] <= cert["slope_zero_max"] <= 1.001
    table = (out / "foliation.csv").read_text().splitlines()
    assert table[0] == "t,node,omega"
    rows = [line.split(",") for line in table[1:]]
    t_values = sorted({row[0] for row in rows})
    assert len(t_values) == 8
    assert len(rows) == 8 * sum(1 for row in rows if row[0] == t_values[0])
    assert all(float(row[2]) > 0 for row in rows)


def test_foliate_without_critical_run_is_dependency_error(tmp_path, capsys):
    cfg = tmp_path / "fol.ini"
    cfg.write_text(CONF_RUN)
    assert main(["foliate", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "dependency_error"


def test_foliate_rejects_mismatched_manifold(tmp_path, capsys, critical_run):
    cfg = tmp_path / "fol.ini"
    cfg.write_text(
        "[run]\nmanifold = flat\n\n[foliate]\ncritical = %s\n" % critical_run
    )
    assert main(["foliate", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "dependency_error"
    assert "different" in err["error"]["message"] or "manifold" in err["error"]["message"]


# -- profile ---------------------------------------------------------------------


def test_profile_flat_ratio_is_one(tmp_path):
    cfg = tmp_path / "prof.ini"
    cfg.write_text(
        "[run]\nmanifold = flat\n\n[profile]\nvolumes = 0.01, 0.02, 0.05, 0.1\n"
    )
    out = tmp_path / "out"
    assert main(["profile", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "profile.json").read_text())
    assert abs(payload["fitted_v_power_coefficient"]) < 1e-8
    assert payload["predicted_coefficient"] == 0.0
    lines = (out / "profile.csv").read_text().splitlines()
    assert lines[0] == "volume,eps_used,J_ball,T_euclidean,ratio"
    ratios = [float(line.split(",")[-1]) for line in lines[1:]]
    assert max(abs(r - 1.0) for r in ratios) < 1e-10


# -- run-acceptance ----------------------------------------------------------------


def test_run_acceptance_subset_passes(tmp_path, capsys):
    cfg = tmp_path / "acc.ini"
    cfg.write_text("[acceptance]\nchecks = 1, 12\n")
    out = tmp_path / "out"
    assert (
        main(["run-acceptance", "--config", str(cfg), "--out", str(out)]) == 0
    )
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "acceptance 01 steklov_exactness: PASS"
    assert lines[1] == "acceptance 12 polynomial_solver_oracle: PASS"
    assert lines[2].startswith("gate: PASS")
    payload = json.loads((out / "acceptance.json").read_text())
    assert payload["gate_passed"] is True
    assert [r["id"] for r in payload["records"]] == [1, 12]
    assert all("seconds" not in r for r in payload["records"])


def test_run_acceptance_documented_discrepancy_gate(tmp_path, capsys):
    cfg = tmp_path / "acc.ini"
    cfg.write_text("[acceptance]\nchecks = 6\n")
    assert main(["run-acceptance", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "documented discrepancy" in out
    assert main(["run-acceptance", "--config", str(cfg), "--strict"]) == 1
    out = capsys.readouterr().out
    assert "gate: FAIL" in out


def test_run_acceptance_rejects_unknown_check(tmp_path, capsys):
    cfg = tmp_path / "acc.ini"
    cfg.write_text("[acceptance]\nchecks = 13\n")
    assert main(["run-acceptance", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "config_error"


def test_error_record_written_to_out_dir(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nmanifold = saddle\n\n[solve]\neps = 0.1\n")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 2
    record = json.loads((out / "error.json").read_text())
    assert record["error"]["kind"] == "config_error"
    capsys.readouterr()
