import json

import numpy as np
import pytest
from click.testing import CliRunner

from pmflow.cli import main
from pmflow.selfsim_states import beta_detach, map_RW_to_PW

GAMMA = 1.4
V_INF = 0.5


@pytest.fixture()
def runner():
    return CliRunner()


def _read(path):
    return path.read_bytes()


# -- angles ---------------------------------------------------------------------


def test_angles_emits_ordered_critical_angles(runner):
    res = runner.invoke(main, ["angles", "--gamma", "1.4", "--v-inf", "0.5"])
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert payload["beta_s"] < payload["beta_d"]
    assert list(payload) == sorted(payload)


def test_angles_isothermal(runner):
    res = runner.invoke(main, ["angles", "--gamma", "1.0", "--v-inf", "0.5"])
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert 0.0 < payload["beta_s"] < payload["beta_d"]


def test_angles_rejects_nonpositive_speed(runner):
    res = runner.invoke(main, ["angles", "--gamma", "1.4", "--v-inf", "0"])
    assert res.exit_code == 2


# -- polar ----------------------------------------------------------------------


def test_polar_writes_samples_and_critical_header(runner, tmp_path):
    out = tmp_path / "polar.csv"
    res = runner.invoke(main, [
        "polar", "--gamma", "1.4", "--u-inf", "2.0",
        "--samples", "64", "--out", str(out),
    ])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    head = "\n".join(comments)
    for token in ("u_hat0", "u_d", "u_s", "theta_d", "theta_s"):
        assert token in head
    assert body[0] == "u,v,rho,beta"
    assert len(body) == 65


def test_polar_rejects_subsonic_incoming(runner, tmp_path):
    res = runner.invoke(main, [
        "polar", "--u-inf", "0.9", "--out", str(tmp_path / "p.csv"),
    ])
    assert res.exit_code == 2


def test_polar_rejects_empty_sampling(runner, tmp_path):
    res = runner.invoke(main, [
        "polar", "--u-inf", "2.0", "--samples", "0",
        "--out", str(tmp_path / "p.csv"),
    ])
    assert res.exit_code == 2


# -- solve ----------------------------------------------------------------------


def test_solve_zero_angle_writes_artifacts(runner, tmp_path):
    out = tmp_path / "run0"
    res = runner.invoke(main, [
        "solve", "--gamma", "1.4", "--v-inf", "0.5", "--beta", "0",
        "--grid", "32x16", "--out", str(out),
    ])
    assert res.exit_code == 0
    for name in ("solution.csv", "shock.csv", "report.json"):
        assert (out / name).is_file()
    rpt = json.loads((out / "report.json").read_text())
    assert rpt["report"]["converged"] is True
    assert rpt["config"]["grid"] == "32x16"
    u = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)[:, 2]
    assert np.all(u == 0.0)


def test_solve_reruns_are_byte_identical(runner, tmp_path):
    args = ["solve", "--v-inf", "0.5", "--beta", "0.1",
            "--grid", "32x16"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert runner.invoke(main, args + ["--out", str(out_a)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(out_b)]).exit_code == 0
    for name in ("solution.csv", "shock.csv", "report.json"):
        assert _read(out_a / name) == _read(out_b / name)


def test_solve_refuses_strong_region(runner, tmp_path):
    bad = beta_detach(GAMMA, V_INF) + 0.01
    res = runner.invoke(main, [
        "solve", "--v-inf", "0.5", "--beta", str(bad),
        "--out", str(tmp_path / "r"),
    ])
    assert res.exit_code == 2
    assert "weak attached branch" in res.output


def test_solve_steady_wedge_parameters_match_selfsimilar(runner, tmp_path):
    u_inf, u0 = map_RW_to_PW(GAMMA, V_INF, 0.1)
    out_v, out_u = tmp_path / "v", tmp_path / "u"
    res_v = runner.invoke(main, [
        "solve", "--v-inf", "0.5", "--beta", "0.1",
        "--grid", "32x16", "--out", str(out_v),
    ])
    res_u = runner.invoke(main, [
        "solve", "--u-inf", repr(u_inf), "--u0", repr(u0),
        "--grid", "32x16", "--out", str(out_u),
    ])
    assert res_v.exit_code == 0
    assert res_u.exit_code == 0
    a = np.loadtxt(out_v / "shock.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(out_u / "shock.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(a - b)) < 1e-9


def test_solve_rejects_mixed_parameterizations(runner, tmp_path):
    res = runner.invoke(main, [
        "solve", "--v-inf", "0.5", "--beta", "0.1", "--u-inf", "2.0",
        "--out", str(tmp_path / "r"),
    ])
    assert res.exit_code == 2


def test_solve_rejects_malformed_grid(runner, tmp_path):
    res = runner.invoke(main, [
        "solve", "--v-inf", "0.5", "--beta", "0.1", "--grid", "64",
        "--out", str(tmp_path / "r"),
    ])
    assert res.exit_code == 2


# -- verify ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "run"
    res = CliRunner().invoke(main, [
        "solve", "--v-inf", "0.5", "--beta", "0.2",
        "--grid", "64x32", "--out", str(out),
    ])
    assert res.exit_code == 0
    return out


def test_verify_passes_and_writes_report(runner, run_dir):
    res = runner.invoke(main, ["verify", str(run_dir)])
    assert res.exit_code == 0
    payload = json.loads((run_dir / "admissibility.json").read_text())
    assert payload["verdict"] is True
    assert len(payload["checks"]) == 6


def test_verify_missing_directory(runner, tmp_path):
    res = runner.invoke(main, ["verify", str(tmp_path / "nope")])
    assert res.exit_code == 2


def test_verify_fails_on_corrupted_field(runner, run_dir, tmp_path):
    import shutil

    bad = tmp_path / "bad"
    shutil.copytree(run_dir, bad)
    txt = (bad / "solution.csv").read_text().splitlines()
    rows = [txt[0]]
    for line in txt[1:]:
        s, t, u = line.split(",")
        rows.append(f"{s},{t},{float(u) + 0.05!r}")
    (bad / "solution.csv").write_text("\n".join(rows) + "\n")
    res = runner.invoke(main, ["verify", str(bad)])
    assert res.exit_code == 4
    payload = json.loads((bad / "admissibility.json").read_text())
    assert payload["verdict"] is False


# -- sweep ----------------------------------------------------------------------


def test_sweep_writes_directories_and_summary(runner, tmp_path):
    out = tmp_path / "sw"
    res = runner.invoke(main, [
        "sweep", "--v-inf", "0.5", "--beta-list", "0.05,0.1,0.15",
        "--grid", "32x16", "--jobs", "2", "--out", str(out),
    ])
    assert res.exit_code == 0
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("beta,iterations,mu_el")
    assert len(lines) == 4
    for k in range(3):
        assert (out / f"beta_{k:03d}" / "report.json").is_file()
    betas = [float(l.split(",")[0]) for l in lines[1:]]
    assert betas == [0.05, 0.1, 0.15]
    assert all(l.endswith("supersonic-corner") for l in lines[1:])


def test_sweep_rejects_empty_list(runner, tmp_path):
    res = runner.invoke(main, [
        "sweep", "--v-inf", "0.5", "--beta-list", " ",
        "--out", str(tmp_path / "sw"),
    ])
    assert res.exit_code == 2


def test_sweep_thread_env_override(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("PMFLOW_THREADS", "zzz")
    res = runner.invoke(main, [
        "sweep", "--v-inf", "0.5", "--beta-list", "0.05",
        "--grid", "32x16", "--out", str(tmp_path / "sw"),
    ])
    assert res.exit_code == 2


# -- plotdata -------------------------------------------------------------------


def test_plotdata_shock_two_columns(runner, run_dir):
    res = runner.invoke(main, ["plotdata", str(run_dir), "--what", "shock"])
    assert res.exit_code == 0
    rows = [l.split() for l in res.output.splitlines() if l]
    assert all(len(r) == 2 for r in rows)
    assert len(rows) == 65


def test_plotdata_field_three_columns_with_breaks(runner, run_dir):
    res = runner.invoke(main, ["plotdata", str(run_dir), "--what", "field"])
    assert res.exit_code == 0
    lines = res.output.splitlines()
    assert "" in lines
    rows = [l.split() for l in lines if l]
    assert all(len(r) == 3 for r in rows)
    assert len(rows) == 65 * 33


def test_plotdata_polar(runner, tmp_path):
    out = tmp_path / "polar.csv"
    assert runner.invoke(main, [
        "polar", "--u-inf", "2.0", "--samples", "8", "--out", str(out),
    ]).exit_code == 0
    res = runner.invoke(main, ["plotdata", str(tmp_path), "--what", "polar"])
    assert res.exit_code == 0
    rows = [l.split() for l in res.output.splitlines() if l]
    assert len(rows) == 8
    assert all(len(r) == 2 for r in rows)


def test_plotdata_rejects_unknown_kind(runner, run_dir):
    res = runner.invoke(main, ["plotdata", str(run_dir), "--what", "mesh"])
    assert res.exit_code == 2
