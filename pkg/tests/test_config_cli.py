import csv

import numpy as np
import pytest

from atvmc import cli, runner
from atvmc.config import ExperimentConfig
from atvmc.errors import ConfigError
from atvmc.io import data_rows, read_trajectory

SMALL = """\
[model]
n_sites = 6
g1 = 4.0
g2 = 2.0

[ansatz]
kind = jastrow

[integrator]
dt = 0.01

[ground_state]
iterations = 300

[run]
t_total = 0.1

[output]
directory = {out}
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL.format(out=tmp_path / "out" / "nested"))
    return path


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    again = ExperimentConfig.from_text(cfg.to_ini())
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_overrides_and_types():
    cfg = ExperimentConfig.from_text("[model]\nn_sites = 6\n", ["adaptive.enabled=off", "integrator.dt=2e-3"])
    assert cfg.adaptive.enabled is False and cfg.integrator.dt == 2e-3 and cfg.model.n_sites == 6


@pytest.mark.parametrize("text,line", [
    ("[model]\nn_sites = 6\nbogus = 1\n", 3),
    ("[model]\n\nn_sites = six\n", 3),
    ("[nonsense]\nx = 1\n", 1),
    ("[ansatz]\nkind = rbm\ndensity = 0\n", 3),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_text(text)
    assert info.value.line == line and f"line {line}" in str(info.value)


def test_bad_override():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("", ["model.nope=3"])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("", ["no_dot=3"])


def test_cli_exit_codes(tmp_path, small_config, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nn_sites = 6\ng1 = abc\n")
    assert cli.main(["validate-config", str(bad)]) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err
    assert cli.main(["validate-config", str(tmp_path / "missing.ini")]) == cli.EXIT_CONFIG
    assert cli.main(["validate-config", str(small_config)]) == cli.EXIT_OK
    # a step-size tolerance nothing can meet ends in a stiffness failure
    stiff = ["--set", "integrator.adaptive_dt=true", "--set", "integrator.tol_step=1e-15",
             "--set", "integrator.dt_min=0.004"]
    assert cli.main(["quench", str(small_config), *stiff]) == cli.EXIT_NUMERICAL
    traj = tmp_path / "out" / "nested" / "trajectory.csv"
    meta, _, rows = read_trajectory(traj)
    assert "StiffnessError" in meta["error"] and rows == []


def test_ground_state_checkpoint_is_reproducible(tmp_path, small_config):
    out = tmp_path / "out" / "nested"
    assert not out.exists()
    assert cli.main(["ground-state", str(small_config)]) == 0
    first = (out / "checkpoint.json").read_bytes()
    assert cli.main(["ground-state", str(small_config)]) == 0
    assert (out / "checkpoint.json").read_bytes() == first
    assert (out / "ground_state_summary.json").exists()


def test_quench_outputs(tmp_path, small_config):
    assert cli.main(["quench", str(small_config)]) == 0  # builds the missing checkpoint itself
    out = tmp_path / "out" / "nested"
    meta, cols, rows = read_trajectory(out / "trajectory.csv")
    assert len(rows) == 10  # ceil(t_total / dt)
    assert meta["seed"] == "1234" and len(meta["config_hash"]) == 64
    assert [float(r["time"]) for r in rows] == pytest.approx(np.arange(10) * 0.01)
    assert (out / "trajectory_events.jsonl").exists()


def test_checkpoint_mismatch(tmp_path, small_config):
    cli.main(["ground-state", str(small_config)])
    cfg = ExperimentConfig.from_file(small_config, ["model.n_sites=8"])
    with pytest.raises(ConfigError):
        runner.run_quench(cfg)


def test_compare_zero_time(tmp_path, small_config):
    cfg = ExperimentConfig.from_file(small_config, ["run.t_total=0"])
    _, rows = runner.run_compare(cfg)
    assert len(rows) == 1
    t, sxv, sxe, diff, fid, dist, bound, ok = rows[0]
    assert t == 0 and bound == 0 and ok == 1 and dist < 1e-12
    # the variational ground state at g=4 sits close to the exact one
    assert abs(diff) < 1e-3


def test_compare_eigenstate_quench_is_flat(tmp_path, small_config):
    cfg = ExperimentConfig.from_file(small_config, ["model.g2=4.0", "run.t_total=0.2"])
    path, rows = runner.run_compare(cfg)
    sxv = np.array([r[1] for r in rows])
    sxe = np.array([r[2] for r in rows])
    assert np.ptp(sxe) < 1e-10
    assert np.ptp(sxv) < 1e-4
    assert all(r[7] for r in rows)
    with open(path) as fh:
        header = next(csv.reader(line for line in fh if not line.startswith("#")))
    assert header == list(runner.COMPARISON_COLUMNS)


def test_adaptive_disabled_matches_enabled_without_changes(tmp_path, small_config):
    lam = ["adaptive.lambda_mode=absolute", "adaptive.lambda_value=0"]
    a = ExperimentConfig.from_file(small_config, [*lam, "adaptive.enabled=false"])
    b = ExperimentConfig.from_file(small_config, lam)
    ra = runner.run_quench(a, name="plain")
    rb = runner.run_quench(b, name="adaptive")
    assert data_rows(ra.trajectory) == data_rows(rb.trajectory)
