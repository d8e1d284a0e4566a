import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hopfflow import cli
from hopfflow.config import ConfigError, RunConfig, build_config, env_pairs, parse_config, parse_pairs
from hopfflow.diagnostics import TIMESERIES_COLUMNS
from hopfflow.flow import PositivityFailure, ReducedFlow

FAST = ["--set", "n_u=16", "--set", "n_sigma=16", "--set", "cfl=1.0"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- configuration ------------------------------------------------------------

def test_parse_config_defaults():
    cfg = parse_config("abs_alpha = 2\nabs_beta = 4")
    assert cfg == RunConfig(abs_alpha=2.0, abs_beta=4.0)
    assert (cfg.n_u, cfg.n_sigma, cfg.t_max, cfg.cfl) == (64, 64, 0.49, 0.2)
    assert (cfg.A, cfg.B, cfg.seed) == (10.0, 10.0, 42)


def test_parse_config_comments_and_lists():
    cfg = parse_config("# header\nabs_alpha = 2  # inline\nabs_beta = 4\n\n"
                       "snapshot_times = 0.1, 0.2\nsweep_alpha = 1.5 2\n")
    assert cfg.snapshot_times == (0.1, 0.2) and cfg.sweep_alpha == (1.5, 2.0)


@pytest.mark.parametrize("text,needle", [
    ("abs_alpha = 2\nabs_beta = 4\nt_max = 0.6", "t_max"),
    ("", "moduli are required"),
    ("abs_alpha = 2\nabs_beta = 4\nbogus = 1", "line 3: unknown key 'bogus'"),
    ("abs_alpha = 2\nabs_alpha = 3", "line 2: duplicate key"),
    ("abs_alpha 2", "line 1: expected 'key = value'"),
    ("abs_alpha = 3\nabs_beta = 2", "must not exceed"),
    ("abs_alpha = 1\nabs_beta = 2", "finite number > 1"),
    ("abs_alpha = two\nabs_beta = 2", "cannot parse"),
    ("abs_alpha = 2\nabs_beta = 4\nn_u = 4", "n_u"),
    ("abs_alpha = 2\nabs_beta = 4\ninitial_family = file", "initial_path"),
    ("abs_alpha = 2\nabs_beta = 4\nsnapshot_times = 0.7", "snapshot_times"),
])
def test_parse_config_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_sweep_config_needs_no_moduli():
    assert parse_config("sweep_alpha = 2 3", require_moduli=False).abs_alpha is None


def test_layer_precedence():
    args = cli.make_parser().parse_args(["flow", "--preset", "asym", "--set", "t_max=0.2",
                                         "--seed", "7", "--out", "x"])
    cfg = cli.config_from_args(args, environ={"HOPFFLOW_T_MAX": "0.3", "HOPFFLOW_N_U": "32"})
    assert (cfg.abs_alpha, cfg.abs_beta) == (2.0, 4.0)
    assert cfg.t_max == 0.2 and cfg.n_u == 32 and cfg.seed == 7 and cfg.out_dir == "x"
    with pytest.raises(ConfigError):
        env_pairs({"HOPFFLOW_NOPE": "1"})
    assert env_pairs({"PATH": "/bin", "HOPFFLOW_A": "3"}) == {"A": "3"}


def test_config_file_layer(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("abs_alpha = 1.5\nabs_beta = 3\nt_max = 0.1\n")
    args = cli.make_parser().parse_args(["flow", "--preset", "round", "--config", str(path)])
    cfg = cli.config_from_args(args, environ={})
    assert (cfg.abs_alpha, cfg.abs_beta, cfg.t_max) == (1.5, 3.0, 0.1)
    assert build_config(parse_pairs("abs_alpha=2\nabs_beta=2"), {"abs_beta": "5"}).abs_beta == 5.0


def test_config_errors_exit_1(tmp_path, capsys):
    assert cli.main(["flow", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "moduli are required" in capsys.readouterr().err
    assert cli.main(["flow", "--preset", "asym", "--set", "cfl=2"]) == cli.EXIT_CONFIG
    assert cli.main(["flow", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        cli.main(["nope"])
    assert info.value.code == cli.EXIT_CONFIG


def test_fmt_round_trips():
    assert cli.fmt(0.1) == "0.1" and float(cli.fmt(1 / 3)) == 1 / 3
    assert cli.fmt(None) == "" and cli.fmt(True) == "true" and cli.fmt(np.int64(3)) == "3"


# -- verify ---------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["round", "asym"])
def test_verify_passes(tmp_path, preset):
    code = cli.main(["verify", "--preset", preset, "--out", str(tmp_path),
                     "--set", "samples=200", "--set", "fd_samples=20"])
    assert code == cli.EXIT_OK
    rows = read_csv(tmp_path / "verify.csv")
    assert rows[0] == list(cli.VERIFY_COLUMNS)
    assert all(r[-1] == "true" for r in rows[1:])
    assert "identities passed" in (tmp_path / "verify_summary.txt").read_text()


def test_verify_printed_variant_exits_2(tmp_path):
    code = cli.main(["verify", "--preset", "round", "--out", str(tmp_path), "--set", "samples=100",
                     "--set", "fd_samples=10", "--set", "hessian_variant=printed"])
    assert code == cli.EXIT_IDENTITY
    failed = {r[0] for r in read_csv(tmp_path / "verify.csv")[1:] if r[-1] == "false"}
    assert "det_ghat_identity" in failed


# -- flow ---------------------------------------------------------------------

def test_flow_outputs(tmp_path):
    code = cli.main(["flow", "--preset", "asym", "--out", str(tmp_path), *FAST,
                     "--set", "t_max=0.1", "--set", "snapshot_times=0.05",
                     "--set", "initial_family=cos-bump", "--set", "epsilon=0.01"])
    assert code == cli.EXIT_OK
    rows = read_csv(tmp_path / "timeseries.csv")
    assert rows[0] == list(TIMESERIES_COLUMNS)
    assert len(rows) == 1 + 11 and float(rows[-1][0]) == pytest.approx(0.1)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert {"config", "version", "started_at", "wall_seconds", "termination"} <= set(man)
    assert man["termination"] == "t_max" and man["config"]["abs_beta"] == 4.0
    snaps = sorted((tmp_path / "snapshots").iterdir())
    assert [p.name for p in snaps] == ["phi_t0.05.txt"]
    # the snapshot restarts a run as file initial data
    code = cli.main(["flow", "--preset", "asym", "--out", str(tmp_path / "again"), *FAST,
                     "--set", "t_max=0.02", "--set", "initial_family=file",
                     "--set", f"initial_path={snaps[0]}"])
    assert code == cli.EXIT_OK


def test_flow_inadmissible_exits_3(tmp_path):
    code = cli.main(["flow", "--preset", "asym", "--out", str(tmp_path), *FAST,
                     "--set", "initial_family=cos-bump", "--set", "epsilon=1000"])
    assert code == cli.EXIT_INADMISSIBLE
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["termination"] == "inadmissible_initial_data"


def test_flow_positivity_failure_exits_4(tmp_path, monkeypatch):
    real = ReducedFlow.rhs

    def failing(self, t, phi, with_metric=False):
        if t > 0.05:
            raise PositivityFailure("forced", (0, 0))
        return real(self, t, phi, with_metric)

    monkeypatch.setattr(ReducedFlow, "rhs", failing)
    code = cli.main(["flow", "--preset", "asym", "--out", str(tmp_path), *FAST, "--set", "t_max=0.2"])
    assert code == cli.EXIT_ABORTED
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["termination"] == "positivity_failure" and man["final_t"] <= 0.05
    assert len(read_csv(tmp_path / "timeseries.csv")) >= 2


def test_flow_csv_is_byte_identical_across_runs(tmp_path):
    for name in ("a", "b"):
        assert cli.main(["flow", "--preset", "asym", "--out", str(tmp_path / name), *FAST,
                         "--set", "t_max=0.05"]) == 0
    assert (tmp_path / "a/timeseries.csv").read_bytes() == (tmp_path / "b/timeseries.csv").read_bytes()


# -- static -------------------------------------------------------------------

def test_static_table(tmp_path):
    assert cli.main(["static", "--preset", "asym", "--out", str(tmp_path),
                     "--set", "n_u=16", "--set", "n_sigma=16"]) == 0
    rows = read_csv(tmp_path / "static.csv")
    assert rows[0] == list(cli.STATIC_COLUMNS) and len(rows) == 257
    data = np.array(rows[1:], dtype=float)
    col = {name: data[:, i] for i, name in enumerate(rows[0])}
    scale = 1e-10 * np.abs(data).max()
    assert col["ghat_minus_theta_eig_min"].min() >= -scale
    assert col["ricci_chi_eig_min"].min() >= -scale
    np.testing.assert_allclose(col["det_ghat_phi2"] * col["Z"] ** 3, 1.0, atol=1e-12)


def test_static_round_is_constant(tmp_path):
    assert cli.main(["static", "--preset", "round", "--out", str(tmp_path),
                     "--set", "n_u=8", "--set", "n_sigma=8"]) == 0
    data = np.array(read_csv(tmp_path / "static.csv")[1:], dtype=float)
    np.testing.assert_allclose(data[:, 5], 1.0, atol=1e-13)
    np.testing.assert_allclose(data[:, 6], 2.0, atol=1e-13)


# -- sweep --------------------------------------------------------------------

SWEEP = ["--set", "sweep_alpha=1.5 2 3", *FAST, "--set", "t_max=0.05"]


def test_sweep_cells_and_determinism(tmp_path):
    cfg = parse_config("sweep_alpha = 3, 1.5, 2", require_moduli=False)
    assert cli.sweep_cells(cfg) == [(1.5, 1.5), (1.5, 2.0), (1.5, 3.0), (2.0, 2.0), (2.0, 3.0),
                                    (3.0, 3.0)]
    outs = {}
    for name, workers in (("w1", 1), ("w2", 2), ("w1b", 1)):
        assert cli.main(["sweep", "--out", str(tmp_path / name), *SWEEP,
                         "--set", f"workers={workers}"]) == 0
        outs[name] = (tmp_path / name / "sweep_summary.csv").read_bytes()
    assert outs["w1"] == outs["w2"] == outs["w1b"]
    rows = read_csv(tmp_path / "w1/sweep_summary.csv")
    assert rows[0] == list(cli.SWEEP_COLUMNS) and len(rows) == 7
    assert all(r[-1] == "ok" for r in rows[1:])
    for r in rows[1:]:
        exact = r[cli.SWEEP_COLUMNS.index("round_exact_error")]
        assert (exact != "") == (r[0] == r[1])
        if exact:
            assert float(exact) < 1e-9


def test_sweep_requires_values(tmp_path):
    assert cli.main(["sweep", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hopfflow", "static", "--preset", "round",
                           "--out", str(tmp_path), "--set", "n_u=8", "--set", "n_sigma=8"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "static.csv").exists()
