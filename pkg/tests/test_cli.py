import numpy as np
import pytest

from nudgefem import cli, harness

FAST = ["--nu", "1", "--beta", "0", "--n", "4", "--ratio-k", "2",
        "--t-final", "0.2", "--dt", "0.05"]


def test_parser_defaults():
    args = cli.build_parser().parse_args(["run"])
    assert args.nu == 1e-6
    assert args.beta == 1.0
    assert args.n == 12
    assert args.ratio_k == 3
    assert args.dt is None
    assert args.t_final == 4.0
    assert args.interpolant == "pc"
    args = cli.build_parser().parse_args(["convergence"])
    assert args.n_list == "9,18,36"
    args = cli.build_parser().parse_args(["lagrange"])
    assert args.mode == "H3h"


def test_verify_exit_codes(monkeypatch):
    monkeypatch.setattr(cli.verify, "run_property_suite",
                        lambda: [("a", True, "ok"), ("b", True, "ok")])
    assert cli.main(["verify"]) == cli.EXIT_OK
    monkeypatch.setattr(cli.verify, "run_property_suite",
                        lambda: [("a", True, "ok"), ("b", False, "bad")])
    assert cli.main(["verify"]) == cli.EXIT_GATE


def test_run_writes_csv(tmp_path, capsys):
    code = cli.main(["run", *FAST, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    series = harness.parse_decay_csv(tmp_path / "run.csv")
    assert len(series.samples) == 5
    assert series.samples[-1].t == pytest.approx(0.2)
    assert "wrote" in capsys.readouterr().out


def test_decay_writes_per_beta_files(tmp_path):
    code = cli.main(["decay", *FAST, "--betas", "0,1", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert (tmp_path / "decay_beta0.csv").exists()
    assert (tmp_path / "decay_beta1.csv").exists()


def test_convergence_gate(tmp_path):
    common = ["convergence", "--nu", "1", "--beta", "0", "--ratio-k", "2",
              "--n-list", "4,8", "--t-final", "0.5", "--out", str(tmp_path)]
    assert cli.main(common) == cli.EXIT_OK
    report = harness.parse_convergence_csv(tmp_path / "convergence.csv")
    assert [p[1] for p in report.points] == [4, 8]
    # an impossible gate trips exit code 2
    assert cli.main(common + ["--gate-slope-min", "99"]) == cli.EXIT_GATE


def test_gamma_prints_prediction(capsys):
    code = cli.main(["gamma", "--nu", "1e-2", "--beta", "0.02",
                     "--n", "16", "--ratio-k", "2"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "gamma=0.01" in out  # min(nu/(2 H^2), beta/2) = beta/2


def test_config_file_merge(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nu = 1\nbeta = 0\nn = 4\nratio-k = 2\n"
                   "t_final = 0.2\ndt = 0.05\nout = IGNORED\n")
    out = tmp_path / "out"
    # CLI --out overrides the config file; other values come from the file
    code = cli.main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == cli.EXIT_OK
    series = harness.parse_decay_csv(out / "run.csv")
    assert "nu=1 " in series.config_echo
    assert "N=4" in series.config_echo


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("viscosity = 1\n")
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_ERROR


def test_invalid_flags_exit_error():
    assert cli.main(["run", "--nu", "-1", "--t-final", "0.1"]) == cli.EXIT_ERROR
