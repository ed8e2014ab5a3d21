import os

from proxhomotopy.cli import main


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("kind = sparse\nunknown_key = 3\n")
    code = main(["fig1", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_calibration_exits_3(tmp_path, capsys):
    code = main(
        [
            "fig1", "--seed", "0", "--m", "800", "--out", str(tmp_path),
            "--calibration", str(tmp_path / "absent.txt"),
        ]
    )
    assert code == 3
    assert "calibrate" in capsys.readouterr().err


def test_divergence_exits_4(tmp_path, capsys):
    cfg = tmp_path / "diverge.cfg"
    cfg.write_text(
        "kind = sparse\n"
        "n = 60\n"
        "s = 10\n"
        "m_list = 12\n"
        "seeds = 0\n"
        "sigma = 0\n"
        "t_max = 400\n"
        "constants = explicit\n"
        "rho = 0.9\n"
        "rho_restricted = 0.000001\n"
        "stop_tol = 0\n"
    )
    code = main(["fig1", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 4
    assert "divergence" in capsys.readouterr().err


def test_explicit_constants_run_and_plotdata(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "kind = sparse\n"
        "n = 40\n"
        "s = 2\n"
        "sigma = 0.001\n"
        "t_max = 30\n"
        "constants = explicit\n"
        "rho = 0.6\n"
        "rho_restricted = 0.3\n"
        "xi = 2\n"
        "xi_restricted = 1\n"
    )
    out_dir = tmp_path / "runs"
    # measurement counts and seeds arrive through the flag overrides
    code = main(
        [
            "fig1", "--config", str(cfg), "--m", "120", "--seed", "0,1",
            "--out", str(out_dir), "--no-timing",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "constants source: explicit" in stdout
    traces = sorted(
        str(out_dir / name) for name in os.listdir(out_dir) if "summary" not in name
    )
    assert len(traces) == 2
    plot_dir = tmp_path / "plots"
    code = main(["plotdata", *traces, "--out", str(plot_dir)])
    assert code == 0
    assert len(os.listdir(plot_dir)) == 2


def test_invariants_command(capsys):
    code = main(["invariants", "--seed", "0", "--t-max", "40"])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "sparse" in out and "lowrank" in out


def test_calibrate_writes_file(tmp_path, capsys):
    out = tmp_path / "constants.txt"
    code = main(["calibrate", "--seed", "0", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert "sparse.C_rho" in text and "C_dev" in text
