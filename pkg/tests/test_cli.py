import subprocess
import sys

import numpy as np
import pytest

from henonlab.cli import (
    UsageError,
    build_config,
    build_parser,
    load_config,
    main,
    render_scatter,
    resolve_settings,
)
from henonlab.errors import EmptyData, MissingColumn
from henonlab.experiments import PRESET_ENERGIES, read_csv, write_csv


def settings_for(argv):
    return resolve_settings(build_parser().parse_args(argv))


def test_presets_lists_energies(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out.splitlines()
    classical = [l for l in out if l.startswith("classical-")]
    assert len(classical) == 6
    for line, e in zip(classical, PRESET_ENERGIES):
        assert f"E={e:.5f}" in line
    assert sum(l.startswith("semi-") for l in out) == 4


def test_potential_grid_command(tmp_path):
    argv = ["potential", "--res", "3", "--xrange", "-1", "1", "--yrange", "-1", "1", "--out", str(tmp_path)]
    assert main(argv) == 0
    header, data = read_csv(tmp_path / "potential_grid.csv")
    assert header == ["x1", "x2", "V"] and data.shape == (9, 3)


def test_lyapunov_command_outputs(tmp_path, capsys):
    argv = ["lyapunov", "--x0", "0.20", "--p0", "0.01", "--hbar", "0.004", "--t", "20", "--out", str(tmp_path)]
    assert main(argv) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["semi-x0.2-p0.01-hbar0.004_lyapunov.csv", "semi-x0.2-p0.01-hbar0.004_summary.txt"]
    assert "lambda_final=" in capsys.readouterr().out


def test_simulate_with_plot(tmp_path):
    argv = ["simulate", "--preset", "classical-x0.12-p0.001", "--t", "100", "--out", str(tmp_path), "--plot"]
    assert main(argv) == 0
    svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert svgs == ["classical-x0.12-p0.001_lyapunov.svg", "classical-x0.12-p0.001_section.svg"]


def test_sweep_command(tmp_path, capsys):
    argv = ["sweep", "--x0", "0.2", "--p0", "0.01", "--t", "10", "--sweep", "0,0.001", "--out", str(tmp_path)]
    assert main(argv) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("hbar,") and len(out) == 3
    assert (tmp_path / "semi-x0.2-p0.01_sweep.csv").exists()


def test_sweep_with_failed_member_exits_one(tmp_path):
    argv = ["sweep", "--x0", "0.2", "--p0", "0.01", "--t", "10", "--sweep", "0.001",
            "--g0", "1e-11", "--pi0", "-50", "--out", str(tmp_path)]
    assert main(argv) == 1


def test_missing_initial_data_is_usage_error(capsys):
    assert main(["simulate", "--p0", "0.01"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_domain_error_exit_and_message(tmp_path, capsys):
    argv = ["simulate", "--x0", "0.12", "--p0", "0.001", "--hbar", "0.01", "--out", str(tmp_path)]
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert "HbarTooLarge" in err
    argv = ["lyapunov", "--x0", "0.0", "--p0", "0.0", "--dx2", "0.1", "--t", "1", "--out", str(tmp_path)]
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert "NegativeDiscriminant" in err and "classical-x0-p0" in err
    assert list(tmp_path.iterdir()) == []


def test_unknown_flag_exits_two():
    proc = subprocess.run([sys.executable, "-m", "henonlab", "simulate", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "usage:" in proc.stderr


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scenario\nx0 = 0.3\np0 = 0.01\ndt = 0.01\nstride = 10  # coarse\nhbar = 0.001\n")
    s = settings_for(["simulate", "--config", str(cfg), "--dt", "0.005"])
    assert s["x0"] == 0.3 and s["stride"] == 10 and s["dt"] == 0.005
    c = build_config(s)
    assert c.semiclassical and c.hbar == 0.001 and c.dt == 0.005


def test_every_config_field_is_reachable(tmp_path):
    cfg = tmp_path / "all.cfg"
    cfg.write_text(
        "x0=0.2\np0=0.01\nhbar=0.05\ng0=0.7\npi0=0.1\ndt=0.01\nt=3\ndx2=2e-4\nstride=7\n"
        f"out={tmp_path}\nlabel=run1\nallow_large_hbar=true\n"
    )
    c = build_config(settings_for(["simulate", "--config", str(cfg)]))
    assert (c.x0, c.p0, c.hbar, c.g0, c.pi0, c.dt, c.t_total, c.dx2, c.stride) == (
        0.2, 0.01, 0.05, 0.7, 0.1, 0.01, 3.0, 2e-4, 7)
    assert c.out_dir == str(tmp_path) and c.label == "run1" and c.allow_large_hbar


@pytest.mark.parametrize("text", ["x0 0.2\n", "colour = red\n", "x0 = abc\n"])
def test_bad_config_file(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(UsageError):
        load_config(cfg)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HENONLAB_OUT", str(tmp_path / "env"))
    assert settings_for(["simulate"])["out"] == str(tmp_path / "env")
    assert settings_for(["simulate", "--out", "x"])["out"] == "x"
    monkeypatch.delenv("HENONLAB_OUT")
    assert settings_for(["simulate"])["out"] == "henonlab-out"


def test_preset_labels():
    s = settings_for(["simulate", "--preset", "semi-x0.2-p0.01-hbar0.00454333"])
    c = build_config(s)
    assert c.label == "semi-x0.2-p0.01-hbar0.00454333" and c.semiclassical
    with pytest.raises(UsageError):
        build_config(settings_for(["simulate", "--preset", "nope"]))


def test_render_single_row(tmp_path):
    csv = write_csv(tmp_path / "one.csv", ("x2", "p2"), [[0.1, 0.2]])
    out = render_scatter(csv, ("x2", "p2"), tmp_path / "one.svg", label="one point")
    text = out.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_render_errors(tmp_path):
    csv = write_csv(tmp_path / "a.csv", ("x2", "p2"), [[0.1, 0.2]])
    with pytest.raises(MissingColumn):
        render_scatter(csv, ("x2", "lambda"), tmp_path / "a.svg")
    empty = write_csv(tmp_path / "e.csv", ("x2", "p2"), np.empty((0, 2)))
    with pytest.raises(EmptyData):
        render_scatter(empty, ("x2", "p2"), tmp_path / "e.svg")
