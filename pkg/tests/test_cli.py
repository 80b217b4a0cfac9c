"""Command-line interface: exit codes, printed configuration, file
outputs and end-to-end synth/fit round trips.
"""

import filecmp
import os

import numpy as np
import pytest

from echofit.cli import main
from echofit.trace import load_table, load_trace


def test_eval_field_preset_zero_field(capsys):
    rc = main(["eval", "field", "--preset", "field-7mK", "--B", "0",
               "--T", "0.007"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "40.02" in out


def test_every_run_prints_resolved_config(capsys):
    main(["eval", "field", "--preset", "field-7mK", "--B", "0.5"])
    out = capsys.readouterr().out
    assert "# config" in out
    # the resolved values appear, not just the flag names
    assert "B = 0.5" in out


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "field", "--wavelength", "1536"])
    assert exc.value.code == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2


def test_bad_parameter_value_fails_with_message(capsys):
    rc = main(["eval", "field", "--params", "gamma0_khz=-3"])
    err = capsys.readouterr().err
    assert rc == 1
    assert "error:" in err


def test_synth_then_fit_round_trip(tmp_path, capsys):
    trace_path = tmp_path / "decay.txt"
    rc = main(["synth", "--model", "mims",
               "--params", "i0=1,tm_us=40,x=1.3",
               "--grid", "0.25:30:50:log",
               "--noise", "mult:0.02", "--seed", "5",
               "--out", str(trace_path)])
    assert rc == 0
    tr = load_trace(trace_path)
    assert tr.n_points == 50

    out_dir = tmp_path / "fitted"
    rc = main(["fit-2ppe", str(trace_path), "--window", "0.25:",
               "--restarts", "2", "--out", str(out_dir)])
    assert rc == 0
    capsys.readouterr()
    tbl = load_table(out_dir / "gamma_eff_vs_field.txt")
    tm_fit = 1e3 / (np.pi * tbl.value[0])
    assert abs(tm_fit - 40.0) / 40.0 < 0.02


def test_synth_same_seed_same_file(tmp_path):
    args = ["synth", "--model", "mims", "--params", "i0=1,tm_us=40,x=1.3",
            "--grid", "0.25:30:20:log", "--noise", "mult:0.05", "--seed", "9"]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_check_grad_all_exits_zero(capsys):
    rc = main(["check-grad", "--all", "--draws", "20", "--seed", "7"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "OK" in out or "ok" in out


def test_scan_field_reports_minimum(tmp_path, capsys):
    rc = main(["scan-field", "--preset", "field-7mK", "--T", "0.007",
               "--b-max", "2.0"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "minimum" in out
    assert "0.1398" in out


def test_demo_runs_and_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "one", tmp_path / "two"
    assert main(["demo", "--seed", "3", "--out", str(a)]) == 0
    assert main(["demo", "--seed", "3", "--out", str(b)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    common = sorted(os.listdir(a))
    assert common == sorted(os.listdir(b))
    match, mismatch, errors = filecmp.cmpfiles(a, b, common, shallow=False)
    assert not mismatch and not errors


def test_outdir_env_var_is_default(tmp_path, monkeypatch, capsys):
    dest = tmp_path / "from-env"
    monkeypatch.setenv("ECHOFIT_OUTDIR", str(dest))
    # the parser reads the environment when the subcommand is built
    rc = main(["demo", "--seed", "2"])
    capsys.readouterr()
    assert rc == 0
    assert dest.is_dir()
    assert (dest / "summary.txt").exists()


def test_fit_3ppe_with_config_yaml(tmp_path, capsys):
    trace_paths = []
    for j, t12 in enumerate(("0.09", "0.33", "1.068")):
        p = tmp_path / f"t12_{j}.txt"
        rc = main(["synth", "--model", "echo3",
                   "--preset", "3ppe-7mK-0.09T",
                   "--grid", "50:7500:80:log",
                   "--noise", "mult:0.02", "--seed", str(40 + j),
                   "--t12-us", t12,
                   "--temperature-K", "0.007", "--field-T", "0.09",
                   "--out", str(p)])
        assert rc == 0
        trace_paths.append(str(p))

    cfg = tmp_path / "fit.yaml"
    cfg.write_text("t1_ms: 9.0\ntz_s: 2.0\nrestarts: 2\nseed: 1\n")
    out_dir = tmp_path / "joint"
    rc = main(["fit-3ppe", *trace_paths, "--config", str(cfg),
               "--out", str(out_dir)])
    capsys.readouterr()
    assert rc == 0
    tbl = load_table(out_dir / "gamma0_vs_field.txt")
    assert abs(tbl.value[0] - 7.96) < 3 * 0.48
