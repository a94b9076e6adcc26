from __future__ import annotations

import csv
import subprocess
import sys
from pathlib import Path

import pytest

from fracsys.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from fracsys.criteria import CRITERIA_HEADER, blowup_time_bound
from fracsys.mildsolver import TRAJECTORY_HEADER

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _mutate(tmp_path, src, old, new):
    text = (CONFIGS / src).read_text()
    assert old in text
    return _write(tmp_path, "mutated.ini", text.replace(old, new))


# -- simulate ---------------------------------------------------------------------------

def test_simulate_linear(tmp_path):
    out = tmp_path / "lin"
    assert main(["simulate", "--config", str(CONFIGS / "linear.ini"), "--out", str(out), "--quiet"]) == EXIT_OK
    summary = (out / "summary.txt").read_text()
    assert "linear reference run" in summary
    assert "status: completed" in summary
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == TRAJECTORY_HEADER
    assert rows[-1][-1] == "completed"
    assert (out / "trajectory.npz").is_file() and (out / "config.ini").is_file()


def test_simulate_blowup(tmp_path):
    out = tmp_path / "bu"
    code = main(["simulate", "--config", str(CONFIGS / "blowup_z8.ini"), "--out", str(out), "--quiet"])
    assert code == EXIT_BLOWUP
    rows = _rows(out / "trajectory.csv")
    assert rows[-1][-1] == "blowup_detected"
    summary = (out / "summary.txt").read_text()
    assert "within bound" in summary
    t_last = float(rows[-1][0])
    assert t_last <= blowup_time_bound(2, 0.5, 8.0)


def test_simulate_small_data_global(tmp_path):
    out = tmp_path / "sd"
    code = main(["simulate", "--config", str(CONFIGS / "small_data_global.ini"), "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    summary = (out / "summary.txt").read_text()
    assert "status: completed" in summary
    assert "decay constant C" in summary and "stable" in summary
    assert "positivity ok" in summary


def test_verify_stored_run(tmp_path, capsys):
    out = tmp_path / "bu"
    main(["simulate", "--config", str(CONFIGS / "blowup_z8.ini"), "--out", str(out), "--quiet"])
    assert main(["verify", "--run", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "within bound" in text and "positivity ok" in text
    assert (out / "verify.txt").is_file()
    assert main(["verify", "--run", str(tmp_path / "missing")]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    cfg = _mutate(tmp_path, "blowup_z8.ini", "store_every = 64", "store_every = 64\nblowup_threshold = 1e300")
    with pytest.warns(RuntimeWarning):
        code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == EXIT_NUMERIC


# -- config errors ------------------------------------------------------------------------

@pytest.mark.parametrize("src, old, new, key", [
    ("linear.ini", "gamma1 = 0.5", "gamma1 = 1.5", "gamma1"),
    ("linear.ini", "M = 128", "M = 100", "M"),
    ("linear.ini", "t_end = 1.0", "t_end = soon", "t_end"),
    ("linear.ini", "type = gaussian", "type = blob", "type"),
    ("linear.ini", "width = 1.5", "widht = 1.5", "widht"),
    ("linear.ini", "sign_f = 0", "sign_f = 3", "sign_f"),
    ("blowup_z8.ini", "store_every = 64", "blowup_threshold = 1", "blowup_threshold"),
    ("linear.ini", "weak_residual = true", "weak_residual = maybe", "weak_residual"),
])
def test_config_errors_name_key_and_line(tmp_path, capsys, src, old, new, key):
    cfg = _mutate(tmp_path, src, old, new)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    line = next(i for i, l in enumerate(cfg.read_text().splitlines(), 1) if l.strip().startswith(key))
    assert f"{cfg}:{line}:" in err
    assert key in err


def test_config_missing_file_and_section(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG
    cfg = _write(tmp_path, "s.ini", "[system]\ngamma1 = 0.5\n")
    assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG
    assert "gamma2" in capsys.readouterr().err


# -- criteria -------------------------------------------------------------------------------

def test_criteria_single_point(tmp_path):
    cfg = _write(tmp_path, "c.ini", "[sweep]\ngamma1 = 0.5\ngamma2 = 0.5\np = 2\nq = 2\nN = 2\n")
    assert main(["criteria", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    rows = _rows(tmp_path / "criteria.csv")
    assert rows[0] == CRITERIA_HEADER and len(rows) == 2
    assert rows[1][5] == "true"


def test_criteria_grid_10x10(tmp_path):
    assert main(["criteria", "--config", str(CONFIGS / "criteria_grid.ini"), "--out", str(tmp_path),
                 "--quiet"]) == EXIT_OK
    rows = _rows(tmp_path / "criteria.csv")
    assert rows[0] == CRITERIA_HEADER
    assert len(rows) == 101
    flagged = [r for r in rows[1:] if "q<p" in r[-1]]
    assert len(flagged) == 45  # below the diagonal of the (p, q) grid, kept and marked


def test_criteria_flags_gamma_order(tmp_path):
    cfg = _write(tmp_path, "c.ini", "[sweep]\ngamma1 = 0.3 0.7\ngamma2 = 0.5\np = 2\nq = 3\nN = 1 3\n")
    assert main(["criteria", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    rows = _rows(tmp_path / "criteria.csv")[1:]
    assert len(rows) == 4
    assert [("gamma2<gamma1" in r[-1]) for r in rows] == [False, False, True, True]
    assert all(r[5] == "NA" for r in rows if "gamma2<gamma1" in r[-1])


def test_criteria_errors(tmp_path, capsys):
    cfg = _write(tmp_path, "c.ini", "[sweep]\ngamma1 = 0.5\ngamma2 = 0.5\np = 2\nq = \nN = 2\n")
    assert main(["criteria", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert ":5: [sweep] q" in capsys.readouterr().err
    cfg = _write(tmp_path, "d.ini", "[sweep]\ngamma1 = 0.5\ngamma2 = 1.5\np = 2\nq = 2\nN = 2\n")
    assert main(["criteria", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "gamma2" in capsys.readouterr().err


def test_criteria_random_seed_override(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = _write(tmp_path, "r.ini", "[sweep]\nrandom_points = 50\nseed = 1\n")
    main(["criteria", "--config", str(cfg), "--out", str(a), "--quiet"])
    main(["criteria", "--config", str(cfg), "--out", str(b), "--quiet", "--seed", "2"])
    assert (a / "criteria.csv").read_bytes() != (b / "criteria.csv").read_bytes()
    assert len(_rows(a / "criteria.csv")) == 51


# -- bound and entry points ---------------------------------------------------------------------

def test_bound(capsys):
    assert main(["bound", "--p", "2", "--gamma", "0.5", "--z0", "8", "--quiet"]) == EXIT_OK
    assert float(capsys.readouterr().out) == blowup_time_bound(2, 0.5, 8)
    assert main(["bound", "--p", "2", "--gamma", "0.5", "--z0", "3"]) == EXIT_CONFIG


def test_bad_seed_rejected():
    with pytest.raises(SystemExit):
        main(["criteria", "--config", "x.ini", "--seed", "-1"])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fracsys", "bound", "--p", "2", "--gamma", "1", "--z0", "8"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "bound" in res.stdout
