import csv

import numpy as np
import pytest
import yaml

from rydkick import __version__
from rydkick.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from rydkick.kick import load_kick_operator
from tests.conftest import SMALL_CONFIG


def header(path):
    return [line for line in open(path) if line.startswith("#")]


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def run(*args):
    return main([str(a) for a in args])


def test_basis_command(small_config_file, tmp_path):
    out = tmp_path / "out"
    assert run("basis", "--config", small_config_file, "--out", out) == EXIT_OK
    lines = header(out / "basis.csv")
    assert lines[0] == f"# rydkick {__version__}\n"
    assert lines[1] == "# command basis\n"
    assert lines[2].startswith("# config_sha256 ")
    diag = read_rows(out / "radial_diagnostics.csv")
    norms = np.array([float(d["norm"]) for d in diag])
    mean_r = np.array([float(d["mean_r"]) for d in diag])
    hydrogenic = np.array([float(d["mean_r_hydrogenic"]) for d in diag])
    assert np.allclose(norms, 1.0)
    assert np.allclose(mean_r, hydrogenic, rtol=5e-3)


def test_kick_command_writes_loadable_matrix(small_config_file, tmp_path):
    out = tmp_path / "out"
    assert run("kick", "--config", small_config_file, "--out", out) == EXIT_OK
    op = load_kick_operator(out / "kick_matrix.txt")
    assert op.impulse == 0.0014
    assert np.allclose(op.matrix, op.matrix.T)
    assert "# valid True\n" in header(out / "unitarity.csv")


def test_scan_then_analyze(small_config_file, tmp_path):
    out = tmp_path / "out"
    assert run("scan", "--config", small_config_file, "--out", out, "--seed", 9) == EXIT_OK
    assert "# seed 9\n" in header(out / "summary.csv")
    assert run(
        "analyze", "--config", small_config_file, "--out", out, "--ensemble", out / "ensemble.csv"
    ) == EXIT_OK
    body = lambda p: [line for line in open(p) if not line.startswith("#")]
    assert body(out / "summary.csv") == body(out / "analyzed_summary.csv")
    assert body(out / "correlation.csv")[0] == "tau_ps,pair,r\n"


def test_hcp_scan(small_config_file, tmp_path):
    out = tmp_path / "out"
    assert run("hcp-scan", "--config", small_config_file, "--out", out) == EXIT_OK
    rows = read_rows(out / "hcp_scan.csv")
    assert len(rows) == 3 * 10
    assert {float(r["tau_hcp_ps"]) for r in rows} == {5.0, 5.5, 6.0}
    # the HCP-off run is the same for every kick delay
    assert len({r["amplitude_off"] for r in rows}) == 10
    assert "# hcp on and off runs share the seed\n" in header(out / "hcp_scan_summary.csv")


def test_config_error_exit_code_and_no_output(tmp_path, capsys):
    bad = dict(SMALL_CONFIG, hcp={"delay_ps": 20.0})
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(bad))
    out = tmp_path / "never"
    assert run("scan", "--config", path, "--out", out) == EXIT_CONFIG
    assert "hcp.delay_ps" in capsys.readouterr().err
    assert not out.exists()


def test_analyze_without_ensemble_is_config_error(small_config_file, tmp_path):
    out = tmp_path / "never"
    assert run("analyze", "--config", small_config_file, "--out", out) == EXIT_CONFIG
    assert not out.exists()


def test_strict_truncation_exit_code(tmp_path, capsys):
    cfg = dict(SMALL_CONFIG)
    cfg["basis"] = dict(SMALL_CONFIG["basis"], unitarity_tol=1e-9)
    path = tmp_path / "tight.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert run("scan", "--config", path, "--out", tmp_path / "o", "--strict") == EXIT_NUMERICAL
    assert "TruncationError" in capsys.readouterr().err
    # without --strict the run completes with a warning
    assert run("scan", "--config", path, "--out", tmp_path / "o2") == EXIT_OK


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        run("plot")
