"""CLI behavior through in-process main(argv): outputs and exit codes."""

import numpy as np
import pytest

from semdas.cli import main
from semdas.embeddings import load_embeddings
from semdas.experiment import parse_metrics_csv

CONF = """\
# desk-scale settings for fast tests
num_sensors = 8
targets_per_trial = 2
trials = 20
dimension = 16
num_identities = 8
samples_per_identity = 4
schemes = jscm,bss
k_sweep = 1-2
"""


@pytest.fixture
def conf_path(tmp_path):
    path = tmp_path / "exp.conf"
    path.write_text(CONF)
    return path


def test_generate_writes_loadable_store(tmp_path, capsys):
    out = tmp_path / "store.txt"
    code = main(["generate", "--out", str(out), "--identities", "3",
                 "--samples-per-identity", "2", "--dimension", "8", "--seed", "7"])
    assert code == 0
    assert "wrote 6 samples" in capsys.readouterr().out
    store = load_embeddings(out)
    assert store.dimension == 8
    assert len(store.records) == 6
    for rec in store.records:
        assert abs(np.linalg.norm(rec.vector) - 1.0) <= 1e-9


def test_run_with_config_and_override(tmp_path, conf_path, capsys):
    out = tmp_path / "metrics.csv"
    code = main(["run", "--config", str(conf_path), "--trials", "25",
                 "--out", str(out)])
    assert code == 0
    assert "wrote 4 rows" in capsys.readouterr().out
    rows, header = parse_metrics_csv(out)
    assert header["trials"] == "25"  # the flag overrides the file
    assert header["num_sensors"] == "8"
    assert len(rows) == 4
    assert {r.scheme for r in rows} == {"jscm", "bss"}
    assert all(r.trials == 25 for r in rows)


def test_run_is_deterministic(tmp_path, conf_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["run", "--config", str(conf_path), "--out", str(a)]) == 0
    assert main(["run", "--config", str(conf_path), "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_jscm_weight_grid_adds_schemes(tmp_path, conf_path):
    out = tmp_path / "grid.csv"
    code = main(["run", "--config", str(conf_path), "--out", str(out),
                 "--jscm-weight-grid", "1:0.09,2:0.5"])
    assert code == 0
    rows, _ = parse_metrics_csv(out)
    # 1:0.09 is the stock jscm and must not duplicate it
    assert {r.scheme for r in rows} == {"jscm", "bss", "jscm-2-0.5"}


def test_sweep_requires_specs_and_runs_with_them(tmp_path, conf_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(conf_path), "--out", str(out)]) == 1
    code = main(["sweep", "--config", str(conf_path), "--trials", "15",
                 "--schemes", "bss", "--k-sweep", "4",
                 "--quantization-sweep", "16:8,16:32", "--out", str(out)])
    assert code == 0
    rows, header = parse_metrics_csv(out)
    assert header["quantization_sweep"] == "16:8,16:32"
    assert [(r.kept_dims, r.bits_per_dim) for r in rows] == [(16, 8), (16, 32)]


def test_report_to_stdout(tmp_path, conf_path, capsys):
    out = tmp_path / "metrics.csv"
    main(["run", "--config", str(conf_path), "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "# jscm" in text and "# bss" in text
    assert "# columns: avg_latency_ms missing_rate" in text


def test_report_writes_dat_files(tmp_path, conf_path):
    out = tmp_path / "metrics.csv"
    main(["run", "--config", str(conf_path), "--out", str(out)])
    dat_dir = tmp_path / "dats"
    dat_dir.mkdir()
    assert main(["report", str(out), "--out-dir", str(dat_dir)]) == 0
    for name in ("jscm", "bss"):
        lines = (dat_dir / f"{name}.dat").read_text().splitlines()
        assert lines[0].startswith("# columns:")
        points = [ln.split() for ln in lines[1:]]
        assert len(points) == 2  # one per k
        for lat, miss in points:
            assert float(lat) >= 0.0
            assert 0.0 <= float(miss) <= 1.0


def test_report_names_quantization_groups(tmp_path, conf_path):
    out = tmp_path / "sweep.csv"
    main(["sweep", "--config", str(conf_path), "--trials", "15",
          "--schemes", "bss", "--k-sweep", "4",
          "--quantization-sweep", "16:8,16:32", "--out", str(out)])
    dat_dir = tmp_path / "dats"
    dat_dir.mkdir()
    assert main(["report", str(out), "--out-dir", str(dat_dir)]) == 0
    produced = sorted(p.name for p in dat_dir.iterdir())
    assert produced == ["bss-d16-b32.dat", "bss-d16-b8.dat"]


def test_config_errors_exit_1(tmp_path, conf_path, capsys):
    out = tmp_path / "x.csv"
    bad = tmp_path / "bad.conf"
    bad.write_text("sensors=5\n")
    assert main(["run", "--config", str(bad), "--out", str(out)]) == 1
    assert "unknown config key" in capsys.readouterr().err
    assert main(["run", "--config", str(conf_path), "--schemes", "foo",
                 "--out", str(out)]) == 1
    assert "foo" in capsys.readouterr().err
    assert main(["run", "--config", str(conf_path), "--trials", "zero",
                 "--out", str(out)]) == 1


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run"]) == 1  # missing required --out
    assert main(["frobnicate"]) == 1
    assert main(["generate", "--out", str(tmp_path / "s.txt"),
                 "--identities", "three"]) == 1
    assert main([]) == 1  # no subcommand prints help
    capsys.readouterr()


def test_io_errors_exit_2(tmp_path, conf_path, capsys):
    out = tmp_path / "x.csv"
    assert main(["run", "--config", str(tmp_path / "missing.conf"),
                 "--out", str(out)]) == 2
    garbage = tmp_path / "garbage.txt"
    garbage.write_text("not an embedding file\n")
    assert main(["run", "--config", str(conf_path),
                 "--embedding-source", "file",
                 "--embedding-path", str(garbage), "--out", str(out)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "missing.csv")]) == 2
    garbage_csv = tmp_path / "garbage.csv"
    garbage_csv.write_text("scheme;k\n")
    assert main(["report", str(garbage_csv)]) == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "generate" in capsys.readouterr().out
    assert main(["run", "--help"]) == 0
    capsys.readouterr()
