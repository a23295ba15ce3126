import csv
import json
import subprocess
import sys

import pytest

from collarext.cli import (
    EXIT_CONFIG,
    EXIT_PASS,
    ConfigError,
    config_hash,
    default_config,
    main,
    run,
)

REPORT_KEYS = {"scenario", "config_hash", "seed", "checks", "artifacts"}
CHECK_KEYS = {"name", "paper_anchor", "measured", "tolerance", "pass"}


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


def test_module_entry_point_verify_identity(tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "collarext", "verify-map", "--samples", "500", "--levels", "2",
         "--out", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == EXIT_PASS, proc.stderr
    assert "PASS" in proc.stdout
    assert (out / "verify-map.json").exists()


def test_module_entry_point_rejects_exponent_at_dimension(tmp_path):
    cfg = default_config("extend-collar")
    cfg["p"] = 3.0
    proc = subprocess.run(
        [sys.executable, "-m", "collarext", "extend-collar", "--config",
         str(_write(tmp_path, "c.json", cfg)), "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == EXIT_CONFIG
    assert "p" in proc.stderr and "error" in proc.stderr


def test_invalid_json_is_a_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["sweep-slab", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "cannot read config" in capsys.readouterr().err


def test_non_object_config_rejected(tmp_path):
    p = _write(tmp_path, "list.json", [1, 2])
    assert main(["sweep-slab", "--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_negative_seed_rejected(tmp_path):
    assert main(["plot-data", "--seed", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.parametrize("dim", [1, 9])
def test_dimension_out_of_range(dim):
    cfg = default_config("sweep-slab")
    cfg["dim"] = dim
    with pytest.raises(ConfigError):
        run("sweep-slab", cfg)


def test_unknown_map_kind():
    cfg = default_config("extend-identity")
    cfg["g"] = [{"kind": "warp", "center": [0.0, 0.0]}]
    with pytest.raises(ConfigError):
        run("extend-identity", cfg)


def test_report_schema(tmp_path):
    assert main(["sweep-slab", "--samples", "2000", "--out", str(tmp_path)]) == EXIT_PASS
    rep = json.loads((tmp_path / "sweep-slab.json").read_text())
    assert REPORT_KEYS <= set(rep)
    assert rep["scenario"] == "sweep-slab" and rep["seed"] == 0
    assert rep["checks"]
    for c in rep["checks"]:
        assert CHECK_KEYS <= set(c)
        assert isinstance(c["pass"], bool)
    assert rep["artifacts"] == ["slab_sweep.csv"]
    assert (tmp_path / "slab_sweep.csv").exists()


def test_config_hash_ignores_key_order():
    a = {"dim": 3, "r1": 0.5, "r2": 3.0}
    b = {"r2": 3.0, "r1": 0.5, "dim": 3}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "dim": 2})


def test_plot_data_csv_columns(tmp_path):
    assert main(["plot-data", "--out", str(tmp_path)]) == EXIT_PASS
    rep = json.loads((tmp_path / "plot-data.json").read_text())
    assert rep["artifacts"]
    for name in rep["artifacts"]:
        with open(tmp_path / name, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x1", "xn", "branch-id"]
        assert len(rows) > 1
        for r in rows[1:]:
            float(r[0]), float(r[1])


def test_repeat_runs_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["sweep-slab", "--seed", "7", "--samples", "2000", "--out", str(d)]) == EXIT_PASS
        outs.append(((d / "sweep-slab.json").read_bytes(), (d / "slab_sweep.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_seed_changes_sampled_values():
    a = run("sweep-slab", seed=1, samples=2000).to_json()
    b = run("sweep-slab", seed=2, samples=2000).to_json()
    assert a != b
