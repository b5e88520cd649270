import json
import subprocess
import sys

import pytest

from segcs import cli, harness
from segcs.errors import NonConvergenceError


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


SMALL = {"N": 32, "S": 2, "K": 8, "M": 4, "ka_over_k_grid": [1], "snr_db_list": [20], "trials": 3}


def test_mse_writes_csv_and_manifest(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", SMALL)
    out = tmp_path / "out"
    assert cli.main(["mse", "--config", cfg, "--seed", "4", "--out", str(out)]) == 0
    table = harness.ResultTable.from_csv(out / "mse.csv")
    assert len(table) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 4
    assert set(man) >= {"config_hash", "seed", "git_describe", "wall_time"}
    assert "scheme,snr_db" in capsys.readouterr().out


def test_mse_trials_override(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL)
    out = tmp_path / "o"
    assert cli.main(["mse", "--config", cfg, "--trials", "2", "--out", str(out)]) == 0
    assert all(r["trials"] == 2 for r in harness.ResultTable.from_csv(out / "mse.csv").rows)


@pytest.mark.parametrize("bad", [{"M": 3}, {"ka_over_k_grid": [0.3]}, {"nope": 1}])
def test_mse_config_error_exit_code(tmp_path, bad):
    cfg = write(tmp_path, "c.json", {**SMALL, **bad})
    assert cli.main(["mse", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["mse", "--config", str(tmp_path / "none.json")]) == 2


def test_failure_budget_exit_code(tmp_path, monkeypatch):
    def always_fail(*a, **k):
        raise NonConvergenceError("forced")

    monkeypatch.setattr(harness, "bpdn", always_fail)
    cfg = write(tmp_path, "c.json", {**SMALL, "scheme_list": ["original"]})
    out = tmp_path / "o"
    assert cli.main(["mse", "--config", cfg, "--out", str(out)]) == 3
    row = harness.ResultTable.from_csv(out / "mse.csv").rows[0]
    assert row["failures"] == 3


def test_fig3(tmp_path, capsys):
    out = tmp_path / "f"
    assert cli.main(["fig3", "--out", str(out)]) == 0
    rows = harness.read_fig3_csv(out / "fig3.csv")
    assert len(rows) == 61
    assert "0 with C1e >= 2 C1" in capsys.readouterr().out
    cfg = write(tmp_path, "f.json", {"snr_db_grid": [0], "K": 8, "K_a": 8, "M": 4})
    assert cli.main(["fig3", "--config", cfg, "--out", str(out)]) == 0
    assert len(harness.read_fig3_csv(out / "fig3.csv")) == 1
    assert cli.main(["fig3", "--config", write(tmp_path, "g.json", {"bad": 1})]) == 2


def test_rip_scan(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["rip-scan", "--seed", "0", "--trials", "3", "--out", str(out)]) == 0
    rep = json.loads((out / "rip_scan.json").read_text())
    assert [r["seed"] for r in rep["results"]] == [0, 1, 2]
    empty = write(tmp_path, "e.json", {"seeds": []})
    assert cli.main(["rip-scan", "--config", empty, "--out", str(out)]) == 0
    assert json.loads((out / "rip_scan.json").read_text())["results"] == []
    capped = write(tmp_path, "cap.json", {"N": 64, "K": 16, "K_a": 16, "M": 8, "S": 6})
    assert cli.main(["rip-scan", "--config", capped, "--out", str(out)]) == 2


def test_validate_family(capsys):
    assert cli.main(["validate-family", "--K", "8", "--M", "4", "--I", "7"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["generators"] == [1, 2, 3, 5, 6, 7]
    assert payload["family"][3] == [1, 6, 3, 8]
    assert payload["shortfall"] is True
    assert payload["report"]["ok"] is False
    assert cli.main(["validate-family", "--K", "8", "--M", "4", "--I", "7", "--strict"]) == 0
    assert json.loads(capsys.readouterr().out)["report"]["ok"] is True
    assert cli.main(["validate-family", "--K", "4", "--M", "5"]) == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "segcs.cli", "validate-family"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["K"] == 8


def test_subcommand_required():
    with pytest.raises(SystemExit) as ei:
        cli.main([])
    assert ei.value.code == 2
