import json
import subprocess
import sys
from dataclasses import replace

import pytest

from articulated_suspension.cli import EXIT_CODES, main
from articulated_suspension.sim import reference_scenario


def _scenario(tmp_path, **kw):
    kw.setdefault("duration", 0.05)
    sc = replace(reference_scenario(), name="cli", **kw)
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(sc.to_dict()))
    return p


def test_run_writes_outputs(tmp_path, capsys):
    p = _scenario(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(p), "--output-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["name"] == "cli" and summary["steps"] == 50
    assert len((out / "metrics.csv").read_text().splitlines()) == 52
    assert "rms force metric" in capsys.readouterr().out


def test_run_custom_names(tmp_path):
    p = _scenario(tmp_path, mode="fixed")
    assert main(["run", str(p), "-o", str(tmp_path), "--csv", "m.csv", "--summary", "s.json"]) == 0
    assert (tmp_path / "m.csv").exists() and (tmp_path / "s.json").exists()
    assert main(["run", str(p), "-o", str(tmp_path / "b"), "--no-csv"]) == 0
    assert not (tmp_path / "b" / "metrics.csv").exists()


def test_bad_scenario_is_load_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"duration": 1.0, "warp": 9}')
    assert main(["run", str(p)]) == EXIT_CODES["load"] == 3
    assert "error [load]" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 3


def test_forces_failure_names_stage(tmp_path, capsys):
    p = _scenario(tmp_path, mode="fixed", fixed_x=(0.5, 0.5))
    assert main(["run", str(p), "-o", str(tmp_path)]) == EXIT_CODES["forces"]
    assert "error [forces]" in capsys.readouterr().err


def test_bad_model_is_load_error(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_CODES["load"]


def test_bench(tmp_path, capsys):
    assert main(["bench", "--calls", "200", "-o", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert [r["name"] for r in rows][-1] == "normal_forces"
    assert all(r["calls"] == 1000 and r["mean_us"] > 0 for r in rows)


def test_validate_stage(capsys):
    assert main(["validate", "--stage", "closure", "--stage", "rates"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(l.startswith("PASS") for l in lines)


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["launch"])
    assert e.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "articulated_suspension", "validate",
                        "--stage", "closure"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("PASS closure")
