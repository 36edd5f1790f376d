"""Command-line harness: config validation, outputs, exit codes and replay."""

import importlib
import json

import pytest

from fracreg import experiments
from fracreg.cli import ConfigError, hashed_part, main, resolve_config
from fracreg.report import config_hash

FAST = {"experiment": "trace-sweep", "s_sweep": [0.5, 0.9],
        "audit": {"n": 32, "nz": 16}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2) + "\n")
    return p


def _run(tmp_path, monkeypatch, cfg):
    out = tmp_path / "out"
    monkeypatch.setenv("FRACREG_OUT", str(out))
    code = main(["run", str(_write(tmp_path, cfg))])
    return code, out


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for name in experiments.REGISTRY:
        assert name in out


def test_defaults(capsys):
    assert main(["defaults", "barriers"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["experiment"] == "barriers"
    assert cfg["s_sweep"] == [0.5, 0.7, 0.9, 0.95]
    assert main(["defaults", "nope"]) == 2


def test_registry_operations_resolve():
    modules = {"monitor": "fracreg.monitor", "nonlocal": "fracreg.nonlocal_ops",
               "extension": "fracreg.extension", "flow": "fracreg.flow"}
    for e in experiments.REGISTRY.values():
        assert e.operations, e.name
        for op in e.operations:
            mod, fn = op.split(".")
            assert callable(getattr(importlib.import_module(modules[mod]), fn)), op


def test_run_pass_writes_outputs(tmp_path, monkeypatch, capsys):
    code, out = _run(tmp_path, monkeypatch, FAST)
    assert code == 0
    runs = list(out.iterdir())
    assert len(runs) == 1
    run = runs[0]
    doc = json.loads((run / "report.json").read_text())
    assert doc["pass"] is True
    assert all("not quantified" in r["metadata"]["modeling_note"] for r in doc["reports"])
    assert run.name == f"trace-sweep-{doc['config_hash']}"
    assert (run / "summary.csv").exists()
    assert (run / "constants_vs_s.svg").exists()
    csvs = sorted(run.glob("0*.csv"))
    assert csvs
    for f in csvs:
        lines = f.read_text().splitlines()
        assert lines[0].startswith("config_hash,audit")
        assert all(line.startswith(doc["config_hash"]) for line in lines[1:])
    printed = capsys.readouterr().out
    assert printed.count("[PASS]") == len(doc["reports"])


def test_run_is_deterministic(tmp_path, monkeypatch):
    _, out = _run(tmp_path, monkeypatch, FAST)
    run = next(out.iterdir())
    first = {f.name: f.read_bytes() for f in run.iterdir() if f.is_file()}
    _, out = _run(tmp_path, monkeypatch, FAST)
    second = {f.name: f.read_bytes() for f in run.iterdir() if f.is_file()}
    assert first == second


def test_run_audit_failure_exit_1(tmp_path, monkeypatch, capsys):
    cfg = {"experiment": "barriers", "s": 0.5, "audit": {"eta_n": 64, "cap": 0.1}}
    code, _ = _run(tmp_path, monkeypatch, cfg)
    assert code == 1
    assert "[FAIL] barrier-eta" in capsys.readouterr().out


def test_config_error_is_line_anchored(tmp_path, monkeypatch, capsys):
    text = '{\n  "experiment": "barriers",\n  "bogus": 1\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(text)
    monkeypatch.setenv("FRACREG_OUT", str(tmp_path / "out"))
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert f"{p}:3:" in err and "bogus" in err


def test_json_syntax_error_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "experiment": "barriers",\n  "s": ,\n}\n')
    assert main(["run", str(p)]) == 2
    assert f"{p}:3:" in capsys.readouterr().err


@pytest.mark.parametrize("raw", [
    {"experiment": "nope"},
    {"experiment": "barriers", "s": 1.5},
    {"experiment": "barriers", "s": 0.5, "s_sweep": [0.5]},
    {"experiment": "barriers", "s_sweep": [0.5, 0.5]},
    {"experiment": "barriers", "eps": -1},
    {"experiment": "barriers", "grid": {"n": 64}},
    {"experiment": "barriers", "audit": {"unknown": 1}},
    {"experiment": "monotonicity", "datum": {"kind": "spiral"}},
    {"experiment": "monotonicity", "grid": {"n": 30}},
    {"experiment": "barriers", "workers": 0},
    {"experiment": "barriers", "schema_version": 2},
])
def test_resolve_config_rejects(raw):
    with pytest.raises(ConfigError):
        resolve_config(raw)


def test_hash_ignores_execution_keys():
    a = resolve_config(dict(FAST))
    b = resolve_config(dict(FAST, output_dir="elsewhere", workers=3, save_snapshots=True))
    c = resolve_config(dict(FAST, eps=0.2))
    assert config_hash(hashed_part(a)) == config_hash(hashed_part(b))
    assert config_hash(hashed_part(a)) != config_hash(hashed_part(c))


def test_replay_and_tamper(tmp_path, monkeypatch, capsys):
    _, out = _run(tmp_path, monkeypatch, FAST)
    run = next(out.iterdir())
    report = run / "report.json"
    assert main(["replay", str(report)]) == 0
    assert "bit-exactly" in capsys.readouterr().out

    # altered result value
    doc = json.loads(report.read_text())
    doc["reports"][0]["residual"] += 1e-9
    report.write_text(json.dumps(doc))
    assert main(["replay", str(report)]) == 1

    # altered configuration without a matching hash
    doc = json.loads(report.read_text())
    doc["config"]["eps"] = 0.5
    report.write_text(json.dumps(doc))
    assert main(["replay", str(report)]) == 1
    assert "hash mismatch" in capsys.readouterr().err

    assert main(["replay", str(tmp_path / "missing.json")]) == 2


def test_workers_give_identical_report(tmp_path, monkeypatch):
    _, out = _run(tmp_path, monkeypatch, FAST)
    run = next(out.iterdir())
    serial = (run / "report.json").read_bytes()
    _, out = _run(tmp_path, monkeypatch, dict(FAST, workers=2))
    assert (run / "report.json").read_bytes() == serial


def test_snapshots_saved(tmp_path, monkeypatch):
    cfg = {"experiment": "potential-bound", "s": 0.5, "save_snapshots": True,
           "grid": {"n": 32, "nz": 16}, "flow": {"dt": 0.01, "T": 1.2}}
    code, out = _run(tmp_path, monkeypatch, cfg)
    run = next(out.iterdir())
    assert code in (0, 1)
    assert any((run / "snapshots").rglob("*"))
