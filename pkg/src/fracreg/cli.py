"""Command-line harness: ``run``, ``list-experiments``, ``replay``, ``defaults``.

Exit codes: 0 all audits pass, 1 audit failure or replay mismatch,
2 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from fracreg import experiments
from fracreg.core import DomainError
from fracreg.grid import save_trajectory
from fracreg.report import AuditReport, canonical_json, config_hash
from fracreg.svg import line_plot

__all__ = ["ConfigError", "load_config", "resolve_config", "execute", "write_outputs", "main"]

SCHEMA_VERSION = 1
EXEC_KEYS = ("output_dir", "workers", "save_snapshots")
TOP_KEYS = {"schema_version", "experiment", "s", "s_sweep", "eps", "grid", "flow", "datum", "audit",
            *EXEC_KEYS}
MODELING_NOTE = ("periodic lateral cell and capped vertical extent stand in for the half space; "
                 "the induced modeling error is not quantified")
DATUM_KINDS = {"constant", "perturbative", "winding", "well", "kink", "mobius"}


class ConfigError(ValueError):
    """Schema violation, anchored to a line of the configuration file."""

    def __init__(self, message: str, line: int = 1, path: str = "<config>"):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _line_of(text: str, key: str | None, after: str | None = None) -> int:
    if key is None:
        return 1
    start = 0
    if after is not None:
        m = re.search(r'"%s"\s*:' % re.escape(after), text)
        start = m.start() if m else 0
    m = re.search(r'"%s"\s*:' % re.escape(key), text[start:])
    if not m:
        return 1
    return text.count("\n", 0, start + m.start()) + 1


def load_config(path) -> tuple[dict, str]:
    """Parse a JSON config; syntax errors carry the offending line."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", 1, path) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    return raw, text


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_block(block, defaults, name, text, path):
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be an object", _line_of(text, name), path)
    out = copy.deepcopy(defaults)
    for k, v in block.items():
        line = _line_of(text, k, name)
        if k not in defaults:
            raise ConfigError(f"unknown key '{k}' in '{name}' (allowed: {sorted(defaults)})", line, path)
        d = defaults[k]
        if _is_num(d) and not _is_num(v):
            raise ConfigError(f"'{name}.{k}' must be a number", line, path)
        if isinstance(d, list) and not isinstance(v, list):
            raise ConfigError(f"'{name}.{k}' must be a list", line, path)
        if isinstance(d, dict) and not isinstance(v, dict):
            raise ConfigError(f"'{name}.{k}' must be an object", line, path)
        if isinstance(d, str) and not isinstance(v, str):
            raise ConfigError(f"'{name}.{k}' must be a string", line, path)
        out[k] = v
    return out


def resolve_config(raw, text: str = "", path: str = "<config>") -> dict:
    """Validate ``raw`` and fill every default; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", 1, path)
    for k in raw:
        if k not in TOP_KEYS:
            raise ConfigError(f"unknown key '{k}' (allowed: {sorted(TOP_KEYS)})", _line_of(text, k), path)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}", _line_of(text, "schema_version"), path)
    name = raw.get("experiment")
    if name not in experiments.REGISTRY:
        raise ConfigError(f"unknown or missing experiment {name!r}; see 'fracreg list-experiments'",
                          _line_of(text, "experiment"), path)
    cfg = experiments.defaults_for(name)
    cfg["experiment"] = name
    cfg["schema_version"] = SCHEMA_VERSION
    if "s" in raw and "s_sweep" in raw:
        raise ConfigError("give either 's' or 's_sweep', not both", _line_of(text, "s_sweep"), path)
    if "s" in raw:
        raw = dict(raw, s_sweep=[raw["s"]])
    if "s_sweep" in raw:
        sw = raw["s_sweep"]
        line = _line_of(text, "s_sweep" if "s_sweep" in text else "s")
        if not isinstance(sw, list) or not sw or not all(_is_num(v) and 0 < v < 1 for v in sw):
            raise ConfigError("'s_sweep' must be a non-empty list of numbers in (0, 1)", line, path)
        if len(set(sw)) != len(sw):
            raise ConfigError("'s_sweep' has duplicates", line, path)
        cfg["s_sweep"] = sorted(float(v) for v in sw)
    if "eps" in raw:
        if not _is_num(raw["eps"]) or raw["eps"] <= 0:
            raise ConfigError("'eps' must be a positive number", _line_of(text, "eps"), path)
        cfg["eps"] = float(raw["eps"])
    for block in ("grid", "flow", "audit"):
        if block in raw:
            if block not in cfg:
                raise ConfigError(f"experiment '{name}' takes no '{block}' block", _line_of(text, block), path)
            cfg[block] = _check_block(raw[block], cfg[block], block, text, path)
    if "datum" in raw:
        if "datum" not in cfg:
            raise ConfigError(f"experiment '{name}' takes no 'datum' block", _line_of(text, "datum"), path)
        d = raw["datum"]
        if not isinstance(d, dict) or d.get("kind") not in DATUM_KINDS:
            raise ConfigError(f"'datum.kind' must be one of {sorted(DATUM_KINDS)}",
                              _line_of(text, "kind", "datum"), path)
        cfg["datum"] = copy.deepcopy(d)
    if "grid" in cfg:
        g = cfg["grid"]
        if g["m"] not in (1, 2) or g["n"] < 8 or g["n"] % 4 or g["nz"] < 4 or g["nz"] % 2:
            raise ConfigError("grid needs m in {1, 2}, n >= 8 divisible by 4, even nz >= 4",
                              _line_of(text, "grid"), path)
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise ConfigError("'workers' must be a positive integer", _line_of(text, "workers"), path)
    cfg["workers"] = workers
    snaps = raw.get("save_snapshots", False)
    if not isinstance(snaps, bool):
        raise ConfigError("'save_snapshots' must be true or false", _line_of(text, "save_snapshots"), path)
    cfg["save_snapshots"] = snaps
    out = raw.get("output_dir", "fracreg-out")
    if not isinstance(out, str):
        raise ConfigError("'output_dir' must be a string", _line_of(text, "output_dir"), path)
    cfg["output_dir"] = out
    return cfg


def hashed_part(cfg: dict) -> dict:
    """The configuration without execution-only keys (output location, workers)."""
    return {k: v for k, v in cfg.items() if k not in EXEC_KEYS}


def _run_entry(name, cfg, s, keep_traj):
    res = experiments.get(name).per_s(cfg, s)
    if not keep_traj:
        res = dict(res, trajectories={})
    return res


def execute(cfg: dict):
    """Run the configured experiment; returns ``(reports, per_s_results)``.

    Per-``s`` entries run in up to ``cfg["workers"]`` processes and are
    merged in sorted ``s`` order.
    """
    name = cfg["experiment"]
    exp = experiments.get(name)
    sweep = sorted(cfg["s_sweep"])
    keep = cfg.get("save_snapshots", False)
    if cfg.get("workers", 1) > 1 and len(sweep) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            futs = [pool.submit(_run_entry, name, cfg, s, keep) for s in sweep]
            outs = [f.result() for f in futs]
    else:
        outs = [_run_entry(name, cfg, s, keep) for s in sweep]
    results = dict(zip(sweep, outs))
    h = config_hash(hashed_part(cfg))
    reports = []
    for s in sweep:
        for r in results[s]["reports"]:
            r.metadata.setdefault("s", s)
            reports.append(r)
    reports.extend(exp.combine(cfg, results))
    for r in reports:
        r.metadata["config_hash"] = h
        r.metadata["experiment"] = name
        r.metadata["modeling_note"] = MODELING_NOTE
    return reports, results


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _csv_name(i, r):
    s = r.metadata.get("s")
    tag = f"-s{s:g}" if isinstance(s, float) else ""
    return f"{i:02d}-{_slug(r.name)}{tag}.csv"


def render_csvs(reports) -> dict:
    return {_csv_name(i, r): r.to_csv() for i, r in enumerate(reports)}


def summary_csv(reports, h) -> str:
    lines = ["config_hash,audit,s,residual,tolerance,pass,provenance"]
    for r in reports:
        s = r.metadata.get("s", "")
        lines.append(f"{h},{r.name},{s},{r.residual!r},{r.tolerance!r},{r.passed},{r.provenance}")
    return "\n".join(lines) + "\n"


def report_document(cfg, reports) -> dict:
    h = config_hash(hashed_part(cfg))
    return {"schema_version": SCHEMA_VERSION, "experiment": cfg["experiment"], "config_hash": h,
            "config": hashed_part(cfg), "pass": all(r.passed for r in reports),
            "reports": [r.to_dict() for r in reports]}


def write_outputs(cfg, reports, results, out_root) -> Path:
    """Write the report, CSV tables, SVG plots and optional snapshots; returns the run directory."""
    doc = report_document(cfg, reports)
    h = doc["config_hash"]
    run_dir = Path(out_root) / f"{cfg['experiment']}-{h}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for fname, text in render_csvs(reports).items():
        (run_dir / fname).write_text(text)
    (run_dir / "summary.csv").write_text(summary_csv(reports, h))
    # plots: each named series overlaid across s, plus per-s residual tables
    names = sorted({k for res in results.values() for k in res["series"]})
    for key in names:
        series = {f"s={s:g}": (res["series"][key]["x"], res["series"][key]["y"])
                  for s, res in sorted(results.items()) if key in res["series"]}
        logy = key.startswith("phi")
        (run_dir / f"{_slug(key)}.svg").write_text(line_plot(series, key, "", "", logy=logy))
    if len(results) > 1:
        by_name = {}
        for r in reports:
            if isinstance(r.metadata.get("s"), float):
                by_name.setdefault(r.name, ([], []))
                by_name[r.name][0].append(r.metadata["s"])
                by_name[r.name][1].append(r.residual)
        (run_dir / "constants_vs_s.svg").write_text(
            line_plot(by_name, "audit residual per s", "s", "residual"))
    if cfg.get("save_snapshots"):
        for s, res in sorted(results.items()):
            for label, traj in sorted(res["trajectories"].items()):
                save_trajectory(run_dir / "snapshots" / f"s{s:g}" / label, traj,
                                {"config_hash": h, "s": s})
    return run_dir


def cmd_run(args) -> int:
    try:
        raw, text = load_config(args.config)
        if args.workers is not None:
            raw = dict(raw, workers=args.workers)
        cfg = resolve_config(raw, text, str(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        reports, results = execute(cfg)
    except (DomainError, ValueError, KeyError) as exc:
        print(f"config error: {args.config}:{_line_of(text, 'experiment')}: {exc}", file=sys.stderr)
        return 2
    out_root = os.environ.get("FRACREG_OUT") or cfg["output_dir"]
    run_dir = write_outputs(cfg, reports, results, out_root)
    for r in reports:
        print(r.line())
    report_path = run_dir / "report.json"
    if all(r.passed for r in reports):
        print(f"all audits passed; report: {report_path}")
        return 0
    failing = [r.name for r in reports if not r.passed]
    print(f"audit failure ({', '.join(failing)}); report: {report_path}", file=sys.stderr)
    return 1


def cmd_list(args) -> int:
    for name, e in experiments.REGISTRY.items():
        print(f"{name:20s} {e.description}  [{e.anchor}]")
    return 0


def cmd_defaults(args) -> int:
    if args.experiment not in experiments.REGISTRY:
        print(f"unknown experiment {args.experiment!r}", file=sys.stderr)
        return 2
    cfg = dict(experiments.defaults_for(args.experiment), experiment=args.experiment,
               schema_version=SCHEMA_VERSION)
    print(json.dumps(cfg, indent=2, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    path = Path(args.report)
    try:
        doc = json.loads(path.read_text())
        cfg = resolve_config(doc["config"])
    except (OSError, json.JSONDecodeError, KeyError, ConfigError) as exc:
        print(f"cannot replay {path}: {exc}", file=sys.stderr)
        return 2
    stored_hash = doc.get("config_hash")
    if config_hash(hashed_part(cfg)) != stored_hash:
        print("config hash mismatch: the stored configuration was modified", file=sys.stderr)
        return 1
    reports, _ = execute(cfg)
    fresh = report_document(cfg, reports)
    problems = []
    if canonical_json(fresh["reports"]) != canonical_json(doc["reports"]):
        problems.append("report.json")
    run_dir = path.parent
    for fname, text in sorted(render_csvs(reports).items()):
        f = run_dir / fname
        if f.exists() and f.read_text() != text:
            problems.append(fname)
    summ = run_dir / "summary.csv"
    if summ.exists() and summ.read_text() != summary_csv(reports, stored_hash):
        problems.append("summary.csv")
    if problems:
        print(f"replay mismatch in: {', '.join(problems)}", file=sys.stderr)
        return 1
    print(f"replay matches bit-exactly (config hash {stored_hash})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracreg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None, help="override the config worker count")
    r.set_defaults(func=cmd_run)
    sub.add_parser("list-experiments", help="print the experiment registry").set_defaults(func=cmd_list)
    d = sub.add_parser("defaults", help="print the fully defaulted config of an experiment")
    d.add_argument("experiment")
    d.set_defaults(func=cmd_defaults)
    p = sub.add_parser("replay", help="re-execute a report and compare bit-exactly")
    p.add_argument("report")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
