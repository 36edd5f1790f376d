"""Structured audit records and deterministic configuration hashing."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["AuditReport", "PROVENANCES", "config_hash", "canonical_json", "to_builtin"]

PROVENANCES = ("analytic", "refinement-pair")


def to_builtin(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_builtin(obj), sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short sha256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


@dataclass
class AuditReport:
    """Outcome of one audited inequality or identity.

    ``passed`` is always ``residual <= tolerance``; it is derived, never set.
    ``table`` holds optional per-row data (for example one row per ``s``).
    """

    name: str
    lhs: object
    rhs: object
    residual: float
    tolerance: float
    provenance: str = "analytic"
    metadata: dict = field(default_factory=dict)
    table: list = field(default_factory=list)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        self.residual = float(self.residual)
        self.tolerance = float(self.tolerance)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        d["config_hash"] = self.metadata.get("config_hash", "")
        return to_builtin(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Table rows as CSV; every row carries the configuration hash."""
        rows = self.table or [{"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual}]
        keys = sorted({k for r in rows for k in r})
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config_hash", "audit"] + keys)
        h = self.metadata.get("config_hash", "")
        for r in rows:
            writer.writerow([h, self.name] + [_fmt(r.get(k, "")) for k in keys])
        return buf.getvalue()

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name}: residual={self.residual:.6g} "
                f"tolerance={self.tolerance:.6g} ({self.provenance})")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
