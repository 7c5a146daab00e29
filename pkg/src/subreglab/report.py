"""Certificates and JSON/CSV serialization of reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA = "subreg-lab/1"
VERDICTS = ("PASS", "FAIL", "INCONCLUSIVE")


@dataclass
class ConditionRecord:
    condition: str
    passed: bool
    worst_margin: float
    witness: list | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"condition": self.condition, "passed": bool(self.passed),
                "worst_margin": self.worst_margin, "witness": self.witness,
                "details": self.details}


@dataclass
class Certificate:
    """Outcome of a condition check "at resolution": every parameter used is
    embedded, and the verdict is one of PASS / FAIL / INCONCLUSIVE."""

    clause: str
    parameters: dict
    conditions: list
    verdict: str
    notes: dict = field(default_factory=dict)

    def condition(self, name: str) -> ConditionRecord:
        for rec in self.conditions:
            if rec.condition == name:
                return rec
        raise KeyError(name)

    def to_dict(self):
        return {"clause": self.clause, "parameters": self.parameters,
                "conditions": [c.to_dict() for c in self.conditions],
                "verdict": self.verdict, "notes": self.notes}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clause", "condition", "passed", "worst_margin", "witness"])
        for c in self.conditions:
            wit = "" if c.witness is None else " ".join(repr(float(a)) for a in c.witness)
            w.writerow([self.clause, c.condition, c.passed, repr(c.worst_margin), wit])
        return buf.getvalue()


def jsonable(obj):
    """Convert report objects to JSON-compatible data (non-finite floats as strings)."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def envelope(command: str, result, params: dict, meta: dict | None = None) -> dict:
    doc = {"schema": SCHEMA, "command": command, "params": jsonable(params),
           "result": jsonable(result)}
    if meta is not None:
        doc["meta"] = meta
    return doc


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True)
