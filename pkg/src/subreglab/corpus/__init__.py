"""Registry of example functions with expected verdicts.

Each entry is a DSL file in ``data/`` plus a manifest record holding the
reference point and the expected outcome of every diagnostic. Expected
constants are stored as intervals because grid estimators carry resolution
error.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .. import dsl
from ..certify import necessary_conditions
from ..moduli import (estimate_alpha, estimate_kappa_strong, estimate_kappa_subreg,
                      local_min_check, solution_set)
from ..expr import parse_expr
from ..piecewise import PiecewiseFn
from ..subdiff import subdiff_continuity_probe

__all__ = ["CorpusEntry", "entries", "load_entry", "run_corpus", "run_entry",
           "roundtrip_error", "DATA_DIR"]

DATA_DIR = resources.files(__name__) / "data"


@dataclass
class CorpusEntry:
    id: str
    f: PiecewiseFn
    x_bar: np.ndarray
    expected: dict
    basis: str
    note: str
    path: str = ""
    curves: list = field(default_factory=list)
    curve_t: list = field(default_factory=list)

    def chain_curves(self):
        """``(curve, derivative, t_samples)`` triples for chain-rule checks.

        Curves are stored as polynomial expressions in the parameter (written
        ``x1``), one per coordinate.
        """
        out = []
        for curve_def in self.curves:
            comps = [parse_expr(c, 1) for c in curve_def["x"]]
            ts = curve_def.get("t", self.curve_t)

            def curve(t, comps=comps):
                T = np.array([[float(t)]])
                return np.array([c.values(T)[0] for c in comps])

            def deriv(t, comps=comps):
                T = np.array([[float(t)]])
                return np.array([c.jet(T).g[0, 0] for c in comps])
            out.append((curve, deriv, list(ts)))
        return out

    def to_dict(self):
        return {"id": self.id, "x_bar": self.x_bar.tolist(), "expected": self.expected,
                "basis": self.basis, "note": self.note, "path": self.path,
                "curves": self.curves,
                "function": dsl.to_dict(self.f)}


def _manifest() -> dict:
    return json.loads((DATA_DIR / "manifest.json").read_text())


def _make(rec: dict) -> CorpusEntry:
    res = DATA_DIR / rec["file"]
    f = dsl.loads(res.read_text(), "json")
    return CorpusEntry(rec["id"], f, np.asarray(rec["x_bar"], dtype=float), rec["expected"],
                       rec["basis"], rec["note"], str(res), rec.get("curves", []),
                       _manifest().get("curve_t", []))


def entries() -> list[CorpusEntry]:
    """All corpus entries in manifest order."""
    return [_make(rec) for rec in _manifest()["entries"]]


def load_entry(entry_id: str) -> CorpusEntry:
    for rec in _manifest()["entries"]:
        if rec["id"] == entry_id:
            return _make(rec)
    raise KeyError(f"unknown corpus entry {entry_id!r}")


def roundtrip_error(f: PiecewiseFn, n: int = 1000, seed: int = 0) -> float:
    """Max ``|f - g|`` over ``n`` box points, ``g`` parsed back from ``dsl.dumps(f)``."""
    g = dsl.loads(dsl.dumps(f), "json")
    rng = np.random.default_rng(seed)
    box = np.asarray(f.box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    X = lo + (hi - lo) * rng.random((n, f.dim))
    a, b = f.values(X), g.values(X)
    same_inf = (a == b) & ~np.isfinite(a)
    diff = np.where(same_inf, 0.0, np.abs(a - b))
    return float(np.max(diff)) if diff.size else 0.0


def _in(value, interval) -> bool:
    return interval[0] <= value <= interval[1]


def run_entry(entry: CorpusEntry, eps: float = 0.1, kind: str = "limiting") -> dict:
    """Run the diagnostic suite on one entry and compare with its expectations."""
    exp = entry.expected
    f, xb = entry.f, entry.x_bar
    got, checks = {}, []

    def check(name, ok, computed, expected):
        checks.append({"check": name, "ok": bool(ok), "computed": computed,
                       "expected": expected})

    lm = local_min_check(f, xb, eps)
    got["minimal"] = lm["ok"]
    check("minimal", lm["ok"] == exp["minimal"], lm["ok"], exp["minimal"])

    al = estimate_alpha(f, xb, eps)
    g_exp = exp["growth"]
    g_ok = al.verdict == g_exp["verdict"]
    if "alpha" in g_exp:
        g_ok = g_ok and _in(al.extrapolated, g_exp["alpha"])
    if "growth_coefficient" in g_exp:
        g_ok = g_ok and _in(al.diagnostics["growth_coefficient"], g_exp["growth_coefficient"])
    got["alpha"] = al.extrapolated
    check("growth", g_ok, {"verdict": al.verdict, "alpha": al.extrapolated,
                           "growth_coefficient": al.diagnostics["growth_coefficient"]}, g_exp)

    ka = estimate_kappa_strong(f, xb, kind=kind, eps=eps)
    k_exp = exp["kappa_strong"]
    k_ok = ka.verdict == k_exp["verdict"]
    if "kappa" in k_exp:
        k_ok = k_ok and _in(ka.extrapolated, k_exp["kappa"])
    got["kappa_strong"] = ka.extrapolated
    check("kappa_strong", k_ok, {"verdict": ka.verdict, "kappa": ka.extrapolated}, k_exp)

    if "kappa_subreg" in exp:
        s_exp = exp["kappa_subreg"]
        S = solution_set(f, kind=kind)
        ks = estimate_kappa_subreg(f, xb, S, kind=kind, eps=s_exp.get("eps", eps))
        ok = ks.verdict == s_exp["verdict"] and _in(ks.extrapolated, s_exp["kappa"])
        got["kappa_subreg"] = ks.extrapolated
        check("kappa_subreg", ok, {"verdict": ks.verdict, "kappa": ks.extrapolated},
              s_exp)

    cont = subdiff_continuity_probe(f, xb, kind=kind)
    got["continuity"] = cont.verdict
    check("continuity", cont.verdict == exp["continuity"],
          {"verdict": cont.verdict, "gap": cont.gaps[-1]}, exp["continuity"])

    sa = bool(f.claims_semialgebraic)
    check("semialgebraic", sa == exp["semialgebraic"], sa, exp["semialgebraic"])

    if "nec_b_r1" in exp:
        certs = necessary_conditions(f, xb, r_list=[1.0], eps=eps, kind=kind)
        nec_b = next(c for c in certs if c.clause == "NEC_B")
        check("nec_b_r1", nec_b.verdict == exp["nec_b_r1"], nec_b.verdict, exp["nec_b_r1"])

    rt = roundtrip_error(f)
    check("roundtrip", rt <= 1e-12, rt, "<= 1e-12")

    mismatches = [c["check"] for c in checks if not c["ok"]]
    return {"id": entry.id, "checks": checks, "mismatches": mismatches,
            "computed": got}


def _threads(threads):
    if threads:
        return max(1, int(threads))
    env = os.environ.get("SUBREG_LAB_THREADS")
    return max(1, int(env)) if env else 1


def run_corpus(ids=None, eps: float | None = None, kind: str = "limiting",
               threads: int | None = None) -> dict:
    """Run every (or the selected) entry; results are returned in manifest order.

    Entries are independent and run on a thread pool of ``threads`` workers
    (default: ``SUBREG_LAB_THREADS`` or 1).
    """
    man = _manifest()
    eps = float(eps if eps is not None else man["eps"])
    sel = entries() if ids is None else [load_entry(i) for i in ids]
    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        results = list(pool.map(lambda e: run_entry(e, eps, kind), sel))
    n_bad = sum(1 for r in results if r["mismatches"])
    return {"eps": eps, "kind": kind, "entries": results, "n_entries": len(results),
            "n_mismatched": n_bad, "ok": n_bad == 0}


def summary_rows(report: dict) -> list[list[str]]:
    """Rows ``[id, check, status, computed]`` for table rendering."""
    rows = []
    for r in report["entries"]:
        for c in r["checks"]:
            comp = c["computed"]
            if isinstance(comp, dict):
                comp = " ".join(f"{k}={_fmt(v)}" for k, v in comp.items())
            rows.append([r["id"], c["check"], "ok" if c["ok"] else "MISMATCH", _fmt(comp)])
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    return str(v)
