import json

import numpy as np
import pytest

from subreglab import dsl
from subreglab.corpus import (DATA_DIR, entries, load_entry, roundtrip_error, run_corpus,
                              run_entry, summary_rows)

IDS = ["E_quad1", "E_quad2", "E_32", "E_33", "E_xabsx", "E_l1sq", "E_32pow", "E_flat", "E_abs"]


def test_manifest_lists_every_entry():
    man = json.loads((DATA_DIR / "manifest.json").read_text())
    assert [e["id"] for e in man["entries"]] == IDS
    for rec in man["entries"]:
        assert (DATA_DIR / rec["file"]).is_file()
        assert rec["basis"] in ("closed form", "worked example", "derived")
        exp = rec["expected"]
        for key in ("minimal", "growth", "kappa_strong", "continuity", "semialgebraic"):
            assert key in exp, (rec["id"], key)
        for part in ("growth", "kappa_strong"):
            for lo_hi in (v for k, v in exp[part].items() if k != "verdict"):
                assert lo_hi[0] <= lo_hi[1]


def test_load_entry_and_unknown_id():
    e = load_entry("E_33")
    assert e.f.dim == 1 and not e.f.claims_semialgebraic
    assert np.array_equal(e.x_bar, [0.0])
    with pytest.raises(KeyError):
        load_entry("E_missing")


@pytest.mark.parametrize("entry", IDS)
def test_roundtrip_is_exact(entry):
    f = load_entry(entry).f
    assert roundtrip_error(f) <= 1e-12
    assert dsl.dumps(dsl.loads(dsl.dumps(f), "json")) == dsl.dumps(f)


def test_entry_serializes():
    d = load_entry("E_l1sq").to_dict()
    json.dumps(d)
    assert d["function"]["dim"] == 2 and d["x_bar"] == [0.0, 0.0]


def test_chain_curves_pass_through_reference_point():
    for e in entries():
        curves = e.chain_curves()
        assert curves, e.id
        for curve, deriv, ts in curves:
            assert curve(0.0).shape == (e.f.dim,)
            h = 1e-6
            for t in ts[:2]:
                fd = (curve(t + h) - curve(t - h)) / (2 * h)
                assert np.allclose(deriv(t), fd, atol=1e-6)


def test_single_entry_report():
    rep = run_entry(load_entry("E_xabsx"))
    assert rep["mismatches"] == []
    names = [c["check"] for c in rep["checks"]]
    assert names == ["minimal", "growth", "kappa_strong", "continuity", "semialgebraic",
                     "nec_b_r1", "roundtrip"]


@pytest.fixture(scope="module")
def full_run():
    return run_corpus()


def test_full_corpus_has_no_mismatches(full_run):
    bad = {r["id"]: r["mismatches"] for r in full_run["entries"] if r["mismatches"]}
    assert bad == {}
    assert full_run["ok"] and full_run["n_entries"] == len(IDS)
    assert full_run["eps"] == 0.1


def test_corpus_is_thread_count_invariant(full_run):
    ids = ["E_quad1", "E_33", "E_xabsx", "E_flat"]
    one = run_corpus(ids, threads=1)
    four = run_corpus(ids, threads=4)
    assert json.dumps(one, default=str) == json.dumps(four, default=str)
    assert [r["id"] for r in four["entries"]] == ids
    sub = {r["id"]: r for r in full_run["entries"]}
    for r in one["entries"]:
        assert json.dumps(r, default=str) == json.dumps(sub[r["id"]], default=str)


def test_summary_rows(full_run):
    rows = summary_rows(full_run)
    assert all(len(r) == 4 for r in rows)
    assert {r[2] for r in rows} == {"ok"}
