import math

import numpy as np
import pytest

from subreglab.certify import (DEFAULT_R_LIST, c2_conditions, check_pair, necessary_conditions,
                               sufficient_condition)
from subreglab.corpus import entries
from subreglab.errors import PreconditionError, UnsupportedStructure
from subreglab.gauge import parametric_gauge
from subreglab.moduli import estimate_alpha

from conftest import make_fn


def _by(certs, clause, r):
    return next(c for c in certs if c.clause == clause and c.parameters["r"] == r)


# --- necessary conditions -------------------------------------------------------------

def test_nec_refutes_x_abs_x(corpus_fn):
    certs = necessary_conditions(corpus_fn("E_xabsx"), [0.0], r_list=[1.0])
    b = _by(certs, "NEC_B", 1.0)
    assert b.verdict == "FAIL" and not b.notes["advisory"]
    rec = b.conditions[0]
    assert rec.details["gauge"] == pytest.approx(0.5, rel=0.02)
    assert rec.details["threshold"] == 1.0
    assert rec.witness[0] < 0


def test_nec_quadratic_passes():
    certs = necessary_conditions(make_fn("x1^2"), [0.0], r_list=[1.0])
    assert [c.verdict for c in certs] == ["PASS", "PASS"]
    assert _by(certs, "NEC_A", 1.0).conditions[0].details["kappa"] == pytest.approx(1 / 3, rel=1e-2)


def test_nec_l1_squared_passes(corpus_fn):
    certs = necessary_conditions(corpus_fn("E_l1sq"), [0.0, 0.0], r_list=[0.5])
    assert [c.verdict for c in certs] == ["PASS", "PASS"]


def test_nec_advisory_without_hypotheses(corpus_fn):
    certs = necessary_conditions(corpus_fn("E_33"), [0.0], r_list=[1.0])
    b = _by(certs, "NEC_B", 1.0)
    assert b.verdict == "INCONCLUSIVE" and b.notes["advisory"]
    assert b.notes["hypotheses"]["semialgebraic"] is False


def test_nec_records_finite_r_asymmetry():
    cert = necessary_conditions(make_fn("x1^2"), [0.0], r_list=[1.0])[0]
    assert "refute" in cert.notes["finite_r_list"]


def test_nec_requires_critical_point():
    with pytest.raises(PreconditionError):
        necessary_conditions(make_fn("x1^2 + x1"), [0.0])


@pytest.mark.parametrize("entry", ["E_xabsx", "E_32pow", "E_quad1", "E_abs", "E_flat"])
def test_nec_b_monotone_in_r(corpus_fn, entry):
    certs = necessary_conditions(corpus_fn(entry), [0.0], r_list=DEFAULT_R_LIST)
    passed = [_by(certs, "NEC_B", r).conditions[0].passed for r in sorted(DEFAULT_R_LIST)]
    first = passed.index(True) if True in passed else len(passed)
    assert all(passed[first:])


# --- sufficient condition ----------------------------------------------------------------

def test_suff_quadratic_pair():
    cert = check_pair(make_fn("x1^2"), [0.0], lam=1.9, r=0.0, eps=0.1)
    assert cert.verdict == "PASS"
    assert cert.condition("distance_bound").worst_margin == pytest.approx(0.1, abs=1e-9)
    assert sufficient_condition(make_fn("x1^2"), [0.0]).verdict == "PASS"


def test_suff_fails_for_odd_power(corpus_fn):
    f = corpus_fn("E_32pow")
    cert = sufficient_condition(f, [0.0])
    assert cert.verdict == "FAIL"
    pair = check_pair(f, [0.0], lam=1.0, r=0.0, eps=1e-2)
    assert pair.condition("distance_bound").passed
    assert not pair.condition("regular_gauge_bound").passed
    assert parametric_gauge(f, [-0.04], [0.0]).value <= 0.14


def test_suff_l1_squared_pair(corpus_fn):
    cert = check_pair(corpus_fn("E_l1sq"), [0.0, 0.0], lam=1.9, r=0.0, eps=0.1)
    assert cert.verdict == "PASS"


def test_suff_records_search():
    cert = sufficient_condition(make_fn("x1^2"), [0.0], lambda_grid=[0.5, 1.0, 1.9],
                                r_grid=[0.0, 1.0])
    assert cert.notes["witness_pair"] == {"lambda": 1.9, "r": 0.0}
    assert [s["r"] for s in cert.notes["search"]] == [0.0, 1.0]
    assert cert.parameters["lambda_grid"] == [0.5, 1.0, 1.9]


# --- soundness on the corpus ---------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus_certificates():
    out = []
    for e in entries():
        nec = necessary_conditions(e.f, e.x_bar)
        suff = sufficient_condition(e.f, e.x_bar)
        out.append((e, nec, suff))
    return out


def test_suff_pass_implies_growth(corpus_certificates):
    n_pass = 0
    for e, _, suff in corpus_certificates:
        if suff.verdict == "PASS":
            n_pass += 1
            assert estimate_alpha(e.f, e.x_bar, 0.1).extrapolated > 0, e.id
    assert n_pass >= 3


def test_nec_fail_has_descent_witness(corpus_certificates):
    n_fail = 0
    for e, nec, _ in corpus_certificates:
        for c in nec:
            if c.verdict == "FAIL":
                n_fail += 1
                w = c.notes["descent_witness"]
                assert w is not None, e.id
                assert e.f.eval(w) < e.f.eval(e.x_bar)
    assert n_fail >= 2


def test_corpus_suff_verdicts(corpus_certificates):
    got = {e.id: suff.verdict for e, _, suff in corpus_certificates}
    assert got["E_quad1"] == got["E_quad2"] == got["E_l1sq"] == got["E_abs"] == "PASS"
    assert got["E_xabsx"] == got["E_32pow"] == "FAIL"


# --- C^2 cross-checks ---------------------------------------------------------------------

def test_c2_quadratic():
    psd, pd = c2_conditions(make_fn("x1^2"), [0.0])
    assert psd.verdict == "PASS" and pd.verdict == "PASS"


def test_c2_concave_parabola():
    psd, pd = c2_conditions(make_fn("-x1^2"), [0.0], r_list=[1.0, 2.0])
    assert psd.verdict == "FAIL"
    rec1 = psd.condition("gradient_map_subregular_r=1")
    rec2 = psd.condition("gradient_map_subregular_r=2")
    assert rec1.passed and not rec2.passed
    # |-2x + r x| >= (lam + r)|x| holds at r = 0, so the pair search cannot
    # separate a nonsingular indefinite Hessian from a definite one
    assert pd.verdict == "INCONCLUSIVE" and "mismatch" in pd.notes


def test_c2_quartic():
    psd, pd = c2_conditions(make_fn("x1^4"), [0.0])
    assert psd.verdict == "PASS"
    assert pd.verdict == "FAIL"


@pytest.mark.parametrize("Q, psd_ok, pd_ok", [
    ([[2.0, 0.0], [0.0, 1.0]], True, True),
    ([[2.0, 1.0], [1.0, 2.0]], True, True),
    ([[1.0, 0.0], [0.0, 0.0]], True, False),
    ([[1.0]], True, True),
    ([[0.5]], True, True),
])
def test_c2_consistency_on_quadratics(Q, psd_ok, pd_ok):
    Q = np.array(Q)
    n = Q.shape[0]
    terms = [f"{float(Q[i, j])!r}*x{i + 1}*x{j + 1}" for i in range(n) for j in range(n) if Q[i, j]]
    f = make_fn(" + ".join(terms), dim=n)
    psd, pd = c2_conditions(f, np.zeros(n), r_list=[0.5, 1.0, 2.0])
    eig = np.linalg.eigvalsh(2 * Q)
    assert psd.notes["eigenvalues"] == pytest.approx(sorted(eig.tolist()))
    assert psd.verdict == ("PASS" if psd_ok else "FAIL")
    assert pd.verdict == ("PASS" if pd_ok else "FAIL")


def test_c2_indefinite_is_inconclusive():
    f = make_fn("x1^2 - x2^2", dim=2)
    psd, pd = c2_conditions(f, [0.0, 0.0], r_list=[1.0])
    assert psd.verdict == "FAIL"
    assert 2.0 in psd.parameters["r_list"]
    assert pd.verdict == "INCONCLUSIVE"


def test_c2_rejects_kinks_and_noncritical(corpus_fn):
    with pytest.raises(UnsupportedStructure):
        c2_conditions(corpus_fn("E_abs"), [0.0])
    with pytest.raises(PreconditionError):
        c2_conditions(make_fn("x1^2 + x1"), [0.0])


def test_certificates_serialize(corpus_fn):
    import json
    cert = necessary_conditions(corpus_fn("E_xabsx"), [0.0], r_list=[1.0])[1]
    d = json.loads(json.dumps(cert.to_dict(), default=float))
    assert d["clause"] == "NEC_B" and d["parameters"]["r"] == 1.0
    assert cert.to_csv().splitlines()[0] == "clause,condition,passed,worst_margin,witness"
