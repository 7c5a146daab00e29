import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subreglab.errors import ArgumentError, PreconditionError
from subreglab.moduli import (SampledMapping, check_equivalence, check_growth_to_solution_set,
                              conjecture_report, estimate_alpha, estimate_kappa_strong,
                              estimate_kappa_subreg, local_min_check, perturbation_check,
                              radial_profile, radius_schedule, solution_set)
from subreglab.subdiff import SubdiffOracle

from conftest import make_fn


def test_radius_schedule():
    assert radius_schedule(0.1, 3) == [0.1, 0.05, 0.025, 0.0125]
    with pytest.raises(ArgumentError):
        radius_schedule(0.0)


# --- growth ----------------------------------------------------------------------

def test_alpha_of_unit_quadratic():
    est = estimate_alpha(make_fn("x1^2"), [0.0], 0.1)
    assert est.extrapolated == pytest.approx(2.0, rel=1e-2)
    assert est.verdict == "FINITE"


def test_alpha_of_wiggly_example(corpus_fn):
    # f = 2x^2 + x^2 sin(1/x)/2 >= 1.5 x^2: growth coefficient 1.5, alpha 3
    est = estimate_alpha(corpus_fn("E_33"), [0.0], 0.01)
    assert 1.4 <= est.diagnostics["growth_coefficient"] <= 1.6
    assert est.extrapolated == pytest.approx(3.0, rel=1e-3)


def test_alpha_degenerate_for_x_abs_x(corpus_fn):
    est = estimate_alpha(corpus_fn("E_xabsx"), [0.0], 0.1)
    assert est.verdict == "DEGENERATE" and est.extrapolated == 0.0
    assert est.diagnostics["raw_infimum"] < 0


def test_local_min_check(corpus_fn):
    assert local_min_check(corpus_fn("E_32"), [0.0], 0.1)["ok"]
    lm = local_min_check(corpus_fn("E_32pow"), [0.0], 0.1)
    assert not lm["ok"] and lm["witness"][0] < 0


@pytest.mark.parametrize("entry", ["E_quad1", "E_32", "E_33", "E_l1sq", "E_abs"])
def test_alpha_non_increasing_under_refinement(corpus_fn, entry):
    f = corpus_fn(entry)
    xb = np.zeros(f.dim)
    n0 = 500 if f.dim == 1 else 40
    a = [estimate_alpha(f, xb, 0.1, n=n0 * 2**k).extrapolated for k in range(3)]
    assert a[0] >= a[1] >= a[2]


@pytest.mark.parametrize("entry", ["E_quad1", "E_xabsx", "E_32pow", "E_abs", "E_quad2"])
def test_kappa_non_decreasing_under_refinement(corpus_fn, entry):
    f = corpus_fn(entry)
    xb = np.zeros(f.dim)
    k = [estimate_kappa_strong(f, xb, eps=0.1, n_shell=50 * 2**j, n_angles=16 * 2**j)
         .extrapolated for j in range(3)]
    assert k[0] <= k[1] * (1 + 1e-12) and k[1] <= k[2] * (1 + 1e-12)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.25, 4.0), st.sampled_from([1, 2]))
def test_quadratic_frontier_product(c, dim):
    body = " + ".join(f"{c!r}*x{i + 1}^2" for i in range(dim))
    f = make_fn(body, dim=dim)
    xb = np.zeros(dim)
    a = estimate_alpha(f, xb, 0.1).extrapolated
    k = estimate_kappa_strong(f, xb, eps=0.1).extrapolated
    tol = 0.01
    assert 1 - 2 * tol <= a * k <= 1 + 2 * tol


# --- strong subregularity ------------------------------------------------------------

def test_kappa_of_quadratic():
    est = estimate_kappa_strong(make_fn("x1^2"), [0.0])
    assert est.extrapolated == pytest.approx(0.5, rel=1e-2)


def test_kappa_divergent_for_wiggly_example(corpus_fn):
    est = estimate_kappa_strong(corpus_fn("E_33"), [0.0])
    assert est.verdict == "DIVERGENT"
    # witnesses sit near zeros of f', which accumulate at the origin
    xs = [abs(w["x"][0]) for w in est.witnesses if w]
    assert min(xs) < 1e-4
    assert all(w["ratio"] > 1e6 for w in est.witnesses)


def test_kappa_of_l1_squared_is_attained_on_axes(corpus_fn):
    est = estimate_kappa_strong(corpus_fn("E_l1sq"), [0.0, 0.0], n_shell=100, n_angles=32)
    assert est.extrapolated == pytest.approx(0.5, rel=5e-2)
    wit = max((w for w in est.witnesses if w), key=lambda w: w["ratio"])
    assert min(abs(wit["x"][0]), abs(wit["x"][1])) <= 1e-12


def test_kappa_degenerate_when_not_critical():
    est = estimate_kappa_strong(make_fn("x1^2 + x1"), [0.0])
    assert est.verdict == "DEGENERATE"


@pytest.mark.parametrize("entry", ["E_32", "E_33", "E_flat"])
def test_divergent_verdicts_carry_witnesses(corpus_fn, entry):
    f = corpus_fn(entry)
    est = estimate_kappa_strong(f, np.zeros(f.dim))
    assert est.verdict == "DIVERGENT"
    assert all(w is not None and "x" in w and "d" in w for w in est.witnesses)
    trend = est.diagnostics["trend"]
    zero = est.diagnostics.get("zero_denominator_witness")
    assert zero is not None or (trend["last4_monotone"] and trend["last4_growth"] >= 2)
    if zero is not None:
        assert zero["d"] * 1e12 <= zero["distance"]


def test_discontinuous_example_ratio_witness(corpus_fn):
    est = estimate_kappa_strong(corpus_fn("E_32"), [0.0])
    small = [w for w in est.witnesses if w and abs(w["x"][0]) <= 1e-2]
    assert any(w["ratio"] >= 1e3 for w in small)


# --- radial profile ----------------------------------------------------------------------

def test_profile_of_quadratic():
    prof = radial_profile(make_fn("x1^2 + x2^2", dim=2), [0.0, 0.0], [0.1])
    assert prof.phi[0] == pytest.approx(0.01, rel=1e-12)
    assert prof.multiplier[0] == pytest.approx(2.0, rel=1e-6)


def test_profile_of_l1_squared_on_axis(corpus_fn):
    prof = radial_profile(corpus_fn("E_l1sq"), [0.0, 0.0], [0.1])
    x = prof.argmin[0]
    assert prof.phi[0] == pytest.approx(0.01, rel=1e-12)
    assert min(abs(x[0]), abs(x[1])) <= 1e-12


def test_profile_of_wiggly_example(corpus_fn):
    t = 0.01
    prof = radial_profile(corpus_fn("E_33"), [0.0], [t])
    assert 1.5 * t * t <= prof.phi[0] <= 2.5 * t * t


@pytest.mark.parametrize("entry", ["E_quad2", "E_l1sq", "E_33", "E_32"])
def test_profile_multiplier_identity(corpus_fn, entry):
    f = corpus_fn(entry)
    xb = np.zeros(f.dim)
    radii = [0.1, 0.05, 0.02, 0.01]
    prof = radial_profile(f, xb, radii, n_dirs=64)
    oracle = SubdiffOracle(f, "limiting", anchor=xb)
    for x, lam in zip(prof.argmin, prof.multiplier):
        if lam is None:
            continue
        x = np.array(x)
        d, _ = oracle.distance(x, lam * (x - xb))
        assert d <= 1e-3 * max(1.0, abs(lam) * np.linalg.norm(x))


# --- solution sets -----------------------------------------------------------------------

def test_solution_set_of_quadratic():
    S = solution_set(make_fn("x1^2", box=[[-1, 1]]), n=2001)
    assert S.points.shape[0] >= 1
    assert np.max(np.abs(S.points)) <= 1e-12


def test_solution_set_of_flat_example(corpus_fn):
    S = solution_set(corpus_fn("E_flat"))
    xs = S.points[:, 0]
    assert xs.min() == pytest.approx(-1.0, abs=S.spacing)
    assert xs.max() == pytest.approx(1.0, abs=S.spacing)
    assert np.all(np.abs(xs) <= 1.0 + S.spacing)


def test_solution_set_accumulates_for_wiggly_example(corpus_fn):
    f = corpus_fn("E_33")
    S = solution_set(f, box=[[-0.2, 0.2]], n=4001)
    xs = S.points[:, 0]
    assert xs.size > 20
    # stationary points of the smooth branches accumulate at the origin
    assert np.min(np.abs(xs[xs != 0])) < 0.01
    for x in xs[np.abs(xs) > 0.02]:
        g = f.piece_gradient([x])
        assert g is not None and abs(g[0]) <= 1e-6


def test_kappa_subreg_examples(corpus_fn):
    f = corpus_fn("E_flat")
    S = solution_set(f)
    est = estimate_kappa_subreg(f, [0.0], S, eps=2.0)
    assert est.extrapolated == pytest.approx(0.5, rel=5e-2)
    q = make_fn("x1^2")
    est = estimate_kappa_subreg(q, [0.0], solution_set(q), eps=0.1)
    assert est.extrapolated == pytest.approx(0.5, rel=5e-2)
    q2 = make_fn("x1^2 + x2^2", dim=2)
    est = estimate_kappa_subreg(q2, [0.0, 0.0], solution_set(q2, box=[[-1, 1], [-1, 1]]),
                                eps=0.5)
    assert est.extrapolated == pytest.approx(0.5, rel=5e-2)


def test_growth_to_solution_set(corpus_fn):
    f = corpus_fn("E_flat")
    S = solution_set(f)
    assert check_growth_to_solution_set(f, [0.0], S, 1.9, 2.0, kappa=0.5).verdict == "PASS"
    assert check_growth_to_solution_set(f, [0.0], S, 2.5, 2.0, kappa=0.5).verdict == "FAIL"
    q = make_fn("x1^2")
    Sq = solution_set(q)
    assert check_growth_to_solution_set(q, [0.0], Sq, 1.9, 0.5).verdict == "PASS"
    cert = check_growth_to_solution_set(q, [0.0], Sq, 2.5, 0.5)
    assert cert.verdict == "FAIL" and cert.conditions[0].worst_margin < 0


# --- perturbation ------------------------------------------------------------------------

def test_perturbation_single_valued():
    cert = perturbation_check(SampledMapping(1, ["2*x1"]), SampledMapping(1, ["0.5*x1"]),
                              kappa=0.5, ell=0.5, eps=1.0)
    assert cert.verdict == "PASS"
    assert cert.notes["modulus_bound"] == pytest.approx(1 / 1.5)
    assert cert.notes["measured_modulus"] == pytest.approx(0.4, rel=1e-9)


def test_perturbation_by_zero_keeps_kappa():
    cert = perturbation_check(SampledMapping(1, ["2*x1"]), SampledMapping(1, ["0"]),
                              kappa=0.5, ell=0.0, eps=1.0)
    assert cert.verdict == "PASS"
    assert cert.notes["modulus_bound"] == pytest.approx(0.5)
    assert cert.notes["measured_modulus"] == pytest.approx(0.5, rel=1e-9)


def test_perturbation_by_a_segment_valued_map():
    G = SampledMapping.from_desc(1, {"segments": [["-x1", "x1"]], "n": 41})
    cert = perturbation_check(SampledMapping(1, ["2*x1"]), G, kappa=0.5, ell=1.0, eps=1.0)
    assert cert.verdict == "PASS"
    assert cert.notes["modulus_bound"] == pytest.approx(1.0)
    assert cert.notes["measured_modulus"] <= 1.0 + 1e-9


def test_perturbation_preconditions():
    F = SampledMapping(1, ["2*x1"])
    with pytest.raises(PreconditionError):
        perturbation_check(F, SampledMapping(1, ["x1"]), kappa=0.5, ell=0.5, eps=1.0)
    with pytest.raises(PreconditionError):
        perturbation_check(F, SampledMapping(1, ["0"]), kappa=0.5, ell=2.5, eps=1.0)


# --- equivalence ------------------------------------------------------------------------

def test_equivalence_wiggly_example_is_explained(corpus_fn):
    rep = check_equivalence(corpus_fn("E_33"), [0.0])
    assert rep.verdict == "MISMATCH_EXPLAINED"
    assert rep.alpha.extrapolated > 0 and rep.kappa.verdict == "DIVERGENT"
    row = next(r for r in rep.rows if r["status"] == "EXPLAINED")
    assert "semialgebraic" in row["missing_hypotheses"]


def test_equivalence_discontinuous_example_is_explained(corpus_fn):
    rep = check_equivalence(corpus_fn("E_32"), [0.0])
    assert rep.verdict == "MISMATCH_EXPLAINED"
    assert rep.alpha.extrapolated == pytest.approx(2.0, rel=5e-2)
    row = next(r for r in rep.rows if r["status"] == "EXPLAINED")
    assert "subdifferentially_continuous" in row["missing_hypotheses"]


def test_equivalence_quadratic_consistent():
    rep = check_equivalence(make_fn("x1^2"), [0.0])
    assert rep.verdict == "CONSISTENT"


def test_conjecture_report_is_informational(corpus_fn):
    rep = conjecture_report(corpus_fn("E_flat"), [0.0], eps=2.0)
    assert rep["experimental"] is True
    assert rep["pattern"] == {"strongly_subregular": False, "subregular": True,
                              "growth_to_S": True}


def test_csv_of_estimate():
    est = estimate_alpha(make_fn("x1^2"), [0.0], 0.1, levels=3)
    lines = est.to_csv().strip().splitlines()
    assert lines[0] == "radius,value,witness_x" and len(lines) == 5
