"""Acceptance criteria, one test each.

Every test prints a single ``[criterion N] PASS|FAIL ...`` line (visible with
``pytest -s`` and repeated in the terminal summary) and must finish within
60 seconds.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from subreglab.certify import check_pair, necessary_conditions
from subreglab.corpus import entries, load_entry
from subreglab.errors import UnsupportedStructure
from subreglab.gauge import parametric_gauge
from subreglab.moduli import (SampledMapping, check_equivalence, check_growth_to_solution_set,
                              estimate_alpha, estimate_kappa_strong, estimate_kappa_subreg,
                              perturbation_check, solution_set)
from subreglab.subdiff import (analytic_subdiff_1d, chain_rule_check, hausdorff_to_description,
                               numeric_subdiff, subdiff_continuity_probe)

from conftest import ACCEPTANCE_LINES, make_fn

BUDGET_S = 60.0


@contextmanager
def criterion(number, title):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        dt = time.perf_counter() - t0
        ok = ok and dt <= BUDGET_S
        line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  ({dt:.1f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert dt <= BUDGET_S, f"criterion {number} took {dt:.1f} s"


def test_criterion_01_quadratic_frontier():
    with criterion(1, "alpha*kappa = 1 +- 2% on c|x|^2"):
        for c in (0.5, 1.0, 2.0):
            for n in (1, 2):
                f = make_fn(" + ".join(f"{c!r}*x{i + 1}^2" for i in range(n)), dim=n)
                xb = np.zeros(n)
                a = estimate_alpha(f, xb, 0.1).extrapolated
                k = estimate_kappa_strong(f, xb, eps=0.1).extrapolated
                assert abs(a - 2 * c) <= 0.01 * 2 * c, (c, n, a)
                assert abs(k - 1 / (2 * c)) <= 0.01 / (2 * c), (c, n, k)
                assert abs(a * k - 1) <= 0.02


def test_criterion_02_wiggly_example():
    with criterion(2, "sine example: growth coefficient in [1.4, 1.6], kappa divergent"):
        f = load_entry("E_33").f
        al = estimate_alpha(f, [0.0], 1e-2)
        assert al.verdict == "FINITE"
        assert 1.4 <= al.diagnostics["growth_coefficient"] <= 1.6
        ka = estimate_kappa_strong(f, [0.0], eps=1e-2)
        assert ka.verdict == "DIVERGENT"
        # |x| <= 1e-2 with d(0, subdiff f(x)) / |x| <= 1e-3
        wits = [w for w in ka.witnesses
                if w and abs(w["x"][0]) <= 1e-2 and w["d"] <= 1e-3 * abs(w["x"][0])]
        assert wits


def test_criterion_03_discontinuous_example():
    with criterion(3, "jump example: alpha ~ 2, kappa divergent, continuity violated"):
        f = load_entry("E_32").f
        al = estimate_alpha(f, [0.0], 0.1)
        assert 1.9 <= al.extrapolated <= 2.1
        ka = estimate_kappa_strong(f, [0.0], eps=0.1)
        assert ka.verdict == "DIVERGENT"
        # on x < 0 the only subgradient is 4x^3, so |x| / d = 1 / (4 x^2)
        assert any(w and abs(w["x"][0]) <= 1e-2 and w["ratio"] >= 1e3 for w in ka.witnesses)
        cont = subdiff_continuity_probe(f, [0.0])
        assert cont.verdict == "VIOLATED" and max(cont.gaps) >= 0.9


def test_criterion_04_l1_squared():
    with criterion(4, "(|x|+|y|)^2: alpha = 2 +- 5%, kappa = 0.5 +- 5%, consistent"):
        f = load_entry("E_l1sq").f
        rep = check_equivalence(f, [0.0, 0.0], 0.1)
        assert abs(rep.alpha.extrapolated - 2.0) <= 0.1
        assert abs(rep.kappa.extrapolated - 0.5) <= 0.025
        assert rep.verdict == "CONSISTENT"
        rows = {r["row"]: r["status"] for r in rep.rows}
        assert rows["i"] == "CONSISTENT" and rows["ii"] == "CONSISTENT"


def test_criterion_05_necessary_condition_refutes():
    with criterion(5, "x|x|: NEC_B fails at r=1 with gauge 0.5 +- 2%"):
        certs = necessary_conditions(load_entry("E_xabsx").f, [0.0], r_list=[1.0])
        b = next(c for c in certs if c.clause == "NEC_B")
        assert b.verdict == "FAIL"
        assert abs(b.conditions[0].details["gauge"] - 0.5) <= 0.01
        assert b.conditions[0].details["threshold"] == 1.0


def test_criterion_06_gap_witness():
    with criterion(6, "odd x^(3/2): distance bound holds, gauge <= 0.14 at |x| = 0.04"):
        f = load_entry("E_32pow").f
        cert = check_pair(f, [0.0], lam=1.0, r=0.0, eps=1e-2)
        assert cert.condition("distance_bound").passed
        assert not cert.condition("regular_gauge_bound").passed
        g = parametric_gauge(f, [-0.04], [0.0])
        assert g.value <= 0.14


def test_criterion_07_perturbation():
    with criterion(7, "F = 2x, G = x/2: modulus of F + G <= 1/1.5 + 1e-6"):
        cert = perturbation_check(SampledMapping(1, ["2*x1"]), SampledMapping(1, ["0.5*x1"]),
                                  kappa=0.5, ell=0.5, eps=1.0, n_grid=1000)
        assert cert.verdict == "PASS"
        assert cert.notes["measured_modulus"] <= 1 / (2 - 0.5) + 1e-6


def test_criterion_08_non_isolated_minimizer():
    with criterion(8, "max(|x|-1,0)^2: kappa_subreg = 0.5 +- 5%, growth 1.9 PASS / 2.5 FAIL"):
        f = load_entry("E_flat").f
        S = solution_set(f)
        ks = estimate_kappa_subreg(f, [0.0], S, eps=2.0)
        assert ks.verdict == "FINITE" and abs(ks.extrapolated - 0.5) <= 0.025
        kap = ks.extrapolated
        assert check_growth_to_solution_set(f, [0.0], S, 1.9, 2.0, kappa=kap).verdict == "PASS"
        assert check_growth_to_solution_set(f, [0.0], S, 2.5, 2.0, kappa=kap).verdict == "FAIL"


def test_criterion_09_chain_rule():
    with criterion(9, "chain rule residual <= 1e-4 on corpus curves"):
        worst = 0.0
        n_curves = 0
        for e in entries():
            for curve, deriv, ts in e.chain_curves():
                rep = chain_rule_check(e.f, curve, deriv, ts)
                worst = max(worst, rep.max_residual)
                n_curves += 1
        assert n_curves >= 20
        assert worst <= 1e-4, worst


def test_criterion_10_oracle_cross_validation():
    with criterion(10, "1-D numeric vs analytic oracle: Hausdorff <= 2 lattice steps"):
        rng = np.random.default_rng(20261016)
        checked = 0
        for e in entries():
            if e.f.dim != 1:
                continue
            lo, hi = np.asarray(e.f.box, dtype=float)[0]
            for x in rng.uniform(lo, hi, 50):
                for kind in ("regular", "limiting"):
                    try:
                        exact = analytic_subdiff_1d(e.f, [x], kind)
                    except UnsupportedStructure:
                        continue
                    num = numeric_subdiff(e.f, [x], kind)
                    h = hausdorff_to_description(num.vectors(), exact.description)
                    assert h <= 2 * num.lattice_step, (e.id, x, kind, h, num.lattice_step)
                    checked += 1
        assert checked >= 600
