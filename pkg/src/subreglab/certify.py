"""First-order optimality certificates built from subregularity and gauges,
plus the second-order cross-checks for C^2 functions.

All verdicts hold "at resolution": they are statements about the probed
radii, directions and parameter grids, which every certificate embeds.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ArgumentError, PreconditionError, UnsupportedStructure
from .gauge import gauge_of_set, probe_points
from .moduli import estimate_alpha, estimate_kappa_strong, local_min_check, radius_schedule
from .piecewise import PiecewiseFn
from .report import Certificate, ConditionRecord
from .subdiff import ProbeParams, SubdiffOracle, subdiff_continuity_probe

DEFAULT_R_LIST = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_LAMBDA_GRID = tuple(np.logspace(-3, 2, 26).tolist())
FINITE_R_NOTE = ("conditions required for every r > 0 were probed on a finite r list: "
                 "a FAIL refutes, a PASS does not confirm")


def _xbar(f: PiecewiseFn, x_bar) -> np.ndarray:
    x = np.asarray(x_bar, dtype=float).reshape(-1)
    if x.shape[0] == 1 and f.dim > 1 and x[0] == 0:
        x = np.zeros(f.dim)
    if x.shape[0] != f.dim:
        raise ArgumentError(f"x_bar must have {f.dim} coordinates")
    return x


def _require_regular_critical(f, xb, params, tol):
    d, _ = SubdiffOracle(f, "regular", params).distance(xb)
    if d > tol:
        raise PreconditionError(
            f"0 is not a regular subgradient at x_bar (distance {d:.3g})", xb.tolist())
    return d


def hypotheses(f: PiecewiseFn, x_bar, params: ProbeParams | None = None) -> dict:
    """Semialgebraic flag (metadata) and a subdifferential-continuity probe at ``(x_bar, 0)``."""
    cont = subdiff_continuity_probe(f, x_bar, None, params=params)
    return {"semialgebraic": bool(f.claims_semialgebraic),
            "subdifferentially_continuous": cont.verdict == "CONTINUOUS",
            "continuity_gap": cont.gaps[-1]}


def _gauges(f, xb, X, kind, params, theta_tol, oracle=None):
    oracle = oracle or SubdiffOracle(f, kind, params, anchor=xb)
    return [gauge_of_set(oracle.describe(x), xb - x, theta_tol) for x in X]


def necessary_conditions(f: PiecewiseFn, x_bar, r_list: Sequence[float] = DEFAULT_R_LIST,
                         eps: float = 0.1, kind: str = "limiting", n_dirs: int = 16,
                         params: ProbeParams | None = None, theta_tol: float | None = None,
                         crit_tol: float = 1e-6, tol: float = 1e-9) -> list[Certificate]:
    """Per ``r``: NEC_A (strong subregularity of ``subdiff f + r(I - x_bar)``) and
    NEC_B (``Gamma(x; x_bar - x) >= 1/r`` at probed points).

    A FAIL refutes local minimality only under the semialgebraic and
    subdifferential-continuity hypotheses; without them the verdict is
    downgraded to INCONCLUSIVE and flagged advisory.
    """
    xb = _xbar(f, x_bar)
    _require_regular_critical(f, xb, params, crit_tol)
    hyp = hypotheses(f, xb, params)
    hyp_ok = hyp["semialgebraic"] and hyp["subdifferentially_continuous"]
    radii = radius_schedule(eps)
    X = probe_points(f, xb, radii, n_dirs)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    gauges = _gauges(f, xb, X, kind, params, theta_tol, oracle)
    lm = local_min_check(f, xb, eps)
    certs = []
    for r in r_list:
        if not r > 0:
            raise ArgumentError("r values must be positive")
        est = estimate_kappa_strong(
            f, xb, radii, kind=kind, eps=eps, params=params,
            shift=lambda Y, r=r: r * (np.atleast_2d(Y) - xb), oracle=oracle)
        rec_a = ConditionRecord(
            "strong_subregularity_perturbed", est.verdict == "FINITE",
            _reciprocal(est.extrapolated),
            (est.witnesses[-1] or {}).get("x") if est.witnesses else None,
            {"kappa": est.extrapolated, "verdict": est.verdict, "values": est.values})
        certs.append(_nec_cert("NEC_A", r, eps, kind, rec_a, hyp, hyp_ok, lm, tol))
        margins = [g.value - 1.0 / r for g in gauges]
        k = int(np.argmin(margins)) if margins else 0
        worst = margins[k] if margins else math.inf
        rec_b = ConditionRecord(
            "gauge_ge_inverse_r", worst >= -tol, worst, X[k].tolist() if margins else None,
            {"gauge": gauges[k].value if margins else None, "threshold": 1.0 / r,
             "points": len(margins)})
        certs.append(_nec_cert("NEC_B", r, eps, kind, rec_b, hyp, hyp_ok, lm, tol))
    return certs


def _reciprocal(kappa: float) -> float:
    """Margin of a modulus estimate: ``1/kappa`` (0 when divergent)."""
    if math.isinf(kappa):
        return 0.0
    return math.inf if kappa == 0 else 1.0 / kappa


def _nec_cert(clause, r, eps, kind, rec, hyp, hyp_ok, lm, tol):
    verdict = "PASS" if rec.passed else "FAIL"
    advisory = False
    if not rec.passed and not hyp_ok:
        verdict, advisory = "INCONCLUSIVE", True
    return Certificate(clause, {"r": r, "eps": eps, "kind": kind, "tol": tol}, [rec], verdict,
                       notes={"hypotheses": hyp, "advisory": advisory,
                              "finite_r_list": FINITE_R_NOTE,
                              "descent_witness": None if lm["ok"] else lm["witness"],
                              "descent_drop": lm["worst_drop"]})


def _lambda_max(f, xb, X, r, oracle):
    """``min_x d(0; subdiff f(x) + r(x - x_bar)) / |x - x_bar| - r`` over the probes."""
    d = oracle.distances(X, -r * (X - xb))
    t = np.linalg.norm(X - xb, axis=1)
    q = d / t - r
    k = int(np.argmin(q))
    return float(q[k]), X[k].tolist()


def check_pair(f: PiecewiseFn, x_bar, lam: float, r: float, eps: float, n_dirs: int = 16,
               kind: str = "limiting", params: ProbeParams | None = None,
               theta_tol: float | None = None, tol: float = 1e-9) -> Certificate:
    """Both sufficient-condition inequalities at one pair ``(lam, r)``."""
    xb = _xbar(f, x_bar)
    X = probe_points(f, xb, radius_schedule(eps), n_dirs)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    lm, wit = _lambda_max(f, xb, X, r, oracle)
    rec_a = ConditionRecord("distance_bound", lm >= lam - tol, lm - lam, wit)
    gauges = _gauges(f, xb, X, "regular", params, theta_tol)
    need = math.inf if r == 0 else 1.0 / (2 * r)
    vals = [g.value for g in gauges]
    k = int(np.argmin(vals))
    ok_b = all(v >= need - tol if math.isfinite(need) else v == math.inf for v in vals)
    rec_b = ConditionRecord("regular_gauge_bound", ok_b,
                            vals[k] - need if math.isfinite(need) else
                            (0.0 if vals[k] == math.inf else -math.inf),
                            X[k].tolist(), {"min_gauge": vals[k], "threshold": need})
    verdict = "PASS" if rec_a.passed and rec_b.passed else "FAIL"
    return Certificate("SUFF", {"lambda": lam, "r": r, "eps": eps, "kind": kind, "tol": tol,
                                "n_dirs": n_dirs}, [rec_a, rec_b], verdict)


def sufficient_condition(f: PiecewiseFn, x_bar, lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                         r_grid: Sequence[float] | None = None, eps: float = 0.1,
                         n_dirs: int = 16, kind: str = "limiting",
                         params: ProbeParams | None = None, theta_tol: float | None = None,
                         crit_tol: float = 1e-6, tol: float = 1e-9) -> Certificate:
    """Search ``(lam, r)`` for the sufficient condition of strong local minimality.

    For each ``r`` the largest admissible ``lam`` is computed exactly from the
    probes, then rounded down to ``lambda_grid``; the gauge bound needs
    ``Gamma >= 1/(2r)`` on the regular subdifferential (``r = 0`` requires an
    infinite gauge). A PASS is cross-checked against the growth estimate and
    downgraded to INCONCLUSIVE if ``alpha_hat`` is not positive.
    """
    xb = _xbar(f, x_bar)
    _require_regular_critical(f, xb, params, crit_tol)
    r_grid = list(r_grid) if r_grid is not None else [0.0, *DEFAULT_R_LIST]
    lams = sorted(lambda_grid)
    X = probe_points(f, xb, radius_schedule(eps), n_dirs)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    gauges = _gauges(f, xb, X, "regular", params, theta_tol)
    vals = np.array([g.value for g in gauges])
    kmin = int(np.argmin(vals))
    gmin = float(vals[kmin])
    search = []
    found = None
    for r in r_grid:
        lmax, wit = _lambda_max(f, xb, X, r, oracle)
        fits = [lam for lam in lams if lam <= lmax + tol]
        need = math.inf if r == 0 else 1.0 / (2 * r)
        gauge_ok = gmin == math.inf if r == 0 else gmin >= need - tol
        search.append({"r": r, "lambda_max": lmax, "lambda": fits[-1] if fits else None,
                       "gauge_ok": bool(gauge_ok), "witness": wit})
        if fits and gauge_ok and found is None:
            found = (fits[-1], r, lmax, wit)
    alpha = estimate_alpha(f, xb, eps)
    if found is None:
        best = max(search, key=lambda s: s["lambda_max"])
        recs = [ConditionRecord("distance_bound", best["lambda"] is not None,
                                best["lambda_max"] - (lams[0] if lams else 0.0),
                                best["witness"]),
                ConditionRecord("regular_gauge_bound", any(s["gauge_ok"] for s in search),
                                gmin, X[kmin].tolist(), {"min_gauge": gmin})]
        verdict, pair = "FAIL", None
    else:
        lam, r, lmax, wit = found
        need = math.inf if r == 0 else 1.0 / (2 * r)
        recs = [ConditionRecord("distance_bound", True, lmax - lam, wit),
                ConditionRecord("regular_gauge_bound", True,
                                0.0 if r == 0 else gmin - need, X[kmin].tolist(),
                                {"min_gauge": gmin, "threshold": need})]
        verdict, pair = "PASS", {"lambda": lam, "r": r}
        if not alpha.extrapolated > 0:
            verdict = "INCONCLUSIVE"
    return Certificate("SUFF", {"lambda_grid": lams, "r_grid": r_grid, "eps": eps,
                                "kind": kind, "n_dirs": n_dirs, "tol": tol},
                       recs, verdict,
                       notes={"witness_pair": pair, "search": search,
                              "alpha_hat": alpha.extrapolated, "min_regular_gauge": gmin,
                              "at_resolution": True})


def c2_conditions(f: PiecewiseFn, x_bar, r_list: Sequence[float] = DEFAULT_R_LIST,
                  eps: float = 0.1, lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                  grad_tol: float = 1e-8, eig_tol: float = 1e-9, n_dirs: int = 16,
                  ) -> list[Certificate]:
    """Second-order cross-checks for a C^2 function at a critical point.

    C2_PSD_EQ: strong subregularity of ``x -> grad f(x) + r(x - x_bar)`` at each
    probed ``r`` (the list is extended by ``-eig`` for every negative Hessian
    eigenvalue, the only places where a quadratic model can fail), compared
    with positive semidefiniteness. C2_PD_EQ: existence of ``(lam, r)`` with
    ``|grad f(x) + r(x - x_bar)| >= (lam + r)|x - x_bar|``, compared with
    positive definiteness. A disagreement between the numeric verdict and the
    eigenvalue prediction gives INCONCLUSIVE.
    """
    xb = _xbar(f, x_bar)
    H = f.piece_hessian(xb)
    g = f.piece_gradient(xb)
    if H is None or g is None:
        raise UnsupportedStructure("f is not C^2 at x_bar (boundary or kink)")
    if np.linalg.norm(g) > grad_tol:
        raise PreconditionError(f"grad f(x_bar) = {g.tolist()} is not zero", xb.tolist())
    eig = np.linalg.eigvalsh(H)
    psd = bool(eig.min() >= -eig_tol)
    pd = bool(eig.min() > eig_tol)
    rs = sorted(set(float(r) for r in r_list) | {float(-e) for e in eig if e < -eig_tol})
    radii = radius_schedule(eps)
    shared = SubdiffOracle(f, "limiting", anchor=xb)
    recs = []
    for r in rs:
        est = estimate_kappa_strong(f, xb, radii, eps=eps, oracle=shared,
                                    shift=lambda Y, r=r: r * (np.atleast_2d(Y) - xb))
        predicted = bool(np.min(np.abs(eig + r)) > eig_tol)
        recs.append(ConditionRecord(f"gradient_map_subregular_r={r:g}", est.verdict == "FINITE",
                                    _reciprocal(est.extrapolated),
                                    (est.witnesses[-1] or {}).get("x"),
                                    {"r": r, "kappa": est.extrapolated,
                                     "predicted_subregular": predicted}))
    holds_51 = all(rec.passed for rec in recs)
    v51 = "PASS" if holds_51 else "FAIL"
    if holds_51 != psd:
        v51 = "INCONCLUSIVE"
    psd_cert = Certificate("C2_PSD_EQ", {"r_list": rs, "eps": eps, "eig_tol": eig_tol},
                           recs, v51, notes={"eigenvalues": eig.tolist(), "psd": psd,
                                             "finite_r_list": FINITE_R_NOTE})
    X = probe_points(f, xb, radii, n_dirs)
    oracle = SubdiffOracle(f, "limiting", method="auto")
    lams = sorted(lambda_grid)
    rows, found = [], None
    for r in [0.0, *rs]:
        lmax, wit = _lambda_max(f, xb, X, r, oracle)
        fits = [lam for lam in lams if lam <= lmax]
        rows.append({"r": r, "lambda_max": lmax, "lambda": fits[-1] if fits else None,
                     "witness": wit})
        if fits and found is None:
            found = (fits[-1], r, lmax, wit)
    best = max(rows, key=lambda s: s["lambda_max"])
    rec = ConditionRecord("gradient_growth_pair", found is not None,
                          best["lambda_max"] - lams[0], best["witness"],
                          {"pair": None if found is None else {"lambda": found[0], "r": found[1]},
                           "search": rows})
    v52 = "PASS" if rec.passed else "FAIL"
    if rec.passed != pd:
        v52 = "INCONCLUSIVE"
    notes = {"eigenvalues": eig.tolist(), "pd": pd}
    if rec.passed and not pd:
        notes["mismatch"] = ("a (lambda, r) pair satisfies the gradient inequality although "
                             "the Hessian is not positive definite")
    elif pd and not rec.passed:
        notes["mismatch"] = "no (lambda, r) pair found on the grids despite a positive definite Hessian"
    pd_cert = Certificate("C2_PD_EQ", {"lambda_grid": lams, "r_list": [0.0, *rs], "eps": eps},
                          [rec], v52, notes=notes)
    return [psd_cert, pd_cert]
