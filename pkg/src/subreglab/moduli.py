"""Growth constants, subregularity moduli and the equivalence checks.

Conventions:

* ``alpha`` is the quadratic-growth constant in
  ``f(x) >= f(x_bar) + (alpha/2) |x - x_bar|^2``; the coefficient of the form
  ``f(x) >= f(x_bar) + a |x - x_bar|^2`` is reported as ``growth_coefficient``
  (``a = alpha / 2``).
* ``kappa`` moduli bound ``|x - x_bar|`` (or ``d(x; S)``) by
  ``kappa * d(0; subdiff f(x))``.

All estimates are taken over finite grids on a geometric radius schedule
``t_k = eps * 2**-k`` and are therefore statements "at resolution".
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import ArgumentError, DomainError, PreconditionError
from .expr import Expr, parse_expr
from .piecewise import PiecewiseFn, ball_grid, sphere_directions
from .report import Certificate, ConditionRecord
from .subdiff import ProbeParams, SubdiffOracle, subdiff_continuity_probe

DEFAULT_LEVELS = 12
ZERO_RATIO = 1e12  # ratios beyond this mean a vanishing denominator


def radius_schedule(eps: float, levels: int = DEFAULT_LEVELS) -> list[float]:
    if not eps > 0:
        raise ArgumentError("eps must be positive")
    return [eps * 2.0**-k for k in range(levels + 1)]


@dataclass
class ModulusEstimate:
    """A constant estimated per radius, with extrapolation and verdict."""

    kind: str
    radii: list
    values: list
    extrapolated: float
    verdict: str
    witnesses: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radii": self.radii, "values": self.values,
                "extrapolated": self.extrapolated, "verdict": self.verdict,
                "witnesses": self.witnesses, "diagnostics": self.diagnostics,
                "params": self.params}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "value", "witness_x"])
        for k, (t, v) in enumerate(zip(self.radii, self.values)):
            wit = self.witnesses[k] if k < len(self.witnesses) else None
            xs = " ".join(repr(a) for a in wit["x"]) if wit else ""
            w.writerow([repr(t), repr(v), xs])
        return buf.getvalue()


def _point(f: PiecewiseFn, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] == 1 and f.dim > 1 and x[0] == 0:
        x = np.zeros(f.dim)
    if x.shape[0] != f.dim:
        raise ArgumentError(f"point must have {f.dim} coordinates")
    return x


def _default_n(dim: int) -> int:
    return {1: 2000, 2: 150, 3: 30}[dim]


def _shell_grid(x_bar, t, dim, n):
    """Grid points of the shell ``t/2 <= |x - x_bar| <= t`` (nested in ``n``)."""
    if dim == 1:
        s = np.linspace(0.5 * t, t, n + 1)
        return x_bar + np.concatenate([s, -s])[:, None]
    pts = ball_grid(np.zeros(dim), t, n, dim)
    r = np.linalg.norm(pts, axis=1)
    return x_bar + pts[r >= 0.5 * t * (1 - 1e-12)]


# --------------------------------------------------------------------------
# growth


def estimate_alpha(f: PiecewiseFn, x_bar, eps: float, n: int | None = None,
                   levels: int = DEFAULT_LEVELS) -> ModulusEstimate:
    """``alpha_hat = inf 2 (f(x) - f(x_bar)) / |x - x_bar|^2`` over grids in ``B_eps``.

    Each radius ``t`` of the schedule contributes the shell ``[t/2, t]`` at its
    own resolution ``n``, so small scales are resolved as finely as large
    ones. Doubling ``n`` refines every grid to a superset.
    """
    xb = _point(f, x_bar)
    fb = f.eval(xb)
    if not math.isfinite(fb):
        raise DomainError("f(x_bar) must be finite", xb)
    n = n or _default_n(f.dim)
    if n < 1:
        raise ArgumentError("grid must contain points other than x_bar")
    radii = radius_schedule(eps, levels)
    values, witnesses = [], []
    for t in radii:
        X = _shell_grid(xb, t, f.dim, n)
        fv = f.values(X)
        q = 2 * (fv - fb) / np.sum((X - xb) ** 2, axis=1)
        k = int(np.argmin(q))
        values.append(float(q[k]))
        witnesses.append({"x": X[k].tolist(), "f": float(fv[k])})
    raw = min(values)
    alpha = max(raw, 0.0)
    verdict = "FINITE" if alpha > 0 else "DEGENERATE"
    return ModulusEstimate(
        "alpha", radii, values, alpha, verdict, witnesses,
        diagnostics={"raw_infimum": raw, "growth_coefficient": alpha / 2,
                     "f_bar": fb},
        params={"eps": eps, "n": n, "levels": levels})


def local_min_check(f: PiecewiseFn, x_bar, eps: float, n: int | None = None,
                    tol_f: float = 1e-12, levels: int = DEFAULT_LEVELS) -> dict:
    """Grid pre-check ``f(x) >= f(x_bar) - tol_f`` on the growth grid."""
    xb = _point(f, x_bar)
    fb = f.eval(xb)
    n = n or _default_n(f.dim)
    worst, where = math.inf, None
    for t in radius_schedule(eps, levels):
        X = _shell_grid(xb, t, f.dim, n)
        fv = f.values(X) - fb
        k = int(np.argmin(fv))
        if fv[k] < worst:
            worst, where = float(fv[k]), X[k].tolist()
    return {"ok": bool(worst >= -tol_f), "worst_drop": worst, "witness": where,
            "tol_f": tol_f}


# --------------------------------------------------------------------------
# radial profile


@dataclass
class RadialProfile:
    x_bar: list
    radii: list
    phi: list
    argmin: list
    multiplier: list

    def to_dict(self):
        return dict(self.__dict__)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "phi", "x", "lambda"])
        for t, p, x, lam in zip(self.radii, self.phi, self.argmin, self.multiplier):
            w.writerow([repr(t), repr(p), " ".join(repr(a) for a in x) if x else "",
                        "" if lam is None else repr(lam)])
        return buf.getvalue()


def radial_profile(f: PiecewiseFn, x_bar, radii: Sequence[float], n_dirs: int = 720,
                   kind: str = "limiting", params: ProbeParams | None = None) -> RadialProfile:
    """``phi(t) = min_{|x - x_bar| = t} f(x)`` on an angular grid, with minimizer
    ``x(t)`` and multiplier ``lambda(t)``.

    ``lambda(t)`` is the scalar ``l`` minimizing ``d(l (x(t) - x_bar); subdiff f(x(t)))``
    restricted to the ray spanned by ``x(t) - x_bar``: it is read off the
    subgradient nearest to that ray.
    """
    xb = _point(f, x_bar)
    f.eval(xb)
    U = sphere_directions(f.dim, n_dirs)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    phi, argmin, lam = [], [], []
    for t in radii:
        X = xb + t * U
        fv = f.values(X)
        k = int(np.argmin(fv))
        if not math.isfinite(fv[k]):
            phi.append(math.inf)
            argmin.append(None)
            lam.append(None)
            continue
        phi.append(float(fv[k]))
        argmin.append(X[k].tolist())
        lam.append(_ray_multiplier(oracle, X[k], X[k] - xb))
    return RadialProfile(xb.tolist(), list(radii), phi, argmin, lam)


def _ray_multiplier(oracle: SubdiffOracle, x, w) -> float | None:
    """Scalar ``l`` with ``l * w`` nearest to ``subdiff f(x)`` (None when empty)."""
    desc = oracle.describe(x)
    if desc.is_empty():
        return None
    nw = float(np.linalg.norm(w))
    u = w / nw
    if desc.points.shape[0] and not desc.intervals and not desc.polyhedra:
        k = int(np.argmin([np.linalg.norm(p - (p @ u) * u) for p in desc.points]))
        return float(desc.points[k] @ u) / nw

    def gap(s):
        return desc.distance(s * u)[0]

    grid = np.geomspace(1e-8, 1e8, 81)
    grid = np.concatenate([-grid[::-1], [0.0], grid])
    k = int(np.argmin([gap(s) for s in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    for _ in range(80):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if gap(m1) <= gap(m2):
            hi = m2
        else:
            lo = m1
    return float(0.5 * (lo + hi)) / nw


# --------------------------------------------------------------------------
# strong subregularity


def _kappa_points(f: PiecewiseFn, x_bar, t, n_shell: int, n_angles: int):
    if f.dim == 1:
        return _shell_grid(x_bar, t, 1, n_shell)
    U = sphere_directions(f.dim, n_angles)
    rs = np.linspace(0.5 * t, t, max(2, n_shell // 25) + 1)
    return x_bar + (rs[:, None, None] * U[None]).reshape(-1, f.dim)


def _critical_roots_1d(f: PiecewiseFn, X: np.ndarray) -> list:
    """Zeros of the piece derivative bracketed between consecutive shell points."""
    order = np.argsort(X[:, 0])
    xs = X[order, 0]
    ok, jet = f.jets(xs[:, None])
    idx = f.interior_piece(xs[:, None])
    g = jet.g[:, 0]
    roots = []
    for i in range(xs.size - 1):
        if not (ok[i] and ok[i + 1] and idx[i] == idx[i + 1]):
            continue
        if g[i] == 0:
            roots.append(xs[i])
        elif g[i] * g[i + 1] < 0:
            body = f.pieces[idx[i]].body

            def deriv(s, body=body):
                return float(body.jet(np.array([[s]])).g[0, 0])

            try:
                roots.append(brentq(deriv, xs[i], xs[i + 1], xtol=1e-300, rtol=1e-15))
            except ValueError:
                continue
    return roots


def _trend(values: Sequence[float]) -> dict:
    v = np.asarray(values[-4:], dtype=float)
    with np.errstate(invalid="ignore"):
        monotone = bool(np.all((np.diff(v) >= 0) | (v[1:] == v[:-1])))
    if v[0] > 0 and math.isfinite(v[0]):
        growth = float(v[-1] / v[0])
    elif v[0] > 0:
        growth = 1.0
    else:
        growth = math.inf if v[-1] > 0 else 1.0
    return {"last4_monotone": monotone, "last4_growth": growth,
            "divergent": monotone and growth >= 2.0}


def estimate_kappa_strong(f: PiecewiseFn, x_bar, radii: Sequence[float] | None = None,
                          kind: str = "limiting", eps: float = 0.1, n_shell: int = 200,
                          n_angles: int = 64, params: ProbeParams | None = None,
                          crit_tol: float = 1e-6, shift: Callable | None = None,
                          oracle: SubdiffOracle | None = None) -> ModulusEstimate:
    """Per radius ``t``: max of ``|x - x_bar| / d(0; subdiff f(x))`` over the shell.

    ``shift`` (optional) maps ``x`` to a vector added to every subgradient,
    which turns the estimator into one for the perturbed map
    ``x -> subdiff f(x) + shift(x)``.

    Verdicts: DEGENERATE when ``x_bar`` is not critical; DIVERGENT at once when
    some ``x != x_bar`` has a vanishing denominator, or when the ratios grow
    monotonically by at least x2 over the last four radii; FINITE otherwise
    with ``extrapolated = max`` over radii.

    A shared ``oracle`` (anchored at ``x_bar``) reuses cached subdifferential
    descriptions across calls, e.g. over several shifts.
    """
    xb = _point(f, x_bar)
    f.eval(xb)
    radii = list(radii) if radii is not None else radius_schedule(eps)
    oracle = oracle or SubdiffOracle(f, kind, params, anchor=xb)
    target = (lambda X: -np.atleast_2d(shift(X))) if shift else (lambda X: None)
    d_bar = float(oracle.distances(xb[None, :], target(xb[None, :]))[0])
    eff = {"eps": eps, "n_shell": n_shell, "n_angles": n_angles, "kind": kind,
           "crit_tol": crit_tol, "probe": oracle.params.to_dict()}
    if d_bar > crit_tol:
        return ModulusEstimate("kappa_strong", radii, [], math.nan, "DEGENERATE", [],
                               {"d_at_x_bar": d_bar}, eff)
    values, witnesses = [], []
    immediate = None
    for t in radii:
        X = _kappa_points(f, xb, t, n_shell, n_angles)
        if f.dim == 1 and shift is None:
            roots = _critical_roots_1d(f, X)
            if roots:
                X = np.vstack([X, np.array(roots)[:, None]])
        X = X[np.isfinite(f.values(X)) & np.any(X != xb, axis=1)]
        if X.shape[0] == 0:
            values.append(0.0)
            witnesses.append(None)
            continue
        d = oracle.distances(X, target(X))
        r = np.linalg.norm(X - xb, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, r / d, math.inf)
        k = int(np.argmax(ratio))
        wit = {"x": X[k].tolist(), "d": float(d[k]), "distance": float(r[k]),
               "ratio": float(ratio[k])}
        witnesses.append(wit)
        values.append(float(ratio[k]))
        if immediate is None and ratio[k] >= ZERO_RATIO:
            immediate = wit
    trend = _trend(values) if len(values) >= 4 else {"divergent": False}
    diag = {"d_at_x_bar": d_bar, "trend": trend,
            "limsup_estimate": max(values[-4:]) if values else math.nan,
            "numeric_points": oracle.numeric_calls}
    if immediate is not None:
        diag["zero_denominator_witness"] = immediate
        verdict, ext = "DIVERGENT", math.inf
    elif trend["divergent"]:
        verdict, ext = "DIVERGENT", math.inf
    else:
        verdict, ext = "FINITE", max(values)
    return ModulusEstimate("kappa_strong", radii, values, ext, verdict, witnesses, diag, eff)


# --------------------------------------------------------------------------
# solution sets and (non-strong) subregularity


@dataclass
class SolutionSetApprox:
    tau_crit: float
    points: np.ndarray
    spacing: float
    kind: str
    box: np.ndarray | None = None
    n: int | None = None

    def lattice(self) -> np.ndarray:
        """The scan grid the cloud was extracted from."""
        return _box_grid(self.box, self.n)[0]

    @property
    def band(self) -> float:
        """Uncertainty of distances to the cloud (half the grid spacing)."""
        return 0.5 * self.spacing

    def distance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.points.shape[0] == 0:
            return np.full(X.shape[0], math.inf)
        if self.points.shape[1] == 1:
            s = np.sort(self.points[:, 0])
            i = np.clip(np.searchsorted(s, X[:, 0]), 1, s.size - 1) if s.size > 1 else \
                np.zeros(X.shape[0], dtype=int)
            left = np.abs(X[:, 0] - s[i - 1]) if s.size > 1 else np.abs(X[:, 0] - s[0])
            right = np.abs(X[:, 0] - s[i]) if s.size > 1 else left
            return np.minimum(left, right)
        return cKDTree(self.points).query(X)[0]

    def to_dict(self) -> dict:
        return {"tau_crit": self.tau_crit, "n_points": int(self.points.shape[0]),
                "spacing": self.spacing, "band": self.band, "kind": self.kind,
                "bounds": [self.points.min(axis=0).tolist(), self.points.max(axis=0).tolist()]
                if self.points.shape[0] else None}


def _box_grid(box: np.ndarray, n: int):
    ticks = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.stack(np.meshgrid(*ticks, indexing="ij"), axis=-1).reshape(-1, box.shape[0])
    spacing = max((hi - lo) / (n - 1) for lo, hi in box)
    return mesh, spacing


def solution_set(f: PiecewiseFn, box=None, tau_crit: float = 1e-6, kind: str = "limiting",
                 n: int | None = None, params: ProbeParams | None = None) -> SolutionSetApprox:
    """Grid points with ``d(0; subdiff f(x)) <= tau_crit`` (1-D adds refined roots of f')."""
    b = np.asarray(box if box is not None else f.box, dtype=float).reshape(f.dim, 2)
    n = n or {1: 8001, 2: 201, 3: 41}[f.dim]
    X, spacing = _box_grid(b, n)
    X = X[np.isfinite(f.values(X))]
    oracle = SubdiffOracle(f, kind, params)
    d = oracle.distances(X)
    pts = X[d <= tau_crit]
    if f.dim == 1:
        roots = _critical_roots_1d(f, X)
        if roots:
            pts = np.unique(np.vstack([pts, np.array(roots)[:, None]]), axis=0)
    return SolutionSetApprox(tau_crit, pts, spacing, kind, b, n)


def estimate_kappa_subreg(f: PiecewiseFn, x_bar, S: SolutionSetApprox,
                          radii: Sequence[float] | None = None, kind: str = "limiting",
                          eps: float = 0.1, n_shell: int = 200, n_angles: int = 64,
                          params: ProbeParams | None = None) -> ModulusEstimate:
    """Per radius: max of ``d(x; S) / d(0; subdiff f(x))`` (``0/0`` counts as 0)."""
    xb = _point(f, x_bar)
    f.eval(xb)
    radii = list(radii) if radii is not None else radius_schedule(eps)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    values, witnesses, immediate = [], [], None
    for t in radii:
        X = _kappa_points(f, xb, t, n_shell, n_angles)
        X = X[np.isfinite(f.values(X))]
        d = oracle.distances(X)
        # a critical point belongs to S itself
        dS = np.where(d <= S.tau_crit, 0.0, S.distance(X))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dS <= 0, 0.0, np.where(d > 0, dS / d, math.inf))
        k = int(np.argmax(ratio)) if ratio.size else 0
        if ratio.size == 0:
            values.append(0.0)
            witnesses.append(None)
            continue
        wit = {"x": X[k].tolist(), "d": float(d[k]), "dist_to_S": float(dS[k]),
               "ratio": float(ratio[k])}
        values.append(float(ratio[k]))
        witnesses.append(wit)
        if immediate is None and ratio[k] >= ZERO_RATIO:
            immediate = wit
    trend = _trend(values) if len(values) >= 4 else {"divergent": False}
    diag = {"trend": trend, "band": S.band, "solution_set": S.to_dict()}
    if immediate is not None:
        diag["zero_denominator_witness"] = immediate
        verdict, ext = "DIVERGENT", math.inf
    elif trend["divergent"]:
        verdict, ext = "DIVERGENT", math.inf
    else:
        verdict, ext = "FINITE", max(values)
    return ModulusEstimate("kappa_subreg", radii, values, ext, verdict, witnesses, diag,
                           {"eps": eps, "n_shell": n_shell, "n_angles": n_angles,
                            "kind": kind, "probe": oracle.params.to_dict()})


def check_growth_to_solution_set(f: PiecewiseFn, x_bar, S: SolutionSetApprox,
                                 alpha_target: float, eps: float, kappa: float | None = None,
                                 n: int | None = None, tol: float = 1e-12,
                                 params: ProbeParams | None = None) -> Certificate:
    """Grid check of ``f(x) >= f(x_bar) + (alpha/2) d(x; S)^2`` on ``B_eps(x_bar)``.

    With a modulus ``kappa`` the certificate also records the outcome the
    growth theorem predicts: PASS for ``alpha < 1/kappa`` (limiting kind) or
    ``alpha < 1/(2 kappa)`` (regular kind).
    """
    xb = _point(f, x_bar)
    fb = f.eval(xb)
    if n is None and S.box is not None:
        # reuse the scan lattice: distances to the cloud are then lattice-exact
        X = S.lattice()
        X = X[np.linalg.norm(X - xb, axis=1) <= eps]
        n = S.n
    else:
        n = n or {1: 4000, 2: 150, 3: 30}[f.dim]
        X = ball_grid(xb, eps, n, f.dim)
    fv = f.values(X)
    ok = np.isfinite(fv)
    X, fv = X[ok], fv[ok]
    crit = SubdiffOracle(f, S.kind, params).distances(X) <= S.tau_crit
    dS = np.where(crit, 0.0, S.distance(X))
    margin = fv - fb - 0.5 * alpha_target * dS**2
    k = int(np.argmin(margin))
    passed = bool(margin[k] >= -tol)
    rec = ConditionRecord("growth_to_solution_set", passed, float(margin[k]), X[k].tolist())
    predicted = None
    if kappa is not None and math.isfinite(kappa) and kappa > 0:
        limit = 1 / kappa if S.kind == "limiting" else 1 / (2 * kappa)
        predicted = "PASS" if alpha_target < limit else "UNDETERMINED"
    return Certificate(
        "GROWTH_S", {"alpha_target": alpha_target, "eps": eps, "n": n, "tol": tol,
                     "kappa": kappa, "kind": S.kind, "band": S.band},
        [rec], "PASS" if passed else "FAIL",
        notes={"predicted": predicted, "solution_set": S.to_dict(),
               "points_checked": int(X.shape[0])})


# --------------------------------------------------------------------------
# perturbation of subregular maps


class SampledMapping:
    """Set-valued map given by member expressions and segments between them.

    ``members`` are tuples of expressions (one per output coordinate);
    ``segments`` are pairs of such tuples sampled at ``n_segment`` points.
    """

    def __init__(self, dim: int, members=(), segments=(), n_segment: int = 21):
        self.dim = dim
        self.members = [self._coerce(m) for m in members]
        self.segments = [(self._coerce(a), self._coerce(b)) for a, b in segments]
        self.n_segment = n_segment
        if not self.members and not self.segments:
            raise ArgumentError("mapping needs at least one member")

    def _coerce(self, m):
        if isinstance(m, (str, Expr)):
            m = (m,)
        out = tuple(parse_expr(e, self.dim) if isinstance(e, str) else e for e in m)
        if len(out) != self.dim:
            raise ArgumentError(f"member must have {self.dim} components")
        return out

    @staticmethod
    def _eval(m, X):
        return np.stack([e.values(X) for e in m], axis=1)

    def values(self, X) -> np.ndarray:
        """Array ``(points, members, dim)`` of sampled members."""
        X = np.atleast_2d(X)
        parts = [self._eval(m, X)[:, None, :] for m in self.members]
        s = np.linspace(0.0, 1.0, self.n_segment)
        for a, b in self.segments:
            A, B = self._eval(a, X), self._eval(b, X)
            parts.append(A[:, None, :] + s[None, :, None] * (B - A)[:, None, :])
        return np.concatenate(parts, axis=1)

    @classmethod
    def from_desc(cls, dim: int, desc) -> "SampledMapping":
        """``["2*x1"]`` or ``{"members": [...], "segments": [[a, b], ...], "n": 21}``."""
        if isinstance(desc, (list, tuple)):
            return cls(dim, members=desc)
        if isinstance(desc, str):
            return cls(dim, members=[desc])
        return cls(dim, members=desc.get("members", []), segments=desc.get("segments", []),
                   n_segment=int(desc.get("n", 21)))


def _minkowski(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (A[:, :, None, :] + B[:, None, :, :]).reshape(A.shape[0], -1, A.shape[2])


def _zero_set(X, D, tau):
    return X[D <= tau]


def _dist_to_cloud(X, Z):
    if Z.shape[0] == 0:
        return np.full(X.shape[0], math.inf)
    return np.min(np.linalg.norm(X[:, None, :] - Z[None, :, :], axis=2), axis=1)


def perturbation_check(F: SampledMapping, G: SampledMapping, kappa: float, ell: float,
                       eps: float, x_bar=None, y_bar=None, n_grid: int = 1001,
                       tau: float = 1e-12, tol: float = 1e-9) -> Certificate:
    """Verify the subregularity modulus ``(1/kappa - ell)^-1`` of ``F + G``.

    Preconditions (checked on the grid): ``ell < 1/kappa`` and
    ``G(x) ⊆ ell * d(x; F^-1(y_bar)) * B``. A violated G bound raises
    :class:`PreconditionError` with the offending point.
    """
    if not (kappa > 0 and ell >= 0):
        raise ArgumentError("need kappa > 0 and ell >= 0")
    if not ell < 1 / kappa:
        raise PreconditionError(f"ell={ell} must be below 1/kappa={1 / kappa}")
    dim = F.dim
    xb = np.zeros(dim) if x_bar is None else np.asarray(x_bar, dtype=float).reshape(dim)
    yb = np.zeros(dim) if y_bar is None else np.asarray(y_bar, dtype=float).reshape(dim)
    if dim == 1:
        X = xb + np.linspace(-eps, eps, n_grid)[:, None]
        # x_bar must be on the grid (even counts would skip it); swap it in
        # for its nearest neighbour so the grid keeps n_grid points
        X[int(np.argmin(np.abs(X[:, 0] - xb[0])))] = xb
    else:
        X = ball_grid(xb, eps, max(2, int(round(n_grid ** (1 / dim))) // 2), dim)
    FV, GV = F.values(X), G.values(X)
    dF = np.min(np.linalg.norm(FV - yb, axis=2), axis=1)
    ZF = _zero_set(X, dF, tau)
    dist_F = _dist_to_cloud(X, ZF)
    gnorm = np.max(np.linalg.norm(GV, axis=2), axis=1)
    excess = gnorm - ell * dist_F
    k = int(np.argmax(excess))
    if excess[k] > tol:
        raise PreconditionError(
            f"G exceeds ell*d(x; F^-1(y)) at x={X[k].tolist()} "
            f"(|g|={gnorm[k]:.6g} > {ell * dist_F[k]:.6g})", X[k].tolist())
    SV = _minkowski(FV, GV)
    dS = np.min(np.linalg.norm(SV - yb, axis=2), axis=1)
    ZS = _zero_set(X, dS, tau)
    dist_S = _dist_to_cloud(X, ZS)
    bound = 1 / (1 / kappa - ell)
    margin = bound * dS + tol - dist_S
    j = int(np.argmin(margin))
    with np.errstate(divide="ignore", invalid="ignore"):
        rat_F = np.where(dist_F > 0, dist_F / dF, 0.0)
        rat_S = np.where(dist_S > 0, dist_S / dS, 0.0)
    measured = float(np.max(rat_S))
    measured_F = float(np.max(rat_F))
    recs = [
        ConditionRecord("G_bound", True, float(-excess[k]), X[k].tolist()),
        ConditionRecord("F_modulus_le_kappa", measured_F <= kappa + tol,
                        float(kappa - measured_F), None),
        ConditionRecord("perturbed_subregularity", bool(margin[j] >= 0), float(margin[j]),
                        X[j].tolist()),
    ]
    ok = recs[2].passed
    verdict = "PASS" if ok else "FAIL"
    if ok is False and not recs[1].passed:
        verdict = "INCONCLUSIVE"
    return Certificate(
        "PERTURB", {"kappa": kappa, "ell": ell, "eps": eps, "n_grid": int(X.shape[0]),
                    "tau": tau, "tol": tol},
        recs, verdict,
        notes={"modulus_bound": bound, "measured_modulus": measured,
               "measured_F_modulus": measured_F, "x_bar": xb.tolist(), "y_bar": yb.tolist()})


# --------------------------------------------------------------------------
# equivalence of growth and strong subregularity


@dataclass
class EquivalenceReport:
    alpha: ModulusEstimate
    kappa: ModulusEstimate
    local_min: dict
    hypotheses: dict
    rows: list
    verdict: str
    params: dict

    def to_dict(self):
        return {"alpha": self.alpha.to_dict() if self.alpha else None,
                "kappa": self.kappa.to_dict() if self.kappa else None,
                "local_min": self.local_min, "hypotheses": self.hypotheses,
                "rows": self.rows, "verdict": self.verdict, "params": self.params}


def check_equivalence(f: PiecewiseFn, x_bar, eps: float = 0.1, kind: str = "limiting",
                      tol: float = 0.05, tol_f: float = 1e-12, n: int | None = None,
                      continuity_radii: Sequence[float] | None = None,
                      params: ProbeParams | None = None) -> EquivalenceReport:
    """Compare growth and strong subregularity at a probed local minimizer.

    Rows: (i) finite ``kappa`` must come with ``alpha >= (1 - tol)/kappa``;
    (ii) positive ``alpha`` with both hypotheses (semialgebraic flag and a
    CONTINUOUS subdifferential-continuity probe) must come with finite
    ``kappa``; (iii) when the estimates disagree, the missing hypotheses are
    listed as the explanation.
    """
    xb = _point(f, x_bar)
    prm = {"eps": eps, "kind": kind, "tol": tol, "tol_f": tol_f}
    lm = local_min_check(f, xb, eps, n, tol_f)
    if not lm["ok"]:
        return EquivalenceReport(None, None, lm, {}, [], "HYPOTHESIS_FAILED", prm)
    alpha = estimate_alpha(f, xb, eps, n)
    kappa = estimate_kappa_strong(f, xb, kind=kind, eps=eps, params=params)
    cont = subdiff_continuity_probe(f, xb, None, continuity_radii, params=params)
    hyp = {"semialgebraic": bool(f.claims_semialgebraic),
           "semialgebraic_syntax": f.is_semialgebraic_syntax(),
           "subdifferentially_continuous": cont.verdict == "CONTINUOUS",
           "continuity_probe": cont.to_dict()}
    rows = []
    a, kv = alpha.extrapolated, kappa.extrapolated
    if kappa.verdict == "FINITE":
        need = (1 - tol) / kv if kv > 0 else 0.0
        rows.append({"row": "i", "status": "CONSISTENT" if a >= need else "INCONSISTENT",
                     "alpha": a, "kappa": kv, "required_alpha": need})
    else:
        rows.append({"row": "i", "status": "NOT_APPLICABLE", "kappa_verdict": kappa.verdict})
    missing = [name for name, ok in (("semialgebraic", hyp["semialgebraic"]),
                                     ("subdifferentially_continuous",
                                      hyp["subdifferentially_continuous"])) if not ok]
    if a > 0 and not missing:
        rows.append({"row": "ii", "status": "CONSISTENT" if kappa.verdict == "FINITE"
                     else "INCONSISTENT", "kappa_verdict": kappa.verdict})
    else:
        rows.append({"row": "ii", "status": "NOT_APPLICABLE", "missing_hypotheses": missing,
                     "alpha_positive": a > 0})
    diverge = (a > 0) != (kappa.verdict == "FINITE")
    if diverge:
        rows.append({"row": "iii", "status": "EXPLAINED" if missing else "UNEXPLAINED",
                     "missing_hypotheses": missing, "alpha": a,
                     "kappa_verdict": kappa.verdict})
    else:
        rows.append({"row": "iii", "status": "AGREE"})
    statuses = {r["status"] for r in rows}
    if statuses & {"INCONSISTENT", "UNEXPLAINED"}:
        verdict = "INCONSISTENT"
    elif "EXPLAINED" in statuses:
        verdict = "MISMATCH_EXPLAINED"
    else:
        verdict = "CONSISTENT"
    return EquivalenceReport(alpha, kappa, lm, hyp, rows, verdict, prm)


def conjecture_report(f: PiecewiseFn, x_bar, eps: float = 0.5, kind: str = "limiting",
                      alpha_target: float | None = None) -> dict:
    """Experimental pairing of non-strong subregularity with growth away from
    the critical set at a non-isolated minimizer. Informational only."""
    S = solution_set(f, kind=kind)
    kap = estimate_kappa_subreg(f, x_bar, S, kind=kind, eps=eps)
    strong = estimate_kappa_strong(f, x_bar, kind=kind, eps=eps)
    a = alpha_target
    if a is None:
        a = 0.5 / kap.extrapolated if kap.verdict == "FINITE" and kap.extrapolated > 0 else 1.0
    cert = check_growth_to_solution_set(f, x_bar, S, a, eps, kap.extrapolated)
    return {"experimental": True, "kappa_subreg": kap.to_dict(),
            "kappa_strong_verdict": strong.verdict, "growth": cert.to_dict(),
            "pattern": {"strongly_subregular": strong.verdict == "FINITE",
                        "subregular": kap.verdict == "FINITE",
                        "growth_to_S": cert.verdict == "PASS"}}
