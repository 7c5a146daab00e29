"""Gauges of sampled sets, the parametric gauge of the subdifferential and
the minorant inequalities built on it.

``Gamma_K(y) = inf{l > 0 : y in l K}``. For a finite sample set this is
``|y| / max |s|`` over samples ``s`` aligned with ``y``. Conventions:
``1/inf = 0`` and ``1/0 = inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, PreconditionError
from .expr import Expr, parse_expr
from .piecewise import PiecewiseFn, ball_grid, sphere_directions
from .report import Certificate, ConditionRecord
from .subdiff import ProbeParams, SetDescription, SubdiffOracle, SubdiffSet

DEFAULT_THETA_DEG = 2.0


@dataclass
class GaugeResult:
    y: list
    value: float
    witness: list | None
    theta_tol: float
    truncated: bool = False
    bound_direction: str = "exact"
    empty_set: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def _theta_default(dim: int) -> float:
    return 0.0 if dim == 1 else math.radians(DEFAULT_THETA_DEG)


def _check_y(y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    if not np.any(y):
        raise ArgumentError("gauge direction y must be nonzero")
    return y


def _row_norms(S: np.ndarray) -> np.ndarray:
    # scaled so that tiny nonzero samples do not underflow to norm 0
    m = np.max(np.abs(S), axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.linalg.norm(S / safe[:, None], axis=1)


def _sample_gauge(S: np.ndarray, y: np.ndarray, theta: float):
    """``(value, witness)`` over a finite sample array ``S``."""
    if S.shape[0] == 0:
        return math.inf, None
    ny = float(_row_norms(y[None, :])[0])
    ns = _row_norms(S)
    nz = ns > 0
    if y.shape[0] == 1:
        ok = nz & (np.sign(S[:, 0]) == np.sign(y[0]))
    else:
        cos = np.full(S.shape[0], -1.0)
        cos[nz] = (S[nz] @ y) / (ns[nz] * ny)
        ok = nz & (cos >= math.cos(theta) - 1e-15)
    if not np.any(ok):
        return math.inf, None
    k = np.flatnonzero(ok)[int(np.argmax(ns[ok]))]
    with np.errstate(over="ignore"):
        return float(ny / ns[k]), S[k].tolist()


def gauge_of_set(K, y, theta_tol: float | None = None) -> GaugeResult:
    """Gauge of ``K`` in direction ``y``.

    ``K`` may be an array of samples ``(m, n)``, a :class:`SubdiffSet` or a
    :class:`SetDescription`. Samples qualify when their angle with ``y`` is at
    most ``theta_tol`` (radians; default 2 degrees, exact sign match in 1-D).
    Polyhedral parts of a description are intersected exactly with the ray
    through ``y``; interval parts use the sign rule.
    """
    y = _check_y(y)
    theta = _theta_default(y.shape[0]) if theta_tol is None else float(theta_tol)
    truncated = False
    if isinstance(K, SubdiffSet):
        truncated = K.truncated
        desc = K.description
    elif isinstance(K, SetDescription):
        desc = K
        truncated = K.truncated
    else:
        S = np.asarray(K, dtype=float).reshape(-1, y.shape[0])
        value, wit = _sample_gauge(S, y, theta)
        return GaugeResult(y.tolist(), value, wit, theta, empty_set=S.shape[0] == 0)
    if desc.is_empty():
        return GaugeResult(y.tolist(), math.inf, None, theta, truncated, empty_set=True)
    ny = float(np.linalg.norm(y))
    u = y / ny
    value, wit = _sample_gauge(desc.points, y, theta)
    best_s = ny / value if value < math.inf else 0.0
    bound = "exact"
    for lo, hi in desc.intervals:
        s = hi if u[0] > 0 else -lo
        if s > best_s and s > 0:
            best_s, wit = s, [s * u[0]]
    for poly in desc.polyhedra:
        s = poly.ray_sup(u)
        if s > best_s:
            best_s, wit = s, (s * u).tolist()
            on_box = np.max(np.abs(s * u - poly.center)) >= poly.extent * (1 - 1e-9)
            bound = "upper" if (poly.truncated and on_box) else "exact"
    value = ny / best_s if best_s > 0 else math.inf
    if value == math.inf:
        wit = None
    return GaugeResult(y.tolist(), value, wit, theta, truncated, bound,
                       details={"max_aligned_norm": best_s})


def parametric_gauge(f: PiecewiseFn, x, x_bar, kind: str = "limiting",
                     params: ProbeParams | None = None, theta_tol: float | None = None,
                     oracle: SubdiffOracle | None = None) -> GaugeResult:
    """``Gamma_{subdiff f}(x; x_bar - x)``; an empty subdifferential gives ``+inf``."""
    x = np.asarray(x, dtype=float).reshape(f.dim)
    xb = np.asarray(x_bar, dtype=float).reshape(f.dim)
    if np.array_equal(x, xb):
        raise ArgumentError("parametric gauge needs x != x_bar")
    if not math.isfinite(f.eval(x)):
        raise ArgumentError("f(x) must be finite")
    oracle = oracle or SubdiffOracle(f, kind, params, anchor=xb)
    return gauge_of_set(oracle.describe(x), xb - x, theta_tol)


def _psi(psi) -> Expr:
    return parse_expr(psi, 1) if isinstance(psi, str) else psi


def probe_points(f: PiecewiseFn, x_bar, radii: Sequence[float], n_dirs: int = 16):
    """Points ``x_bar + t u`` over radii and sphere directions (inside the box)."""
    U = sphere_directions(f.dim, n_dirs)
    X = np.vstack([x_bar + t * U for t in radii])
    return X[f.in_box(X) & np.isfinite(f.values(X))]


def _radii(radii, eps):
    if radii is not None:
        return list(radii)
    return [eps * 2.0**-k for k in range(13)]


def minorant_bound_check(f: PiecewiseFn, x_bar, psi, radii: Sequence[float] | None = None,
                         eps: float = 0.5, kind: str = "limiting", n_dirs: int = 16,
                         tol: float = 1e-9, params: ProbeParams | None = None) -> Certificate:
    """Check ``psi'(t)/t <= -1/Gamma(x; x_bar - x)`` with ``t = |x - x_bar|``.

    ``psi`` is an expression in ``x1`` (the radius). Preconditions:
    ``psi(0) = f(x_bar)`` and ``f(x) >= psi(|x - x_bar|)`` at every probe.
    The certificate records the worst margin and the largest radius at which
    the inequality fails (the neighbourhood where it must hold is not
    quantified, so the check reports where it starts to hold).
    """
    xb = np.asarray(x_bar, dtype=float).reshape(f.dim)
    fb = f.eval(xb)
    ps = _psi(psi)
    if abs(float(ps.values(np.zeros((1, 1)))[0]) - fb) > tol * max(1.0, abs(fb)):
        raise PreconditionError("psi(0) must equal f(x_bar)", [0.0])
    radii = _radii(radii, eps)
    X = probe_points(f, xb, radii, n_dirs)
    t = np.linalg.norm(X - xb, axis=1)
    fv = f.values(X)
    pv = ps.values(t[:, None])
    low = fv - pv
    k = int(np.argmin(low))
    if low[k] < -tol * max(1.0, abs(fb)):
        raise PreconditionError(
            f"f is below psi at x={X[k].tolist()} ({fv[k]:.6g} < {pv[k]:.6g})", X[k].tolist())
    dpsi = ps.jet(t[:, None]).g[:, 0]
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    rows, worst, worst_x, fail_radius = [], math.inf, None, None
    for x, ti, dp in zip(X, t, dpsi):
        g = gauge_of_set(oracle.describe(x), xb - x)
        if not math.isfinite(g.value):
            rhs = 0.0
            if g.empty_set:
                continue
        else:
            rhs = -1.0 / g.value if g.value > 0 else -math.inf
        lhs = dp / ti
        margin = rhs - lhs
        rows.append({"x": x.tolist(), "t": float(ti), "lhs": float(lhs), "rhs": rhs,
                     "gauge": g.value, "margin": margin})
        if margin < worst:
            worst, worst_x = margin, x.tolist()
        if margin < -tol and (fail_radius is None or ti > fail_radius):
            fail_radius = float(ti)
    passed = worst >= -tol
    rec = ConditionRecord("minorant_gauge_bound", passed, worst, worst_x,
                          {"largest_failing_radius": fail_radius, "points": len(rows)})
    return Certificate("MINORANT", {"psi": ps.to_dsl(), "radii": radii, "kind": kind,
                                    "n_dirs": n_dirs, "tol": tol},
                       [rec], "PASS" if passed else "FAIL", notes={"points": rows})


def parabolic_minorant_check(f: PiecewiseFn, x_bar, r: float, eps: float,
                             radii: Sequence[float] | None = None, kind: str = "limiting",
                             n_dirs: int = 16, n_grid: int | None = None, tol: float = 1e-9,
                             params: ProbeParams | None = None) -> Certificate:
    """Check ``Gamma(x; x_bar - x) >= 1/r`` given ``f >= f(x_bar) - (r/2)|x - x_bar|^2``
    on the grid in ``B_eps(x_bar)`` (else :class:`PreconditionError`)."""
    if not r > 0:
        raise ArgumentError("r must be positive")
    xb = np.asarray(x_bar, dtype=float).reshape(f.dim)
    fb = f.eval(xb)
    n_grid = n_grid or {1: 2000, 2: 100, 3: 20}[f.dim]
    G = ball_grid(xb, eps, n_grid, f.dim)
    G = G[f.in_box(G)]
    low = f.values(G) - (fb - 0.5 * r * np.sum((G - xb) ** 2, axis=1))
    k = int(np.argmin(low))
    if low[k] < -tol * max(1.0, abs(fb)):
        raise PreconditionError(
            f"f drops below the parabola at x={G[k].tolist()}", G[k].tolist())
    radii = _radii(radii, eps)
    X = probe_points(f, xb, radii, n_dirs)
    oracle = SubdiffOracle(f, kind, params, anchor=xb)
    worst, worst_x, rows = math.inf, None, []
    for x in X:
        g = gauge_of_set(oracle.describe(x), xb - x)
        margin = g.value - 1.0 / r
        rows.append({"x": x.tolist(), "gauge": g.value, "margin": margin})
        if margin < worst:
            worst, worst_x = margin, x.tolist()
    passed = worst >= -tol
    rec = ConditionRecord("gauge_ge_inverse_r", passed, worst, worst_x)
    return Certificate("PARABOLIC", {"r": r, "eps": eps, "radii": radii, "kind": kind,
                                     "n_dirs": n_dirs, "n_grid": n_grid, "tol": tol},
                       [rec], "PASS" if passed else "FAIL", notes={"points": rows})
