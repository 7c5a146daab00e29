"""Regular, limiting and horizon subdifferentials of piecewise functions.

Three oracles are provided:

* smooth points: where the active body has an exact gradient, every kind of
  (non-horizon) subdifferential is the singleton ``{grad}``;
* :func:`analytic_subdiff_1d`: exact 1-D sets at breakpoints of continuous
  piecewise-C^1 functions, built from one-sided derivatives;
* :func:`numeric_subdiff`: the proximal probe. A vector ``v`` is accepted at
  ``x`` when the quadratic minorant
  ``f(y) >= f(x) + <v, y - x> - (c/2)|y - x|^2`` holds at every probe ``y`` in
  ``B_delta(x)``. Each probe is a linear inequality in ``v``, so the accepted
  set is a polyhedron; it is sampled on a lattice for reporting and queried
  exactly (least-distance QP, ray intersection) by downstream estimators.

Every proximal subgradient is a regular subgradient, so accepted vectors are
sound; rejection is only advisory at the probe resolution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ArgumentError, BudgetExceeded, DomainError, UnsupportedStructure
from .piecewise import PiecewiseFn, sphere_directions

KINDS = ("regular", "limiting", "horizon")
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ProbeParams:
    """Resolution knobs of the proximal probe.

    ``c=None`` means ``10 / delta`` (times the local slope scale when
    ``relative`` is set). ``f_tol=None`` means
    ``max(10 * grid_step, 1e-6)`` where ``grid_step = rho / n_neighbors`` is the
    spacing of the limiting-construction base points. The default ``rho`` is
    small against ``delta`` so that, at smooth points, gradients of the base
    points differ by less than one lattice step.
    """

    delta: float = 1e-3
    c: float | None = None
    n_radii: int = 24
    r_min: float = 1e-6
    n_dirs: int = 64
    lattice_step: float | None = None
    lattice_n: int | None = None
    v_max: float = 10.0
    rho: float = 1e-6
    n_neighbors: int = 4
    lam_tol: float = 1e-3
    f_tol: float | None = None
    relative: bool = False
    atol: float = 0.0
    max_lattice: int = 2_000_000

    def __post_init__(self):
        for name in ("delta", "r_min", "v_max", "rho", "lam_tol"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if self.atol < 0:
            raise ArgumentError("atol must be nonnegative")
        if self.c is not None and self.c < 0:
            raise ArgumentError("c must be nonnegative")

    @property
    def grid_step(self) -> float:
        return self.rho / self.n_neighbors

    @property
    def f_tolerance(self) -> float:
        return self.f_tol if self.f_tol is not None else max(10 * self.grid_step, 1e-6)

    def lattice_count(self, dim: int) -> int:
        if self.lattice_n is not None:
            return self.lattice_n
        return {1: 100, 2: 40, 3: 12}[dim]

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["grid_step"] = self.grid_step
        d["f_tol_effective"] = self.f_tolerance
        return d


# --------------------------------------------------------------------------
# result types


@dataclass
class SubgradientSample:
    x: np.ndarray
    v: np.ndarray
    kind: str
    c: float
    delta: float
    residual: float = 0.0

    def to_dict(self):
        return {"x": self.x.tolist(), "v": self.v.tolist(), "kind": self.kind,
                "c": self.c, "delta": self.delta, "residual": self.residual}


@dataclass
class EpigraphNormalSample:
    """Unit normal ``(v, -lam)`` to the epigraph at ``(point, value)``."""

    point: np.ndarray
    value: float
    v: np.ndarray
    lam: float
    gap: float

    def as_subgradient(self, lam_tol: float) -> SubgradientSample:
        """``(v/lam, -1)`` as a regular subgradient, or a horizon direction.

        The touching ball of radius ``gap`` certifies the proximal inequality
        with curvature ``(1 + |s|^2)^(3/2) / gap`` (that of the ball's lower
        surface where its slope is ``s``), doubled for safety, on radius
        ``gap * lam^2 / 4``.
        """
        if self.lam > lam_tol:
            s = self.v / self.lam
            c = 2.0 * (1.0 + float(s @ s)) ** 1.5 / self.gap
            return SubgradientSample(self.point, s, "regular", c,
                                     self.gap * self.lam**2 / 4)
        u = self.v / max(np.linalg.norm(self.v), 1e-300)
        return SubgradientSample(self.point, u, "horizon", math.nan, math.nan)


@dataclass
class Polyhedron:
    """``{v : H v <= b}`` in subgradient space (rows of H are unit vectors)."""

    H: np.ndarray
    b: np.ndarray
    base: np.ndarray
    c: float
    delta: float
    truncated: bool = False

    def violation(self, V: np.ndarray) -> np.ndarray:
        V = np.atleast_2d(V)
        if self.H.shape[0] == 0:
            return np.zeros(V.shape[0])
        return np.max(V @ self.H.T - self.b, axis=1)

    def distance(self, target: np.ndarray):
        """Exact ``min |v - target|`` over the polyhedron, with the minimizer."""
        t = np.asarray(target, dtype=float)
        w = least_distance(-self.H, self.H @ t - self.b)
        if w is None:
            return math.inf, None
        return float(np.linalg.norm(w)), t + w

    def lower_bound(self, target: np.ndarray) -> float:
        """``max_i (h_i . target - b_i)_+``, a lower bound for :meth:`distance`
        (rows are unit vectors)."""
        if self.H.shape[0] == 0:
            return 0.0
        return max(float(np.max(self.H @ np.asarray(target, dtype=float) - self.b)), 0.0)

    def is_empty(self) -> bool:
        """True when no vector satisfies all rows (checked once, then cached)."""
        if not hasattr(self, "_empty"):
            self._empty = least_distance(-self.H, -self.b) is None
        return self._empty

    def ray_sup(self, u: np.ndarray) -> float:
        """Largest ``s > 0`` with ``s * u`` in the polyhedron (``-inf`` if none)."""
        hu = self.H @ u
        lo, hi = 0.0, math.inf
        pos, neg = hu > 1e-15, hu < -1e-15
        if np.any(pos):
            hi = float(np.min(self.b[pos] / hu[pos]))
        if np.any(neg):
            lo = max(lo, float(np.max(self.b[neg] / hu[neg])))
        flat = ~(pos | neg)
        if np.any(self.b[flat] < 0):
            return -math.inf
        if hi <= 0 or hi < lo:
            return -math.inf
        return hi


def least_distance(G: np.ndarray, h: np.ndarray):
    """Minimum-norm ``w`` with ``G w >= h`` (Lawson-Hanson LDP via NNLS), None if infeasible."""
    m, n = G.shape
    if m == 0:
        return np.zeros(n)
    if np.all(h <= 0):
        return np.zeros(n)
    scale = max(float(np.max(np.abs(h))), 1e-300)
    E = np.vstack([G.T, (h / scale)[None, :]])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    u, _ = nnls(E, rhs, maxiter=50 * (m + n + 1))
    r = E @ u - rhs
    if abs(r[-1]) < 1e-14 or np.linalg.norm(r) < 1e-14:
        return None
    return -r[:n] / r[-1] * scale


@dataclass
class SetDescription:
    """Exact description of a (sampled) subdifferential.

    The set is the union of ``points``, 1-D ``intervals`` and ``polyhedra``.
    """

    dim: int
    points: np.ndarray = None
    intervals: list = field(default_factory=list)
    polyhedra: list = field(default_factory=list)
    truncated: bool = False
    truncation_bound: float | None = None

    def __post_init__(self):
        if self.points is None:
            self.points = np.zeros((0, self.dim))

    def is_empty(self) -> bool:
        return (self.points.shape[0] == 0 and not self.intervals
                and all(p.is_empty() for p in self.polyhedra))

    def distance(self, target=None):
        """``d(target; set)`` and a nearest element (``inf, None`` when empty)."""
        t = np.zeros(self.dim) if target is None else np.asarray(target, dtype=float)
        best, arg = math.inf, None
        if self.points.shape[0]:
            d = np.linalg.norm(self.points - t, axis=1)
            k = int(np.argmin(d))
            best, arg = float(d[k]), self.points[k].copy()
        for lo, hi in self.intervals:
            p = min(max(t[0], lo), hi)
            d = abs(t[0] - p)
            if d < best:
                best, arg = d, np.array([p])
        # visit polyhedra by a cheap lower bound; skip the rest once it
        # cannot beat the current best
        bounds = [poly.lower_bound(t) for poly in self.polyhedra]
        for k in np.argsort(bounds, kind="stable"):
            if bounds[k] >= best:
                break
            d, w = self.polyhedra[k].distance(t)
            if d < best:
                best, arg = d, w
        return best, arg

    def ray_sup(self, u: np.ndarray) -> float:
        """Largest ``s > 0`` with ``s u`` in the set, over all parts."""
        best = -math.inf
        if self.points.shape[0]:
            proj = self.points @ u
            aligned = np.linalg.norm(self.points - proj[:, None] * u, axis=1)
            ok = (proj > 0) & (aligned <= 1e-12 * np.maximum(1.0, proj))
            if np.any(ok):
                best = float(np.max(proj[ok]))
        for lo, hi in self.intervals:
            s = hi * u[0] if u[0] > 0 else lo * u[0]
            if s > 0:
                best = max(best, s)
        for poly in self.polyhedra:
            best = max(best, poly.ray_sup(u))
        return best

    def extreme_values(self):
        """All exact endpoint / point values (1-D sets)."""
        vals = [float(p[0]) for p in self.points]
        for lo, hi in self.intervals:
            vals += [lo, hi]
        return sorted(set(vals))


@dataclass
class SubdiffSet:
    """A computed subdifferential at ``x``.

    ``samples`` are the reported vectors (lattice points that passed the probe
    for numeric sets; endpoints and points for analytic sets).
    ``completeness`` is ``"analytic-exact"`` or ``"numeric-sampled"``.
    """

    x: np.ndarray
    kind: str
    samples: list
    completeness: str
    description: SetDescription
    intervals: list = field(default_factory=list)
    clusters: list = field(default_factory=list)
    lattice_step: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def truncated(self) -> bool:
        return self.description.truncated

    @property
    def truncation_bound(self):
        return self.description.truncation_bound

    def vectors(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, self.x.shape[0]))
        return np.array([s.v for s in self.samples])

    def is_empty(self) -> bool:
        return self.description.is_empty()

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "kind": self.kind,
            "completeness": self.completeness,
            "intervals": [list(iv) for iv in self.intervals],
            "clusters": self.clusters,
            "n_samples": len(self.samples),
            "lattice_step": self.lattice_step,
            "truncated": self.truncated,
            "truncation_bound": self.truncation_bound,
            "params": self.params,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "v", "kind", "residual"])
        for s in self.samples:
            w.writerow([" ".join(repr(float(a)) for a in s.x),
                        " ".join(repr(float(a)) for a in s.v), s.kind, repr(float(s.residual))])
        return buf.getvalue()


@dataclass
class MinNorm:
    value: float
    witness: np.ndarray | None
    method: str


# --------------------------------------------------------------------------
# probe machinery


def _as_point(f: PiecewiseFn, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.dim:
        raise ArgumentError(f"point must have {f.dim} coordinates")
    return x


def _probe_offsets(x: np.ndarray, delta: float, params: ProbeParams):
    """Probe directions ``U`` and geometric radii (offsets are ``r * u``)."""
    dim = x.shape[0]
    U = sphere_directions(dim, params.n_dirs if dim > 1 else 2)
    # below ~1e-9 |x| the offset itself is lost to rounding
    h_min = max(delta * params.r_min, 1e-9 * float(np.max(np.abs(x))))
    radii = np.geomspace(min(h_min, delta), delta, params.n_radii)
    return U, radii


def probe_polyhedron(f: PiecewiseFn, x: np.ndarray, params: ProbeParams,
                     delta: float | None = None, c: float | None = None,
                     fx: float | None = None, center=None) -> Polyhedron:
    """Polyhedron of vectors passing the proximal probe at ``x``.

    Also bounded by the lattice box ``|v - center|_inf <= extent`` with
    ``extent = min(2 L, v_cap)`` where ``L`` is the local Lipschitz estimate.
    """
    delta = params.delta if delta is None else delta
    fx = float(f.values(x[None, :])[0]) if fx is None else fx
    if not math.isfinite(fx):
        raise DomainError("subdifferential requested where f is not finite", x)
    U, radii = _probe_offsets(x, delta, params)
    fy = f.values((x + radii[:, None, None] * U[None, :, :]).reshape(-1, f.dim))
    fy = fy.reshape(radii.size, U.shape[0])
    hn = np.broadcast_to(radii[:, None], fy.shape)
    finite = np.isfinite(fy)
    slopes = np.abs(fy[finite] - fx) / hn[finite]
    lip = float(np.max(slopes)) if slopes.size else 0.0
    sigma = max(float(np.median(slopes)) if slopes.size else 0.0, 1e-300)
    if c is None:
        c = params.c if params.c is not None else 10.0 / delta
        if params.relative and params.c is None:
            c *= sigma
    with np.errstate(invalid="ignore"):
        noise = 16 * _EPS * (abs(fx) + np.abs(fy)) + params.atol
        b_all = np.where(finite, (fy - fx + 0.5 * c * hn**2 + noise) / hn, math.inf)
    # probes along one direction share a row; only the tightest bound matters
    b = b_all.min(axis=0)
    keep = np.isfinite(b)
    H, b = U[keep], b[keep]
    v_cap = params.v_max * (sigma if params.relative else 1.0)
    extent = max(2.0 * lip, 1e-300)
    truncated = extent > v_cap
    extent = min(extent, v_cap)
    if center is None:
        center = np.zeros(f.dim)
    eye = np.eye(f.dim)
    H = np.vstack([H, eye, -eye])
    b = np.concatenate([b, center + extent, -(center - extent)])
    poly = Polyhedron(H, b, x.copy(), float(c), float(delta), truncated)
    poly.center = np.asarray(center, dtype=float)
    poly.extent = extent
    poly.lip = lip
    # blur of the probe itself: the curvature allowance plus rounding noise,
    # at the most favourable radius; no lattice finer than this is meaningful
    with np.errstate(invalid="ignore"):
        blur = np.where(finite, 0.5 * c * hn + noise / hn, 0.0).max(axis=1)
    poly.resolution = float(np.min(blur))
    return poly


def _neighbor_points(f: PiecewiseFn, x: np.ndarray, params: ProbeParams) -> np.ndarray:
    if f.dim == 1:
        U = np.array([[1.0], [-1.0]])
    else:
        U = sphere_directions(f.dim, 8)
    ds = params.grid_step * np.arange(1, params.n_neighbors + 1)
    return np.array([x + d * u for d in ds for u in U]), np.repeat(ds, U.shape[0])


def _relative_delta(x, params: ProbeParams, anchor) -> float:
    if anchor is None:
        return params.delta
    dist = float(np.linalg.norm(x - anchor))
    return min(params.delta, 0.25 * dist) if dist > 0 else params.delta


def _regular_description(f, x, params, delta=None, c=None) -> SetDescription:
    """Probe at ``x``; an empty result is retried on balls 10x and 100x
    smaller (the default ``c`` grows accordingly), since curvature above ``c``
    on ``B_delta`` rejects every vector even where a subgradient exists."""
    g = f.piece_gradient(x)
    delta = params.delta if delta is None else delta
    for k in range(3):
        poly = probe_polyhedron(f, x, params, delta=delta * 10.0**-k, c=c,
                                center=g if g is not None else None)
        if not poly.is_empty():
            break
    return SetDescription(f.dim, polyhedra=[poly], truncated=poly.truncated,
                          truncation_bound=poly.extent if poly.truncated else None)


def numeric_description(f: PiecewiseFn, x, kind: str, params: ProbeParams | None = None,
                        anchor=None) -> SetDescription:
    """Polyhedral description of the probed regular or limiting subdifferential.

    ``anchor`` (a reference point) shrinks ``delta`` to a quarter of the
    distance to it; used by the moduli estimators.
    """
    params = params or ProbeParams()
    x = _as_point(f, x)
    delta = _relative_delta(x, params, anchor)
    base = _regular_description(f, x, params, delta=delta)
    if kind == "regular":
        return base
    if kind != "limiting":
        raise ArgumentError(f"numeric_description supports regular/limiting, not {kind!r}")
    c0 = base.polyhedra[0].c
    f_tol = params.f_tolerance
    if anchor is not None:
        # base points must stay much closer to x than x is to the anchor
        dist = float(np.linalg.norm(x - anchor))
        if dist > 0 and 1e-3 * dist < params.rho:
            params = replace(params, rho=1e-3 * dist)
            f_tol = 10 * params.grid_step * max(1.0, base.polyhedra[0].lip)
    fx = float(f.values(x[None, :])[0])
    pts, ds = _neighbor_points(f, x, params)
    fv = f.values(pts)
    attentive = np.isfinite(fv) & (np.abs(fv - fx) <= f_tol)
    polys = list(base.polyhedra)
    for p, d in zip(pts[attentive], ds[attentive]):
        d_loc = min(delta, 0.5 * d)
        g = f.piece_gradient(p)
        polys.append(probe_polyhedron(f, p, params, delta=d_loc, c=c0,
                                      center=g if g is not None else None))
    truncated = any(p.truncated for p in polys)
    bound = max((p.extent for p in polys if p.truncated), default=None)
    return SetDescription(f.dim, polyhedra=polys, truncated=truncated, truncation_bound=bound)


# --------------------------------------------------------------------------
# analytic 1-D oracle


def _one_sided(f: PiecewiseFn, x: float, side: int, tau: float):
    """Value limit and one-sided derivative of f at x from ``side`` (+1 / -1)."""
    pts = np.array([[x + side * tau], [x + 2 * side * tau]])
    vals = f.values(pts)
    X = pts[:1]
    act = f.active_matrix(X)[0]
    body = None
    if act.any():
        # body achieving the min just beside x
        cands = [j for j in np.flatnonzero(act)]
        best = min(cands, key=lambda j: float(f.pieces[j].body.values(X)[0]))
        body = f.pieces[best].body
    fx = float(f.values(np.array([[x]]))[0])
    deriv = None
    if body is not None:
        with np.errstate(all="ignore"):
            jet = body.jet(np.array([[x]]))
        if not jet.kink[0] and np.isfinite(jet.g[0, 0]) and np.isfinite(jet.v[0]):
            deriv = float(jet.g[0, 0])
    if deriv is None:
        deriv = _one_sided_difference(f, x, fx, side)
    return float(vals[0]), deriv


def _one_sided_difference(f: PiecewiseFn, x: float, fx: float, side: int) -> float:
    """One-sided derivative by second-order differences over shrinking steps.

    The step is chosen where the change between successive estimates and the
    rounding noise are jointly smallest, which copes with slowly converging
    quotients such as ``|x|^(3/2)``-type kinks.
    """
    scale = max(1.0, abs(x))
    taus = scale * 10.0 ** -np.arange(3, 16)
    pts = np.concatenate([x + side * taus, x + 2 * side * taus])[:, None]
    vals = f.values(pts)
    v1, v2 = vals[: taus.size], vals[taus.size:]
    with np.errstate(invalid="ignore", over="ignore"):
        D = side * (-3 * fx + 4 * v1 - v2) / (2 * taus)
        noise = (16 * _EPS * (abs(fx) + np.abs(v1) + np.abs(v2))
                 + 4 * _EPS * abs(x) * np.abs(D)) / taus
    change = np.abs(np.diff(D, prepend=np.nan))
    err = np.where(np.isfinite(change), np.maximum(change, noise), np.inf)
    if not np.any(np.isfinite(err)):
        return float(D[0])
    return float(D[int(np.nanargmin(err))])


def analytic_subdiff_1d(f: PiecewiseFn, x, kind: str = "limiting",
                        cont_tol: float = 1e-5) -> SubdiffSet:
    """Exact 1-D subdifferential of a continuous piecewise-C^1 function.

    Interior point: ``{f'(x)}`` (horizon: empty). Breakpoint with one-sided
    derivatives ``gm <= gp``: regular ``[gm, gp]``; limiting adds ``{gm, gp}``
    (so ``gm > gp`` gives regular empty, limiting ``{gm, gp}``).
    """
    if kind not in KINDS:
        raise ArgumentError(f"unknown kind {kind!r}")
    if f.dim != 1:
        raise UnsupportedStructure("analytic oracle is 1-D only")
    xa = _as_point(f, x)
    x0 = float(xa[0])
    fx = f.eval(xa)
    desc = SetDescription(1)
    if not math.isfinite(fx):
        return _analytic_set(xa, kind, desc)
    if kind == "horizon":
        g = f.piece_gradient(xa)
        if g is None:
            _breakpoint_derivatives(f, x0, fx, cont_tol)
        return _analytic_set(xa, kind, desc)
    g = f.piece_gradient(xa)
    if g is not None:
        desc.points = np.array([[float(g[0])]])
        return _analytic_set(xa, kind, desc)
    gm, gp = _breakpoint_derivatives(f, x0, fx, cont_tol)
    if gm <= gp:
        desc.intervals = [(gm, gp)]
    elif kind == "limiting":
        desc.points = np.array([[gm], [gp]])
    if kind == "limiting" and gm <= gp and gm == gp:
        desc.intervals = [(gm, gp)]
    return _analytic_set(xa, kind, desc)


def _breakpoint_derivatives(f, x0, fx, cont_tol):
    tau = 1e-7 * max(1.0, abs(x0))
    left_val, gm = _one_sided(f, x0, -1, tau)
    right_val, gp = _one_sided(f, x0, +1, tau)
    for val in (left_val, right_val):
        if not math.isfinite(val) or abs(val - fx) > cont_tol:
            raise UnsupportedStructure(
                f"f is not continuous at breakpoint {x0}; use numeric_subdiff")
    return gm, gp


def _analytic_set(xa, kind, desc: SetDescription) -> SubdiffSet:
    samples = [SubgradientSample(xa, np.array([v]), kind, 0.0, 0.0)
               for v in desc.extreme_values()]
    return SubdiffSet(xa, kind, samples, "analytic-exact", desc,
                      intervals=list(desc.intervals) + [(float(p[0]), float(p[0]))
                                                       for p in desc.points])


# --------------------------------------------------------------------------
# numeric oracle


def _lattice(center, extent, step, dim, budget):
    k = int(math.floor(extent / step + 1e-9))
    count = (2 * k + 1) ** dim
    if count > budget:
        raise BudgetExceeded(f"lattice of {count} points exceeds cap {budget}")
    ticks = np.arange(-k, k + 1) * step
    mesh = np.stack(np.meshgrid(*([ticks] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    return center + mesh


def _cluster(V: np.ndarray, radius: float) -> list:
    if V.shape[0] == 0:
        return []
    tree = cKDTree(V)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    n = V.shape[0]
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(adj, directed=False)
    out = []
    for lab in np.unique(labels):
        members = V[labels == lab]
        out.append({"representative": members.mean(axis=0).tolist(),
                    "lower": members.min(axis=0).tolist(),
                    "upper": members.max(axis=0).tolist(),
                    "count": int(members.shape[0])})
    out.sort(key=lambda c: c["representative"])
    return out


def numeric_subdiff(f: PiecewiseFn, x, kind: str = "limiting",
                    params: ProbeParams | None = None) -> SubdiffSet:
    """Sampled subdifferential by the proximal probe (regular / limiting) or by
    epigraph projection (horizon). An empty result is valid output."""
    params = params or ProbeParams()
    if kind not in KINDS:
        raise ArgumentError(f"unknown kind {kind!r}")
    xa = _as_point(f, x)
    fx = f.eval(xa)
    if not math.isfinite(fx):
        raise DomainError("f(x) must be finite", xa)
    if kind == "horizon":
        return horizon_subdiff(f, xa, params)
    desc = numeric_description(f, xa, kind, params)
    main = desc.polyhedra[0]
    # the lattice never resolves finer than the probe does
    step = params.lattice_step or max(main.extent / params.lattice_count(f.dim),
                                      max(p.resolution for p in desc.polyhedra))
    samples = []
    for poly in desc.polyhedra:
        V = _lattice(poly.center, poly.extent, step, f.dim, params.max_lattice)
        viol = poly.violation(V)
        for v in V[viol <= 0]:
            samples.append(SubgradientSample(poly.base, v, kind, poly.c, poly.delta, 0.0))
        # sets thinner than the lattice (segments, points) are caught by
        # projecting nearby lattice points onto the polyhedron
        near = V[(viol > 0) & (viol <= step * math.sqrt(f.dim))][:2000]
        seen = set()
        for v in near:
            d, w = poly.distance(v)
            if w is None or d > step * math.sqrt(f.dim):
                continue
            key = tuple(np.round(w / (0.25 * step)).astype(int).tolist())
            if key in seen:
                continue
            seen.add(key)
            r = max(0.0, float(poly.violation(w)[0]))
            samples.append(SubgradientSample(poly.base, w, kind, poly.c, poly.delta, r))
    # deterministic order: sorted lattice order
    samples.sort(key=lambda s: tuple(s.v.tolist()) + tuple(s.x.tolist()))
    V = np.array([s.v for s in samples]) if samples else np.zeros((0, f.dim))
    clusters = _cluster(V, 3 * step)
    eff = params.to_dict()
    eff.update(c=main.c, delta=main.delta)
    return SubdiffSet(xa, kind, samples, "numeric-sampled", desc,
                      intervals=[(c["lower"][0], c["upper"][0]) for c in clusters]
                      if f.dim == 1 else [],
                      clusters=clusters, lattice_step=step, params=eff)


def epigraph_normals(f: PiecewiseFn, x: np.ndarray, params: ProbeParams,
                     n_dirs: int = 256, n_graph: int = 2000) -> list:
    """Proximal normals to epi f at points near ``(x, f(x))`` via nearest-ray projection."""
    if f.dim > 2:
        raise UnsupportedStructure("epigraph normals are implemented for n <= 2")
    fx = float(f.values(x[None, :])[0])
    delta = params.delta
    if f.dim == 1:
        Y = x + np.linspace(-delta, delta, 2 * (n_graph // 2) + 1)[:, None]
        W = sphere_directions(2, n_dirs)
    else:
        from .piecewise import ball_grid

        Y = ball_grid(x, delta, int(math.sqrt(n_graph)) // 2 + 1, 2)
        W = sphere_directions(3, max(n_dirs, 200))
    fy = f.values(Y)
    keep = np.isfinite(fy)
    Y, fy = Y[keep], fy[keep]
    eta = delta / 4
    base = np.concatenate([x, [fx]])
    out = []
    for w in W:
        z = base + eta * w
        p, q = z[:-1], z[-1]
        fp = float(f.values(p[None, :])[0])
        if fp <= q:
            continue
        d2 = np.sum((Y - p) ** 2, axis=1) + np.maximum(fy - q, 0.0) ** 2
        k = int(np.argmin(d2))
        gap = math.sqrt(d2[k])
        if gap <= 1e-14:
            continue
        proj = np.concatenate([Y[k], [max(fy[k], q)]])
        if np.linalg.norm(proj - base) > 2 * eta:
            continue
        nvec = (z - proj) / gap
        out.append(EpigraphNormalSample(Y[k].copy(), float(proj[-1]), nvec[:-1].copy(),
                                        float(-nvec[-1]), gap))
    return out


def proximal_residual(f: PiecewiseFn, sample: SubgradientSample, n_radii: int = 24,
                      n_dirs: int = 64) -> float:
    """Largest violation of ``f(y) >= f(x) + <v, y - x> - (c/2)|y - x|^2`` over
    probe points ``y`` in ``B_delta(x)`` (0 when the inequality holds)."""
    x = np.asarray(sample.x, dtype=float)
    U = sphere_directions(f.dim, n_dirs)
    radii = np.geomspace(sample.delta * 1e-4, sample.delta, n_radii)
    Y = (x + radii[:, None, None] * U[None, :, :]).reshape(-1, f.dim)
    fy = f.values(Y)
    fx = float(f.values(x[None, :])[0])
    D = Y - x
    lower = fx + D @ sample.v - 0.5 * sample.c * np.sum(D * D, axis=1)
    return float(max(np.max(lower - fy), 0.0))


def horizon_subdiff(f: PiecewiseFn, x, params: ProbeParams | None = None) -> SubdiffSet:
    params = params or ProbeParams()
    xa = _as_point(f, x)
    normals = epigraph_normals(f, xa, params)
    samples = []
    for nrm in normals:
        if -params.lam_tol <= nrm.lam <= params.lam_tol and np.linalg.norm(nrm.v) > 0:
            s = nrm.as_subgradient(params.lam_tol)
            samples.append(SubgradientSample(xa, s.v, "horizon", math.nan, params.delta))
    V = np.array([s.v for s in samples]) if samples else np.zeros((0, f.dim))
    clusters = _cluster(V, 0.1)
    desc = SetDescription(f.dim, points=V)
    return SubdiffSet(xa, "horizon", samples, "numeric-sampled", desc, clusters=clusters,
                      params=params.to_dict())


# --------------------------------------------------------------------------
# unified access


def subdifferential(f: PiecewiseFn, x, kind: str = "limiting",
                    params: ProbeParams | None = None, method: str = "auto") -> SubdiffSet:
    """Subdifferential by the best available oracle.

    ``method``: ``"auto"`` (smooth collapse, then 1-D analytic, then numeric),
    ``"analytic"`` or ``"numeric"``.
    """
    if method == "numeric":
        return numeric_subdiff(f, x, kind, params)
    if method == "analytic":
        return analytic_subdiff_1d(f, x, kind)
    xa = _as_point(f, x)
    if kind != "horizon":
        g = f.piece_gradient(xa)
        if g is not None:
            desc = SetDescription(f.dim, points=g[None, :])
            return SubdiffSet(xa, kind, [SubgradientSample(xa, g, kind, 0.0, 0.0)],
                              "analytic-exact", desc,
                              intervals=[(float(g[0]), float(g[0]))] if f.dim == 1 else [])
    if f.dim == 1:
        try:
            return analytic_subdiff_1d(f, xa, kind)
        except UnsupportedStructure:
            pass
    return numeric_subdiff(f, xa, kind, params)


class SubdiffOracle:
    """Cached exact queries on subdifferentials along many points.

    ``anchor`` is the reference point of an estimator; numeric probes then use
    a radius of at most a quarter of the distance to it, and (when
    ``params.relative``) curvature and lattice bounds scaled by the local slope.
    """

    def __init__(self, f: PiecewiseFn, kind: str = "limiting",
                 params: ProbeParams | None = None, anchor=None, method: str = "auto"):
        if kind not in ("regular", "limiting"):
            raise ArgumentError("oracle supports regular and limiting kinds")
        self.f = f
        self.kind = kind
        self.params = params or ProbeParams(relative=anchor is not None)
        self.anchor = None if anchor is None else _as_point(f, anchor)
        self.method = method
        self._cache: dict = {}
        self.numeric_calls = 0

    def describe(self, x) -> SetDescription:
        xa = _as_point(self.f, x)
        key = tuple(xa.tolist())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if not math.isfinite(float(self.f.values(xa[None, :])[0])):
            desc = SetDescription(self.f.dim)
        else:
            desc = None
            if self.method != "numeric":
                g = self.f.piece_gradient(xa)
                if g is not None:
                    desc = SetDescription(self.f.dim, points=g[None, :])
                elif self.f.dim == 1:
                    try:
                        desc = analytic_subdiff_1d(self.f, xa, self.kind).description
                    except UnsupportedStructure:
                        desc = None
            if desc is None:
                self.numeric_calls += 1
                desc = numeric_description(self.f, xa, self.kind, self.params, self.anchor)
        self._cache[key] = desc
        return desc

    def distances(self, X, targets=None) -> np.ndarray:
        """``d(target_i; subdiff f(x_i))`` for a batch; ``targets`` default to 0."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.zeros_like(X) if targets is None else np.broadcast_to(targets, X.shape)
        out = np.full(X.shape[0], math.inf)
        finite = np.isfinite(self.f.values(X))
        G = self.f.gradients(X) if self.method != "numeric" else np.full_like(X, np.nan)
        smooth = finite & np.all(np.isfinite(G), axis=1)
        out[smooth] = np.linalg.norm(G[smooth] - T[smooth], axis=1)
        for i in np.flatnonzero(finite & ~smooth):
            out[i] = self.describe(X[i]).distance(T[i])[0]
        return out

    def distance(self, x, target=None):
        return self.describe(x).distance(target)


def min_norm_subgradient(f: PiecewiseFn, x, kind: str = "limiting",
                         params: ProbeParams | None = None, method: str = "auto") -> MinNorm:
    """``d(0; subdiff f(x))`` with a witness; ``+inf`` for an empty set.

    1-D analytic interval sets are exact (0 if the interval contains 0). Numeric
    sets are solved exactly over the probed polyhedra (least-distance QP).
    """
    xa = _as_point(f, x)
    fx = f.eval(xa)
    if not math.isfinite(fx):
        raise DomainError("f(x) must be finite", xa)
    if method == "numeric":
        desc = numeric_description(f, xa, kind, params)
        used = "numeric"
    else:
        sd = subdifferential(f, xa, kind, params, method)
        desc, used = sd.description, sd.completeness
    value, witness = desc.distance(None)
    return MinNorm(value, witness, used)


# --------------------------------------------------------------------------
# diagnostics


@dataclass
class ContinuityReport:
    x_bar: list
    v_bar: list
    radii: list
    gaps: list
    witnesses: list
    verdict: str
    gap_tol: float
    base_distance: float

    def to_dict(self):
        return dict(self.__dict__)


def subdiff_continuity_probe(f: PiecewiseFn, x_bar, v_bar=None, radii: Sequence | None = None,
                             kind: str = "limiting", params: ProbeParams | None = None,
                             n_points: int = 400, gap_tol: float = 1e-2,
                             member_tol: float = 1e-6) -> ContinuityReport:
    """Search ``gph subdiff f`` near ``(x_bar, v_bar)`` for large value gaps.

    For each radius the maximal ``|f(x) - f(x_bar)|`` over grid points ``x``
    with ``|x - x_bar| <= radius`` and ``d(v_bar; subdiff f(x)) <= radius`` is
    recorded. The verdict is CONTINUOUS when the gap at the smallest radius is
    at most ``gap_tol``, else VIOLATED with a witness ``(x, v)``.
    """
    xb = _as_point(f, x_bar)
    vb = np.zeros(f.dim) if v_bar is None else np.asarray(v_bar, dtype=float).reshape(f.dim)
    radii = list(radii) if radii is not None else [0.1 * 2.0**-k for k in range(10)]
    oracle = SubdiffOracle(f, kind, params or ProbeParams())
    fb = f.eval(xb)
    base_d, _ = oracle.distance(xb, vb)
    if base_d > member_tol:
        raise ArgumentError(f"v_bar is not in the {kind} subdifferential at x_bar "
                            f"(distance {base_d:.3g})")
    if f.dim == 1:
        U = np.linspace(-1, 1, 2 * (n_points // 2) + 1)[:, None]
    else:
        from .piecewise import ball_grid

        U = ball_grid(np.zeros(f.dim), 1.0, max(2, int(n_points ** (1 / f.dim)) // 2), f.dim)
    gaps, witnesses = [], []
    for r in radii:
        X = xb + r * U
        fv = f.values(X)
        ok = np.isfinite(fv)
        X, fv = X[ok], fv[ok]
        d = oracle.distances(X, vb)
        adm = d <= r
        if not np.any(adm):
            gaps.append(0.0)
            witnesses.append(None)
            continue
        gap = np.abs(fv - fb)
        gap[~adm] = -1
        k = int(np.argmax(gap))
        _, v = oracle.distance(X[k], vb)
        gaps.append(float(gap[k]))
        witnesses.append({"x": X[k].tolist(), "v": None if v is None else v.tolist(),
                          "f": float(fv[k])})
    verdict = "CONTINUOUS" if gaps[-1] <= gap_tol else "VIOLATED"
    return ContinuityReport(xb.tolist(), vb.tolist(), radii, gaps, witnesses, verdict, gap_tol,
                            float(base_d))


@dataclass
class ChainRuleReport:
    t: list
    residuals: list
    max_residual: float
    n_vectors: list

    def to_dict(self):
        return dict(self.__dict__)


def chain_rule_check(f: PiecewiseFn, curve: Callable, derivative: Callable,
                     t_samples: Sequence, kind: str = "limiting",
                     params: ProbeParams | None = None, h: float = 1e-6) -> ChainRuleReport:
    """Residuals ``|<v, x'(t)> - (f o x)'(t)|`` over sampled ``v`` in ``subdiff f(x(t))``.

    ``(f o x)'`` is taken by central differences with step ``h``. Without
    explicit ``params`` the limiting neighbourhood radius is ``rho = 10 h``,
    so that subgradients of nearby points enter on the differencing scale
    (their gradients differ by ``O(rho)``).
    """
    params = params or ProbeParams(rho=10 * h)
    residuals, counts = [], []
    for t in t_samples:
        pts = np.array([np.atleast_1d(curve(t + s)) for s in (-h, 0.0, h)], dtype=float)
        vals = f.values(pts)
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"curve leaves dom f near t={t}", pts[1])
        dphi = (vals[2] - vals[0]) / (2 * h)
        xd = np.atleast_1d(np.asarray(derivative(t), dtype=float))
        sd = subdifferential(f, pts[1], kind, params)
        V = sd.vectors()
        res = float(np.max(np.abs(V @ xd - dphi))) if V.shape[0] else 0.0
        residuals.append(res)
        counts.append(int(V.shape[0]))
    return ChainRuleReport(list(map(float, t_samples)), residuals,
                           max(residuals) if residuals else 0.0, counts)


def hausdorff_to_description(samples: np.ndarray, desc: SetDescription,
                             step: float | None = None) -> float:
    """Hausdorff distance between a finite 1-D sample set and an exact 1-D set."""
    A = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    parts = [(float(p[0]), float(p[0])) for p in desc.points] + list(desc.intervals)
    if A.size == 0 and not parts:
        return 0.0
    if A.size == 0 or not parts:
        return math.inf
    to_b = 0.0
    for a in A:
        to_b = max(to_b, min(0.0 if lo <= a <= hi else min(abs(a - lo), abs(a - hi))
                             for lo, hi in parts))
    to_a = 0.0
    for lo, hi in parts:
        inside = A[(A >= lo) & (A <= hi)]
        cands = [lo, hi]
        pts = np.concatenate([[lo], inside, [hi]])
        mids = 0.5 * (pts[1:] + pts[:-1])
        cands += mids.tolist()
        for b in cands:
            to_a = max(to_a, float(np.min(np.abs(A - b))))
    return max(to_b, to_a)


def with_params(params: ProbeParams | None, **kw) -> ProbeParams:
    return replace(params or ProbeParams(), **kw)
