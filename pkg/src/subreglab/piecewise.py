"""Extended-real-valued piecewise functions on boxes in R^n (n <= 3).

A :class:`PiecewiseFn` is a list of guarded pieces. A piece is active at ``x``
when every atom of its guard holds; the value at ``x`` is the minimum over
active bodies, and ``+inf`` when no piece is active. ``+inf`` is only ever the
default value: a body that evaluates to NaN or an infinity raises
:class:`DomainError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError
from .expr import Expr, Jet

MAX_DIM = 3


@dataclass(frozen=True)
class GuardAtom:
    """Polynomial sign condition ``poly REL 0``."""

    poly: Expr
    rel: str
    text: str = ""

    def holds(self, X: np.ndarray) -> np.ndarray:
        g = self.poly.values(X)
        if self.rel == "<":
            return g < 0
        if self.rel == "<=":
            return g <= 0
        if self.rel == ">":
            return g > 0
        if self.rel == ">=":
            return g >= 0
        return g == 0

    def strict(self, X: np.ndarray) -> np.ndarray:
        """True where the atom holds with nonzero slack (open condition)."""
        g = self.poly.values(X)
        if self.rel in ("<", "<="):
            return g < 0
        if self.rel in (">", ">="):
            return g > 0
        return np.zeros(X.shape[0], dtype=bool)

    def to_dsl(self) -> str:
        return self.text or f"{self.poly.to_dsl()} {self.rel} 0"


@dataclass(frozen=True)
class Piece:
    guard: tuple
    body: Expr

    def active(self, X: np.ndarray) -> np.ndarray:
        mask = np.ones(X.shape[0], dtype=bool)
        for atom in self.guard:
            mask &= atom.holds(X)
        return mask

    def open_interior(self, X: np.ndarray) -> np.ndarray:
        mask = np.ones(X.shape[0], dtype=bool)
        for atom in self.guard:
            mask &= atom.strict(X)
        return mask


@dataclass(frozen=True)
class Cell:
    """Sign-condition cell of one piece with an interior witness (if found)."""

    atoms: tuple
    witness: tuple | None

    def witness_ok(self) -> bool:
        if self.witness is None:
            return False
        X = np.asarray([self.witness], dtype=float)
        return all(bool(a.strict(X)[0]) or (a.rel == "=" and bool(a.holds(X)[0]))
                   for a in self.atoms)


@dataclass(frozen=True)
class PiecewiseFn:
    """Guarded-piece function with min-of-active tie rule and +inf default."""

    dim: int
    pieces: tuple
    box: tuple
    claims_semialgebraic: bool = False
    claims_lsc: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ArgumentError(f"dimension must be in 1..{MAX_DIM}, got {self.dim}")
        if len(self.box) != self.dim:
            raise ArgumentError("box must have one [lo, hi] pair per dimension")
        for lo, hi in self.box:
            if not lo < hi:
                raise ArgumentError(f"empty box interval [{lo}, {hi}]")
        for p in self.pieces:
            if p.body.max_variable() > self.dim:
                raise ArgumentError("piece body uses a variable beyond dim")

    # -- basics -------------------------------------------------------------

    @property
    def box_array(self) -> np.ndarray:
        return np.asarray(self.box, dtype=float)

    def in_box(self, X: np.ndarray) -> np.ndarray:
        b = self.box_array
        return np.all((X >= b[:, 0]) & (X <= b[:, 1]), axis=1)

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim) if self.dim > 1 else X.reshape(-1, 1)
        if X.shape[1] != self.dim:
            raise ArgumentError(f"points must have {self.dim} coordinates")
        return X

    def active_matrix(self, X) -> np.ndarray:
        """Boolean ``(m, pieces)`` matrix of active pieces; all False outside the box."""
        X = self._points(X)
        inside = self.in_box(X)
        return np.stack([p.active(X) & inside for p in self.pieces], axis=1)

    def values(self, X) -> np.ndarray:
        """Vectorized evaluation; points outside the box evaluate to +inf."""
        X = self._points(X)
        out = np.full(X.shape[0], math.inf)
        act = self.active_matrix(X)
        for j, piece in enumerate(self.pieces):
            rows = np.flatnonzero(act[:, j])
            if rows.size == 0:
                continue
            with np.errstate(all="ignore"):
                v = piece.body.values(X[rows])
            bad = ~np.isfinite(v)
            if bad.any():
                where = X[rows[np.argmax(bad)]]
                raise DomainError(
                    f"piece {j} body is undefined at {where.tolist()}", where)
            out[rows] = np.minimum(out[rows], v)
        return out

    def eval(self, x) -> float:
        """Value at one point (min over active pieces, +inf if none)."""
        X = self._points(x)
        if X.shape[0] != 1:
            raise ArgumentError("eval expects a single point")
        if not self.in_box(X)[0]:
            raise DomainError(f"point {X[0].tolist()} outside the bounding box", X[0])
        return float(self.values(X)[0])

    __call__ = eval

    # -- derivatives --------------------------------------------------------

    def interior_piece(self, X) -> np.ndarray:
        """Index of the unique piece containing each point in its open cell, else -1."""
        X = self._points(X)
        act = self.active_matrix(X)
        idx = np.full(X.shape[0], -1)
        single = act.sum(axis=1) == 1
        inside_open = self.in_box_open(X)
        for j, piece in enumerate(self.pieces):
            ok = single & act[:, j] & piece.open_interior(X) & inside_open
            idx[ok] = j
        return idx

    def in_box_open(self, X) -> np.ndarray:
        b = self.box_array
        return np.all((X > b[:, 0]) & (X < b[:, 1]), axis=1)

    def jets(self, X) -> tuple[np.ndarray, Jet]:
        """Jets of the active body at points strictly interior to one piece.

        Returns ``(ok, jet)`` where ``ok`` marks rows whose gradient and Hessian
        are exact (interior point, no kink in the body, finite derivatives).
        """
        X = self._points(X)
        m, n = X.shape
        idx = self.interior_piece(X)
        jet = Jet(np.full(m, np.nan), np.full((m, n), np.nan),
                  np.full((m, n, n), np.nan), np.ones(m, dtype=bool))
        for j, piece in enumerate(self.pieces):
            rows = np.flatnonzero(idx == j)
            if rows.size == 0:
                continue
            with np.errstate(all="ignore"):
                sub = piece.body.jet(X[rows])
            jet.v[rows], jet.g[rows], jet.h[rows] = sub.v, sub.g, sub.h
            jet.kink[rows] = sub.kink
        ok = (idx >= 0) & ~jet.kink & np.all(np.isfinite(jet.g), axis=1) \
            & np.isfinite(jet.v)
        return ok, jet

    def gradients(self, X) -> np.ndarray:
        """Batch :meth:`piece_gradient`; rows without a gradient are NaN."""
        ok, jet = self.jets(X)
        g = jet.g.copy()
        g[~ok] = np.nan
        return g

    def piece_gradient(self, x) -> np.ndarray | None:
        """Exact gradient of the active body, or None on a boundary or kink."""
        ok, jet = self.jets(self._points(x))
        return jet.g[0].copy() if ok[0] else None

    def piece_hessian(self, x) -> np.ndarray | None:
        ok, jet = self.jets(self._points(x))
        if not ok[0] or not np.all(np.isfinite(jet.h[0])):
            return None
        h = jet.h[0]
        return 0.5 * (h + h.T)

    # -- structure ------------------------------------------------------------

    def cells(self, n_samples: int = 4096, seed: int = 0) -> list[Cell]:
        """One :class:`Cell` per piece with a witness found by box sampling."""
        rng = np.random.default_rng(seed)
        b = self.box_array
        grid = [np.unique(np.r_[np.linspace(lo, hi, 9), 0.0 if lo <= 0 <= hi else lo])
                for lo, hi in b]
        mesh = np.stack(np.meshgrid(*grid, indexing="ij"), axis=-1).reshape(-1, self.dim)
        X = np.vstack([mesh, rng.uniform(b[:, 0], b[:, 1], size=(n_samples, self.dim))])
        cells = []
        for piece in self.pieces:
            ok = np.ones(X.shape[0], dtype=bool)
            for a in piece.guard:
                ok &= a.strict(X) if a.rel != "=" else a.holds(X)
            hit = np.flatnonzero(ok)
            witness = tuple(X[hit[0]].tolist()) if hit.size else None
            cells.append(Cell(piece.guard, witness))
        return cells

    def guard_coverage(self, n_samples: int = 2000, seed: int = 0) -> float:
        """Fraction of uniform box samples covered by at least one guard."""
        rng = np.random.default_rng(seed)
        b = self.box_array
        X = rng.uniform(b[:, 0], b[:, 1], size=(n_samples, self.dim))
        return float(self.active_matrix(X).any(axis=1).mean())

    def is_semialgebraic_syntax(self) -> bool:
        """True when no transcendental primitive appears in any body."""
        return not any(p.body.uses("sin") or p.body.uses("cos") for p in self.pieces)


def sphere_directions(dim: int, count: int) -> np.ndarray:
    """Unit directions: ``±1`` in 1-D, an angle grid in 2-D, Fibonacci points in 3-D.

    Axis directions are exact (components snapped to 0/±1).
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        count = max(4, count - count % 4)
        th = 2 * np.pi * np.arange(count) / count
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        k = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * k / count)
        th = np.pi * (1 + 5**0.5) * k
        U = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
        axes = np.vstack([np.eye(3), -np.eye(3)])
        U = np.vstack([axes, U])
    U[np.abs(U) < 1e-12] = 0.0
    U[np.abs(np.abs(U) - 1) < 1e-12] = np.sign(U[np.abs(np.abs(U) - 1) < 1e-12])
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def ball_grid(center, radius: float, n: int, dim: int) -> np.ndarray:
    """Cartesian grid of spacing ``radius / n`` inside the closed ball, center included.

    Doubling ``n`` yields a superset of points (nested refinement).
    """
    center = np.asarray(center, dtype=float).reshape(dim)
    ticks = np.arange(-n, n + 1) * (radius / n)
    mesh = np.stack(np.meshgrid(*([ticks] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    mesh = mesh[np.linalg.norm(mesh, axis=1) <= radius * (1 + 1e-12)]
    return center + mesh


def check_lsc(f: PiecewiseFn, x, radii=None, n_dirs: int = 64, tol: float = 1e-9) -> dict:
    """Probe lower semicontinuity at ``x`` from minima of f over shrinking spheres.

    The deficit ``max(f(x) - min, 0)`` must vanish as the radius shrinks: it
    is either within ``tol`` at the smallest radius, or non-increasing over
    the last four radii and at most a quarter of its value at the largest
    radius. A jump below ``f(x)`` keeps a constant deficit and fails.
    """
    x = np.asarray(x, dtype=float).reshape(f.dim)
    fx = f.eval(x)
    radii = radii if radii is not None else [1e-2 * 2.0**-k for k in range(12)]
    U = sphere_directions(f.dim, n_dirs)
    mins = []
    for r in radii:
        vals = f.values(x + r * U)
        mins.append(float(vals.min()))
    deficit = [max(fx - m, 0.0) for m in mins]
    last = deficit[-4:]
    shrinking = all(b <= a for a, b in zip(last, last[1:])) and deficit[-1] <= deficit[0] / 4
    ok = deficit[-1] <= tol or shrinking
    return {"value": fx, "radii": list(radii), "minima": mins, "deficits": deficit,
            "liminf": mins[-1], "ok": bool(ok)}
