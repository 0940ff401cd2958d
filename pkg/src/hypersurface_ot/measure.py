"""The measure map p -> mu(p) on CP^n.

For binary forms the measure is the normalized root-counting measure.  For
n >= 2 it is estimated by intersecting the hypersurface with random lines:
each line contributes its d intersection points (with multiplicity), each of
mass 1 / (d L).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances
from .errors import DegenerateSampling, InvalidMeasure, InvalidTransform
from .projective import (HomPoly, canonical_phase, is_unitary, normalize_rep, restrict_many,
                         sample_lines)
from .roots import all_roots, cluster_roots, solve_batch


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely supported probability measure on CP^n.

    Attributes
    ----------
    points : (N, n+1) complex array of unit representatives
    weights : (N,) positive weights summing to one
    lines : (N,) int array, index of the sampling line of each atom or -1
    info : free-form diagnostics (skipped lines, backward errors, ...)
    """

    points: np.ndarray
    weights: np.ndarray
    lines: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, complex))
        w = np.asarray(self.weights, float).reshape(-1)
        if pts.shape[0] == 0 or w.size == 0:
            raise InvalidMeasure("empty measure")
        if pts.shape[0] != w.size:
            raise InvalidMeasure("points and weights differ in length")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidMeasure("weights must be positive and finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidMeasure(f"weights sum to {w.sum()!r}, not 1")
        lines = (np.full(w.size, -1, dtype=np.int64) if self.lines is None
                 else np.asarray(self.lines, dtype=np.int64).reshape(-1))
        pts = canonical_phase(normalize_rep(pts))
        for arr in (pts, w, lines):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lines", lines)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self) -> int:
        return self.weights.size

    def sorted(self) -> "AtomicMeasure":
        """Canonical atom order: lexicographic in rounded coordinates, then weight."""
        keys = np.round(np.column_stack([self.points.real, self.points.imag]), 12)
        order = np.lexsort(np.vstack([self.lines, self.weights, keys.T[::-1]]))
        return AtomicMeasure(self.points[order], self.weights[order], self.lines[order], self.info)

    def integrate(self, f) -> complex:
        """Integral of ``f`` (vectorized over unit representatives) against the measure."""
        return np.sum(self.weights * f(self.points))

    def to_json(self) -> dict:
        return {"atoms": [
            {"point": [[float(c.real), float(c.imag)] for c in pt],
             "weight": float(w), "line": None if ln < 0 else int(ln)}
            for pt, w, ln in zip(self.points, self.weights, self.lines)]}

    @classmethod
    def from_json(cls, data: dict) -> "AtomicMeasure":
        try:
            atoms = data["atoms"]
            pts = np.array([[complex(re, im) for re, im in a["point"]] for a in atoms])
            w = np.array([float(a["weight"]) for a in atoms])
            ln = np.array([-1 if a.get("line") is None else int(a["line"]) for a in atoms])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMeasure(f"malformed measure JSON: {exc}") from exc
        if w.size == 0:
            raise InvalidMeasure("empty measure")
        # JSON round-off may leave the sum a few ulps from one
        return cls(pts, w / w.sum(), ln)


def dirac(point) -> AtomicMeasure:
    return AtomicMeasure(np.reshape(point, (1, -1)), [1.0])


# ---------------------------------------------------------------------------
# construction


def mu_exact_n1(p, cluster_radius=None) -> AtomicMeasure:
    """Root measure (1/d) sum m_z delta_z of a binary form."""
    rs = all_roots(p, cluster_radius)
    return AtomicMeasure(rs.points(), rs.multiplicities() / rs.d,
                         info={"residual": rs.residual}).sorted()


def intersect_lines(p: HomPoly, E0: np.ndarray, E1: np.ndarray, rng=None):
    """Intersection points of Z(p) with each line, repeated by multiplicity.

    Returns
    -------
    Z : (L, d, n+1) ambient unit representatives (NaN rows on skipped lines)
    W : (L, d, 2) the same points in line coordinates
    zero : (L,) bool, lines contained in Z(p)
    backward : (L,) relative backward error of each restricted root solve
    """
    A = restrict_many(p, E0, E1)
    # a restriction is treated as identically zero at rounding level
    scale = np.abs(p.bw_coords()).sum()
    zero = np.abs(A).max(axis=1) <= 1e-13 * scale
    A = np.where(zero[:, None], 0.0, A)
    W, be = solve_batch(A, rng)
    Z = W[..., :1] * E0[:, None, :] + W[..., 1:] * E1[:, None, :]
    return Z, W, zero, be


def mu_sampled(p: HomPoly, L: int = 2000, rng=None, lines=None,
               tolerances: Tolerances = Tolerances()) -> AtomicMeasure:
    """Line-sampled approximation of mu(p).

    Parameters
    ----------
    p : HomPoly
    L : int
        Number of random lines (ignored when ``lines`` is given).
    rng : numpy Generator, used for the lines when they are not supplied.
    lines : tuple (E0, E1), optional
        Explicit line frames, e.g. shared between neighbouring polynomials so
        that their estimates are coupled.

    Raises
    ------
    DegenerateSampling
        If every line lies inside Z(p).
    """
    p.require_nonzero()
    if lines is None:
        if L < 1:
            raise ValueError("need at least one line")
        rng = np.random.default_rng() if rng is None else rng
        E0, E1 = sample_lines(p.n, L, rng)
    else:
        E0, E1 = (np.atleast_2d(np.asarray(a, complex)) for a in lines)
    Z, W, zero, be = intersect_lines(p, E0, E1)
    keep = np.flatnonzero(~zero)
    if keep.size == 0:
        raise DegenerateSampling(f"all {len(zero)} sampled lines lie on Z(p)")
    d = p.d
    radius = tolerances.cluster_radius(d)
    pts, wts, lns = [], [], []
    Wk = W[keep]
    # clustering only matters on lines where two roots come closer than the radius
    if d > 1:
        D = _pairwise_fs_batch(Wk)
        D[:, np.arange(d), np.arange(d)] = np.inf
        close = D.min(axis=(1, 2)) <= radius
    else:
        close = np.zeros(keep.size, dtype=bool)
    simple = keep[~close]
    pts.append(Z[simple].reshape(-1, p.n + 1))
    wts.append(np.full(simple.size * d, 1.0 / (d * keep.size)))
    lns.append(np.repeat(simple, d))
    for i in keep[close]:
        for rep, mult in cluster_roots(W[i], radius):
            pts.append((rep[0] * E0[i] + rep[1] * E1[i])[None])
            wts.append(np.array([mult / (d * keep.size)]))
            lns.append(np.array([i]))
    w = np.concatenate(wts)
    info = {"lines": int(len(zero)), "skipped_lines": int(zero.sum()),
            "max_backward_error": float(be[keep].max())}
    return AtomicMeasure(np.concatenate(pts), w / w.sum(), np.concatenate(lns), info).sorted()


def _pairwise_fs_batch(W):
    """FS distances between roots on each line, W of shape (L, d, 2) -> (L, d, d)."""
    a = W[:, :, None, :]
    b = W[:, None, :, :]
    wedge = np.abs(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    cos = np.abs(np.sum(a * np.conj(b), axis=-1))
    return np.arctan2(wedge, cos)


def mu(p, config=None, rng=None) -> AtomicMeasure:
    """Exact measure for binary forms, line-sampled estimate otherwise."""
    if p.n == 1:
        return mu_exact_n1(p, None if config is None else config.tolerances.cluster_radius(p.d))
    L = 2000 if config is None else config.lines
    tol = Tolerances() if config is None else config.tolerances
    return mu_sampled(p, L, rng, tolerances=tol)


def line_variance(m: AtomicMeasure, f) -> dict:
    """Monte-Carlo diagnostics of the integral of ``f`` over the per-line contributions."""
    if np.any(m.lines < 0):
        raise InvalidMeasure("measure carries no line labels")
    ids, inv = np.unique(m.lines, return_inverse=True)
    per_line = np.bincount(inv, weights=(m.weights * f(m.points)).real) * len(ids)
    return {"mean": float(per_line.mean()), "variance": float(per_line.var(ddof=1)) if len(ids) > 1 else 0.0,
            "stderr": float(per_line.std(ddof=1) / np.sqrt(len(ids))) if len(ids) > 1 else 0.0,
            "lines": int(len(ids))}


def pushforward_unitary(m: AtomicMeasure, g) -> AtomicMeasure:
    """Image measure under [z] -> [g z]."""
    g = np.asarray(g, complex)
    if g.shape != (m.n + 1, m.n + 1) or not is_unitary(g):
        raise InvalidTransform("pushforward requires a unitary matrix of matching size")
    return AtomicMeasure(m.points @ g.T, m.weights, m.lines, m.info).sorted()


def support_residual(p: HomPoly, m: AtomicMeasure) -> float:
    """max |p(z)| over atoms, relative to the BW norm of p."""
    return float(np.abs(p.eval(m.points)).max() / p.bw_norm())
