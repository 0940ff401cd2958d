"""Wasserstein distances between atomic measures on (CP^n, d_FS).

Equal-mass atoms are matched with the Hungarian algorithm; general weights go
through an exact transportation LP.  The entropic solver at the bottom is an
approximation and never used for reported distances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix
from scipy.special import logsumexp

from .errors import EndpointOnDiscriminant, InvalidMeasure, SizeMismatch
from .measure import AtomicMeasure, mu_exact_n1
from .projective import BinaryHomPoly, as_binary, fs_distance_matrix, fs_geodesic_reps, poly_from_roots
from .roots import all_roots

MAX_EXPANDED = 6000


@dataclass(frozen=True)
class Matching:
    """Transport plan supported on ``pairs`` = (source, target, mass)."""

    pairs: tuple
    cost: float
    q: float
    route: str = "assignment"

    def plan(self, n_src: int, n_tgt: int) -> np.ndarray:
        P = np.zeros((n_src, n_tgt))
        for i, j, m in self.pairs:
            P[i, j] += m
        return P

    def to_json(self) -> dict:
        return {"q": self.q, "cost": self.cost, "route": self.route,
                "pairs": [[int(i), int(j), float(m)] for i, j, m in self.pairs]}


def cost_matrix(mu: AtomicMeasure, nu: AtomicMeasure, q: float) -> np.ndarray:
    if mu.n != nu.n:
        raise InvalidMeasure("measures live on projective spaces of different dimension")
    return fs_distance_matrix(mu.points, nu.points) ** q


def _uniform_counts(w: np.ndarray, max_den: int = MAX_EXPANDED):
    """Integer counts c with c / c.sum() == w, or None if no small denominator fits."""
    fr = [Fraction(float(x)).limit_denominator(max_den) for x in w]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
        if den > max_den:
            return None
    counts = np.array([f.numerator * (den // f.denominator) for f in fr], dtype=np.int64)
    if np.abs(counts / den - w).max() > 1e-12:
        return None
    return counts


def expand_uniform(mu: AtomicMeasure, nu: AtomicMeasure):
    """Atom index lists expanding both measures to a common number of equal masses.

    Raises SizeMismatch when the weights admit no common expansion of size at
    most MAX_EXPANDED.
    """
    cm, cn = _uniform_counts(mu.weights), _uniform_counts(nu.weights)
    if cm is None or cn is None:
        raise SizeMismatch("weights are not multiples of a common small unit mass")
    Nm, Nn = int(cm.sum()), int(cn.sum())
    N = Nm * Nn // math.gcd(Nm, Nn)
    if N > MAX_EXPANDED:
        raise SizeMismatch(f"common expansion needs {N} atoms")
    return np.repeat(np.arange(len(mu)), cm * (N // Nm)), np.repeat(np.arange(len(nu)), cn * (N // Nn))


def wq_assignment(mu: AtomicMeasure, nu: AtomicMeasure, q: float = 2.0):
    """W_q between measures made of equal unit masses, by optimal assignment.

    Returns
    -------
    distance : float
    matching : Matching (masses aggregated back onto the original atoms)
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    I, J = expand_uniform(mu, nu)
    C = cost_matrix(mu, nu, q)[np.ix_(I, J)]
    rows, cols = linear_sum_assignment(C)
    N = len(I)
    total = float(C[rows, cols].sum()) / N
    agg: dict = {}
    for r, c in zip(rows, cols):
        key = (int(I[r]), int(J[c]))
        agg[key] = agg.get(key, 0.0) + 1.0 / N
    pairs = tuple((i, j, m) for (i, j), m in sorted(agg.items()))
    return total ** (1.0 / q), Matching(pairs, total, q, "assignment")


def wq_lp(mu: AtomicMeasure, nu: AtomicMeasure, q: float = 2.0):
    """W_q by the exact transportation linear program (HiGHS dual simplex)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    C = cost_matrix(mu, nu, q)
    m, n = C.shape
    rows = np.concatenate([np.repeat(np.arange(m), n), m + np.tile(np.arange(n), m)])
    cols = np.concatenate([np.arange(m * n), np.arange(m * n)])
    A = coo_matrix((np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n)).tocsr()
    b = np.concatenate([mu.weights, nu.weights])
    # one marginal constraint is redundant; dropping it keeps the system full rank
    res = linprog(C.ravel(), A_eq=A[:-1], b_eq=b[:-1], bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise InvalidMeasure(f"transport LP failed: {res.message}")
    P = np.clip(res.x.reshape(m, n), 0.0, None)
    total = max(float(np.sum(P * C)), 0.0)
    nz = np.argwhere(P > 1e-15)
    pairs = tuple((int(i), int(j), float(P[i, j])) for i, j in nz)
    return total ** (1.0 / q), Matching(pairs, total, q, "lp")


def wq(mu: AtomicMeasure, nu: AtomicMeasure, q: float = 2.0):
    """Exact W_q, routed to the assignment solver whenever the masses allow it."""
    try:
        return wq_assignment(mu, nu, q)
    except SizeMismatch:
        return wq_lp(mu, nu, q)


def sinkhorn(mu: AtomicMeasure, nu: AtomicMeasure, q: float = 2.0, eps: float = 1e-2,
             iters: int = 2000, tol: float = 1e-12) -> float:
    """Entropic approximation of W_q (log-domain Sinkhorn).

    The plan's marginals are met only to the iteration tolerance, so the value
    can land on either side of the exact distance.
    """
    C = cost_matrix(mu, nu, q)
    la, lb = np.log(mu.weights), np.log(nu.weights)
    f = np.zeros(len(mu))
    g = np.zeros(len(nu))
    for _ in range(iters):
        f_new = -eps * logsumexp((g[None, :] - C) / eps + lb[None, :], axis=1)
        g = -eps * logsumexp((f_new[:, None] - C) / eps + la[:, None], axis=0)
        if np.max(np.abs(f_new - f)) < tol:
            f = f_new
            break
        f = f_new
    logP = (f[:, None] + g[None, :] - C) / eps + la[:, None] + lb[None, :]
    return float(np.sum(np.exp(logP) * C)) ** (1.0 / q)


# ---------------------------------------------------------------------------
# displacement interpolation


def mccann_interpolate(mu0: AtomicMeasure, mu1: AtomicMeasure, matching: Matching, t: float,
                       directions=None) -> AtomicMeasure:
    """Move every matched mass along its FS geodesic to parameter ``t``.

    ``directions`` optionally maps a pair index to a tie-break vector used
    when the two atoms are orthogonal.
    """
    pts, w = [], []
    for k, (i, j, m) in enumerate(matching.pairs):
        tie = None if directions is None else directions.get(k)
        pts.append(fs_geodesic_reps(mu0.points[i], mu1.points[j], t, tie))
        w.append(m)
    w = np.array(w)
    return AtomicMeasure(np.array(pts), w / w.sum()).sorted()


@dataclass(frozen=True, eq=False)
class RootGeodesic:
    """W_2 geodesic between root measures of two binary forms with simple roots.

    ``source[k]`` is matched to ``target[k]``; both are unit representatives.
    """

    source: np.ndarray
    target: np.ndarray
    w2: float
    _aux: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.source.shape[0]

    def roots_at(self, t: float) -> np.ndarray:
        return np.array([fs_geodesic_reps(x, y, t) for x, y in zip(self.source, self.target)])

    def poly_at(self, t: float) -> BinaryHomPoly:
        return poly_from_roots([(r, 1) for r in self.roots_at(t)])


def root_geodesic(p0, p1, cluster_radius=None) -> RootGeodesic:
    """Optimal (q=2) matching of the roots of ``p0`` and ``p1``.

    Raises EndpointOnDiscriminant if an endpoint has a multiple root.
    """
    p0, p1 = as_binary(p0), as_binary(p1)
    if p0.d != p1.d:
        raise SizeMismatch("endpoints of different degree")
    r0, r1 = all_roots(p0, cluster_radius), all_roots(p1, cluster_radius)
    for r in (r0, r1):
        if np.any(r.multiplicities() > 1):
            raise EndpointOnDiscriminant("endpoint has a multiple root")
    X, Y = r0.points(), r1.points()
    C = fs_distance_matrix(X, Y) ** 2
    rows, cols = linear_sum_assignment(C)
    w2 = math.sqrt(float(C[rows, cols].sum()) / len(rows))
    return RootGeodesic(X[rows], Y[cols], w2)


def w2_polynomial_geodesic(p0, p1, t: float) -> BinaryHomPoly:
    """Binary form whose root measure is the W_2 geodesic from mu(p0) to mu(p1) at ``t``."""
    return root_geodesic(p0, p1).poly_at(t)


def w2_between(p0, p1, q: float = 2.0) -> float:
    """Exact W_q between the root measures of two binary forms."""
    return wq_assignment(mu_exact_n1(p0), mu_exact_n1(p1), q)[0]
