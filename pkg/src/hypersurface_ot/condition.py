"""Condition geometry of binary forms along W2 geodesics.

Quantities for a binary form p of degree d and a point w of CP^1:

* ``dist_to_delta_at(p, w)``: BW-FS distance from [p] to the forms with a
  multiple root at w.  That set is the orthogonal complement of the kernels
  K_w = <z, w>^d and G_w = <z, w>^(d-1) <z, v> (v orthogonal to w), so the
  distance is arcsin of the norm of the projection of p/|p| onto span{K_w, G_w}.
* ``nu_norm = 1 / dist_to_delta_at``.
* ``alpha2(p, w)``: sum of the two smallest squared FS distances from w to roots.
* ``alpha4(p)``: smallest squared FS distance between two roots
  (roots counted with multiplicity, so a multiple root gives zero).
"""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .config import Tolerances
from .errors import DegenerateRootSet, InfiniteCondition, TrackingLost
from .hermitian import PolyPath
from .projective import (BinaryHomPoly, ProjPoint, as_binary, bw_distance, fs_distance_matrix,
                         fs_distance_reps, fs_geodesic_reps, normalize_rep)
from .roots import all_roots
from .transport import root_geodesic

GRID_NODES = 512


# ---------------------------------------------------------------------------
# distance to the discriminant


def _binom(d):
    return np.array([math.comb(d, k) for k in range(d + 1)], float)


def _kernel_pair(W, d):
    """BW coordinates (M, d+1) of the unit kernels K_w and G_w for unit rows W (M, 2)."""
    w0, w1 = np.conj(W[:, :1]), np.conj(W[:, 1:])
    k = np.arange(d + 1)
    sq = np.sqrt(_binom(d))
    # K_w = sum_k C(d,k) conj(w0)^k conj(w1)^(d-k) z0^k z1^(d-k); BW coords divide by sqrt C(d,k)
    K = sq * w0 ** k * w1 ** (d - k)
    # v = (-conj w1, conj w0) so <z, v> = -w1 z0 + w0 z1
    v0, v1 = -W[:, 1:], W[:, :1]
    km = np.arange(d)
    A = _binom(d - 1) * w0 ** km * w1 ** (d - 1 - km)  # <z,w>^(d-1), binary coefficients
    G = np.zeros((W.shape[0], d + 1), complex)
    G[:, 1:] += A * v0
    G[:, :-1] += A * v1
    G = G / sq
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return K, G


def _projection_sin(x, W, d):
    """Norm of the projection of the unit BW vector x onto span{K_w, G_w}, per row of W."""
    K, G = _kernel_pair(W, d)
    # K and G are BW-orthogonal; re-orthogonalize against rounding anyway
    G = G - np.sum(G * np.conj(K), axis=1)[:, None] * K
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    a = K @ np.conj(x)
    b = G @ np.conj(x)
    return np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)


def _projection_sin_eval(a, W):
    """Same quantity by evaluation: |p(w)|^2 + |d_v p(w)|^2 / d for BW-unit binary coefficients a.

    Follows from <p, K_w> = p(w), <p, G_w> = d_v p(w) / d and |G_w|^2 = 1 / d.
    """
    d = a.size - 1
    k = np.arange(d + 1)
    w0, w1 = W[:, :1], W[:, 1:]
    val = (w0 ** k * w1 ** (d - k)) @ a
    d0 = (k * w0 ** np.maximum(k - 1, 0) * w1 ** (d - k)) @ a
    d1 = (w0 ** k * (d - k) * w1 ** np.maximum(d - k - 1, 0)) @ a
    dv = -np.conj(W[:, 1]) * d0 + np.conj(W[:, 0]) * d1
    return np.sqrt(np.abs(val) ** 2 + np.abs(dv) ** 2 / d)


def _projection_sin_scalar(coeffs, theta, phi):
    """Scalar version of _projection_sin_eval at w = [cos(theta/2), e^(i phi) sin(theta/2)]."""
    d = len(coeffs) - 1
    w0 = math.cos(theta / 2)
    w1 = cmath.exp(1j * phi) * math.sin(theta / 2)
    # Horner in the ratio is unstable near the poles; accumulate monomials directly
    val = d0 = d1 = 0j
    p0 = [1.0 + 0j] * (d + 1)
    p1 = [1.0 + 0j] * (d + 1)
    for k in range(1, d + 1):
        p0[k] = p0[k - 1] * w0
        p1[k] = p1[k - 1] * w1
    for k, a in enumerate(coeffs):
        val += a * p0[k] * p1[d - k]
        if k:
            d0 += k * a * p0[k - 1] * p1[d - k]
        if k < d:
            d1 += (d - k) * a * p0[k] * p1[d - k - 1]
    dv = -w1.conjugate() * d0 + w0 * d1
    return math.sqrt(abs(val) ** 2 + abs(dv) ** 2 / d)


def _bw_unit_binary(p: BinaryHomPoly) -> np.ndarray:
    x = p.coeffs / np.sqrt(_binom(p.d))
    return x / np.linalg.norm(x)


def dist_to_delta_at(p, w) -> float:
    """FS distance from [p] to the forms with a multiple root at ``w``."""
    p = as_binary(p)
    p.require_nonzero()
    rep = w.rep if isinstance(w, ProjPoint) else normalize_rep(w)
    if p.d == 1:
        return math.pi / 2
    s = float(_projection_sin(_bw_unit_binary(p), rep[None], p.d)[0])
    return math.asin(min(s, 1.0))


def nu_norm(p, w, tol: float = Tolerances().near_discriminant) -> float:
    """Normalized condition number 1 / dist_to_delta_at(p, w).

    Distances at or below ``tol`` are rounding-level and count as a multiple root.
    """
    dist = dist_to_delta_at(p, w)
    if dist <= tol:
        raise InfiniteCondition(f"p has a multiple root at w (distance {dist:.1e})")
    return 1.0 / dist


def fibonacci_points(m: int) -> np.ndarray:
    """Unit representatives of m nearly uniform points of CP^1 (Fibonacci sphere)."""
    i = np.arange(m) + 0.5
    theta = np.arccos(1 - 2 * i / m)
    phi = np.pi * (1 + 5 ** 0.5) * i
    return _bloch(theta, phi)


def _bloch(theta, phi):
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def _to_angles(w):
    w = w * np.conj(w[0]) / abs(w[0]) if abs(w[0]) > 0 else w
    theta = 2 * math.atan2(abs(w[1]), abs(w[0]))
    phi = float(np.angle(w[1])) if abs(w[1]) > 0 else 0.0
    return theta, phi


@dataclass(frozen=True)
class DiscriminantDistance:
    distance: float
    argmin: np.ndarray


def dist_to_discriminant(p, grid: int = GRID_NODES, refine: bool = True) -> DiscriminantDistance:
    """min over w of dist_to_delta_at(p, w): Fibonacci grid plus Nelder-Mead refinement.

    Refinement starts from the two best grid nodes and the midpoints of the
    three closest root pairs; the minimizer sits near where roots are closest.
    """
    p = as_binary(p)
    p.require_nonzero()
    d = p.d
    if d == 1:
        return DiscriminantDistance(math.pi / 2, np.array([1.0 + 0j, 0.0]))
    a = p.coeffs / p.bw_norm()
    G = fibonacci_points(grid)
    s = _projection_sin_eval(a, G)
    order = np.argsort(s)
    best_s, best_w = float(s[order[0]]), G[order[0]]
    if refine:
        starts = [G[i] for i in order[:2]]
        R = all_roots(p).expanded()
        D = fs_distance_matrix(R, R)
        iu = np.triu_indices(len(R), 1)
        for k in np.argsort(D[iu])[:3]:
            i, j = iu[0][k], iu[1][k]
            m = R[i] + R[j] * np.exp(-1j * np.angle(np.vdot(R[j], R[i])))
            if np.linalg.norm(m) > 1e-12:
                starts.append(m / np.linalg.norm(m))
        coeffs = [complex(c) for c in a]
        f = lambda ang: _projection_sin_scalar(coeffs, ang[0], ang[1])
        for w0 in starts:
            res = minimize(f, np.array(_to_angles(w0)), method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-15, "maxiter": 2000})
            if res.fun < best_s:
                best_s = float(res.fun)
                best_w = _bloch(np.array([res.x[0]]), np.array([res.x[1]]))[0]
    return DiscriminantDistance(math.asin(min(best_s, 1.0)), best_w)


# ---------------------------------------------------------------------------
# alpha functions


def _expanded_roots(p):
    rs = all_roots(p)
    if len(rs.roots) < 2:
        raise DegenerateRootSet("need at least two distinct roots")
    return rs.expanded()


def alpha2(p, w, roots=None) -> float:
    """Sum of the two smallest squared FS distances from ``w`` to the roots of ``p``."""
    R = _expanded_roots(p) if roots is None else np.asarray(roots)
    rep = w.rep if isinstance(w, ProjPoint) else normalize_rep(w)
    dist = np.sort(fs_distance_matrix(rep[None], R)[0] ** 2)
    return float(dist[0] + dist[1])


def alpha4(p, roots=None) -> float:
    """Smallest squared FS distance between two roots of ``p`` (with multiplicity)."""
    R = _expanded_roots(p) if roots is None else np.asarray(roots)
    D = fs_distance_matrix(R, R) ** 2
    D[np.diag_indices_from(D)] = np.inf
    return float(D.min())


# ---------------------------------------------------------------------------
# root tracking and condition length


@dataclass(frozen=True, eq=False)
class LiftedPath:
    base: PolyPath
    root_track: np.ndarray  # (K, 2) unit representatives

    def __post_init__(self):
        if len(self.root_track) != len(self.base):
            raise ValueError("one root per time node")


def _newton_cp1(p: BinaryHomPoly, z, iters=30):
    """Newton's method for a root of p in the chart where the estimate is bounded."""
    z = normalize_rep(z)
    if abs(z[0]) >= abs(z[1]):
        # chart [1, u]: sum_k a_k u^(d-k), i.e. numpy-descending coefficients a
        c, u, lift = p.coeffs, z[1] / z[0], (lambda x: np.array([1.0, x]))
    else:
        c, u, lift = p.coeffs[::-1], z[0] / z[1], (lambda x: np.array([x, 1.0]))
    dc = np.polyder(c)
    for _ in range(iters):
        der = np.polyval(dc, u)
        if der == 0:
            break
        step = np.polyval(c, u) / der
        u = u - step
        if abs(step) <= 1e-15 * max(1.0, abs(u)):
            break
    return normalize_rep(lift(u))


def track_root(path: PolyPath, z0) -> LiftedPath:
    """Continue a root of the first knot along the path.

    At each node the previous root is Newton-corrected against the current
    knot; the correction must stay within half the current minimal root
    separation and land on the root nearest to the previous one.
    """
    if path.n != 1:
        raise ValueError("root tracking is defined for binary forms")
    z = z0.rep if isinstance(z0, ProjPoint) else normalize_rep(z0)
    first = path.knots[0].as_binary()
    R0 = all_roots(first).points()
    k0 = int(np.argmin(fs_distance_matrix(z[None], R0)[0]))
    if fs_distance_reps(z, R0[k0]) > 1e-6:
        raise TrackingLost("starting point is not a root of the first knot", node_index=0)
    track = [R0[k0]]
    for i, knot in enumerate(path.knots[1:], start=1):
        p = knot.as_binary()
        R = all_roots(p).expanded()
        if len(R) > 1:
            D = fs_distance_matrix(R, R)
            D[np.diag_indices_from(D)] = np.inf
            sep = float(D.min())
        else:
            sep = math.pi
        prev = track[-1]
        new = _newton_cp1(p, prev)
        nearest = R[int(np.argmin(fs_distance_matrix(prev[None], R)[0]))]
        jump = fs_distance_reps(prev, new)
        if jump > 0.5 * sep or fs_distance_reps(new, nearest) > 0.25 * sep:
            raise TrackingLost(f"root jumped {jump:.3e} against separation {sep:.3e}", node_index=i)
        track.append(new)
    return LiftedPath(path, np.array(track))


@dataclass(frozen=True)
class ConditionLength:
    l_cond: float
    l_v: float
    nu: np.ndarray
    speeds: np.ndarray  # |gamma'|_V per segment


def condition_length(lift: LiftedPath) -> ConditionLength:
    """L_cond = int nu(p_t, z_t) |gamma'_t|_V dt and L_V = int |gamma'_t|_V dt.

    Segment speeds come from chord distances in the product of the BW-FS
    metric on forms and the FS metric on CP^1; nu is averaged by the
    trapezoid rule over each segment.
    """
    knots = lift.base.knots
    t = lift.base.times
    nu = []
    for i, (k, z) in enumerate(zip(knots, lift.root_track)):
        try:
            nu.append(nu_norm(k, z))
        except InfiniteCondition as exc:
            raise InfiniteCondition(str(exc), node_index=i) from exc
    nu = np.array(nu)
    dt = np.diff(t)
    dp = np.array([bw_distance(a, b) for a, b in zip(knots[:-1], knots[1:])])
    dz = np.array([fs_distance_reps(a, b) for a, b in zip(lift.root_track[:-1], lift.root_track[1:])])
    seg = np.sqrt(dp ** 2 + dz ** 2)
    l_v = float(seg.sum())
    l_cond = float(np.sum(0.5 * (nu[:-1] + nu[1:]) * seg))
    return ConditionLength(l_cond, l_v, nu, seg / dt)


# ---------------------------------------------------------------------------
# experiment along W2 geodesics


@dataclass
class P14Report:
    times: np.ndarray
    alpha4: np.ndarray
    alpha4_bound: np.ndarray
    alpha2: np.ndarray  # (lifts, times)
    alpha2_bound: np.ndarray
    dist_disc: np.ndarray
    l_cond: np.ndarray  # per lift
    l_v: np.ndarray
    nu_max: np.ndarray
    slack: float = 1e-9
    info: dict = field(default_factory=dict)

    @property
    def alpha4_violations(self) -> int:
        return int(np.sum(self.alpha4 < self.alpha4_bound - self.slack))

    @property
    def alpha2_violations(self) -> int:
        return int(np.sum(self.alpha2 < self.alpha2_bound - self.slack))

    @property
    def min_dist_disc(self) -> float:
        return float(self.dist_disc.min())

    def to_json(self) -> dict:
        return {
            "times": self.times.tolist(), "alpha4": self.alpha4.tolist(),
            "alpha4_bound": self.alpha4_bound.tolist(), "alpha2": self.alpha2.tolist(),
            "alpha2_bound": self.alpha2_bound.tolist(), "dist_to_discriminant": self.dist_disc.tolist(),
            "l_cond": self.l_cond.tolist(), "l_v": self.l_v.tolist(), "nu_max": self.nu_max.tolist(),
            "alpha4_violations": self.alpha4_violations, "alpha2_violations": self.alpha2_violations,
            "min_dist_to_discriminant": self.min_dist_disc, "slack": self.slack, "info": self.info}

    def profiles_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "alpha4", "alpha4_bound", "alpha2_lift0", "alpha2_bound_lift0", "dist_to_discriminant"])
        for i, t in enumerate(self.times):
            wr.writerow([repr(float(v)) for v in (t, self.alpha4[i], self.alpha4_bound[i], self.alpha2[0, i],
                                                  self.alpha2_bound[0, i], self.dist_disc[i])])
        return buf.getvalue()


def p14_experiment(p0, p1, grid: int = 33, rng=None, disc_grid: int = GRID_NODES) -> P14Report:
    """Quasi-concavity, discriminant avoidance and condition length along the W2 geodesic.

    Every root of p0 is lifted along the geodesic, giving one alpha2 profile
    and one (L_cond, L_V, max nu) triple per root.
    """
    p0, p1 = as_binary(p0).normalized(), as_binary(p1).normalized()
    geo = root_geodesic(p0, p1)
    t = np.linspace(0.0, 1.0, grid)
    polys = [p0] + [geo.poly_at(ti) for ti in t[1:-1]] + [p1]
    roots = [all_roots(p).expanded() for p in polys]
    a4 = np.array([alpha4(p, r) for p, r in zip(polys, roots)])
    a4_bound = (1 - t) ** 2 * a4[0] + t ** 2 * a4[-1]
    path = PolyPath(t, [p.to_hompoly() for p in polys])
    lifts = [track_root(path, z) for z in geo.source]
    a2 = np.array([[alpha2(p, z, r) for p, z, r in zip(polys, lift.root_track, roots)] for lift in lifts])
    a2_bound = (1 - t) ** 2 * a2[:, :1] + t ** 2 * a2[:, -1:]
    dd = np.array([dist_to_discriminant(p, disc_grid).distance for p in polys])
    lc, lv, numax = [], [], []
    track_dev = 0.0
    for lift, src, tgt in zip(lifts, geo.source, geo.target):
        c = condition_length(lift)
        lc.append(c.l_cond)
        lv.append(c.l_v)
        numax.append(max(c.nu[0], c.nu[-1]))
        expect = np.array([fs_distance_reps(z, fs_geodesic_reps(src, tgt, ti))
                           for z, ti in zip(lift.root_track, t)])
        track_dev = max(track_dev, float(expect.max()))
    info = {"w2": geo.w2, "d": p0.d, "track_vs_geodesic": track_dev}
    return P14Report(t, a4, a4_bound, a2, a2_bound, dd, np.array(lc), np.array(lv), np.array(numax), info=info)


@dataclass(frozen=True)
class BetaFit:
    beta3: float
    beta4: float
    beta3_at_beta4_one: float
    satisfied: float  # fraction of instances obeying the fitted bound

    def to_json(self) -> dict:
        return {"beta3": self.beta3, "beta4": self.beta4, "beta3_at_beta4_one": self.beta3_at_beta4_one,
                "satisfied_fraction": self.satisfied, "conjectured_beta4": 1.0}


def fit_condition_exponents(l_cond, l_v, nu_max) -> BetaFit:
    """Tightest (in mean log) bound L_cond <= b3 L_V max(nu)^b4 with b4 >= 0 over a batch.

    Solves the linear program min sum(b + b4 x_i - y_i) s.t. b + b4 x_i >= y_i in
    log coordinates x = log max nu, y = log(L_cond / L_V).
    """
    l_cond, l_v, nu_max = (np.asarray(a, float) for a in (l_cond, l_v, nu_max))
    keep = l_v > 0
    x = np.log(nu_max[keep])
    y = np.log(l_cond[keep] / l_v[keep])
    n = x.size
    res = linprog(c=[n, x.sum()], A_ub=-np.column_stack([np.ones(n), x]), b_ub=-y,
                  bounds=[(None, None), (0, None)], method="highs")
    b, b4 = res.x
    # one ulp-scale margin so the fitted bound holds under re-evaluation
    b3 = math.exp(b) * (1 + 1e-12)
    b3_one = math.exp(float(np.max(y - x))) * (1 + 1e-12)
    ok = l_cond[keep] <= b3 * l_v[keep] * nu_max[keep] ** b4
    return BetaFit(b3, float(b4), b3_one, float(ok.mean()))


def p14_batch(pairs, grid: int = 33, disc_grid: int = GRID_NODES) -> dict:
    """Run the experiment on many endpoint pairs and fit the condition-length exponents."""
    reports = [p14_experiment(a, b, grid, disc_grid=disc_grid) for a, b in pairs]
    lc = np.concatenate([r.l_cond for r in reports])
    lv = np.concatenate([r.l_v for r in reports])
    nm = np.concatenate([r.nu_max for r in reports])
    fit = fit_condition_exponents(lc, lv, nm)
    return {"instances": len(reports),
            "alpha4_violations": sum(r.alpha4_violations for r in reports),
            "alpha2_violations": sum(r.alpha2_violations for r in reports),
            "min_dist_to_discriminant": min(r.min_dist_disc for r in reports),
            "fit": fit.to_json(), "reports": reports}
