"""Zeros of binary forms on CP^1 with multiplicities.

The solver is a batched Aberth-Ehrlich iteration: many binary forms of the
same degree (e.g. the restrictions of one polynomial to many lines) are
solved simultaneously with vectorized Horner evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Tolerances
from .errors import InvalidPolynomial, RootFindingFailed
from .projective import (BinaryHomPoly, ProjPoint, as_binary, canonical_phase, fs_distance_matrix,
                         fs_distance_reps, poly_from_roots)

MAX_ITER = 200
MAX_RESTARTS = 4
BACKWARD_TOL = 1e-12
# clusters closer than MERGE_RADIUS are merged when the form rebuilt from the
# merged root set stays within MERGE_TOL (FS distance in BW coordinates) of p
MERGE_RADIUS = 1e-3
MERGE_TOL = 1e-10


@dataclass(frozen=True)
class RootSet:
    """Distinct projective roots with multiplicities."""

    roots: tuple  # of (ProjPoint, int)
    residual: float

    @property
    def d(self) -> int:
        return sum(m for _, m in self.roots)

    def points(self) -> np.ndarray:
        """Unit representatives of the distinct roots, shape (k, 2)."""
        return np.array([pt.rep for pt, _ in self.roots]).reshape(-1, 2)

    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.roots], dtype=int)

    def expanded(self) -> np.ndarray:
        """Unit representatives repeated by multiplicity, shape (d, 2)."""
        return np.repeat(self.points(), self.multiplicities(), axis=0)


# ---------------------------------------------------------------------------
# batched univariate Aberth


def _horner(C, Z):
    """p and p' for coefficient rows C (B, m+1, descending powers) at Z (B, k)."""
    p = np.broadcast_to(C[:, :1], Z.shape).astype(complex)
    dp = np.zeros_like(p)
    for j in range(1, C.shape[1]):
        dp = dp * Z + p
        p = p * Z + C[:, j:j + 1]
    return p, dp


def _abs_horner(C, Z):
    A = np.abs(C)
    R = np.abs(Z)
    s = np.broadcast_to(A[:, :1], Z.shape).astype(float)
    for j in range(1, C.shape[1]):
        s = s * R + A[:, j:j + 1]
    return s


def _correction(C, Z, eye):
    p, dp = _horner(C, Z)
    scale = _abs_horner(C, Z)
    err = np.abs(p) / np.where(scale > 0, scale, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        diff = Z[:, :, None] - Z[:, None, :]
        diff[:, eye] = 1.0
        inv = 1.0 / diff
        inv[:, eye] = 0.0
        ratio = p / dp
        w = ratio / (1.0 - ratio * inv.sum(axis=2))
    # roots already at rounding level, or with a degenerate correction, stay put
    w = np.where(np.isfinite(w) & (err > 0.25 * BACKWARD_TOL), w, 0.0)
    return w, err


def _aberth_from(C, Z, max_iter=MAX_ITER):
    """Aberth-Ehrlich on monic rows C (B, m+1) from starting roots Z (B, m).

    Returns the roots and the relative backward error of each row.
    """
    B, m = Z.shape
    eye = np.eye(m, dtype=bool)
    Z = Z.copy()
    active = np.ones(B, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Za = Z[idx]
        w, err = _correction(C[idx], Za, eye)
        Z[idx] = Za - w
        done = err.max(axis=1) <= 0.25 * BACKWARD_TOL
        stalled = np.all(np.abs(w) <= 4e-16 * np.abs(Za), axis=1)
        active[idx[done | stalled]] = False
    p, _ = _horner(C, Z)
    scale = _abs_horner(C, Z)
    return Z, (np.abs(p) / np.where(scale > 0, scale, 1.0)).max(axis=1)


def _start_circle(C, rng=None):
    """Starting roots on the circle of radius |c_m / c_0|^(1/m)."""
    B, m1 = C.shape
    m = m1 - 1
    radius = np.abs(C[:, -1] / C[:, 0]) ** (1.0 / m)
    offset = np.full((B, 1), 0.4)
    if rng is not None:
        radius = radius * rng.uniform(0.5, 2.0, size=B)
        offset = rng.uniform(0, 2 * np.pi, size=(B, 1))
    Z = radius[:, None] * np.exp(1j * (2 * np.pi * np.arange(m)[None, :] / m + offset))
    if rng is not None:
        Z = Z * (1 + 1e-3 * (rng.standard_normal(Z.shape) + 1j * rng.standard_normal(Z.shape)))
    return Z


def _solve_reduced(A, rng):
    """Roots (B, m, 2) of binary rows A (B, m+1) whose extreme coefficients are nonzero."""
    B, m1 = A.shape
    m = m1 - 1
    if m == 0:
        return np.zeros((B, 0, 2), complex), np.zeros(B)
    flip = np.abs(A[:, -1]) > np.abs(A[:, 0])
    # u-chart [1, u]: descending coefficients a_0 .. a_m; v-chart [v, 1]: a_m .. a_0
    C = np.where(flip[:, None], A[:, ::-1], A)
    C = C / C[:, :1]
    if m == 1:
        X, be = -C[:, 1:2], np.zeros(B)
    else:
        X, be = _aberth_from(C, _start_circle(C))
        for _ in range(MAX_RESTARTS):
            bad = np.flatnonzero(be > BACKWARD_TOL)
            if bad.size == 0:
                break
            Xb, beb = _aberth_from(C[bad], _start_circle(C[bad], rng))
            better = beb < be[bad]
            X[bad[better]], be[bad[better]] = Xb[better], beb[better]
    ones = np.ones_like(X)
    R = np.where(flip[:, None, None], np.stack([X, ones], -1), np.stack([ones, X], -1))
    R = R / np.linalg.norm(R, axis=-1, keepdims=True)
    return R, be


def solve_batch(A, rng=None):
    """Expanded roots of many binary forms of one degree.

    Parameters
    ----------
    A : array (B, d+1)
        Binary coefficients, ``A[b, k]`` multiplying ``z0^k z1^(d-k)``.

    Returns
    -------
    R : array (B, d, 2)
        Unit representatives, repeated by multiplicity (unclustered).  Rows
        of identically-zero forms are NaN.
    backward : array (B,)
        Relative backward error per row (``inf`` for zero rows).
    """
    rng = np.random.default_rng(12345) if rng is None else rng
    A = np.atleast_2d(np.asarray(A, complex))
    B, d1 = A.shape
    d = d1 - 1
    R = np.full((B, d, 2), np.nan + 0j)
    be = np.full(B, np.inf)
    nz = A != 0
    zero_row = ~nz.any(axis=1)
    # exact leading zeros: z0^k0 divides (root [0,1]); trailing zeros: z1^kd divides (root [1,0])
    k0 = np.where(zero_row, 0, np.argmax(nz, axis=1))
    kd = np.where(zero_row, 0, np.argmax(nz[:, ::-1], axis=1))
    live = ~zero_row
    for a, b in set(zip(k0[live].tolist(), kd[live].tolist())):
        rows = np.flatnonzero(live & (k0 == a) & (kd == b))
        Rr, ber = _solve_reduced(A[rows, a:d1 - b], rng)
        inf_pts = np.concatenate([np.tile([0.0, 1.0], (a, 1)), np.tile([1.0, 0.0], (b, 1))]).astype(complex)
        R[rows] = np.concatenate([Rr, np.broadcast_to(inf_pts, (rows.size, a + b, 2))], axis=1)
        be[rows] = ber
    return R, be


def cluster_roots(R, radius):
    """Single-linkage clustering of unit representatives R (d, 2) within FS ``radius``.

    Returns a list of (mean representative, count).  The mean is taken after
    aligning phases with the cluster's first member.
    """
    d = R.shape[0]
    D = fs_distance_matrix(R, R)
    label = -np.ones(d, dtype=int)
    k = 0
    for i in range(d):
        if label[i] >= 0:
            continue
        stack = [i]
        label[i] = k
        while stack:
            j = stack.pop()
            for nb in np.flatnonzero((D[j] <= radius) & (label < 0)):
                label[nb] = k
                stack.append(nb)
        k += 1
    out = []
    for c in range(k):
        members = R[label == c]
        ref = members[0]
        ph = np.conj(members @ np.conj(ref))
        ph = ph / np.where(np.abs(ph) > 0, np.abs(ph), 1.0)
        mean = (members * ph[:, None]).mean(axis=0)
        out.append((mean / np.linalg.norm(mean), members.shape[0]))
    return out


def _eval_binary_unit(a, R):
    """|p(b)| at unit representatives R (k, 2) for the binary coefficients ``a``."""
    d = a.size - 1
    k = np.arange(d + 1)
    return np.abs((R[:, :1] ** k * R[:, 1:] ** (d - k)) @ a)


def all_roots(p, cluster_radius=None, rng=None) -> RootSet:
    """Projective roots of a binary form with multiplicities.

    Parameters
    ----------
    p : BinaryHomPoly or HomPoly with n = 1
    cluster_radius : float, optional
        FS radius under which computed roots are merged into one multiple
        root; defaults to ``1e-6 * d``.

    Raises
    ------
    InvalidPolynomial
        If ``p`` is identically zero.
    RootFindingFailed
        If the backward error stays above ``1e-12`` after all restarts.
    """
    p = as_binary(p)
    p.require_nonzero()
    pn = p.normalized()
    radius = Tolerances().cluster_radius(p.d) if cluster_radius is None else cluster_radius
    R, be = solve_batch(pn.coeffs[None], rng)
    if be[0] > BACKWARD_TOL:
        res = float(_eval_binary_unit(pn.coeffs, R[0]).max())
        raise RootFindingFailed(f"Aberth iteration stalled at backward error {be[0]:.3e}", residual=res)
    clusters = _certified_merge(pn, cluster_roots(R[0], radius))
    reps = canonical_phase(np.array([c for c, _ in clusters]))
    order = _canonical_order(reps)
    roots = tuple((ProjPoint(reps[i]), int(clusters[i][1])) for i in order)
    residual = float(_eval_binary_unit(pn.coeffs, reps).max())
    return RootSet(roots, residual)


def _bw_vector(b: BinaryHomPoly) -> np.ndarray:
    return b.coeffs / np.sqrt([math.comb(b.d, k) for k in range(b.d + 1)])


def _certified_merge(pn: BinaryHomPoly, clusters):
    """Merge nearby clusters while the rebuilt form still matches ``pn``.

    A multiple root of an ill-conditioned form comes out of the solver split
    by roughly (backward error)^(1/m), which can exceed the plain clustering
    radius.  A merge is accepted if the form rebuilt from the merged root set
    is no farther from ``pn`` than twice the current rebuild error plus
    MERGE_TOL; joining two truly distinct roots at distance s moves the
    rebuilt form by O(s^2) and is refused.
    """
    clusters = list(clusters)
    target = _bw_vector(pn)
    target = target / np.linalg.norm(target)

    def rebuild_error(cl):
        v = _bw_vector(poly_from_roots(cl))
        return fs_distance_reps(v / np.linalg.norm(v), target)

    current = rebuild_error(clusters)
    rejected = set()
    while len(clusters) > 1:
        reps = np.array([c for c, _ in clusters])
        D = fs_distance_matrix(reps, reps)
        D[np.tril_indices(len(clusters))] = np.inf
        order = np.argsort(D, axis=None)
        pair = None
        for flat in order:
            i, j = np.unravel_index(flat, D.shape)
            if D[i, j] > MERGE_RADIUS:
                break
            key = (tuple(np.round(reps[i], 12)), tuple(np.round(reps[j], 12)))
            if key not in rejected:
                pair = (int(i), int(j), key)
                break
        if pair is None:
            break
        i, j, key = pair
        (a, ma), (b, mb) = clusters[i], clusters[j]
        b = b * (np.vdot(b, a) / max(abs(np.vdot(b, a)), 1e-300))
        merged = (ma * a + mb * b) / np.linalg.norm(ma * a + mb * b)
        trial = [c for k, c in enumerate(clusters) if k not in (i, j)] + [(merged, ma + mb)]
        err = rebuild_error(trial)
        if err <= 2 * current + MERGE_TOL:
            clusters, current = trial, err
        else:
            rejected.add(key)
    return clusters


def _canonical_order(reps):
    keys = np.round(np.column_stack([reps.real, reps.imag]), 12)
    return np.lexsort(keys.T[::-1])


def multiplicity_of(p, w: ProjPoint, tol: float = 1e-6) -> int:
    """Order of vanishing of the binary form ``p`` at ``w``.

    The form is BW-normalized and expanded along ``s -> p(w + s v)`` with
    ``v`` the unit tangent at ``w``; coefficients are compared in
    BW-orthonormal scale so the threshold is unitarily invariant.
    """
    p = as_binary(p)
    pn = p.normalized()
    w0, w1 = w.rep
    v = np.array([-np.conj(w1), np.conj(w0)])
    frame = np.stack([w.rep, v], axis=1)
    b = pn.to_hompoly().compose(frame).as_binary().coeffs  # b[k] multiplies z0^k z1^(d-k)
    d = p.d
    for j in range(d + 1):
        # coefficient of s^j is b[d - j]
        if abs(b[d - j]) / math.sqrt(math.comb(d, j)) > tol:
            return j
    return d
