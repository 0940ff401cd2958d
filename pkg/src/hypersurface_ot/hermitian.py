"""The Hermitian form h_p on tangent vectors, its Kahler part, and path energies.

With unit representatives b of the zeros,

    h_p(q1, q2) = vol(S^{2n-1}) E_l [ sum_{b in Z(p) cap l} q1(b) conj(q2(b)) / |grad p(b)|^2 ]

(the expectation over uniformly random lines l; for n = 1 the only line is
CP^1 itself).  The squared metric speed of a curve c_t is
h_c(c', c') / (d vol(S^{2n-1})).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidPolynomial, NearDiscriminant
from .measure import intersect_lines
from .projective import HomPoly, as_binary, basis, monomial_values, sample_lines
from .roots import solve_batch

GRAD_FLOOR = 1e-8


def sphere_volume(n: int) -> float:
    """Volume of the unit sphere S^{2n-1} in C^n."""
    return 2 * math.pi ** n / math.factorial(n - 1)


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals over the zero set are evaluated.

    mode: ``"exact"`` (n = 1, sum over the roots) or ``"mc"`` (random lines).
    """

    mode: str = "exact"
    lines: int = 2000
    seed: int = 0
    time_nodes: int = 64

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError(f"unknown quadrature mode {self.mode!r}")
        if self.lines < 1 or self.time_nodes < 2:
            raise ValueError("line and time-node counts must be positive")

    @classmethod
    def for_dim(cls, n: int, **kw) -> "QuadratureSpec":
        return cls(mode="exact" if n == 1 else "mc", **kw)

    def line_frames(self, n: int):
        return sample_lines(n, self.lines, np.random.default_rng(self.seed))


@dataclass(frozen=True)
class HermitianValue:
    value: complex
    stderr: float = 0.0


@dataclass(frozen=True, eq=False)
class ZeroNodes:
    """Quadrature nodes on the zero set: points (L, k, n+1), weights 1/|grad p|^2."""

    points: np.ndarray
    weights: np.ndarray
    n: int
    min_grad: float
    line_ids: np.ndarray = field(default=None)


def zero_nodes(p: HomPoly, quad: QuadratureSpec, lines=None) -> ZeroNodes:
    """Zeros of ``p`` as quadrature nodes, grouped by line.

    Raises NearDiscriminant if |grad p| / |p| < 1e-8 at some node.
    """
    p.require_nonzero()
    if quad.mode == "exact":
        if p.n != 1:
            raise DimensionMismatch("exact quadrature is only available for n = 1")
        R, _ = solve_batch(p.as_binary().coeffs[None])
        Z = R
        ids = np.zeros(1, dtype=int)
    else:
        E0, E1 = quad.line_frames(p.n) if lines is None else lines
        Z, _, zero, _ = intersect_lines(p, E0, E1)
        ids = np.flatnonzero(~zero)
        Z = Z[ids]
    flat = Z.reshape(-1, p.n + 1)
    g = np.linalg.norm(p.grad_c(flat), axis=1) / p.bw_norm()
    k = int(np.argmin(g))
    if g[k] < GRAD_FLOOR:
        raise NearDiscriminant(f"|grad p| = {g[k]:.3e} at a zero", node=flat[k].tolist())
    w = (1.0 / (g * p.bw_norm()) ** 2).reshape(Z.shape[:2])
    return ZeroNodes(Z, w, p.n, float(g[k]), ids)


def _values(polys, nodes: ZeroNodes) -> np.ndarray:
    flat = nodes.points.reshape(-1, nodes.n + 1)
    return np.stack([q.eval(flat).reshape(nodes.points.shape[:2]) for q in polys])


def _check(p, polys):
    for q in polys:
        if (q.n, q.d) != (p.n, p.d):
            raise DimensionMismatch("tangent vectors must live in the same H(n, d) as p")


def hhat(p: HomPoly, q1: HomPoly, q2: HomPoly, quad: QuadratureSpec = None) -> HermitianValue:
    """h_p(q1, q2), with a Monte-Carlo standard error in line mode."""
    quad = QuadratureSpec.for_dim(p.n) if quad is None else quad
    _check(p, (q1, q2))
    nodes = zero_nodes(p, quad)
    V = _values((q1, q2), nodes)
    per_line = np.sum(V[0] * np.conj(V[1]) * nodes.weights, axis=1) * sphere_volume(p.n)
    L = per_line.size
    stderr = float(np.std(per_line, ddof=1) / math.sqrt(L)) if L > 1 else 0.0
    return HermitianValue(complex(per_line.mean()), stderr)


def hermitian_gram(p: HomPoly, basis_polys, quad: QuadratureSpec = None) -> np.ndarray:
    """Matrix G[a, b] = h_p(basis[a], basis[b])."""
    quad = QuadratureSpec.for_dim(p.n) if quad is None else quad
    basis_polys = list(basis_polys)
    _check(p, basis_polys)
    nodes = zero_nodes(p, quad)
    V = _values(basis_polys, nodes)  # (k, L, m)
    L = V.shape[1]
    G = np.einsum("alm,blm,lm->ab", V, np.conj(V), nodes.weights) / L
    return G * sphere_volume(p.n)


def bw_orthonormal_basis(n: int, d: int):
    """Monomials scaled to unit BW norm."""
    T = len(basis(n, d).exps)
    return [HomPoly.from_bw_coords(n, d, np.eye(T)[k]) for k in range(T)]


def kahler_form(p: HomPoly, q1: HomPoly, q2: HomPoly, quad: QuadratureSpec = None) -> float:
    """sigma_p(q1, q2) = Im h_p(q1, q2)."""
    return float(hhat(p, q1, q2, quad).value.imag)


# ---------------------------------------------------------------------------
# speeds


def metric_speed_n1(c, cdot):
    """Metric speed |mu'| of the root measure of c_t at velocity ``cdot``.

    Returns ``(hermitian, root_velocity)``: the first from the Hermitian
    formula, the second from implicit differentiation of c_t(z_j(t)) = 0,
    giving each root's FS speed.
    """
    c, cdot = as_binary(c), as_binary(cdot)
    if c.d != cdot.d:
        raise DimensionMismatch("c and its velocity must have the same degree")
    p, v = c.to_hompoly(), cdot.to_hompoly()
    nodes = zero_nodes(p, QuadratureSpec("exact"))
    Z = nodes.points[0]
    herm = math.sqrt(float(np.sum(np.abs(v.eval(Z)) ** 2 * nodes.weights[0]).real) / c.d)
    G = p.grad_c(Z)
    cv = v.eval(Z)
    total = 0.0
    for b, g, val in zip(Z, G, cv):
        if abs(b[0]) >= abs(b[1]):
            # chart [1, u]: du/dt = -cdot(1, u) / (dc/dz1)(1, u), homogeneity scales by b0^(d-1)
            u = b[1] / b[0]
            du = -(val / b[0] ** c.d) / (g[1] / b[0] ** (c.d - 1))
            total += (abs(du) / (1 + abs(u) ** 2)) ** 2
        else:
            w = b[0] / b[1]
            dw = -(val / b[1] ** c.d) / (g[0] / b[1] ** (c.d - 1))
            total += (abs(dw) / (1 + abs(w) ** 2)) ** 2
    return herm, math.sqrt(total / c.d)


def speed_sq_batch_n1(C: np.ndarray, V: np.ndarray):
    """Squared metric speeds for binary coefficient rows C with velocities V.

    Both arrays are (M, d+1) in the binary convention.  Returns the speeds
    (M,) and the smallest relative gradient norm on the zeros of each row.
    """
    M, d1 = C.shape
    d = d1 - 1
    R, _ = solve_batch(C)  # (M, d, 2)
    k = np.arange(d1)
    b0, b1 = R[..., 0:1], R[..., 1:2]
    # c(b) terms and partial derivatives at unit roots
    with np.errstate(divide="ignore", invalid="ignore"):
        pw0 = b0 ** k
        pw1 = b1 ** (d - k)
        val = np.einsum("mrk,mk->mr", pw0 * pw1, V)
        d0 = np.einsum("mrk,mk->mr", np.where(k > 0, k * b0 ** np.maximum(k - 1, 0), 0) * pw1, C)
        d1_ = np.einsum("mrk,mk->mr", pw0 * np.where(k < d, (d - k) * b1 ** np.maximum(d - k - 1, 0), 0), C)
    g2 = np.abs(d0) ** 2 + np.abs(d1_) ** 2
    wts = np.array([math.comb(d, j) for j in range(d1)], float)
    norm2 = np.sum(np.abs(C) ** 2 / wts, axis=1)
    # g2 = 0 only on the discriminant, which min_grad reports to the caller's guard
    with np.errstate(divide="ignore", invalid="ignore"):
        speed2 = np.sum(np.abs(val) ** 2 / g2, axis=1) / d
    min_grad = np.sqrt(g2.min(axis=1) / norm2)
    return speed2, min_grad


def speed_sq_lines(C: np.ndarray, V: np.ndarray, n: int, d: int, lines):
    """Squared metric speeds of rows C (M, T) with velocities V, averaged over shared lines.

    Coefficients are on the dense monomial basis of H(n, d).  Returns
    ``(speed2 (M,), stderr (M,), min_grad (M,))``.  Lines contained in the
    zero set of a row carry no zeros and are left out of that row's average.
    """
    E0, E1 = lines
    L = E0.shape[0]
    M = C.shape[0]
    b = basis(n, d)
    N = d + 1
    omega = np.exp(2j * np.pi * np.arange(N) / N)
    pts = (omega[None, :, None] * E0[:, None, :] + E1[:, None, :]).reshape(-1, n + 1)
    vals = (monomial_values(pts, n, d) @ C.T).reshape(L, N, M)
    A = np.fft.fft(vals, axis=1) / N  # (L, d+1, M)
    A = np.moveaxis(A, 2, 0).reshape(M * L, N)
    scale = np.repeat(np.abs(C * np.sqrt(b.bw_weight)).sum(axis=1), L)
    zero = np.abs(A).max(axis=1) <= 1e-13 * scale
    A[zero] = 0.0
    W, _ = solve_batch(A)  # (M L, d, 2)
    W = np.where(zero[:, None, None], 0.0, W)
    W = W.reshape(M, L, d, 2)
    Z = W[..., :1] * E0[None, :, None, :] + W[..., 1:] * E1[None, :, None, :]  # (M, L, d, n+1)
    flat = Z.reshape(M, L * d, n + 1)
    nrm2 = np.sum(b.bw_weight * np.abs(C) ** 2, axis=1)
    mono_v = monomial_values(flat.reshape(-1, n + 1), n, d).reshape(M, L * d, -1)
    vv = np.abs(np.einsum("mpt,mt->mp", mono_v, V)) ** 2
    mono_g = monomial_values(flat.reshape(-1, n + 1), n, d - 1).reshape(M, L * d, -1)
    DC = np.einsum("jst,mt->mjs", b.derivative_matrices, C)  # (M, n+1, T')
    g2 = np.sum(np.abs(np.einsum("mps,mjs->mpj", mono_g, DC)) ** 2, axis=2)
    live = ~zero.reshape(M, L)
    g2 = np.where(np.repeat(live, d, axis=1), g2, np.inf)
    per_line = np.sum((vv / g2).reshape(M, L, d), axis=2) / d
    cnt = live.sum(axis=1)
    mean = np.sum(per_line * live, axis=1) / cnt
    var = np.sum(((per_line - mean[:, None]) * live) ** 2, axis=1) / np.maximum(cnt - 1, 1)
    err = np.sqrt(var / cnt)
    mg = np.sqrt(g2.min(axis=1) / nrm2)
    return mean, err, mg


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class PolyPath:
    """Discretized curve of unit-norm polynomials on an increasing time grid."""

    times: np.ndarray
    knots: tuple

    def __post_init__(self):
        t = np.asarray(self.times, float).reshape(-1).copy()
        knots = tuple(self.knots)
        if t.size < 2 or t.size != len(knots):
            raise ValueError("need at least two knots, one per time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        spaces = {(k.n, k.d) for k in knots}
        if len(spaces) != 1:
            raise DimensionMismatch("all knots must live in the same H(n, d)")
        for k in knots:
            if abs(k.bw_norm() - 1) > 1e-10:
                raise InvalidPolynomial("path knots must have unit BW norm")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "knots", knots)

    @classmethod
    def from_polys(cls, times, polys) -> "PolyPath":
        return cls(times, [p.normalized() for p in polys])

    @classmethod
    def from_coeffs(cls, times, n, d, C) -> "PolyPath":
        return cls.from_polys(times, [HomPoly(n, d, c) for c in C])

    @property
    def n(self) -> int:
        return self.knots[0].n

    @property
    def d(self) -> int:
        return self.knots[0].d

    def __len__(self) -> int:
        return len(self.knots)

    def coeff_matrix(self) -> np.ndarray:
        return np.array([k.coeffs for k in self.knots])

    def aligned_coeffs(self) -> np.ndarray:
        """Coefficients with each knot phase-rotated so <c_i, c_{i-1}> is real positive."""
        return align_phases(self.coeff_matrix(), self.n, self.d)

    def to_json(self) -> dict:
        return {"times": [float(t) for t in self.times], "knots": [k.to_json() for k in self.knots]}

    @classmethod
    def from_json(cls, data: dict) -> "PolyPath":
        return cls.from_polys(data["times"], [HomPoly.from_json(k) for k in data["knots"]])


def align_phases(C: np.ndarray, n: int, d: int) -> np.ndarray:
    w = basis(n, d).bw_weight
    C = np.array(C, dtype=complex)
    for i in range(1, len(C)):
        ip = np.sum(w * C[i] * np.conj(C[i - 1]))
        if abs(ip) > 0:
            C[i] *= np.conj(ip) / abs(ip)
    return C


def _horizontal(C, V, w):
    """Remove from each velocity its BW component along the knot."""
    ip = np.sum(w * V * np.conj(C), axis=1) / np.sum(w * np.abs(C) ** 2, axis=1)
    return V - ip[:, None] * C


def _speeds(C, V, n, d, quad, lines=None):
    if n == 1 and quad.mode == "exact":
        Cb, Vb = C[:, ::-1], V[:, ::-1]
        s2, mg = speed_sq_batch_n1(Cb, Vb)
        return s2, np.zeros_like(s2), mg
    if lines is None:
        lines = quad.line_frames(n)
    return speed_sq_lines(C, V, n, d, lines)


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    speeds: np.ndarray  # squared metric speeds |mu'|^2 at the evaluation nodes
    stderr: float
    nodes: np.ndarray  # times at which the speeds are evaluated
    min_grad: float
    richardson: float = float("nan")


def path_energy_report(path: PolyPath, quad: QuadratureSpec = None, scheme: str = "central",
                       velocities=None, lines=None) -> EnergyReport:
    """Energy of a discretized path.

    ``scheme="central"`` differentiates the phase-aligned knots with
    second-order differences and integrates the squared speeds at the knots
    by the trapezoid rule.  ``scheme="midpoint"`` evaluates the chord
    velocity (c_{i+1} - c_i) / dt at the segment midpoints; it has no
    odd/even decoupled modes, which matters when the knots are optimized.
    """
    quad = QuadratureSpec.for_dim(path.n) if quad is None else quad
    n, d = path.n, path.d
    w = basis(n, d).bw_weight
    C = path.aligned_coeffs()
    t = path.times
    if scheme == "central":
        if velocities is not None:
            V = np.array([v.coeffs for v in velocities])
        else:
            V = np.gradient(C, t, axis=0, edge_order=2 if len(t) > 2 else 1)
        V = _horizontal(C, V, w)
        s2, err, mg = _speeds(C, V, n, d, quad, lines)
        energy = float(np.trapezoid(s2, t))
        stderr = float(np.sqrt(np.trapezoid(err ** 2, t) * (t[-1] - t[0]))) if np.any(err) else 0.0
        rich = float("nan")
        if len(t) >= 5 and len(t) % 2 == 1 and velocities is None:
            coarse = np.trapezoid(s2[::2], t[::2])
            rich = float(abs(energy - coarse))
        _guard(mg, t)
        return EnergyReport(energy, s2, stderr, t.copy(), float(mg.min()), rich)
    if scheme == "midpoint":
        dt = np.diff(t)
        M = 0.5 * (C[1:] + C[:-1])
        V = (C[1:] - C[:-1]) / dt[:, None]
        V = _horizontal(M, V, w)
        s2, err, mg = _speeds(M, V, n, d, quad, lines)
        mids = 0.5 * (t[1:] + t[:-1])
        _guard(mg, mids)
        energy = float(np.sum(s2 * dt))
        stderr = float(np.sqrt(np.sum((err * dt) ** 2) * len(dt))) if np.any(err) else 0.0
        return EnergyReport(energy, s2, stderr, mids, float(mg.min()))
    raise ValueError(f"unknown scheme {scheme!r}")


def _guard(mg, t):
    k = int(np.argmin(mg))
    if mg[k] < GRAD_FLOOR:
        raise NearDiscriminant(f"|grad c| = {mg[k]:.3e} at a zero", time_index=k)


def path_energy(path: PolyPath, quad: QuadratureSpec = None, scheme: str = "central", velocities=None):
    """Energy int |mu'_t|^2 dt and the per-node squared speeds."""
    rep = path_energy_report(path, quad, scheme, velocities)
    return rep.energy, rep.speeds
