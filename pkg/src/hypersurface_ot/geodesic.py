"""Approximate inner-Wasserstein geodesics by minimizing discretized path energy.

Knots are held as unit vectors in BW-orthonormal coordinates.  The energy
of a knot sequence is the sum over segments of dt * |mu'|^2 evaluated at the
segment midpoint with the chord velocity.  The interior knots move by
projected gradient descent; the finite-difference gradient is
preconditioned by the inverse of the discrete Laplacian in time (an H^1
gradient), which makes the iteration count insensitive to the knot count.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import AmbiguousGeodesic, EndpointOnDiscriminant, StuckNearDiscriminant
from .hermitian import PolyPath, speed_sq_batch_n1, speed_sq_lines
from .measure import mu_exact_n1, mu_sampled
from .projective import HomPoly, basis, fs_distance_reps, fs_geodesic_reps, sample_lines
from .transport import root_geodesic, wq_assignment


@dataclass
class GeodesicConfig:
    """Optimizer settings.

    ``init`` is ``"fs"`` (FS geodesic of coefficient vectors), ``"roots"``
    (matched-root interpolation, n = 1 only) or ``"auto"`` (the lower-energy
    of the two for n = 1, ``"fs"`` otherwise).  ``reparam_power`` m > 1
    places the initial knots at t = s^m, clustering them at the start.
    """

    knots: int = 17
    max_iter: int = 400
    initial_step: float = 1.0
    fd_step: float = 1e-6
    guard: float = 1e-3
    seed: int = 0
    lines: int = 400
    init: str = "auto"
    rel_tol: float = 1e-8
    kick_attempts: int = 8
    kick_scale: float = 1e-2
    regrid: bool = True
    reparam_power: int = 1
    time_limit: float = 60.0

    def __post_init__(self):
        if self.knots < 3:
            raise ValueError("need at least 3 knots")
        if self.guard <= 0:
            raise ValueError("the discriminant guard must be positive")
        if self.init not in ("fs", "roots", "auto"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.reparam_power < 1:
            raise ValueError("reparam_power must be >= 1")


@dataclass
class GeodesicResult:
    path: PolyPath
    energy: float
    w2in_estimate: float
    ambient_w2: float
    trace: list
    info: dict = field(default_factory=dict)

    def segment_speeds(self) -> np.ndarray:
        return np.asarray(self.info.get("segment_speeds", []))

    def to_json(self) -> dict:
        return {"energy": self.energy, "w2in_estimate": self.w2in_estimate,
                "ambient_w2": self.ambient_w2, "trace": [float(e) for e in self.trace],
                "info": _jsonable(self.info), "path": self.path.to_json()}

    def speeds_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t_mid", "speed"])
        t = self.path.times
        for tm, s in zip(0.5 * (t[1:] + t[:-1]), self.segment_speeds()):
            wr.writerow([repr(float(tm)), repr(float(s))])
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# energy in BW coordinates


class _PathEnergy:
    """Segment energies for knots given in BW-orthonormal coordinates."""

    def __init__(self, n: int, d: int, lines=None):
        self.n, self.d = n, d
        self.sqrt_w = np.sqrt(basis(n, d).bw_weight)
        self.lines = lines

    def speeds(self, X, Y):
        """Squared speeds and guard values at the midpoints of segments X -> Y (unit dt)."""
        m = 0.5 * (X + Y)
        v = Y - X
        v = v - (np.sum(v * np.conj(m), axis=1) / np.sum(np.abs(m) ** 2, axis=1))[:, None] * m
        C, V = m / self.sqrt_w, v / self.sqrt_w
        if self.n == 1:
            s2, mg = speed_sq_batch_n1(C[:, ::-1], V[:, ::-1])
        else:
            s2, _, mg = speed_sq_lines(C, V, self.n, self.d, self.lines)
        return s2, mg

    def segments(self, X, Y, dt):
        """Energy dt * |mu'|^2 of each segment, with chord velocity (Y - X) / dt."""
        s2, mg = self.speeds(X, Y)
        return s2 / dt, mg

    def total(self, P, dt):
        e, mg = self.segments(P[:-1], P[1:], dt)
        return float(e.sum()), e, mg

    def knot_guard(self, P):
        C = P / self.sqrt_w
        if self.n == 1:
            _, mg = speed_sq_batch_n1(C[:, ::-1], np.zeros_like(C))
        else:
            _, _, mg = speed_sq_lines(C, np.zeros_like(C), self.n, self.d, self.lines)
        return mg

    def gradient(self, P, dt, h):
        """Central-difference gradient (complex: d/dRe + i d/dIm) for the interior knots."""
        K, T = P.shape
        I = K - 2
        dirs = np.concatenate([np.eye(T), 1j * np.eye(T)])  # (2T, T)
        steps = np.concatenate([dirs * h, -dirs * h])  # (4T, T)
        S = steps.shape[0]
        Xk = P[1:-1, None, :] + steps[None]  # (I, S, T)
        left = np.broadcast_to(P[:-2, None, :], Xk.shape)
        right = np.broadcast_to(P[2:, None, :], Xk.shape)
        A = np.concatenate([left.reshape(-1, T), Xk.reshape(-1, T)])
        B = np.concatenate([Xk.reshape(-1, T), right.reshape(-1, T)])
        dts = np.concatenate([np.repeat(dt[:-1], S), np.repeat(dt[1:], S)])
        e, _ = self.segments(A, B, dts)
        e = (e[:I * S] + e[I * S:]).reshape(I, S)
        diff = (e[:, :2 * T] - e[:, 2 * T:]) / (2 * h)
        return diff[:, :T] + 1j * diff[:, T:]


def _align(P):
    P = P.copy()
    for i in range(1, len(P)):
        ip = np.vdot(P[i], P[i - 1])
        if abs(ip) > 0:
            P[i] *= ip / abs(ip)
    return P


def _horizontal(G, P):
    return G - np.sum(G * np.conj(P), axis=1)[:, None] * P


def _laplacian_solve(G, dt):
    """Apply the inverse of the H^1 (Dirichlet) Laplacian in time to rows of G."""
    I = G.shape[0]
    inv = 1.0 / dt
    ab = np.zeros((3, I))
    ab[0, 1:] = -2 * inv[1:-1]
    ab[1] = 2 * (inv[:-1] + inv[1:])
    ab[2, :-1] = -2 * inv[1:-1]
    return solve_banded((1, 1), ab, G)


# ---------------------------------------------------------------------------
# initialization


def _bw_unit(p: HomPoly) -> np.ndarray:
    x = p.bw_coords()
    return x / np.linalg.norm(x)


def _times(K, power):
    return np.linspace(0.0, 1.0, K) ** power


def _endpoint_guard(p: HomPoly, energy: _PathEnergy, delta: float):
    mg = energy.knot_guard(_bw_unit(p)[None])[0]
    if not mg > delta:
        raise EndpointOnDiscriminant(f"endpoint has |grad| {mg:.3e} <= guard {delta:g} on its zero set")


def _fs_init(x0, x1, t, rng):
    tie = None
    if abs(np.vdot(x0, x1)) < 1e-9:
        tie = rng.standard_normal(x1.shape) + 1j * rng.standard_normal(x1.shape)
    P = np.array([fs_geodesic_reps(x0, x1, ti, tie) for ti in t])
    P[-1] = x1 * _phase(P[-1], x1)
    return P


def _phase(ref, x):
    ip = np.vdot(x, ref)
    return ip / abs(ip) if abs(ip) > 0 else 1.0


def _roots_init(p0, p1, t):
    geo = root_geodesic(p0, p1)
    P = np.array([_bw_unit(geo.poly_at(ti).to_hompoly()) for ti in t])
    P[0] = _bw_unit(p0)
    P[-1] = _bw_unit(p1)
    return _align(P)


def _kick(P, energy, t, cfg, rng):
    """Perturb interior knots until all pass the guard."""
    scale = cfg.kick_scale
    for attempt in range(cfg.kick_attempts + 1):
        mg = energy.knot_guard(P[1:-1])
        if np.all(mg > cfg.guard):
            return P, attempt
        xi = rng.standard_normal(P.shape) + 1j * rng.standard_normal(P.shape)
        xi = _horizontal(xi, P)
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        bump = np.sin(np.pi * t)[:, None]
        Q = P + scale * bump * xi
        Q[1:-1] /= np.linalg.norm(Q[1:-1], axis=1, keepdims=True)
        Q[0], Q[-1] = P[0], P[-1]
        P = _align(Q)
        scale *= 2
    raise StuckNearDiscriminant("initial path stays within the guard after all kicks",
                                diagnostics={"min_guard": float(mg.min()), "kicks": cfg.kick_attempts})


def _energy_for(p0: HomPoly, cfg: GeodesicConfig) -> _PathEnergy:
    lines = None
    if p0.n > 1:
        lines = sample_lines(p0.n, cfg.lines, np.random.default_rng([cfg.seed, 1]))
    return _PathEnergy(p0.n, p0.d, lines)


def initial_path(p0: HomPoly, p1: HomPoly, K: int = 17, config: GeodesicConfig = None,
                 _energy: _PathEnergy = None) -> PolyPath:
    """Discriminant-avoiding starting path from p0 to p1 with K knots."""
    cfg = GeodesicConfig(knots=K) if config is None else config
    P, t, _ = _initial(p0, p1, K, cfg, _energy or _energy_for(p0, cfg))
    return _to_path(P, t, p0.n, p0.d)


def _initial(p0, p1, K, cfg, energy):
    rng = np.random.default_rng([cfg.seed, 2])
    for p in (p0, p1):
        p.require_nonzero()
        _endpoint_guard(p, energy, cfg.guard)
    t = _times(K, cfg.reparam_power)
    x0, x1 = _bw_unit(p0), _bw_unit(p1)
    kinds = [cfg.init]
    if cfg.init == "auto":
        kinds = ["fs", "roots"] if p0.n == 1 else ["fs"]
    if p0.n > 1 and "roots" in kinds:
        raise ValueError("root interpolation is only available for n = 1")
    best = None
    for kind in kinds:
        try:
            P = _fs_init(x0, x1, t, rng) if kind == "fs" else _roots_init(p0, p1, t)
            P, kicks = _kick(P, energy, t, cfg, rng)
        except (StuckNearDiscriminant, AmbiguousGeodesic, EndpointOnDiscriminant):
            if len(kinds) == 1:
                raise
            continue
        E = energy.total(P, np.diff(t))[0]
        if best is None or E < best[0]:
            best = (E, P, {"init": kind, "kicks": kicks})
    if best is None:
        raise StuckNearDiscriminant("no initial path passes the guard", diagnostics={"tried": kinds})
    return best[1], t, best[2]


def _to_path(P, t, n, d) -> PolyPath:
    sw = np.sqrt(basis(n, d).bw_weight)
    return PolyPath(t, [HomPoly(n, d, x / sw).normalized() for x in P])


# ---------------------------------------------------------------------------
# optimization


def _regrid(P, e, t):
    """Knots re-spaced to equal arclength along the piecewise-FS interpolant."""
    dt = np.diff(t)
    seg_len = np.sqrt(np.maximum(e, 0) * dt)
    total = seg_len.sum()
    if total == 0:
        return P.copy()
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    target = np.linspace(0.0, 1.0, len(t)) * total
    Q = P.copy()
    for k in range(1, len(t) - 1):
        i = min(int(np.searchsorted(cum, target[k], side="right")) - 1, len(dt) - 1)
        f = (target[k] - cum[i]) / seg_len[i] if seg_len[i] > 0 else 0.0
        Q[k] = fs_geodesic_reps(P[i], P[i + 1], float(np.clip(f, 0, 1)))
    return _align(Q)


def optimize(p0: HomPoly, p1: HomPoly, config: GeodesicConfig = None) -> GeodesicResult:
    """Minimize the discrete path energy between p0 and p1.

    The reported ``energy`` is the larger of the quadrature energy and the
    chord bound sum_i W2(mu_i, mu_{i+1})^2 / dt_i; any curve through the
    knots has at least the chord energy, so the quadrature value is lifted
    to it whenever discretization error made it smaller.
    """
    cfg = GeodesicConfig() if config is None else config
    clock = time.perf_counter()
    energy = _energy_for(p0, cfg)
    P, t, init_info = _initial(p0, p1, cfg.knots, cfg, energy)
    dt = np.diff(t)
    F, e, mg = energy.total(P, dt)
    trace = [F]
    step = cfg.initial_step
    it = 0
    status = "max_iter"
    guard_rejections = 0
    while it < cfg.max_iter:
        if F == 0.0:
            status = "converged"
            break
        if time.perf_counter() - clock > cfg.time_limit:
            status = "time_limit"
            break
        G = _horizontal(energy.gradient(P, dt, cfg.fd_step), P[1:-1])
        D = _horizontal(_laplacian_solve(G, dt), P[1:-1])
        slope = float(np.real(np.vdot(D, G)))
        if slope <= 0:
            status = "converged"
            break
        accepted = False
        guard_hit = False
        while step > 1e-12:
            Q = P.copy()
            Q[1:-1] = P[1:-1] - step * D
            Q[1:-1] /= np.linalg.norm(Q[1:-1], axis=1, keepdims=True)
            Q = _align(Q)
            Fq, eq, mgq = energy.total(Q, dt)
            ok_guard = mgq.min() > cfg.guard and energy.knot_guard(Q[1:-1]).min() > cfg.guard
            if not ok_guard:
                guard_hit = True
                guard_rejections += 1
            elif Fq <= F - 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if guard_hit:
                raise StuckNearDiscriminant(
                    "every step shrinks into the discriminant guard",
                    diagnostics={"iteration": it, "energy": F, "guard": cfg.guard,
                                 "min_guard": float(mg.min()), "guard_rejections": guard_rejections})
            status = "converged"
            break
        it += 1
        rel = (F - Fq) / F
        P, F, e, mg = Q, Fq, eq, mgq
        trace.append(F)
        step = min(2 * step, cfg.initial_step)
        if rel < cfg.rel_tol:
            status = "converged"
            break
    if cfg.regrid and len(t) > 2:
        Q = _regrid(P, e, t)
        Fq, eq, mgq = energy.total(Q, dt)
        if Fq <= F and mgq.min() > cfg.guard:
            P, F, e, mg = Q, Fq, eq, mgq
            trace.append(F)
    path = _to_path(P, t, p0.n, p0.d)
    ambient, chord = _ambient_and_chord(path, energy)
    E = max(F, chord)
    speeds = np.sqrt(np.maximum(e, 0) * dt) / dt
    info = {"iterations": it, "status": status, "energy_quadrature": F, "energy_chord": chord,
            "segment_speeds": speeds.tolist(),
            "speed_spread": float((speeds.max() - speeds.min()) / speeds.mean()) if speeds.mean() > 0 else 0.0,
            "min_guard": float(mg.min()), "seconds": time.perf_counter() - clock, **init_info}
    return GeodesicResult(path, E, math.sqrt(E), ambient, trace, info)


def _ambient_and_chord(path: PolyPath, energy: _PathEnergy):
    """Ambient W2 between the end measures and the chord energy of the knots.

    For n >= 2 all measures are estimated on the optimizer's line set, so the
    triangle inequality holds between the same empirical measures.
    """
    if path.n == 1:
        ms = [mu_exact_n1(k) for k in path.knots]
    else:
        E0, E1 = energy.lines
        ms = [mu_sampled(k, lines=(E0, E1)) for k in path.knots]
    dt = np.diff(path.times)
    seg = np.array([wq_assignment(a, b, 2.0)[0] for a, b in zip(ms[:-1], ms[1:])])
    ambient = wq_assignment(ms[0], ms[-1], 2.0)[0]
    return ambient, float(np.sum(seg ** 2 / dt))


# ---------------------------------------------------------------------------
# Lipschitz probe


def _margin(p: HomPoly, energy: _PathEnergy) -> float:
    return float(energy.knot_guard(_bw_unit(p)[None])[0])


def lipschitz_probe(epsilon: float, trials: int, rng: np.random.Generator, n: int = 1, d: int = 3,
                    radii=(1e-3, 1e-1), config: GeodesicConfig = None) -> dict:
    """Ratios w2in_estimate / d_FS over random close pairs with guard margin >= epsilon.

    Each pair is (p, q) with q on the FS geodesic from p in a random
    horizontal direction at a log-uniform distance within ``radii``.
    """
    cfg = config or GeodesicConfig(knots=5, max_iter=50, seed=int(rng.integers(2**31)))
    energy = _energy_for(HomPoly.random(n, d, rng), cfg)
    rows = []
    while len(rows) < trials:
        p = HomPoly.random(n, d, rng)
        x = _bw_unit(p)
        xi = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        xi -= np.vdot(x, xi) * x
        xi /= np.linalg.norm(xi)
        r = math.exp(rng.uniform(math.log(radii[0]), math.log(radii[1])))
        y = math.cos(r) * x + math.sin(r) * xi
        q = HomPoly.from_bw_coords(n, d, y)
        if min(_margin(p, energy), _margin(q, energy)) < epsilon:
            continue
        res = optimize(p, q, cfg)
        dist = fs_distance_reps(x, y)
        rows.append({"fs_distance": dist, "w2in": res.w2in_estimate,
                     "ratio": res.w2in_estimate / dist if dist > 0 else 0.0})
    ratios = np.array([r["ratio"] for r in rows])
    med = float(np.median(ratios))
    return {"epsilon": epsilon, "trials": trials, "n": n, "d": d,
            "ratio_min": float(ratios.min()), "ratio_median": med, "ratio_max": float(ratios.max()),
            "max_over_median": float(ratios.max() / med) if med > 0 else 0.0,
            "bounded": bool(ratios.max() <= 10 * med), "pairs": rows, "config": asdict(cfg)}


def lipschitz_ratio(p: HomPoly, q: HomPoly, config: GeodesicConfig = None) -> float:
    """w2in_estimate(p, q) / d_FS(p, q), defined as 0 when the points coincide."""
    dist = fs_distance_reps(_bw_unit(p), _bw_unit(q))
    if dist == 0:
        return 0.0
    return optimize(p, q, config).w2in_estimate / dist
