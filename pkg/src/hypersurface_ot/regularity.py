"""Metric speeds |mu'_t|_q along polynomial curves and Sobolev-type tail energies.

For binary forms the speed at t is the finite-difference Wasserstein quotient
W_q(mu(p_t), mu(p_{t+h})) / h with exact assignment.  For n >= 2 it is the
upper bound obtained by coupling the two measures line by line: the same
random lines are intersected with both hypersurfaces and the intersection
points are matched on each line.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hermitian import PolyPath
from .measure import intersect_lines, mu_exact_n1
from .projective import BinaryHomPoly, HomPoly, basis, fs_geodesic_reps, sample_lines
from .transport import wq_assignment


class RegularityWarning(UserWarning):
    pass


def check_degree_condition(n: int, d: int) -> bool:
    """True when d > 2n - 3; otherwise warn that the per-line coupling bound is not covered."""
    ok = d > 2 * n - 3
    if not ok:
        warnings.warn(f"d = {d} <= 2n - 3 = {2 * n - 3}: the line-coupling regularity bound does not apply",
                      RegularityWarning, stacklevel=3)
    return ok


def path_family(path: PolyPath):
    """Callable t -> HomPoly through the knots, FS-geodesic between neighbours."""
    t = path.times
    sw = np.sqrt(basis(path.n, path.d).bw_weight)
    X = path.aligned_coeffs() * sw

    def at(s: float) -> HomPoly:
        i = int(np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2))
        f = (s - t[i]) / (t[i + 1] - t[i])
        x = fs_geodesic_reps(X[i], X[i + 1] * 1.0, float(np.clip(f, 0.0, 1.0)))
        return HomPoly(path.n, path.d, x / sw)

    return at


def zd_family(d: int):
    """p_t = z1^d - t z0^d, whose roots are [1, t^(1/d) w^k]."""
    def at(t: float) -> BinaryHomPoly:
        c = np.zeros(d + 1, complex)
        c[0] = 1.0  # z1^d
        c[d] = -t  # z0^d
        return BinaryHomPoly(c)
    return at


def zd_speed(d: int, t):
    """Closed-form metric speed of the roots of z1^d - t z0^d (any q)."""
    t = np.asarray(t, float)
    return (1.0 / d) * t ** (1.0 / d - 1) / (1 + t ** (2.0 / d))


@dataclass
class SpeedProfile:
    times: np.ndarray
    speeds: np.ndarray
    q: float
    h: np.ndarray
    skipped_lines: int = 0
    info: dict = field(default_factory=dict)


def _line_coupled_cost(p: HomPoly, r: HomPoly, lines, q: float):
    """Per-line optimal matching cost (1/d) sum d_FS^q between Z(p) and Z(r) on shared lines."""
    E0, E1 = lines
    _, W0, z0, _ = intersect_lines(p, E0, E1)
    _, W1, z1, _ = intersect_lines(r, E0, E1)
    keep = ~(z0 | z1)
    d = p.d
    a = W0[keep][:, :, None, :]
    b = W1[keep][:, None, :, :]
    wedge = np.abs(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    cos = np.abs(np.sum(a * np.conj(b), axis=-1))
    C = np.arctan2(wedge, cos) ** q  # (L, d, d)
    costs = np.empty(C.shape[0])
    for i in range(C.shape[0]):
        rr, cc = linear_sum_assignment(C[i])
        costs[i] = C[i][rr, cc].sum() / d
    return costs, int((~keep).sum())


def _speed_pair(p, r, h, q, lines):
    if p.n == 1:
        return wq_assignment(mu_exact_n1(p), mu_exact_n1(r), q)[0] / h, 0
    costs, skipped = _line_coupled_cost(p, r, lines, q)
    return float(costs.mean()) ** (1.0 / q) / h, skipped


def metric_speed_profile(path, q: float = 2.0, h=None, times=None, lines=None, rng=None,
                         n_lines: int = 2000) -> SpeedProfile:
    """Finite-difference speeds |mu'_t|_q.

    Parameters
    ----------
    path : PolyPath or callable t -> polynomial
    h : float or array, optional
        Forward step per node; defaults to a quarter of the local grid step.
        At the last node the difference is taken backward.
    times : evaluation nodes (defaults to the path's times).
    lines : shared line frames for n >= 2; sampled from ``rng`` otherwise.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if isinstance(path, PolyPath):
        family = path_family(path)
        times = path.times if times is None else np.asarray(times, float)
        n = path.n
    else:
        family = path
        if times is None:
            raise ValueError("times are required for a callable family")
        times = np.asarray(times, float)
        n = family(float(times[0])).n
    step = np.diff(times)
    step = np.concatenate([step, step[-1:]])
    hh = step / 4 if h is None else np.broadcast_to(np.asarray(h, float), times.shape)
    if n > 1:
        check_degree_condition(n, family(float(times[0])).d)
        if lines is None:
            lines = sample_lines(n, n_lines, np.random.default_rng() if rng is None else rng)
    speeds = np.empty(times.size)
    skipped = 0
    for i, (t, dh) in enumerate(zip(times, hh)):
        if i == times.size - 1 and len(times) > 1:
            a, b = family(float(t - dh)), family(float(t))
        else:
            a, b = family(float(t)), family(float(t + dh))
        speeds[i], s = _speed_pair(_hom(a), _hom(b), dh, q, lines)
        skipped += s
    return SpeedProfile(times, speeds, q, np.asarray(hh), skipped)


def _hom(p):
    return p.to_hompoly() if isinstance(p, BinaryHomPoly) else p


def sobolev_energy(profile: SpeedProfile, epsilon: float, log_measure: bool = False) -> float:
    """int_epsilon^1 |mu'_t|_q^q dt by the trapezoid rule on the speed profile.

    With ``log_measure`` the rule is applied in s = log t to f(t) t, which
    is the accurate choice on logarithmic grids.
    """
    t, f = profile.times, profile.speeds ** profile.q
    keep = t >= epsilon * (1 - 1e-12)
    if keep.sum() < 2:
        return 0.0
    if log_measure:
        return float(np.trapezoid(f[keep] * t[keep], np.log(t[keep])))
    return float(np.trapezoid(f[keep], t[keep]))


def tail_energies(profile: SpeedProfile, log_measure: bool = True) -> np.ndarray:
    """int_{t_k}^{t_max} |mu'|^q dt for every node t_k (cumulative from the top)."""
    t, f = profile.times, profile.speeds ** profile.q
    if log_measure:
        x, g = np.log(t), f * t
    else:
        x, g = t, f
    seg = 0.5 * (g[1:] + g[:-1]) * np.diff(x)
    return np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])


def log_grid(lo: float, hi: float = 1.0, per_decade: int = 40) -> np.ndarray:
    k = int(math.ceil(per_decade * math.log10(hi / lo)))
    return np.logspace(math.log10(lo), math.log10(hi), k + 1)


def exponent_probe(d: int, q_list, epsilons, per_decade: int = 40, tolerance: float = 0.1) -> dict:
    """Tail-slope report for p_t = z1^d - t z0^d.

    For every q the tail energy I(eps) = int_eps^1 |mu'|^q is evaluated at the
    given epsilons and the least-squares slope of log I against log eps is
    compared to the prediction: 0 when q < d/(d-1), 1 - q(1 - 1/d) otherwise.
    Convergent cases pass when |slope| < tolerance / 2; divergent ones when the
    slope is within ``tolerance`` (relative) of the prediction.
    """
    if d < 2:
        raise ValueError("the probe needs d >= 2")
    epsilons = np.sort(np.asarray(epsilons, float))
    grid = log_grid(float(epsilons[0]), 1.0, per_decade)
    # put every epsilon on the grid so the tails start exactly there
    grid = np.unique(np.concatenate([grid, epsilons]))
    family = zd_family(d)
    threshold = d / (d - 1)
    rows = []
    for q in q_list:
        prof = metric_speed_profile(family, q, times=grid)
        tails = tail_energies(prof)
        idx = np.searchsorted(grid, epsilons)
        I = tails[idx]
        slope = float(np.polyfit(np.log(epsilons), np.log(I), 1)[0])
        predicted = 0.0 if q < threshold else 1.0 - q * (1.0 - 1.0 / d)
        if q < threshold:
            passed = abs(slope) < tolerance / 2
        else:
            passed = abs(slope - predicted) <= tolerance * abs(predicted)
        ref = zd_speed(d, grid)
        rows.append({"q": float(q), "regime": "convergent" if q < threshold else "divergent",
                     "slope": slope, "predicted_slope": predicted, "pass": bool(passed),
                     "tail_energies": I.tolist(),
                     "max_rel_speed_error": float(np.max(np.abs(prof.speeds / ref - 1)))})
    return {"d": d, "threshold": threshold, "epsilons": epsilons.tolist(), "per_decade": per_decade,
            "results": rows}
