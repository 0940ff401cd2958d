"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the report lines.
"""
import itertools
import json
import math
import time

import numpy as np
import pytest

from hypersurface_ot.cli import main
from hypersurface_ot.condition import nu_norm, p14_batch
from hypersurface_ot.geodesic import GeodesicConfig, optimize
from hypersurface_ot.hermitian import PolyPath, QuadratureSpec, hhat, metric_speed_n1
from hypersurface_ot.measure import AtomicMeasure, intersect_lines, mu_exact_n1, mu_sampled, pushforward_unitary
from hypersurface_ot.projective import (
    HomPoly, act, bw_norm, fs_distance_matrix, random_proj_points, random_unitary, sample_lines,
)
from hypersurface_ot.regularity import exponent_probe
from hypersurface_ot.roots import all_roots
from hypersurface_ot.transport import w2_between, wq, wq_assignment

Z0, Z1 = HomPoly.monomial((1, 0)), HomPoly.monomial((0, 1))


def report(number, name, ok, detail=""):
    print(f"[acceptance {number:2d}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def simple_root_poly(d, rng, sep=1e-3):
    """Random binary form whose roots are pairwise at least ``sep`` apart."""
    while True:
        p = HomPoly.random(1, d, rng)
        rs = all_roots(p)
        D = fs_distance_matrix(rs.points(), rs.points()) + np.eye(d) * np.pi
        if np.all(rs.multiplicities() == 1) and D.min() >= sep:
            return p


def fs_chordal(x, y):
    # independent of the library's atan2 form: phase-align, then use the chord length
    ip = np.vdot(y, x)
    y = y * (ip / abs(ip)) if abs(ip) > 0 else y
    return 2 * math.asin(min(1.0, np.linalg.norm(x - y) / 2))


# ---------------------------------------------------------------------------


def test_c01_assignment_matches_brute_force():
    rng = np.random.default_rng(101)
    worst, solver_time, count = 0.0, 0.0, 0
    for _ in range(200):
        d = int(rng.integers(1, 6))
        a, b = mu_exact_n1(simple_root_poly(d, rng)), mu_exact_n1(simple_root_poly(d, rng))
        t0 = time.perf_counter()
        dist, match = wq_assignment(a, b, 2.0)
        solver_time += time.perf_counter() - t0
        C = np.array([[fs_chordal(x, y) ** 2 for y in b.points] for x in a.points])
        best = min(sum(C[i, s[i]] for i in range(d)) for s in itertools.permutations(range(d))) / d
        achieved = float(np.sum(match.plan(d, d) * C))
        worst = max(worst, abs(dist ** 2 - best), abs(achieved - best))
        count += 1
    ok = worst <= 1e-12 and solver_time < 10.0
    report(1, "exact transport equals brute force", ok,
           f"{count} pairs, max |cost - brute| = {worst:.2e}, solver time {solver_time:.2f} s")


def test_c02_degree_law_per_line():
    rng = np.random.default_rng(102)
    violations, lines_total = 0, 0
    for k in range(50):
        n, d = (2, 3)[k % 2], (2, 3)[(k // 2) % 2]
        p = HomPoly.random(n, d, rng)
        E0, E1 = sample_lines(n, 200, rng)
        m = mu_sampled(p, lines=(E0, E1))
        kept = 200 - m.info["skipped_lines"]
        counts = np.bincount(m.lines, weights=m.weights, minlength=200) * d * kept
        violations += int(np.sum(np.abs(counts - d) > 1e-9))
        # every counted point lies on Z(p)
        Z, _, zero, _ = intersect_lines(p, E0, E1)
        res = np.abs(p.eval(Z[~zero].reshape(-1, n + 1))) / p.bw_norm()
        violations += int(np.sum(res > 1e-8))
        lines_total += kept
    report(2, "per-line intersection count equals the degree", violations == 0,
           f"{lines_total} lines on 50 polynomials, {violations} violations")


def test_c03_hermitian_closed_form():
    exact = hhat(Z1, Z0, Z0, QuadratureSpec("exact")).value
    # at n = 1 every sampled line is CP^1 itself, so the MC spread is zero up to rounding
    mc = hhat(Z1, Z0, Z0, QuadratureSpec("mc", lines=2000, seed=103))
    rng = np.random.default_rng(103)
    kernel = 0.0
    for k in range(100):
        n, d = 1 + k % 2, 1 + k % 4
        p, q = HomPoly.random(n, d, rng), HomPoly.random(n, d, rng)
        kernel = max(kernel, abs(hhat(p, p, q, QuadratureSpec.for_dim(n, lines=50, seed=k)).value))
    ok = (abs(exact - 2 * math.pi) <= 1e-10 and abs(mc.value - 2 * math.pi) <= max(3 * mc.stderr, 1e-10) and kernel <= 1e-9)
    report(3, "closed form 2 pi and kernel identity", ok,
           f"exact err {abs(exact - 2 * math.pi):.1e}, MC err {abs(mc.value - 2 * math.pi):.3f} "
           f"vs 3 stderr {3 * mc.stderr:.3f}, max |h(p, p, .)| {kernel:.1e}")


def test_c04_metric_speed_routes_agree():
    rng = np.random.default_rng(104)
    worst_routes, worst_fd, h = 0.0, 0.0, 1e-4
    for k in range(100):
        d = 1 + k % 6
        c, v = simple_root_poly(d, rng), HomPoly.random(1, d, rng)
        herm, roots = metric_speed_n1(c, v)
        fd = w2_between(c, c + v * h) / h
        worst_routes = max(worst_routes, abs(herm - roots) / herm)
        worst_fd = max(worst_fd, abs(fd - herm) / herm, abs(fd - roots) / roots)
    ok = worst_routes <= 1e-8 and worst_fd <= 0.01
    report(4, "Hermitian vs root speed vs finite-difference W2", ok,
           f"100 pairs, routes rel {worst_routes:.1e}, FD rel {worst_fd:.2e}")


def test_c05_inner_geodesic_tight_and_bounded():
    rng = np.random.default_rng(105)
    worst_ratio, slowest, lb_viol = 0.0, 0.0, 0
    for k in range(50):
        d = 1 + k % 6
        p0, p1 = simple_root_poly(d, rng, 1e-2), simple_root_poly(d, rng, 1e-2)
        t0 = time.perf_counter()
        res = optimize(p0, p1, GeodesicConfig(knots=17, seed=k))
        slowest = max(slowest, time.perf_counter() - t0)
        w2 = wq(mu_exact_n1(p0), mu_exact_n1(p1))[0]
        worst_ratio = max(worst_ratio, abs(res.energy / w2 ** 2 - 1))
        lb_viol += math.sqrt(res.energy) < w2 - 1e-6
    for n, d in itertools.product((2, 3), (1, 2, 3)):
        p0, p1 = HomPoly.random(n, d, rng), HomPoly.random(n, d, rng)
        res = optimize(p0, p1, GeodesicConfig(knots=5, max_iter=30, lines=150, seed=n * 10 + d))
        lb_viol += math.sqrt(res.energy) < res.ambient_w2 - 1e-6
    ok = worst_ratio <= 0.02 and slowest <= 60 and lb_viol == 0
    report(5, "inner geodesic tight at n=1, lower bound for n<=3", ok,
           f"max |E/W2^2 - 1| = {worst_ratio:.4f}, slowest {slowest:.1f} s, {lb_viol} lower-bound violations")


@pytest.fixture(scope="module")
def geodesic_batch():
    rng = np.random.default_rng(106)
    pairs = []
    for k in range(100):
        d = 2 + k % 4
        pairs.append((simple_root_poly(d, rng, 1e-2), simple_root_poly(d, rng, 1e-2)))
    return p14_batch(pairs, grid=33)


def test_c06_quasi_concavity(geodesic_batch):
    b = geodesic_batch
    ok = b["alpha4_violations"] == 0 and b["alpha2_violations"] == 0 and b["min_dist_to_discriminant"] > 0
    report(6, "alpha4/alpha2 quasi-concave along W2 geodesics", ok,
           f"{b['instances']} geodesics x 33 points, violations alpha4={b['alpha4_violations']} "
           f"alpha2={b['alpha2_violations']}, min dist to discriminant {b['min_dist_to_discriminant']:.2e}")


def test_c07_condition_length_shape(geodesic_batch):
    fit = geodesic_batch["fit"]
    ok = fit["satisfied_fraction"] == 1.0
    report(7, "single fitted (beta3, beta4) bounds every condition length", ok,
           f"beta3={fit['beta3']:.3f} beta4={fit['beta4']:.3f} (conjectured 1), "
           f"satisfied {100 * fit['satisfied_fraction']:.0f}%")


def test_c08_sobolev_threshold():
    t0 = time.perf_counter()
    rep = exponent_probe(3, [1.2, 1.8], [1e-8, 1e-9, 1e-10, 1e-11, 1e-12])
    elapsed = time.perf_counter() - t0
    conv, div = rep["results"]
    ok = (conv["regime"] == "convergent" and abs(conv["slope"]) < 0.05
          and div["regime"] == "divergent" and abs(div["slope"] + 0.2) <= 0.02 and elapsed < 30)
    report(8, "Sobolev threshold for z^3 - t", ok,
           f"slope q=1.2: {conv['slope']:+.4f}, q=1.8: {div['slope']:+.4f} (predicted -0.2), {elapsed:.1f} s")


def test_c09_unitary_equivariance():
    rng = np.random.default_rng(109)
    err = dict.fromkeys(("bw_norm", "hhat", "nu", "wq", "pushforward"), 0.0)
    for k in range(50):
        g2, g3 = random_unitary(2, rng), random_unitary(3, rng)
        p = HomPoly.random(2, 3, rng)
        err["bw_norm"] = max(err["bw_norm"], abs(bw_norm(act(p, g3)) - bw_norm(p)))
        c, a, b = simple_root_poly(3, rng), HomPoly.random(1, 3, rng), HomPoly.random(1, 3, rng)
        quad = QuadratureSpec("exact")
        h0 = hhat(c, a, b, quad).value
        h1 = hhat(act(c, g2), act(a, g2), act(b, g2), quad).value
        err["hhat"] = max(err["hhat"], abs(h1 - h0) / max(1.0, abs(h0)))
        w = random_proj_points(1, 1, rng)[0]
        v0 = nu_norm(c, w)
        err["nu"] = max(err["nu"], abs(nu_norm(act(c, g2), g2 @ w) - v0) / v0)
        X, Y = random_proj_points(2, 4, rng), random_proj_points(2, 3, rng)
        mx, my = AtomicMeasure(X, np.full(4, 0.25)), AtomicMeasure(Y, np.full(3, 1 / 3))
        before = wq(mx, my, 1.5)[0]
        after = wq(pushforward_unitary(mx, g3), pushforward_unitary(my, g3), 1.5)[0]
        err["wq"] = max(err["wq"], abs(after - before))
        moved = pushforward_unitary(mu_exact_n1(c), g2)
        err["pushforward"] = max(err["pushforward"], wq(moved, mu_exact_n1(act(c, g2)))[0])
    ok = all(v <= 1e-7 for v in err.values())
    report(9, "unitary invariance", ok, ", ".join(f"{k} {v:.1e}" for k, v in err.items()))


def test_c10_cli_determinism(tmp_path, capsys):
    rng = np.random.default_rng(110)
    files = {}
    for name, poly in (("a", simple_root_poly(3, rng, 1e-2)), ("b", simple_root_poly(3, rng, 1e-2)),
                       ("q", HomPoly.random(2, 2, rng))):
        files[name] = tmp_path / f"{name}.json"
        files[name].write_text(json.dumps(poly.to_json()))
    t = np.linspace(0, 1, 5)
    pa, pb = HomPoly.from_json(json.loads(files["a"].read_text())), HomPoly.from_json(json.loads(files["b"].read_text()))
    files["path"] = tmp_path / "path.json"
    files["path"].write_text(json.dumps(PolyPath.from_polys(t, [pa * (1 - s) + pb * s for s in t]).to_json()))
    f = {k: str(v) for k, v in files.items()}
    commands = [
        ["mu", f["q"], "--lines", "60"],
        ["dist", f["a"], f["b"], "--matching"],
        ["dist", f["q"], f["q"], "--lines", "60"],
        ["geodesic", f["a"], f["b"], "--knots", "5", "--max-iter", "40"],
        ["energy", f["path"]],
        ["condition", "p14", f["a"], f["b"], "--grid", "9"],
        ["condition", "distance", f["a"]],
        ["regularity", "profile", f["path"], "--q", "1.5"],
        ["regularity", "probe", "--epsilons", "1e-8,1e-10"],
    ]
    mismatched = []
    for k, cmd in enumerate(commands):
        out = tmp_path / f"out{k}.json"
        blobs = []
        for _ in range(2):
            code = main(cmd + ["--seed", "7", "--out", str(out)])
            capsys.readouterr()
            assert code == 0, cmd
            csv = out.with_suffix(".csv")
            blobs.append((out.read_bytes(), csv.read_bytes() if csv.exists() else b""))
            if csv.exists():
                csv.unlink()
        if blobs[0] != blobs[1]:
            mismatched.append(cmd[0])
    with capsys.disabled():
        report(10, "CLI reruns are byte-identical", not mismatched,
               f"{len(commands)} commands, mismatched: {mismatched or 'none'}")
