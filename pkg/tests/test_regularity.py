import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersurface_ot.hermitian import PolyPath, metric_speed_n1
from hypersurface_ot.measure import mu_sampled
from hypersurface_ot.projective import HomPoly, act, random_unitary, sample_lines
from hypersurface_ot.regularity import (
    RegularityWarning, SpeedProfile, check_degree_condition, exponent_probe, log_grid, metric_speed_profile,
    path_family, sobolev_energy, tail_energies, zd_family, zd_speed,
)
from hypersurface_ot.transport import wq_assignment

seeds = st.integers(min_value=0, max_value=2**32 - 1)
Z0, Z1 = HomPoly.monomial((1, 0)), HomPoly.monomial((0, 1))


def unit_rotation(t):
    # the root [cos t, -sin t] moves at unit FS speed
    return Z1 * math.cos(t) + Z0 * math.sin(t)


def test_constant_path_speeds_vanish():
    p = HomPoly.random(1, 3, np.random.default_rng(0)).normalized()
    path = PolyPath.from_polys([0, 0.5, 1], [p, p, p])
    prof = metric_speed_profile(path, 2.0)
    np.testing.assert_allclose(prof.speeds, 0, atol=1e-7)
    assert sobolev_energy(prof, 1e-3) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0])
def test_degree_one_rotation_unit_speed(q):
    prof = metric_speed_profile(unit_rotation, q, times=np.linspace(0, 1, 9))
    np.testing.assert_allclose(prof.speeds, 1.0, rtol=1e-7)


def test_path_input_interpolates_between_knots():
    t = np.linspace(0, 1, 9)
    path = PolyPath.from_polys(t, [unit_rotation(s) for s in t])
    prof = metric_speed_profile(path, 2.0)
    np.testing.assert_allclose(prof.speeds, 1.0, rtol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_agrees_with_hermitian_speed(seed):
    rng = np.random.default_rng(seed)
    c, v = HomPoly.random(1, 4, rng), HomPoly.random(1, 4, rng)
    fam = lambda t: c + v * t
    times = np.array([0.0, 0.1, 0.2])
    prof = metric_speed_profile(fam, 2.0, h=1e-5, times=times)
    for t, s in zip(times, prof.speeds):
        assert s == pytest.approx(metric_speed_n1(fam(t), v)[0], rel=0.01)


def test_root_family_matches_closed_form():
    t = log_grid(1e-6, 1.0, 40)
    prof = metric_speed_profile(zd_family(3), 1.8, times=t)
    # forward differences with h = step / 4 carry a constant relative bias of about (1 - 1/d) h / 2t
    np.testing.assert_allclose(prof.speeds, zd_speed(3, t), rtol=0.01)


def test_sobolev_energy_grid_doubling():
    rng = np.random.default_rng(5)
    c, v = HomPoly.random(1, 3, rng), HomPoly.random(1, 3, rng)
    fam = lambda t: c + v * t
    e = [sobolev_energy(metric_speed_profile(fam, 1.5, times=np.linspace(0, 1, k)), 0.0) for k in (17, 33)]
    assert e[0] == pytest.approx(e[1], rel=0.02)


def test_tail_energies_match_direct_integral():
    t = log_grid(1e-4, 1.0, 20)
    prof = SpeedProfile(t, zd_speed(2, t), 1.0, t / 4)
    tails = tail_energies(prof)
    assert tails[0] == pytest.approx(sobolev_energy(prof, 1e-4, log_measure=True), rel=1e-12)
    assert tails[-1] == 0.0


@pytest.mark.parametrize("q,regime", [(1.2, "convergent"), (1.8, "divergent")])
def test_probe_degree_three(q, regime):
    rep = exponent_probe(3, [q], [1e-8, 1e-9, 1e-10, 1e-11, 1e-12])
    row = rep["results"][0]
    assert row["regime"] == regime
    assert row["pass"]
    if regime == "divergent":
        assert row["slope"] == pytest.approx(-0.2, abs=0.02)
    else:
        assert abs(row["slope"]) < 0.05


def test_probe_degree_two_q_one_convergent():
    row = exponent_probe(2, [1.0], [1e-8, 1e-10, 1e-12])["results"][0]
    assert row["regime"] == "convergent" and row["pass"]


def test_probe_rejects_degree_one():
    with pytest.raises(ValueError):
        exponent_probe(1, [1.0], [1e-3])


# ---------------------------------------------------------------------------
# n >= 2: line-coupled estimator


def _pooled_w(p, r, q, lines):
    a, b = mu_sampled(p, lines=lines), mu_sampled(r, lines=lines)
    return wq_assignment(a, b, q)[0]


@given(seed=seeds, q=st.sampled_from([1.0, 2.0]))
@settings(max_examples=10, deadline=None)
def test_line_coupling_is_upper_bound(seed, q):
    rng = np.random.default_rng(seed)
    c, v = HomPoly.random(2, 3, rng), HomPoly.random(2, 3, rng)
    lines = sample_lines(2, 60, rng)
    h = 0.05
    prof = metric_speed_profile(lambda t: c + v * t, q, h=h, times=np.array([0.0, 1.0]), lines=lines)
    pooled = _pooled_w(c, c + v * h, q, lines) / h
    assert prof.speeds[0] >= pooled - 1e-12


def test_speeds_unitary_invariant():
    rng = np.random.default_rng(6)
    c, v = HomPoly.random(2, 3, rng), HomPoly.random(2, 3, rng)
    g = random_unitary(3, rng)
    E0, E1 = sample_lines(2, 200, rng)
    times = np.linspace(0, 0.5, 3)
    a = metric_speed_profile(lambda t: c + v * t, 2.0, times=times, lines=(E0, E1))
    b = metric_speed_profile(lambda t: act(c + v * t, g), 2.0, times=times, lines=(E0 @ g.T, E1 @ g.T))
    np.testing.assert_allclose(a.speeds, b.speeds, rtol=1e-7)


def test_degree_condition_warning():
    assert check_degree_condition(2, 3)
    with pytest.warns(RegularityWarning):
        assert not check_degree_condition(3, 2)


def test_path_family_hits_knots():
    rng = np.random.default_rng(7)
    t = np.array([0.0, 0.4, 1.0])
    knots = [HomPoly.random(1, 2, rng) for _ in t]
    fam = path_family(PolyPath.from_polys(t, knots))
    for s, k in zip(t, knots):
        x, y = fam(s).bw_coords(), k.bw_coords()
        assert abs(abs(np.vdot(x / np.linalg.norm(x), y / np.linalg.norm(y))) - 1) < 1e-12


def test_q_below_one_rejected():
    with pytest.raises(ValueError):
        metric_speed_profile(unit_rotation, 0.5, times=np.linspace(0, 1, 3))
