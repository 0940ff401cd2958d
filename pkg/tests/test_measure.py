import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersurface_ot.errors import DegenerateSampling, InvalidMeasure, InvalidTransform
from hypersurface_ot.measure import (
    AtomicMeasure, intersect_lines, line_variance, mu, mu_exact_n1, mu_sampled, pushforward_unitary,
    support_residual,
)
from hypersurface_ot.projective import HomPoly, act, random_unitary, sample_lines

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_two_atoms_for_z0z1():
    m = mu_exact_n1(HomPoly.from_terms(1, 2, {(1, 1): 1.0}))
    assert len(m) == 2
    np.testing.assert_allclose(m.weights, [0.5, 0.5])


def test_multiple_root_weight():
    # z0^2 z1 has roots [0,1] (mult 2) and [1,0]
    m = mu_exact_n1(HomPoly.from_terms(1, 3, {(2, 1): 1.0}))
    assert sorted(m.weights.tolist()) == pytest.approx([1 / 3, 2 / 3])


@pytest.mark.parametrize("n,d", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_sampled_atom_count_and_support(n, d):
    rng = np.random.default_rng(n * 10 + d)
    p = HomPoly.random(n, d, rng)
    m = mu_sampled(p, 100, rng)
    assert len(m) == 100 * d
    assert m.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert support_residual(p, m) < 1e-10


def test_degree_law_with_planted_tangency():
    # z0^2 restricted to any line has one double root unless the line lies in {z0 = 0}
    p = HomPoly.from_terms(2, 2, {(2, 0, 0): 1.0})
    m = mu_sampled(p, 50, np.random.default_rng(0))
    assert len(m) == 50
    np.testing.assert_allclose(m.weights, 1 / 50)


def test_line_inside_zero_set_skipped():
    p = HomPoly.from_terms(2, 1, {(1, 0, 0): 1.0})
    E0 = np.array([[0, 1, 0], [1, 0, 0]], complex)
    E1 = np.array([[0, 0, 1], [0, 1, 0]], complex)
    m = mu_sampled(p, lines=(E0, E1))
    assert m.info["skipped_lines"] == 1
    assert len(m) == 1
    with pytest.raises(DegenerateSampling):
        mu_sampled(p, lines=(E0[:1], E1[:1]))


def test_conic_uniform_pullback():
    # The conic z1^2 = 2 z0 z2 is the Veronese image of CP^1; mu is uniform there,
    # so x = |s|^2 / (|s|^2 + |t|^2) is uniform and E[|z0|^2] = E[x^2] = 1/3.
    p = HomPoly.from_terms(2, 2, {(0, 2, 0): 1.0, (1, 0, 1): -2.0})
    m = mu_sampled(p, 4000, np.random.default_rng(11))
    stats = line_variance(m, lambda z: np.abs(z[:, 0]) ** 2)
    assert abs(stats["mean"] - 1 / 3) < 4 * stats["stderr"]


def test_conic_oracle_after_unitary():
    rng = np.random.default_rng(12)
    g = random_unitary(3, rng)
    p = act(HomPoly.from_terms(2, 2, {(0, 2, 0): 1.0, (1, 0, 1): -2.0}), g)
    e0 = g[:, 0]
    m = mu_sampled(p, 4000, rng)
    stats = line_variance(m, lambda z: np.abs(z @ np.conj(e0)) ** 2)
    assert abs(stats["mean"] - 1 / 3) < 4 * stats["stderr"]


@given(seed=seeds)
@settings(max_examples=20, deadline=None)
def test_shared_lines_determine_measure(seed):
    rng = np.random.default_rng(seed)
    p = HomPoly.random(2, 2, rng)
    lines = sample_lines(2, 30, rng)
    a, b = mu_sampled(p, lines=lines), mu_sampled(p * 3j, lines=lines)
    np.testing.assert_allclose(a.points, b.points, atol=1e-9)


def test_intersections_lie_on_lines():
    rng = np.random.default_rng(3)
    p = HomPoly.random(3, 3, rng)
    E0, E1 = sample_lines(3, 20, rng)
    Z, W, zero, be = intersect_lines(p, E0, E1)
    assert not zero.any()
    assert be.max() < 1e-12
    assert np.abs(p.eval(Z.reshape(-1, 4))).max() < 1e-10


@given(seed=seeds)
@settings(max_examples=30, deadline=None)
def test_pushforward_matches_measure_of_moved_polynomial(seed):
    rng = np.random.default_rng(seed)
    p = HomPoly.random(1, 4, rng)
    g = random_unitary(2, rng)
    a = pushforward_unitary(mu_exact_n1(p), g)
    b = mu_exact_n1(act(p, g))
    from hypersurface_ot.transport import wq
    assert wq(a, b)[0] < 1e-7


def test_pushforward_rejects_non_unitary():
    m = mu_exact_n1(HomPoly.random(1, 2, np.random.default_rng(0)))
    with pytest.raises(InvalidTransform):
        pushforward_unitary(m, np.diag([1.0, 2.0]))


@pytest.mark.parametrize("points,weights", [
    ([[1, 0]], [0.5]),
    ([[1, 0], [0, 1]], [1.2, -0.2]),
    (np.zeros((0, 2)), []),
])
def test_invalid_measures(points, weights):
    with pytest.raises(InvalidMeasure):
        AtomicMeasure(np.array(points, complex).reshape(-1, 2), weights)


def test_measure_json_round_trip():
    m = mu_sampled(HomPoly.random(2, 2, np.random.default_rng(5)), 20, np.random.default_rng(6))
    r = AtomicMeasure.from_json(m.to_json())
    np.testing.assert_allclose(r.points, m.points, atol=1e-15)
    np.testing.assert_array_equal(r.lines, m.lines)


def test_mu_dispatch_is_exact_for_binary_forms():
    p = HomPoly.random(1, 3, np.random.default_rng(7))
    assert len(mu(p)) == 3
    assert np.all(mu(p).lines == -1)


def test_integrate_constant():
    m = mu_exact_n1(HomPoly.random(1, 5, np.random.default_rng(8)))
    assert m.integrate(lambda z: np.ones(len(z))) == pytest.approx(1.0)
    assert math.isclose(m.weights.sum(), 1.0)
