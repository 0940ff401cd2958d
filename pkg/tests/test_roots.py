import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersurface_ot.errors import InvalidPolynomial
from hypersurface_ot.projective import (
    BinaryHomPoly, HomPoly, ProjPoint, act, fs_distance_matrix, poly_from_roots, random_proj_points,
    random_unitary,
)
from hypersurface_ot.roots import all_roots, cluster_roots, multiplicity_of, solve_batch

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def companion_roots(b: BinaryHomPoly) -> np.ndarray:
    """Roots via numpy's companion-matrix eigenvalues in the chart [1, u]."""
    # b(1, u) = sum_k c_k u^(d-k); np.roots wants the highest power first
    u = np.roots(b.coeffs)
    return np.column_stack([np.ones_like(u), u]) / np.sqrt(1 + np.abs(u) ** 2)[:, None]


def matched_max_distance(X, Y):
    from scipy.optimize import linear_sum_assignment
    D = fs_distance_matrix(X, Y)
    r, c = linear_sum_assignment(D)
    return D[r, c].max()


@given(seed=seeds, d=st.integers(1, 8))
@settings(max_examples=60, deadline=None)
def test_roots_match_companion_matrix(seed, d):
    p = HomPoly.random(1, d, np.random.default_rng(seed)).as_binary()
    rs = all_roots(p)
    ref = companion_roots(p)
    # random forms are off the discriminant, so no clustering happens
    assert rs.d == d
    assert matched_max_distance(rs.expanded(), ref) < 1e-7


def test_double_root_example():
    # (z1 - z0)^2 has the single root [1, 1] with multiplicity 2
    rs = all_roots(BinaryHomPoly([1, -2, 1]))
    assert len(rs.roots) == 1
    pt, m = rs.roots[0]
    assert m == 2
    assert pt.proj_equal(ProjPoint([1, 1]))


@pytest.mark.parametrize("coeffs,expected", [
    ([0, 0, 1], [([0, 1], 2)]),  # z0^2: root [0, 1] twice
    ([1, 0, 0], [([1, 0], 2)]),  # z1^2
    ([0, 1, 0], [([1, 0], 1), ([0, 1], 1)]),  # z0 z1
])
def test_roots_at_chart_boundaries(coeffs, expected):
    rs = all_roots(BinaryHomPoly(coeffs))
    assert len(rs.roots) == len(expected)
    for pt, m in expected:
        assert any(q.proj_equal(ProjPoint(pt)) and k == m for q, k in rs.roots)


@given(seed=seeds, mults=st.lists(st.integers(1, 2), min_size=1, max_size=4))
@settings(max_examples=50, deadline=None)
def test_planted_multiplicities_recovered(seed, mults):
    rng = np.random.default_rng(seed)
    pts = random_proj_points(1, len(mults), rng)
    if len(pts) > 1:
        D = fs_distance_matrix(pts, pts) + np.eye(len(pts))
        if D.min() < 0.05:
            return
    b = poly_from_roots(list(zip(pts, mults)))
    rs = all_roots(b)
    assert sorted(rs.multiplicities().tolist()) == sorted(mults)
    for z, m in zip(pts, mults):
        assert multiplicity_of(b, ProjPoint(z)) == m


def test_multiplicity_zero_off_the_zero_set():
    b = poly_from_roots([(np.array([1, 2]), 1)])
    assert multiplicity_of(b, ProjPoint([1, 0])) == 0


@given(seed=seeds, d=st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_roots_unitary_equivariant(seed, d):
    rng = np.random.default_rng(seed)
    p = HomPoly.random(1, d, rng)
    g = random_unitary(2, rng)
    moved = all_roots(p).expanded() @ g.T
    assert matched_max_distance(all_roots(act(p, g)).expanded(), moved) < 1e-8


def test_solve_batch_marks_zero_rows():
    A = np.array([[0, 0, 0], [1, 0, -1]], complex)
    R, be = solve_batch(A)
    assert np.all(np.isnan(R[0]))
    assert np.isinf(be[0])
    assert be[1] < 1e-12


def test_zero_form_rejected():
    with pytest.raises(InvalidPolynomial):
        all_roots(BinaryHomPoly([0, 0, 0]))


def test_cluster_roots_merges_close_pair():
    R = np.array([[1, 0], [1, 1e-9], [0, 1]], complex)
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    counts = sorted(c for _, c in cluster_roots(R, 1e-6))
    assert counts == [1, 2]


def test_root_order_is_canonical():
    b = HomPoly.random(1, 5, np.random.default_rng(2)).as_binary()
    a1, a2 = all_roots(b), all_roots(BinaryHomPoly(b.coeffs * (0.3 - 2j)))
    np.testing.assert_allclose(a1.points(), a2.points(), atol=1e-10)
