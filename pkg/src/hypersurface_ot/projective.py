"""Homogeneous polynomials, Bombieri-Weyl and Fubini-Study geometry, lines.

Coefficients of a degree-``d`` polynomial in ``n + 1`` variables are stored
densely on the monomial basis in graded-lex order (``z0^d`` first).  Binary
forms use their own convention: ``coeffs[k]`` multiplies ``z0^k z1^(d-k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations

import numpy as np

from .config import PROJ_EQ_TOL, UNIT_TOL
from .errors import AmbiguousGeodesic, DimensionMismatch, InvalidPolynomial


# ---------------------------------------------------------------------------
# monomial bases


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class _Basis:
    n: int
    d: int
    exps: np.ndarray  # (T, n+1)
    index: dict
    bw_weight: np.ndarray  # alpha! / d!

    @cached_property
    def derivative_matrices(self):
        """D[j] maps degree-d coefficients to those of d/dz_j (degree d-1)."""
        lower = basis(self.n, self.d - 1)
        mats = []
        for j in range(self.n + 1):
            D = np.zeros((len(lower.exps), len(self.exps)))
            for col, alpha in enumerate(self.exps):
                if alpha[j] > 0:
                    beta = list(alpha)
                    beta[j] -= 1
                    D[lower.index[tuple(beta)], col] = alpha[j]
            mats.append(D)
        return np.stack(mats)


@lru_cache(maxsize=None)
def basis(n: int, d: int) -> _Basis:
    exps = np.array(list(_compositions(d, n + 1)), dtype=np.int64).reshape(-1, n + 1)
    index = {tuple(int(a) for a in row): i for i, row in enumerate(exps)}
    fact = np.array([math.prod(math.factorial(int(a)) for a in row) for row in exps], float)
    exps.setflags(write=False)
    return _Basis(n, d, exps, index, fact / math.factorial(d))


def monomial_count(n: int, d: int) -> int:
    return math.comb(n + d, d)


def monomial_values(z: np.ndarray, n: int, d: int) -> np.ndarray:
    """Values (M, T) of the degree-d basis monomials at points z (M, n+1)."""
    return _monomials(np.asarray(z, complex).reshape(-1, n + 1), basis(n, d))


def _monomials(z: np.ndarray, b: _Basis) -> np.ndarray:
    """Values of all basis monomials at points ``z`` of shape (M, n+1) -> (M, T)."""
    M = z.shape[0]
    pw = np.empty((M, b.n + 1, b.d + 1), dtype=complex)
    pw[:, :, 0] = 1.0
    for k in range(1, b.d + 1):
        pw[:, :, k] = pw[:, :, k - 1] * z
    out = np.ones((M, len(b.exps)), dtype=complex)
    for j in range(b.n + 1):
        out *= pw[:, j, b.exps[:, j]]
    return out


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True, eq=False)
class HomPoly:
    """Homogeneous polynomial of degree ``d`` in ``n + 1`` complex variables."""

    n: int
    d: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidPolynomial("need n >= 1 and d >= 1")
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1).copy()
        if c.size != monomial_count(self.n, self.d):
            raise DimensionMismatch(
                f"expected {monomial_count(self.n, self.d)} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------------
    @classmethod
    def from_terms(cls, n: int, d: int, terms: dict) -> "HomPoly":
        b = basis(n, d)
        c = np.zeros(len(b.exps), dtype=complex)
        for alpha, value in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n + 1 or sum(alpha) != d or min(alpha) < 0:
                raise InvalidPolynomial(f"multi-index {alpha} is not of degree {d} in {n + 1} variables")
            c[b.index[alpha]] += value
        return cls(n, d, c)

    @classmethod
    def monomial(cls, alpha, coeff: complex = 1.0) -> "HomPoly":
        alpha = tuple(int(a) for a in alpha)
        return cls.from_terms(len(alpha) - 1, sum(alpha), {alpha: coeff})

    @classmethod
    def from_bw_coords(cls, n: int, d: int, v) -> "HomPoly":
        return cls(n, d, np.asarray(v, complex) / np.sqrt(basis(n, d).bw_weight))

    @classmethod
    def random(cls, n: int, d: int, rng: np.random.Generator) -> "HomPoly":
        """Gaussian in the BW-orthonormal basis (the unitarily invariant Kostlan ensemble)."""
        T = monomial_count(n, d)
        v = (rng.standard_normal(T) + 1j * rng.standard_normal(T)) / math.sqrt(2)
        return cls.from_bw_coords(n, d, v).normalized()

    # views ------------------------------------------------------------------
    @property
    def exps(self) -> np.ndarray:
        return basis(self.n, self.d).exps

    def terms(self) -> dict:
        return {tuple(int(a) for a in alpha): complex(c)
                for alpha, c in zip(self.exps, self.coeffs) if c != 0}

    def bw_coords(self) -> np.ndarray:
        return self.coeffs * np.sqrt(basis(self.n, self.d).bw_weight)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def require_nonzero(self) -> None:
        if self.is_zero():
            raise InvalidPolynomial("the zero polynomial has no zero set")

    def bw_norm(self) -> float:
        return float(np.linalg.norm(self.bw_coords()))

    def normalized(self) -> "HomPoly":
        self.require_nonzero()
        return HomPoly(self.n, self.d, self.coeffs / self.bw_norm())

    def as_binary(self) -> "BinaryHomPoly":
        if self.n != 1:
            raise DimensionMismatch("only polynomials in two variables are binary forms")
        # graded-lex index i multiplies z0^(d-i) z1^i
        return BinaryHomPoly(self.coeffs[::-1])

    # arithmetic -------------------------------------------------------------
    def _check_same_space(self, other):
        if (self.n, self.d) != (other.n, other.d):
            raise DimensionMismatch(f"H({self.n},{self.d}) vs H({other.n},{other.d})")

    def __add__(self, other):
        self._check_same_space(other)
        return HomPoly(self.n, self.d, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same_space(other)
        return HomPoly(self.n, self.d, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return HomPoly(self.n, self.d, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return HomPoly(self.n, self.d, -self.coeffs)

    def __repr__(self):
        return f"HomPoly(n={self.n}, d={self.d}, terms={self.terms()})"

    # evaluation -------------------------------------------------------------
    def eval(self, z):
        """Value at ``z`` (shape (n+1,) or (M, n+1))."""
        self.require_nonzero()
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        if z.shape[-1] != self.n + 1:
            raise DimensionMismatch(f"point has {z.shape[-1]} coordinates, expected {self.n + 1}")
        vals = _monomials(z.reshape(-1, self.n + 1), basis(self.n, self.d)) @ self.coeffs
        return complex(vals[0]) if single else vals

    def grad_c(self, z):
        """Complex gradient (dp/dz_0, ..., dp/dz_n) at ``z``."""
        self.require_nonzero()
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        zz = z.reshape(-1, self.n + 1)
        D = basis(self.n, self.d).derivative_matrices  # (n+1, T', T)
        mono = _monomials(zz, basis(self.n, self.d - 1))  # (M, T')
        g = mono @ (D @ self.coeffs).T  # (M, n+1)
        return g[0] if single else g

    def compose(self, M) -> "HomPoly":
        """The polynomial ``w -> p(M w)`` for a (n+1) x (m+1) matrix ``M``."""
        M = np.asarray(M, dtype=complex)
        if M.shape[0] != self.n + 1:
            raise DimensionMismatch("matrix row count must equal the number of variables")
        m = M.shape[1] - 1
        target = basis(m, self.d)
        linear = [{tuple(int(i == k) for i in range(m + 1)): M[j, k] for k in range(m + 1)}
                  for j in range(self.n + 1)]
        powers = [[{(0,) * (m + 1): 1.0}] for _ in range(self.n + 1)]
        for j in range(self.n + 1):
            for _ in range(self.d):
                powers[j].append(_polymul(powers[j][-1], linear[j]))
        out = np.zeros(len(target.exps), dtype=complex)
        for alpha, c in zip(self.exps, self.coeffs):
            if c == 0:
                continue
            term = {(0,) * (m + 1): c}
            for j, a in enumerate(alpha):
                if a:
                    term = _polymul(term, powers[j][a])
            for beta, v in term.items():
                out[target.index[beta]] += v
        return HomPoly(m, self.d, out)

    # serialization ----------------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d,
                "coeffs": [{"alpha": list(alpha), "re": float(c.real), "im": float(c.imag)}
                           for alpha, c in zip(self.exps.tolist(), self.coeffs) if c != 0]}

    @classmethod
    def from_json(cls, data: dict) -> "HomPoly":
        try:
            n, d = int(data["n"]), int(data["d"])
            terms = {}
            for entry in data["coeffs"]:
                alpha = tuple(entry["alpha"])
                terms[alpha] = terms.get(alpha, 0) + complex(entry.get("re", 0.0), entry.get("im", 0.0))
        except (KeyError, TypeError) as exc:
            raise InvalidPolynomial(f"malformed polynomial JSON: {exc}") from exc
        return cls.from_terms(n, d, terms)


def _polymul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


def bw_inner(p: HomPoly, q: HomPoly) -> complex:
    """Bombieri-Weyl Hermitian product, linear in ``p`` and antilinear in ``q``."""
    p._check_same_space(q)
    return complex(np.sum(basis(p.n, p.d).bw_weight * p.coeffs * np.conj(q.coeffs)))


def bw_norm(p: HomPoly) -> float:
    return p.bw_norm()


def bw_distance(p: HomPoly, q: HomPoly) -> float:
    """Fubini-Study distance between [p] and [q] in the projectivized BW space."""
    return float(fs_distance_reps(p.bw_coords() / p.bw_norm(), q.bw_coords() / q.bw_norm()))


# ---------------------------------------------------------------------------
# binary forms


@dataclass(frozen=True, eq=False)
class BinaryHomPoly:
    """Binary form sum_k coeffs[k] z0^k z1^(d-k)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1).copy()
        if c.size < 1:
            raise InvalidPolynomial("a binary form needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.size - 1

    @property
    def n(self) -> int:
        return 1

    @classmethod
    def from_hompoly(cls, p: HomPoly) -> "BinaryHomPoly":
        return p.as_binary()

    def to_hompoly(self) -> HomPoly:
        return HomPoly(1, self.d, self.coeffs[::-1])

    def to_json(self) -> dict:
        return self.to_hompoly().to_json()

    def as_binary(self) -> "BinaryHomPoly":
        return self

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def require_nonzero(self) -> None:
        if self.is_zero():
            raise InvalidPolynomial("the zero binary form has no roots")

    def bw_norm(self) -> float:
        w = np.array([math.comb(self.d, k) for k in range(self.d + 1)], float)
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2 / w)))

    def normalized(self) -> "BinaryHomPoly":
        self.require_nonzero()
        return BinaryHomPoly(self.coeffs / self.bw_norm())

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        zz = z.reshape(-1, 2)
        k = np.arange(self.d + 1)
        vals = (zz[:, :1] ** k * zz[:, 1:] ** (self.d - k)) @ self.coeffs
        return complex(vals[0]) if z.ndim == 1 else vals

    def __repr__(self):
        return f"BinaryHomPoly({self.coeffs.tolist()})"


def as_binary(p) -> BinaryHomPoly:
    return p if isinstance(p, BinaryHomPoly) else p.as_binary()


def binary_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of binary forms given by coefficient arrays (same index convention)."""
    return np.convolve(a, b)


def poly_from_roots(roots) -> BinaryHomPoly:
    """BW-unit binary form with the given projective roots and multiplicities.

    ``roots`` is a sequence of ``(point, multiplicity)`` where ``point`` is a
    :class:`ProjPoint` or a 2-vector.  The factor for a root ``[l0, l1]`` is
    ``l1 z0 - l0 z1``.
    """
    roots = list(roots)
    if not roots:
        raise InvalidPolynomial("empty root list")
    coeffs = np.array([1.0 + 0j])
    for point, mult in roots:
        lam = point.rep if isinstance(point, ProjPoint) else np.asarray(point, complex)
        if int(mult) < 1:
            raise InvalidPolynomial("multiplicities must be positive")
        factor = np.array([-lam[0], lam[1]], dtype=complex)
        for _ in range(int(mult)):
            coeffs = binary_mul(coeffs, factor)
    return BinaryHomPoly(coeffs).normalized()


# ---------------------------------------------------------------------------
# projective points and lines


def normalize_rep(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    nrm = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(nrm == 0):
        raise ValueError("the zero vector is not a projective point")
    return z / nrm


def canonical_phase(z: np.ndarray) -> np.ndarray:
    """Rescale unit representatives so the largest coordinate is real positive."""
    z = np.asarray(z, dtype=complex)
    zz = z.reshape(-1, z.shape[-1])
    mags = np.abs(zz)
    # ties resolved toward the first coordinate; 1e-12 slack keeps this stable
    k = np.argmax(mags >= mags.max(axis=1, keepdims=True) * (1 - 1e-12), axis=1)
    pivot = zz[np.arange(len(zz)), k]
    out = zz * (np.conj(pivot) / np.abs(pivot))[:, None]
    return out.reshape(z.shape)


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """Point of CP^n held by a unit-norm representative."""

    rep: np.ndarray

    def __post_init__(self):
        r = normalize_rep(self.rep).reshape(-1).copy()
        r.setflags(write=False)
        object.__setattr__(self, "rep", r)

    @property
    def n(self) -> int:
        return self.rep.size - 1

    def proj_equal(self, other: "ProjPoint", tol: float = PROJ_EQ_TOL) -> bool:
        return 1.0 - abs(np.vdot(other.rep, self.rep)) <= tol

    def __repr__(self):
        return f"ProjPoint({canonical_phase(self.rep).round(12).tolist()})"


@dataclass(frozen=True, eq=False)
class Line:
    """Projective line spanned by an orthonormal 2-frame (e0, e1)."""

    e0: np.ndarray
    e1: np.ndarray

    def __post_init__(self):
        e0 = np.asarray(self.e0, complex).reshape(-1).copy()
        e1 = np.asarray(self.e1, complex).reshape(-1).copy()
        if (abs(np.vdot(e0, e0) - 1) > 1e3 * UNIT_TOL or abs(np.vdot(e1, e1) - 1) > 1e3 * UNIT_TOL
                or abs(np.vdot(e0, e1)) > 1e3 * UNIT_TOL):
            raise ValueError("line frame is not orthonormal")
        e0.setflags(write=False)
        e1.setflags(write=False)
        object.__setattr__(self, "e0", e0)
        object.__setattr__(self, "e1", e1)

    @property
    def frame(self) -> np.ndarray:
        """(n+1) x 2 matrix with columns e0, e1."""
        return np.stack([self.e0, self.e1], axis=1)

    def point(self, w) -> np.ndarray:
        """Ambient representative of the point [w0, w1] of the line."""
        w = np.asarray(w, complex)
        return w[..., :1] * self.e0 + w[..., 1:] * self.e1

    def transform(self, g) -> "Line":
        return Line(g @ self.e0, g @ self.e1)


# ---------------------------------------------------------------------------
# Fubini-Study distance and geodesics


def _wedge_norm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """||x ^ y|| for all pairs of rows; equals sin of the FS angle for unit rows."""
    acc = np.zeros((X.shape[0], Y.shape[0]))
    for a, b in combinations(range(X.shape[1]), 2):
        acc += np.abs(np.outer(X[:, a], Y[:, b]) - np.outer(X[:, b], Y[:, a])) ** 2
    return np.sqrt(acc)


def fs_distance_matrix(X, Y) -> np.ndarray:
    """Pairwise FS distances between unit representatives ``X`` (M, n+1) and ``Y`` (N, n+1).

    Uses ``atan2(|x ^ y|, |<x, y>|)``, accurate at every scale, unlike
    ``arccos |<x, y>|`` which loses half the digits near zero.
    """
    X = np.atleast_2d(np.asarray(X, complex))
    Y = np.atleast_2d(np.asarray(Y, complex))
    cos = np.abs(X @ np.conj(Y).T)
    return np.arctan2(_wedge_norm(X, Y), cos)


def fs_distance_reps(x, y) -> float:
    return float(fs_distance_matrix(np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))[0, 0])


def fs_distance(x: ProjPoint, y: ProjPoint) -> float:
    """Geodesic FS distance in [0, pi/2]."""
    return fs_distance_reps(x.rep, y.rep)


def fs_geodesic_reps(x, y, t, direction=None, tol: float = PROJ_EQ_TOL) -> np.ndarray:
    """Unit representative at parameter ``t`` of the minimal geodesic from x to y.

    ``x`` and ``y`` are unit vectors.  The result is phase-continuous with x.
    For (numerically) orthogonal x, y the geodesic is not unique and ``direction``
    (a vector whose component along y fixes the phase) must be supplied.
    """
    x = np.asarray(x, complex)
    y = np.asarray(y, complex)
    ip = np.vdot(x, y)  # <y, x>
    theta = fs_distance_reps(x, y)
    if abs(ip) <= tol:
        if direction is None:
            raise AmbiguousGeodesic("orthogonal representatives: supply a tie-break direction")
        c = np.vdot(y, np.asarray(direction, complex))
        if abs(c) < tol:
            raise AmbiguousGeodesic("tie-break direction has no component along the target")
        u = y * (c / abs(c))
        theta = np.pi / 2
    else:
        y_al = y * (np.conj(ip) / abs(ip))
        perp = y_al - np.vdot(x, y_al) * x
        s = np.linalg.norm(perp)
        if s == 0:
            return x.copy()
        u = perp / s
    out = np.cos(t * theta) * x + np.sin(t * theta) * u
    return out / np.linalg.norm(out)


def fs_geodesic_point(x: ProjPoint, y: ProjPoint, t: float, direction=None) -> ProjPoint:
    return ProjPoint(fs_geodesic_reps(x.rep, y.rep, t, direction))


# ---------------------------------------------------------------------------
# random objects


def sample_lines(n: int, count: int, rng: np.random.Generator):
    """Frames (E0, E1) of ``count`` lines, each of shape (count, n+1).

    Gram-Schmidt on two standard complex Gaussian vectors; the induced law on
    G(1, n) is the unitarily invariant probability measure.
    """
    if n < 1:
        raise ValueError("lines exist only for n >= 1")
    E0 = np.empty((count, n + 1), complex)
    E1 = np.empty((count, n + 1), complex)
    filled = 0
    while filled < count:
        m = count - filled
        g = (rng.standard_normal((m, 2, n + 1)) + 1j * rng.standard_normal((m, 2, n + 1))) / math.sqrt(2)
        a, b = g[:, 0], g[:, 1]
        na = np.linalg.norm(a, axis=1)
        a = a / na[:, None]
        b = b - np.sum(np.conj(a) * b, axis=1)[:, None] * a
        nb = np.linalg.norm(b, axis=1)
        ok = (na > 1e-8) & (nb > 1e-8)  # rank-deficient draws are resampled
        k = int(ok.sum())
        E0[filled:filled + k] = a[ok]
        E1[filled:filled + k] = b[ok] / nb[ok, None]
        filled += k
    return E0, E1


def sample_line(n: int, rng: np.random.Generator) -> Line:
    E0, E1 = sample_lines(n, 1, rng)
    return Line(E0[0], E1[0])


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary matrix."""
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_proj_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, n + 1)) + 1j * rng.standard_normal((count, n + 1))
    return normalize_rep(g)


def is_unitary(g, tol: float = 1e-10) -> bool:
    g = np.asarray(g, complex)
    return g.ndim == 2 and g.shape[0] == g.shape[1] and np.allclose(
        np.conj(g).T @ g, np.eye(g.shape[0]), atol=tol, rtol=0)


def act(p: HomPoly, g) -> HomPoly:
    """Left action ``p -> p o g^{-1}``: roots of the result are g applied to roots of p."""
    return p.compose(np.linalg.inv(np.asarray(g, complex)))


# ---------------------------------------------------------------------------
# restriction to lines


def restrict_many(p: HomPoly, E0: np.ndarray, E1: np.ndarray) -> np.ndarray:
    """Coefficients (count, d+1) of ``(z0, z1) -> p(z0 e0 + z1 e1)`` for many lines.

    Evaluates at ``(w^j, 1)`` with ``w`` a primitive (d+1)-th root of unity;
    the coefficients are then a unitary DFT away, so this is well conditioned
    for every degree.
    """
    d = p.d
    N = d + 1
    omega = np.exp(2j * np.pi * np.arange(N) / N)
    pts = omega[None, :, None] * E0[:, None, :] + E1[:, None, :]  # (L, N, n+1)
    vals = p.eval(pts.reshape(-1, p.n + 1)).reshape(-1, N)
    return np.fft.fft(vals, axis=1) / N


def restrict(p: HomPoly, line: Line, method: str = "auto") -> BinaryHomPoly:
    """Restriction of ``p`` to ``line`` as a binary form in the frame coordinates."""
    if method == "auto":
        method = "expand" if p.d <= 12 else "dft"
    if method == "expand":
        return p.compose(line.frame).as_binary()
    if method == "dft":
        return BinaryHomPoly(restrict_many(p, line.e0[None], line.e1[None])[0])
    raise ValueError(f"unknown restriction method {method!r}")
