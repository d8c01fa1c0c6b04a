"""Support-function oracles for B(E) and containment certification.

The support function of B(E) in a mean-zero direction q is
``h_B(q) = max_{v in S^{n-1}} q(v)`` because ``<q, phi_E(v)> = q(v)``.
Three oracles compute it: an exact eigenvalue route for quadratics, the
Choi-Lam-Reznick test points for even symmetric sextics, and a generic
grid-seeded projected ascent on the sphere (a certified lower bound).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .errors import ConfigurationError, InputError
from .kernel import SEXTIC_FAMILY, even_symmetric_sextics
from .polyspace import _uniform_sphere, inner_product, power_sum

METHODS = ("eigen_exact", "grid_ascent", "symmetric_sextic_exact")
_ALIASES = {"eigen": "eigen_exact", "grid": "grid_ascent", "sextic": "symmetric_sextic_exact"}


@dataclass(frozen=True)
class SupportOracle:
    method: str = "grid_ascent"
    grid_density: int = 4000
    ascent_restarts: int = 8
    max_iter: int = 2000
    seed: int = 20240601

    def __post_init__(self):
        method = _ALIASES.get(self.method, self.method)
        if method not in METHODS:
            raise ConfigurationError(f"unknown oracle method {self.method!r}; choose from {METHODS}")
        object.__setattr__(self, "method", method)
        if self.grid_density < 1 or self.ascent_restarts < 1:
            raise ConfigurationError("grid_density and ascent_restarts must be positive")

    @classmethod
    def default_for(cls, E):
        if E.two_d == 2:
            return cls("eigen_exact")
        if E.family == SEXTIC_FAMILY:
            return cls("symmetric_sextic_exact")
        return cls("grid_ascent")

    def validate(self, E):
        if self.method == "eigen_exact" and E.two_d != 2:
            raise ConfigurationError(f"eigen_exact needs degree 2, subspace has degree {E.two_d}")
        if self.method == "symmetric_sextic_exact" and not _is_sextic_family(E):
            raise ConfigurationError("symmetric_sextic_exact needs E = span{M2^3, M6, M2*M4}")

    def to_json(self):
        return asdict(self)


def _is_sextic_family(E):
    if E.two_d != 6 or E.n < 3 or len(E.generators) != 3:
        return False
    M2, M4, M6 = power_sum(E.n, 2), power_sum(E.n, 4), power_sum(E.n, 6)
    return list(E.generators) == [M2 ** 3, M6, M2 * M4]


def test_points(n):
    """Rows (1/sqrt(k), ..., 1/sqrt(k), 0, ..., 0) for k = 1..n."""
    T = np.zeros((n, n))
    for k in range(1, n + 1):
        T[k - 1, :k] = 1.0 / math.sqrt(k)
    return T


def test_point_min(a, b, c, n):
    """min over k = 1..n of a/k^2 + b/k + c, the value of a*M6 + b*M2*M4 + c*M2^3 at test points."""
    k = np.arange(1, n + 1, dtype=float)
    return float(np.min(a / k ** 2 + b / k + c))


def _structured_points(n):
    """Signed axes, normalized 0/1 prefixes and, for small n, the sign vectors."""
    prefixes = np.tril(np.ones((n, n))) / np.sqrt(np.arange(1, n + 1))[:, None]
    pts = [np.eye(n), -np.eye(n), prefixes, -prefixes]
    if n <= 10:
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T
        pts.append(signs / math.sqrt(n))
    return np.vstack(pts)


def _grid(E, oracle):
    cache = E.__dict__.setdefault("_oracle_grids", {})
    key = (oracle.grid_density, oracle.seed)
    if key not in cache:
        if E.n == 2:
            t = np.linspace(0.0, 2 * math.pi, oracle.grid_density, endpoint=False)
            pts = np.c_[np.cos(t), np.sin(t)]
        else:
            rng = np.random.default_rng(oracle.seed)
            pts = np.vstack([_structured_points(E.n), _uniform_sphere(rng, E.n, oracle.grid_density)])
        cache[key] = (pts, E.phi_many(pts))
    return cache[key]


def _ascend(E, Q, X, max_iter, gtol=1e-7):
    """Projected gradient ascent of x -> <Q[i], phi_E(x)> on the sphere, one row per start."""
    X = X.copy()
    vals, grads = E.phi_many_with_grad(X)
    f = np.einsum("pk,pk->p", Q, vals)
    g = np.einsum("pk,pkn->pn", Q, grads)
    step = np.full(len(X), 0.2)
    active = np.ones(len(X), dtype=bool)
    for _ in range(max_iter):
        rg = g - np.einsum("pn,pn->p", g, X)[:, None] * X
        rnorm = np.linalg.norm(rg, axis=1)
        active &= rnorm > gtol * np.maximum(1.0, np.abs(f))
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        direction = rg[idx] / rnorm[idx, None]
        Xn = X[idx] + step[idx, None] * direction
        Xn /= np.linalg.norm(Xn, axis=1, keepdims=True)
        vn, gn = E.phi_many_with_grad(Xn)
        fn = np.einsum("pk,pk->p", Q[idx], vn)
        ok = fn >= f[idx]
        acc = idx[ok]
        X[acc] = Xn[ok]
        f[acc] = fn[ok]
        g[acc] = np.einsum("pk,pkn->pn", Q[acc], gn[ok])
        step[acc] = np.minimum(step[acc] * 1.5, 1.0)
        step[idx[~ok]] *= 0.5
        # a step below machine resolution means we are at the optimum numerically
        active[idx[~ok][step[idx[~ok]] < 1e-12]] = False
    rg = g - np.einsum("pn,pn->p", g, X)[:, None] * X
    converged = np.linalg.norm(rg, axis=1) <= 1e-6 * np.maximum(1.0, np.abs(f))
    return f, X, converged


@dataclass
class SupportValues:
    values: np.ndarray
    argmax: np.ndarray | None = None
    converged: np.ndarray | None = None

    @property
    def uncertain(self):
        return self.converged is not None and not bool(np.all(self.converged))


def support_B_many(E, Q, oracle=None):
    """h_B(q) for every row q of ``Q`` (mean-zero coordinates)."""
    oracle = oracle or SupportOracle.default_for(E)
    oracle.validate(E)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != E.m - 1:
        raise InputError(f"directions need {E.m - 1} coordinates, got {Q.shape[1]}")
    if oracle.method == "eigen_exact":
        A = np.einsum("ki,iab->kab", Q, E.quadratic_forms())
        w, V = np.linalg.eigh(A)
        return SupportValues(w[:, -1], argmax=V[:, :, -1])
    if oracle.method == "symmetric_sextic_exact":
        T = test_points(E.n)
        vals = E.phi_many(T) @ Q.T
        best = vals.argmax(axis=0)
        return SupportValues(vals.max(axis=0), argmax=T[best])
    pts, F = _grid(E, oracle)
    scores = F @ Q.T
    r = min(oracle.ascent_restarts, len(pts))
    starts = np.argpartition(-scores, r - 1, axis=0)[:r].T
    Qp = np.repeat(Q, r, axis=0)
    f, X, conv = _ascend(E, Qp, pts[starts.ravel()], oracle.max_iter)
    f = f.reshape(len(Q), r)
    best = f.argmax(axis=1)
    rows = np.arange(len(Q))
    return SupportValues(
        f[rows, best],
        argmax=X.reshape(len(Q), r, E.n)[rows, best],
        converged=conv.reshape(len(Q), r)[rows, best],
    )


def support_B(E, q, oracle=None):
    """h_B(q) = max over the sphere of the mean-zero polynomial with coordinates ``q``."""
    q = np.asarray(q, dtype=float)
    if not np.any(q):
        raise InputError("support direction must be nonzero")
    return float(support_B_many(E, q[None, :], oracle).values[0])


def sphere_max(E, f, oracle=None):
    """Maximum of ``f`` in E over the unit sphere via the support oracle."""
    c = E.coords(f)
    if E.m == 1 or not np.any(c[1:]):
        return float(c[0])
    return float(c[0] + support_B(E, c[1:], oracle))


def sphere_min(E, f, oracle=None):
    return -sphere_max(E, -f, oracle)


def _points_of(K):
    if hasattr(K, "vertices"):
        return np.asarray(K.vertices, dtype=float)
    if hasattr(K, "normals"):
        return np.asarray(K.normals, dtype=float)
    return np.atleast_2d(np.asarray(K, dtype=float))


def support_V(P, q):
    """max_i <q, vertex_i>; accepts a V-polytope, an H-polytope (normals) or an array."""
    V = _points_of(P)
    if V.size == 0:
        raise InputError("polytope has no vertices")
    return float(np.max(V @ np.asarray(q, dtype=float)))


@dataclass
class ContainmentReport:
    alpha_achieved: float
    directions_tested: int
    worst_direction: list
    inner_inclusion_ok: bool
    ratio_claimed: float | None
    certified_ratio: float
    max_ratio: float
    oracle_uncertain: bool
    seed: int
    oracle: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def random_directions(dim, count, seed):
    return _uniform_sphere(np.random.default_rng(seed), dim, count)


def certify_containment(E, K, directions=1000, oracle=None, seed=0, ratio_claimed=None, tol=1e-9):
    """Sample directions q and compare h_K(q) with h_B(q).

    ``alpha_achieved = min_q h_K(q) / h_B(q)`` estimates the largest alpha with
    alpha*B(E) inside K.  For an H-polytope the facet normals are used as the
    vertex set, since {y : <y, x_i> >= -1} is the negated polar of conv{x_i}.
    The inner inclusion is checked as h_K <= h_B on every tested direction
    together with <x_i, r> = 0.
    """
    if directions < 100:
        raise InputError(f"certify_containment needs at least 100 directions, got {directions}")
    oracle = oracle or SupportOracle.default_for(E)
    V = _points_of(K)
    if V.shape[1] != E.m - 1:
        raise InputError(f"polytope lives in dimension {V.shape[1]}, but U(E) has dimension {E.m - 1}")
    Q = random_directions(E.m - 1, directions, seed)
    hb = support_B_many(E, Q, oracle)
    hk = (Q @ V.T).max(axis=1)
    ratios = hk / hb.values
    worst = int(np.argmin(ratios))
    r_cross = E.gram()[0, 1:]
    mean_zero = bool(np.all(np.abs(V @ r_cross) <= 1e-9 * np.maximum(1.0, np.linalg.norm(V, axis=1))))
    alpha = float(ratios[worst])
    return ContainmentReport(
        alpha_achieved=alpha,
        directions_tested=int(directions),
        worst_direction=Q[worst].tolist(),
        inner_inclusion_ok=bool(ratios.max() <= 1.0 + tol) and mean_zero,
        ratio_claimed=None if ratio_claimed is None else float(ratio_claimed),
        certified_ratio=float(1.0 / alpha) if alpha > 0 else math.inf,
        max_ratio=float(ratios.max()),
        oracle_uncertain=hb.uncertain,
        seed=int(seed),
        oracle=oracle.to_json(),
    )


def certify_relaxation(E, f, K, epsilon_target=None, ratio=None, tol=1e-12):
    """Check whether the facets of ``K`` certify ``f >= -eps * <f, r>`` on the sphere.

    ``f`` is normalized to unit mean and ``f - r`` is tested against every facet
    ``<y, x_i> >= -1``.  If K is known to satisfy K <= ratio*(Pos_E - r), a True
    answer proves ``f >= -(ratio - 1) <f, r>``.  When both ``ratio`` and
    ``epsilon_target`` are given, K must also be fine enough: ratio - 1 <= eps.
    """
    mean = inner_product(f, E.r)
    if mean <= 0:
        raise InputError(f"<f, r> must be positive, got {mean!r}")
    if E.projection_residual(f) > 1e-9 * math.sqrt(inner_product(f, f)):
        raise InputError("polynomial is not in the subspace E")
    y = E.coords(f / mean)[1:]
    ratio = getattr(K, "ratio", None) if ratio is None else ratio
    if epsilon_target is not None and ratio is not None and ratio - 1.0 > epsilon_target:
        return False
    normals = _points_of(K)
    return bool(np.all(normals @ y >= -1.0 - tol))


# -- even symmetric sextics --------------------------------------------------


def _sextic_directions(theta):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return np.c_[np.cos(theta), np.sin(theta)]


@lru_cache(maxsize=None)
def _sextic_space(n):
    return even_symmetric_sextics(n)


def _polygon_from_constraints(B_points):
    """Vertices of {y : <y, b> >= -1 for all rows b}, counter-clockwise, duplicates merged."""
    hs = np.c_[-B_points, -np.ones(len(B_points))]
    inter = HalfspaceIntersection(hs, np.zeros(B_points.shape[1]))
    pts = inter.intersections
    hull = ConvexHull(pts)
    V = pts[hull.vertices]
    keep = []
    for v in V:
        if not any(np.linalg.norm(v - w) <= 1e-9 * max(1.0, np.linalg.norm(v)) for w in keep):
            keep.append(v)
    V = np.array(keep)
    c = V.mean(axis=0)
    order = np.argsort(np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0]))
    return _drop_collinear(V[order])


def _drop_collinear(V, tol=1e-9):
    out = []
    k = len(V)
    scale = max(1.0, np.abs(V).max())
    for i in range(k):
        a, b, c = V[i - 1], V[i], V[(i + 1) % k]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > tol * scale ** 2:
            out.append(b)
    return np.array(out)


def sextic_cross_section(n):
    """Vertices of Pos_E - r in U(E) coordinates, from the k-test-point constraints."""
    E = _sextic_space(n)
    return _polygon_from_constraints(E.phi_many(test_points(n)))


def _cutting_plane_polygon(E, oracle, seed=0, max_rounds=50, tol=1e-10):
    """Polygon {y : min_sphere y >= -1} from the generic body oracle by cutting planes."""
    pool = E.phi_many(_uniform_sphere(np.random.default_rng(seed), E.n, 256))
    for _ in range(max_rounds):
        V = _polygon_from_constraints(pool)
        # min_v y(v) = -h_B(-y) at each current vertex
        res = support_B_many(E, -V, oracle)
        violated = -res.values < -1.0 - tol
        if not violated.any():
            return V
        pool = np.vstack([pool, E.phi_many(res.argmax[violated])])
    return V


def ngon_support(n, theta, method="test_points", oracle=None):
    """Support function of the cross-section Pos_E - r at angle(s) ``theta``.

    ``method="test_points"`` uses the n constraints a/k^2 + b/k + c >= -1;
    ``method="body"`` rebuilds the section by cutting planes from the generic
    ``grid_ascent`` oracle on the actual sextic polynomials.
    """
    if n < 3:
        raise InputError(f"n must be at least 3, got {n}")
    if method == "test_points":
        V = sextic_cross_section(n)
    elif method == "body":
        E = _sextic_space(n)
        V = _cutting_plane_polygon(E, oracle or SupportOracle("grid_ascent"))
    else:
        raise ConfigurationError(f"unknown ngon_support method {method!r}")
    vals = (_sextic_directions(theta) @ V.T).max(axis=1)
    return float(vals[0]) if np.ndim(theta) == 0 else vals


def sextic_coefficients(E, coords):
    """(a, b, c) with q = a*M6 + b*M2*M4 + c*M2^3 for mean-zero coordinates ``coords``."""
    if not _is_sextic_family(E):
        raise ConfigurationError("subspace is not the even symmetric sextic family")
    q = E.polynomial(coords, mean_zero=True)
    # generator order is [M2^3, M6, M2*M4]
    G = np.array([[inner_product(g, h) for h in E.generators] for g in E.generators])
    rhs = np.array([inner_product(g, q) for g in E.generators])
    c, a, b = np.linalg.solve(G, rhs)
    return float(a), float(b), float(c)


@dataclass
class NgonReport:
    n: int
    extreme_points: list
    count: int
    regularity_residual: float
    regular: bool
    passed: bool
    tol: float

    def __bool__(self):
        return self.passed

    def to_json(self):
        return asdict(self)


def regular_polygon_residual(V):
    """Relative residual of the least-squares affine fit of a regular polygon to ``V``.

    ``V`` must be in cyclic order; index shifts and reflections are absorbed by
    the fitted linear map.
    """
    k = len(V)
    t = 2 * math.pi * np.arange(k) / k
    R = np.c_[np.cos(t), np.sin(t), np.ones(k)]
    X, *_ = np.linalg.lstsq(R, V, rcond=None)
    return float(np.abs(R @ X - V).max() / np.abs(V - V.mean(axis=0)).max())


def ngon_check(n, angles=None, tol=1e-5):
    """Check that Pos_E - r for even symmetric sextics is a regular n-gon.

    Extreme points come from the k-test-point constraints.  When ``angles`` are
    given, the support function at those angles must also match the fitted
    regular polygon's support function within ``tol`` (relative).
    """
    V = sextic_cross_section(n)
    count = len(V)
    resid = regular_polygon_residual(V) if count >= 3 else math.inf
    if angles is not None and count >= 3:
        k = len(V)
        t = 2 * math.pi * np.arange(k) / k
        R = np.c_[np.cos(t), np.sin(t), np.ones(k)]
        X, *_ = np.linalg.lstsq(R, V, rcond=None)
        U = _sextic_directions(angles)
        h_true = (U @ V.T).max(axis=1)
        h_fit = (U @ (R @ X).T).max(axis=1)
        resid = max(resid, float(np.abs(h_true - h_fit).max() / np.abs(h_true).max()))
    regular = resid <= tol
    return NgonReport(
        n=n,
        extreme_points=V.tolist(),
        count=count,
        regularity_residual=resid,
        regular=regular,
        passed=bool(count == n and regular),
        tol=tol,
    )
