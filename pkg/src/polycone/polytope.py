"""Approximating polytopes for the nonnegative cone of a polynomial subspace.

Three constructions are provided: a deterministic symmetric pair P/Q built from a
sparsified John decomposition, a tensor-power refinement Q_k, and a random
polytope K_alpha whose facet normals are i.i.d. draws from a measure on B(E).
Facet sets are kept as normals x_i of constraints <y, x_i> >= -1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import comb, gammaln

from .errors import (
    ConfigurationError,
    ConfigurationWarning,
    GridTooCoarseError,
    InputError,
    RankError,
    StructuralError,
)
from .kernel import EvalVector
from .polyspace import _uniform_sphere
from .sparsifier import VectorSystem, bss_sparsify  # noqa: F401
from .verifier import certify_containment, random_directions, support_B_many

LIFT_GUARD = 10_000
MVEE_TOL = 1e-7


# -- sampling ----------------------------------------------------------------


def sample_sphere(n, count, seed):
    """``count`` i.i.d. uniform unit vectors in R^n (normalized Gaussians)."""
    if count < 1:
        raise InputError(f"count must be at least 1, got {count}")
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    return _uniform_sphere(np.random.default_rng(seed), n, int(count))


def _simplex(rng, count, m):
    cuts = np.sort(rng.random((count, m - 1)), axis=1)
    return np.diff(np.c_[np.zeros(count), cuts, np.ones(count)], axis=1)


def sample_mu_many(E, count, seed):
    """``count`` draws of sum_i a_i phi_E(v_i) with a uniform on the simplex and v_i uniform."""
    if E.m < 2:
        raise StructuralError("U(E) is trivial (m = 1); there is nothing to sample")
    rng = np.random.default_rng(seed)
    a = _simplex(rng, count, E.m)
    V = _uniform_sphere(rng, E.n, count * E.m)
    F = E.phi_many(V).reshape(count, E.m, E.m - 1)
    return np.einsum("ti,tij->tj", a, F)


def sample_mu(E, seed):
    x = sample_mu_many(E, 1, seed)[0]
    mean = float(E.gram()[0, 1:] @ x)
    if abs(mean) > 1e-9:
        raise StructuralError(f"sample has <x, r> = {mean:.3g}, expected 0")
    return EvalVector(x, None)


# -- minimum-volume enclosing ellipsoids --------------------------------------


def _initial_weights(P, centered):
    """Uniform weights on extreme points along a few directions (Kumar-Yildirim style)."""
    N, D = P.shape
    dirs = np.vstack([np.eye(D), np.random.default_rng(0).standard_normal((2 * D, D))])
    S = P @ dirs.T
    picks = set(np.argmax(S, axis=0).tolist())
    picks |= set((np.argmin(S, axis=0) if centered else np.argmax(-S, axis=0)).tolist())
    picks = np.array(sorted(picks))
    base = P[picks] - P[picks].mean(axis=0) if centered else P[picks]
    if np.linalg.matrix_rank(base) < D:
        return np.full(N, 1.0 / N)
    u = np.zeros(N)
    u[picks] = 1.0 / len(picks)
    return u


def mvee(points, centered=True, tol=MVEE_TOL, max_iter=200_000):
    """Minimum-volume enclosing ellipsoid by Khachiyan's method with away steps.

    Returns ``(center, A, u)`` with ellipsoid {x : (x-c)^T A (x-c) <= 1} and
    barycentric weights ``u``.  With ``centered=False`` the ellipsoid is
    centered at the origin (the MVEE of the symmetric hull of +-points).
    Iteration stops once every kappa_i <= (1+tol) k and every supported
    kappa_i >= (1-tol) k, which bounds the volume gap by the same order.
    """
    P0 = np.asarray(points, dtype=float)
    N, D = P0.shape
    # the problem is linearly invariant; whitening keeps the rank-one updates well conditioned
    mu = P0.mean(axis=0) if centered else np.zeros(D)
    W = _inv_sqrt_psd((P0 - mu).T @ (P0 - mu) / N)
    P = (P0 - mu) @ W
    Q = np.c_[P, np.ones(N)] if centered else P
    k = Q.shape[1]
    u = _initial_weights(P, centered)

    def exact(u):
        Xi = np.linalg.inv(Q.T @ (Q * u[:, None]))
        return Xi, np.einsum("ij,jk,ik->i", Q, Xi, Q)

    Xi, kappa = exact(u)
    fresh = True
    for it in range(max_iter):
        if it % 500 == 499:
            Xi, kappa = exact(u)
            fresh = True
        j_up = int(np.argmax(kappa))
        pos = np.flatnonzero(u > 0)
        j_dn = int(pos[np.argmin(kappa[pos])])
        e_up = kappa[j_up] / k - 1.0
        e_dn = 1.0 - kappa[j_dn] / k
        if e_up <= tol and e_dn <= tol:
            if fresh:
                break
            Xi, kappa = exact(u)
            fresh = True
            continue
        fresh = False
        j = j_up if e_up >= e_dn else j_dn
        kj = kappa[j]
        drop = False
        if j == j_up and e_up >= e_dn:
            tau = (kj - k) / (k * (kj - 1.0))
        else:
            # away step; points with kappa <= 1 are removed outright
            floor = -u[j] / (1.0 - u[j])
            tau = (kj - k) / (k * (kj - 1.0)) if kj > 1.0 else floor
            if tau <= floor:
                tau, drop = floor, True
        xq = Xi @ Q[j]
        w = Q @ xq
        denom = 1.0 - tau + tau * kj
        kappa = (kappa - tau * w ** 2 / denom) / (1.0 - tau)
        Xi = (Xi - tau * np.outer(xq, xq) / denom) / (1.0 - tau)
        u *= 1.0 - tau
        u[j] += tau
        if drop:
            u[j] = 0.0
    else:
        warnings.warn(f"MVEE did not reach tolerance {tol:g} in {max_iter} iterations", RuntimeWarning)
    if centered:
        c = u @ P
        S = (P * u[:, None]).T @ P - np.outer(c, c)
    else:
        c = np.zeros(D)
        S = (P * u[:, None]).T @ P
    A = W @ (np.linalg.inv(S) / D) @ W.T
    A = 0.5 * (A + A.T)
    center = c @ np.linalg.inv(W) + mu
    return center, A, u


def _inv_sqrt_psd(S):
    w, V = np.linalg.eigh(S)
    return (V / np.sqrt(w)) @ V.T


@dataclass
class LoewnerTransform:
    """Affine map x -> L (x - c) sending the sample's MVEE to the unit ball."""

    matrix: np.ndarray
    center: np.ndarray
    weights: np.ndarray = field(default=None, repr=False)

    def apply(self, X):
        return (np.atleast_2d(X) - self.center) @ self.matrix.T

    def inverse(self, Y):
        return np.linalg.solve(self.matrix, np.atleast_2d(Y).T).T + self.center

    def to_json(self):
        return {"matrix": self.matrix.tolist(), "center": self.center.tolist()}


def loewner_position(points, centered=True, tol=MVEE_TOL):
    """Löwner (John) position of a finite sample.

    ``centered=False`` fixes the center at the origin, which is the right
    normalization when the body is replaced by the symmetric hull and polarity
    about the origin must be preserved.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    N, D = P.shape
    base = P - P.mean(axis=0) if centered else P
    sv = np.linalg.svd(base, compute_uv=False)
    if N < D + (1 if centered else 0) or sv[-1] <= 1e-10 * max(1.0, sv[0]):
        kind = "affinely" if centered else "linearly"
        raise RankError(f"points do not {kind} span R^{D}")
    c, A, u = mvee(P, centered=centered, tol=tol)
    w, V = np.linalg.eigh(A)
    L = (V * np.sqrt(w)) @ V.T
    T = LoewnerTransform(L, c, u)
    top = np.linalg.norm(T.apply(P), axis=1).max()
    if top > 1.0:
        T.matrix = L / top
    return T


# -- polytopes ---------------------------------------------------------------


@dataclass
class PolytopeV:
    basis_ref: str
    vertices: np.ndarray
    symmetric: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.symmetric and not _closed_under_negation(self.vertices):
            raise InputError("polytope marked symmetric but some vertex has no negation")

    def to_json(self):
        return {"basis_ref": self.basis_ref, "vertices": self.vertices.tolist(),
                "symmetric": bool(self.symmetric), "meta": self.meta}

    @classmethod
    def from_json(cls, obj):
        if "vertices" not in obj:
            raise InputError("V-polytope JSON needs 'vertices'")
        return cls(obj.get("basis_ref", ""), obj["vertices"], bool(obj.get("symmetric", False)),
                   dict(obj.get("meta", {})))


@dataclass
class PolytopeH:
    """{y in U(E) : <y, x_i> >= -1} for the rows x_i of ``normals``."""

    basis_ref: str
    normals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if self.normals.size == 0 or np.any(np.linalg.norm(self.normals, axis=1) == 0):
            raise InputError("facet normals must be nonzero")

    @property
    def facets(self):
        return len(self.normals)

    def contains(self, Y, tol=1e-12):
        return np.all(np.atleast_2d(Y) @ self.normals.T >= -1.0 - tol, axis=1)

    def to_json(self):
        return {"basis_ref": self.basis_ref, "normals": self.normals.tolist(), "offset": -1.0,
                "meta": self.meta}

    @classmethod
    def from_json(cls, obj):
        if "normals" not in obj:
            raise InputError("H-polytope JSON needs 'normals'")
        if float(obj.get("offset", -1.0)) != -1.0:
            raise InputError(f"only offset -1.0 is supported, got {obj['offset']}")
        return cls(obj.get("basis_ref", ""), obj["normals"], dict(obj.get("meta", {})))


def _closed_under_negation(V, tol=1e-9):
    for v in V:
        if np.min(np.linalg.norm(V + v, axis=1)) > tol * max(1.0, np.linalg.norm(v)):
            return False
    return True


def polar_vertices(V):
    """Vertices of {y : <y, v> <= 1 for all rows v}, for a full-dimensional body around 0."""
    from scipy.spatial import HalfspaceIntersection

    V = np.atleast_2d(V)
    hs = np.c_[V, -np.ones(len(V))]
    pts = HalfspaceIntersection(hs, np.zeros(V.shape[1])).intersections
    out = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= 1e-9 * max(1.0, np.linalg.norm(p)) for q in out):
            out.append(p)
    return np.array(out)


# -- deterministic construction ------------------------------------------------


def _near_touching(Y, u, epsilon, D, min_count):
    norms = np.linalg.norm(Y, axis=1)
    near = np.flatnonzero((norms >= 1.0 - epsilon / 4.0) & (u > 0))
    if len(near) < min_count:
        raise GridTooCoarseError(
            f"only {len(near)} near-touching sample points (need {min_count}); increase grid_size"
        )
    system = VectorSystem(Y[near], D * u[near])
    ev = np.linalg.eigvalsh(system.quadratic_form())
    if ev[0] < 1e-8:
        raise GridTooCoarseError("near-touching points do not span the space; increase grid_size")
    return near, system


def _check_epsilon(epsilon, D, warn=True):
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if warn and epsilon < 1.0 / math.sqrt(D):
        warnings.warn(
            f"epsilon = {epsilon:g} is below 1/sqrt(m-1) = {1 / math.sqrt(D):.4g}; the facet "
            "bound is no better than the trivial one",
            ConfigurationWarning,
            stacklevel=3,
        )


def build_deterministic(E, epsilon, grid_size=None, seed=0, certify=True, directions=1000):
    """Symmetric polytope P and facet polytope Q with Pos_E - r inside Q.

    Returns ``(P, Q, ratio_bound)`` with ratio_bound = (1+2 eps) m^{3/2}.  P is
    the hull of +-x_v where x_v = sqrt(m-1) L^{-1} y_v for the sparsified
    near-touching points y_v of the Löwner position; Q = -m^{3/2} P^polar.
    """
    m, D = E.m, E.m - 1
    if D < 1:
        raise StructuralError("U(E) is trivial (m = 1)")
    _check_epsilon(epsilon, D)
    need = math.ceil(10 * D / epsilon ** 2)
    grid_size = need if grid_size is None else int(grid_size)
    if grid_size < need:
        raise InputError(f"grid_size must be at least 10(m-1)/eps^2 = {need}, got {grid_size}")
    X = sample_sphere(E.n, grid_size, seed)
    F = E.phi_many(X)
    T = loewner_position(F, centered=False)
    Y = T.apply(F)
    near, system = _near_touching(Y, T.weights, epsilon, D, D)
    dec = _quiet_bss(system, epsilon / 4.0)
    sel = near[np.asarray(dec.indices, dtype=int)]
    f = math.sqrt(D) * Y[sel]
    x = T.inverse(f)
    verts = np.vstack([x, -x])
    ratio_bound = (1.0 + 2.0 * epsilon) * m ** 1.5
    # m^{3/2} suffices when B(E) is symmetric; otherwise enlarge to the measured gauge
    rho = _safe_scale(E, m ** 1.5, verts, F, seed + 2)
    meta = {
        "epsilon": float(epsilon), "grid_size": grid_size, "seed": int(seed),
        "ratio_bound": ratio_bound, "near_touching": int(len(near)),
        "selected": len(sel), "sparsifier_bounds": list(dec.achieved_bounds), "scale": rho,
        "evaluation_points": X[sel].tolist(),
        "transform": T.to_json(),
    }
    P = PolytopeV(E.basis_ref(), verts, True, dict(meta))
    Q = PolytopeH(E.basis_ref(), verts / rho, dict(meta))
    if certify:
        rep = certify_containment(E, Q, directions=directions, seed=seed + 1)
        Q.meta["certified_ratio"] = rep.certified_ratio
        Q.meta["inner_inclusion_ok"] = rep.inner_inclusion_ok
    return P, Q, ratio_bound


# -- tensor powers -------------------------------------------------------------


def lift_dimension(m, k):
    return int(comb(m + k - 2, k, exact=True))


def _multi_indices(D, k):
    idx = list(combinations_with_replacement(range(D), k))
    counts = np.zeros((len(idx), D), dtype=np.int64)
    for row, c in enumerate(idx):
        for i in c:
            counts[row, i] += 1
    logw = gammaln(k + 1) - gammaln(counts + 1).sum(axis=1)
    return counts, np.exp(0.5 * logw)


def tensor_lift(x, k):
    """Symmetric-power coordinates of x^{(k)} with <lift x, lift y> = <x, y>^k.

    Accepts one vector or an array of row vectors.
    """
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    X = np.asarray(getattr(x, "coords", x), dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    D = X.shape[1]
    if k == 1:
        return X[0].copy() if single else X.copy()
    if lift_dimension(D + 1, k) > LIFT_GUARD:
        raise ConfigurationError(
            f"lift dimension binom({D + k - 1}, {k}) = {lift_dimension(D + 1, k)} exceeds {LIFT_GUARD}"
        )
    counts, w = _multi_indices(D, k)
    out = np.ones((X.shape[0], len(counts)))
    for i in range(D):
        out *= X[:, i:i + 1] ** counts[:, i]
    out *= w
    return out[0] if single else out


def tensor_ratio_bound(m, k):
    if m < 3:
        raise InputError("the tensorized ratio bound needs m >= 3")
    return (1.0 + k / (m - 2)) ** (3.0 * (m - 2) / k)


def gauge_B(E, points, directions=2000, seed=0, oracle=None):
    """Lower estimate of max_i gauge_B(x_i) = max_i max_q <q, x_i>/h_B(q)."""
    X = np.atleast_2d(points)
    Q = np.vstack([random_directions(E.m - 1, directions, seed), X / np.linalg.norm(X, axis=1)[:, None]])
    h = support_B_many(E, Q, oracle).values
    return float((X @ Q.T / h).max())


def gauge_upper(points, hull):
    """Upper bound on gauge_B(x_i) from conv(hull) inside B: min sum(lam), hull^T lam = x."""
    from scipy.optimize import linprog

    H = np.atleast_2d(hull)
    out = 0.0
    for x in np.atleast_2d(points):
        res = linprog(np.ones(len(H)), A_eq=H.T, b_eq=x, bounds=(0, None), method="highs")
        if res.status != 0:
            return math.inf
        out = max(out, float(res.fun))
    return out


def _safe_scale(E, base, normals, F, seed):
    """Smallest tested scale >= base that keeps every normal/scale inside B(E).

    The cheap direction estimate is a lower bound on the gauge; when it comes
    close to ``base`` a linear program over the sampled hull gives a
    certified upper bound instead.
    """
    lo = gauge_B(E, normals, seed=seed)
    if lo < base / 1.01:
        return base
    from .verifier import _structured_points

    hull = np.vstack([F, E.phi_many(_structured_points(E.n))])
    return max(base, gauge_upper(normals, hull) * (1.0 + 1e-9))


def _quiet_bss(system, epsilon):
    # the callers validate epsilon against the ambient dimension themselves
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigurationWarning)
        return bss_sparsify(system, epsilon)


def build_tensorized(E, k, epsilon=1.0 / (2.0 * math.e), grid_size=None, seed=0, certify=True,
                     directions=1000):
    """Facet polytope Q_k from a sparsified John decomposition of the k-th tensor power.

    Facets are +-phi_E(v) for v in the selected set S_k scaled by
    rho = max(binom(m+k-2,k)^{3/(2k)}, gauge of -phi_E(v) in B(E)); the
    returned ratio bound is (1 + k/(m-2))^{3(m-2)/k}.
    """
    m, D = E.m, E.m - 1
    if m < 3:
        raise InputError(f"tensorized construction needs m >= 3, got m = {m}")
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    if k < math.e * (m - 2):
        warnings.warn(
            f"k = {k} < e(m-2) = {math.e * (m - 2):.3g}; the closed-form ratio bound is not guaranteed",
            ConfigurationWarning,
            stacklevel=2,
        )
    Dk = lift_dimension(m, k)
    if Dk > LIFT_GUARD:
        raise ConfigurationError(f"lift dimension {Dk} exceeds {LIFT_GUARD}")
    _check_epsilon(epsilon, Dk, warn=False)
    need = math.ceil(10 * Dk / epsilon ** 2)
    grid_size = need if grid_size is None else int(grid_size)
    if grid_size < need:
        raise InputError(f"grid_size must be at least 10 binom(m+k-2,k)/eps^2 = {need}, got {grid_size}")
    X = sample_sphere(E.n, grid_size, seed)
    F = E.phi_many(X)
    L = tensor_lift(F, k)
    T = loewner_position(L, centered=False)
    Y = T.apply(L)
    near, system = _near_touching(Y, T.weights, epsilon, Dk, Dk)
    dec = _quiet_bss(system, epsilon)
    sel = near[np.asarray(dec.indices, dtype=int)]
    base = F[sel]
    normals = np.vstack([base, -base])
    rho = _safe_scale(E, Dk ** (3.0 / (2.0 * k)), normals, F, seed + 2)
    normals = normals / rho
    ratio_bound = tensor_ratio_bound(m, k)
    meta = {
        "k": int(k), "epsilon": float(epsilon), "grid_size": grid_size, "seed": int(seed),
        "lift_dimension": Dk, "ratio_bound": ratio_bound, "scale": rho,
        "selected": len(sel), "evaluation_points": X[sel].tolist(),
    }
    Qk = PolytopeH(E.basis_ref(), normals, meta)
    if certify:
        rep = certify_containment(E, Qk, directions=directions, seed=seed + 1)
        Qk.meta["certified_ratio"] = rep.certified_ratio
        Qk.meta["inner_inclusion_ok"] = rep.inner_inclusion_ok
    return Qk, ratio_bound


# -- random construction -----------------------------------------------------


def t_formula(m, M, alpha):
    """ceil(27 e^2 m^2 (M/(1-alpha))^m ln(M/(1-alpha)))."""
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha!r}")
    if M < 1:
        raise InputError(f"M must be at least 1, got {M!r}")
    q = M / (1.0 - alpha)
    return math.ceil(27.0 * math.e ** 2 * m ** 2 * q ** m * math.log(q))


def success_probability(m, M, alpha):
    """1 - 4((1-alpha)/M)^{m^2}."""
    return 1.0 - 4.0 * ((1.0 - alpha) / M) ** (m * m)


def default_sample_count(m, alpha):
    return math.ceil(50 * m / (1.0 - alpha) ** 2)


def build_random(E, alpha, t_override=None, M_bound=None, seed=0):
    """Random facet polytope K_alpha with normals drawn i.i.d. from mu.

    Every normal lies in B(E), so Pos_E - r is contained in K_alpha for
    every draw.  Returns ``(K, t_used)``.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha!r}")
    M = float(4 ** E.d if M_bound is None else M_bound)
    if M < 1:
        raise InputError(f"M_bound must be at least 1, got {M_bound!r}")
    formula = t_formula(E.m, M, alpha)
    if t_override is None:
        t = formula
        if t > 10 ** 7:
            raise ConfigurationError(f"formula sample count {t} is too large; pass t_override")
    else:
        t = int(t_override)
        if t < 1:
            raise InputError(f"t_override must be positive, got {t_override}")
        if t < E.m:
            warnings.warn(f"t = {t} < m = {E.m}; the hull is degenerate", ConfigurationWarning,
                          stacklevel=2)
    X = sample_mu_many(E, t, seed)
    drift = np.abs(X @ E.gram()[0, 1:]).max()
    if drift > 1e-9:
        raise StructuralError(f"sample with <x, r> = {drift:.3g}")
    meta = {
        "alpha": float(alpha), "M_bound": M, "t_used": t, "t_formula": formula,
        "success_probability": success_probability(E.m, M, alpha), "seed": int(seed),
    }
    return PolytopeH(E.basis_ref(), X, meta), t
