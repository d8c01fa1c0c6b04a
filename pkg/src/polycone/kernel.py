"""Subspaces containing r, reproducing kernels and the evaluation map phi_E.

A :class:`Subspace` holds an orthonormal basis ``u_1 = r, u_2, ..., u_m``.
Because ``r`` is pinned first, the evaluation vector of a unit point ``v`` is
simply ``(u_2(v), ..., u_m(v))`` in the mean-zero basis.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InputError, StructuralError
from .polyspace import (
    HomogeneousPolynomial,
    _uniform_sphere,
    enumerate_exponents,
    inner_product,
    moment_matrix,
    monomial_values,
    power_sum,
    sphere_power,
)

GRAM_COND_LIMIT = 1e12
BREAKDOWN = 1e-12
SPAN_TOL = 1e-9

SEXTIC_FAMILY = "even_symmetric_sextic"


@dataclass(frozen=True)
class MeanZeroBasis:
    basis: tuple


@dataclass(frozen=True)
class EvalVector:
    coords: np.ndarray
    source_point: np.ndarray | None = None


class Subspace:
    """Span of ``generators`` with an orthonormal basis whose first element is r."""

    def __init__(self, generators, family=None):
        generators = list(generators)
        if not generators:
            raise InputError("a subspace needs at least one generator")
        n, degree = generators[0].n, generators[0].degree
        for i, g in enumerate(generators):
            if g.n != n or g.degree != degree:
                raise InputError(
                    f"generator {i} has (n, degree) = ({g.n}, {g.degree}), expected ({n}, {degree})"
                )
            if not len(g):
                raise DegenerateInputError(f"generator {i} is the zero polynomial")
        self.n = n
        self.two_d = degree
        self.generators = tuple(generators)
        self.family = family
        r = sphere_power(n, degree // 2)

        keys = sorted({k for g in generators for k in g.terms} | set(r.terms))
        index = {k: i for i, k in enumerate(keys)}
        self._exps = np.array(keys, dtype=np.int64)
        K = len(keys)
        C = np.zeros((len(generators), K))
        for i, g in enumerate(generators):
            for k, v in g.terms.items():
                C[i, index[k]] = v
        c_r = np.zeros(K)
        for k, v in r.terms.items():
            c_r[index[k]] = v
        M = moment_matrix(self._exps)

        G = C @ M @ C.T
        scale = 1.0 / np.sqrt(np.diag(G))
        cond = np.linalg.cond(G * np.outer(scale, scale))
        if not np.isfinite(cond) or cond > GRAM_COND_LIMIT:
            raise DegenerateInputError(
                f"generators are numerically dependent (Gram condition number {cond:.3g})"
            )
        coeffs = np.linalg.solve(G, C @ M @ c_r)
        resid = c_r - coeffs @ C
        resid_norm = math.sqrt(max(resid @ M @ resid, 0.0))
        if resid_norm > SPAN_TOL:
            raise StructuralError(
                f"r = (x_1^2+...+x_n^2)^{degree // 2} is not in the span (residual {resid_norm:.3g})"
            )

        # modified Gram-Schmidt with one re-orthogonalization pass, r first
        basis = [c_r / math.sqrt(c_r @ M @ c_r)]
        for row in C:
            v = row.copy()
            size = math.sqrt(v @ M @ v)
            for _ in range(2):
                for q in basis:
                    v -= (q @ M @ v) * q
            nv = math.sqrt(max(v @ M @ v, 0.0))
            if nv <= BREAKDOWN * size:
                continue
            basis.append(v / nv)
        if len(basis) != len(generators):
            raise DegenerateInputError(
                f"orthonormalization kept {len(basis)} vectors from {len(generators)} generators"
            )
        self._Q = np.array(basis)
        self._M = M
        self.m = len(basis)
        self.ortho_basis = tuple(
            HomogeneousPolynomial.from_arrays(n, degree, self._exps, q, drop_below=1e-15) for q in basis
        )
        self.contains_r = True
        self._quad = None

    # -- structure ---------------------------------------------------------
    @property
    def d(self):
        return self.two_d // 2

    @property
    def r(self):
        return self.ortho_basis[0]

    @property
    def mean_zero_basis(self):
        return MeanZeroBasis(self.ortho_basis[1:])

    def gram(self):
        return self._Q @ self._M @ self._Q.T

    def basis_ref(self):
        """Short content hash identifying this basis in serialized artifacts."""
        blob = json.dumps([p.to_json() for p in self.ortho_basis], sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- evaluation --------------------------------------------------------
    def basis_values(self, X):
        """Values of ``u_1..u_m`` at the rows of ``X``; shape ``(N, m)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise InputError(f"points have dimension {X.shape[1]}, expected n={self.n}")
        return monomial_values(X, self._exps) @ self._Q.T

    def phi_many(self, X):
        """Evaluation vectors of the rows of ``X`` in mean-zero coordinates; shape ``(N, m-1)``."""
        if self.m < 2:
            raise StructuralError("U(E) is trivial (m = 1); the evaluation map is zero")
        return self.basis_values(X)[:, 1:]

    def phi_many_with_grad(self, X):
        """Mean-zero basis values and their Euclidean gradients.

        Returns ``(vals, grads)`` with shapes ``(N, m-1)`` and ``(N, m-1, n)``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Q = self._Q[1:]
        vals = monomial_values(X, self._exps) @ Q.T
        grads = np.empty((X.shape[0], Q.shape[0], self.n))
        for j in range(self.n):
            e = self._exps[:, j]
            lowered = self._exps.copy()
            lowered[:, j] = np.maximum(e - 1, 0)
            grads[:, :, j] = monomial_values(X, lowered) @ (Q * e).T
        return vals, grads

    def coords(self, f):
        """Coordinates of ``f`` in the orthonormal basis (projection onto E)."""
        if f.n != self.n or f.degree != self.two_d:
            raise InputError(
                f"polynomial (n, degree) = ({f.n}, {f.degree}) does not match ({self.n}, {self.two_d})"
            )
        if not len(f):
            return np.zeros(self.m)
        return self._Q @ moment_matrix(self._exps, f.exps) @ f.coefs

    def projection_residual(self, f):
        """2-norm of ``f - Pi_E(f)``."""
        c = self.coords(f)
        sq = inner_product(f, f) - c @ c
        return math.sqrt(max(sq, 0.0))

    def polynomial(self, coords, mean_zero=False):
        """Polynomial with the given basis coordinates (mean-zero coords if ``mean_zero``)."""
        coords = np.asarray(coords, dtype=float)
        Q = self._Q[1:] if mean_zero else self._Q
        if coords.shape != (Q.shape[0],):
            raise InputError(f"expected {Q.shape[0]} coordinates, got shape {coords.shape}")
        return HomogeneousPolynomial.from_arrays(self.n, self.two_d, self._exps, coords @ Q, drop_below=1e-15)

    def quadratic_forms(self):
        """Symmetric matrices A_i with u_{i+1}(x) = x^T A_i x; only for degree 2."""
        if self.two_d != 2:
            raise InputError("quadratic forms exist only in degree 2")
        if self._quad is None:
            A = np.zeros((self.m - 1, self.n, self.n))
            for col, e in enumerate(self._exps):
                idx = np.flatnonzero(e)
                if len(idx) == 1:
                    i = j = idx[0]
                    w = 1.0
                else:
                    i, j = idx
                    w = 0.5
                A[:, i, j] += w * self._Q[1:, col]
                if i != j:
                    A[:, j, i] += w * self._Q[1:, col]
            self._quad = A
        return self._quad

    # -- serialization -----------------------------------------------------
    def to_json(self):
        out = {
            "generators": [g.to_json() for g in self.generators],
            "ortho_basis": [u.to_json() for u in self.ortho_basis],
            "m": self.m,
        }
        if self.family:
            out["family"] = self.family
        return out

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "generators" not in obj:
            raise InputError("subspace JSON needs a 'generators' list")
        gens = [HomogeneousPolynomial.from_json(g) for g in obj["generators"]]
        E = cls(gens, family=obj.get("family"))
        if "m" in obj and int(obj["m"]) != E.m:
            raise InputError(f"field 'm' = {obj['m']} disagrees with the computed dimension {E.m}")
        return E


def orthonormalize(generators, family=None):
    return Subspace(generators, family=family)


def full_space(n, d):
    """E = P_{n,2d}, spanned by all monomials of degree 2d."""
    gens = [HomogeneousPolynomial.monomial(e) for e in enumerate_exponents(n, 2 * d)]
    return Subspace(gens, family="full")


def even_symmetric_sextics(n):
    """span{M_2^3, M_6, M_2 M_4}, the even symmetric sextics in ``n >= 3`` variables."""
    if n < 3:
        raise InputError(f"even symmetric sextics need n >= 3, got {n}")
    M2, M4, M6 = power_sum(n, 2), power_sum(n, 4), power_sum(n, 6)
    return Subspace([M2 ** 3, M6, M2 * M4], family=SEXTIC_FAMILY)


def reproducing_kernel(E, v):
    """Pi_E(p_v) as a polynomial: sum_i u_i(v) u_i."""
    vals = E.basis_values(np.asarray(v, dtype=float)[None, :])[0]
    return HomogeneousPolynomial.from_arrays(E.n, E.two_d, E._exps, vals @ E._Q, drop_below=1e-15)


def phi(E, v):
    v = np.asarray(v, dtype=float)
    return EvalVector(E.phi_many(v[None, :])[0], source_point=v)


def isotropy_check(E, samples=100_000, seed=0):
    """Monte Carlo check that the pushforward of sigma under phi_E is isotropic and centered.

    Returns ``(cov_dev, mean_dev, mean_sq_norm)``: the Frobenius deviation of
    the empirical covariance from I divided by sqrt(m-1), the centroid norm,
    and the average of ||phi_E(v)||^2 (which should approach m-1).
    """
    if samples < 10_000:
        raise InputError(f"isotropy_check needs at least 10^4 samples, got {samples}")
    rng = np.random.default_rng(seed)
    D = E.m - 1
    cov = np.zeros((D, D))
    total = np.zeros(D)
    sq = 0.0
    chunk = 20_000
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        F = E.phi_many(_uniform_sphere(rng, E.n, c))
        cov += F.T @ F
        total += F.sum(axis=0)
        sq += float((F * F).sum())
        done += c
    cov /= samples
    mean = total / samples
    cov_dev = float(np.linalg.norm(cov - np.eye(D)) / math.sqrt(D))
    return cov_dev, float(np.linalg.norm(mean)), sq / samples


def m_ratio_estimate(E, trials=100, seed=0, samples=4000, sweeps=12):
    """Lower estimate of M(E) = max_f ||f||_2^2 / ||f||_1^2 by multi-start coordinate ascent.

    The search runs on one fixed Monte Carlo sample; the winner is re-scored on
    a fresh, larger sample to undo the selection bias.  Results above the
    universal bound 2^{2d} are clipped with a warning.
    """
    if trials < 100:
        raise InputError(f"m_ratio_estimate needs at least 100 trials, got {trials}")
    bound = 4.0 ** E.d
    if E.m == 1:
        return 1.0
    rng = np.random.default_rng(seed)
    A = E.basis_values(_uniform_sphere(rng, E.n, samples))
    C = rng.standard_normal((E.m, trials))
    C /= np.linalg.norm(C, axis=0)
    Y = A @ C
    steps = np.array([-1.0, -0.5, -0.25, -0.1, 0.1, 0.25, 0.5, 1.0])

    def score(Yc, Cc):
        return (Cc * Cc).sum(axis=0) / np.abs(Yc).mean(axis=0) ** 2

    delta = 1.0
    for _ in range(sweeps):
        for i in range(E.m):
            cand_Y = Y[:, :, None] + delta * steps[None, None, :] * A[:, i, None, None]
            cand_c = C[i][:, None] + delta * steps[None, :]
            nrm = (C * C).sum(axis=0)[:, None] - C[i][:, None] ** 2 + cand_c ** 2
            cand = nrm / np.abs(cand_Y).mean(axis=0) ** 2
            best = cand.argmax(axis=1)
            cur = score(Y, C)
            improve = cand[np.arange(trials), best] > cur
            cols = np.flatnonzero(improve)
            shift = delta * steps[best[cols]]
            C[i, cols] += shift
            Y[:, cols] += A[:, i, None] * shift
            norms = np.linalg.norm(C, axis=0)
            C /= norms
            Y /= norms
        delta *= 0.6
    best_c = C[:, score(Y, C).argmax()]
    fresh = E.basis_values(_uniform_sphere(rng, E.n, 10 * samples)) @ best_c
    est = float(best_c @ best_c / np.abs(fresh).mean() ** 2)
    if est > bound:
        warnings.warn(f"M(E) estimate {est:.4g} exceeds 2^(2d) = {bound:g}; clipped", RuntimeWarning)
        est = bound
    return est


def pos_base_membership(E, f, oracle=None, tol=1e-9):
    """True iff ``f`` lies in the unit-mean base of the nonnegative cone of E."""
    from .verifier import SupportOracle, sphere_min

    if E.projection_residual(f) > 1e-9 * max(1.0, math.sqrt(abs(inner_product(f, f)))):
        raise InputError("polynomial is not in the subspace E")
    if abs(inner_product(f, E.r) - 1.0) > tol:
        return False
    oracle = oracle or SupportOracle.default_for(E)
    return sphere_min(E, f, oracle) >= -tol
