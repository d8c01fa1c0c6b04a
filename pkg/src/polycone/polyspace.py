"""Homogeneous polynomials and their calculus on the unit sphere.

Polynomials are stored sparsely as ``{exponent tuple: coefficient}``.  All
integrals are taken against the uniform probability measure on S^{n-1}.
"""
from __future__ import annotations

import itertools
import math
import threading
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import InputError

_LOG_GAMMA_HALF = math.lgamma(0.5)


class HomogeneousPolynomial:
    """A real form of even degree in ``n`` variables.

    Instances are treated as immutable; arithmetic returns new objects.
    """

    __slots__ = ("n", "degree", "_terms", "_exps", "_coefs")

    def __init__(self, n, degree, terms=None):
        n = int(n)
        degree = int(degree)
        if n < 1:
            raise InputError(f"n must be positive, got {n}")
        if degree < 0 or degree % 2:
            raise InputError(f"degree must be even and nonnegative, got {degree}")
        clean = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise InputError(f"exponent vector {exps} has {len(exps)} entries, expected n={n}")
            if min(exps) < 0:
                raise InputError(f"negative exponent in {exps}")
            if sum(exps) != degree:
                raise InputError(f"exponent vector {exps} does not sum to degree {degree}")
            coef = float(coef)
            if coef != 0.0:
                clean[exps] = clean.get(exps, 0.0) + coef
        self.n = n
        self.degree = degree
        self._terms = {k: v for k, v in sorted(clean.items()) if v != 0.0}
        self._exps = None
        self._coefs = None

    # construction helpers
    @classmethod
    def monomial(cls, exps, coef=1.0):
        exps = tuple(exps)
        return cls(len(exps), sum(exps), {exps: coef})

    @classmethod
    def zero(cls, n, degree):
        return cls(n, degree, {})

    @classmethod
    def from_arrays(cls, n, degree, exps, coefs, drop_below=0.0):
        coefs = np.asarray(coefs, dtype=float)
        cut = drop_below * (np.abs(coefs).max() if coefs.size else 0.0)
        terms = {tuple(e): c for e, c in zip(np.asarray(exps).tolist(), coefs.tolist()) if abs(c) > cut}
        return cls(n, degree, terms)

    @property
    def terms(self):
        return dict(self._terms)

    @property
    def d(self):
        return self.degree // 2

    @property
    def exps(self):
        if self._exps is None:
            if self._terms:
                self._exps = np.array(list(self._terms), dtype=np.int64)
            else:
                self._exps = np.zeros((0, self.n), dtype=np.int64)
        return self._exps

    @property
    def coefs(self):
        if self._coefs is None:
            self._coefs = np.array(list(self._terms.values()), dtype=float)
        return self._coefs

    def __len__(self):
        return len(self._terms)

    def __repr__(self):
        return f"HomogeneousPolynomial(n={self.n}, degree={self.degree}, terms={len(self)})"

    def __eq__(self, other):
        if not isinstance(other, HomogeneousPolynomial):
            return NotImplemented
        return self.n == other.n and self.degree == other.degree and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, self.degree, tuple(self._terms.items())))

    # arithmetic
    def _check_compatible(self, other, same_degree=True):
        if self.n != other.n:
            raise InputError(f"variable count mismatch: {self.n} vs {other.n}")
        if same_degree and self.degree != other.degree:
            raise InputError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other):
        if not isinstance(other, HomogeneousPolynomial):
            return NotImplemented
        self._check_compatible(other)
        terms = dict(self._terms)
        for k, v in other._terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return HomogeneousPolynomial(self.n, self.degree, terms)

    def __neg__(self):
        return HomogeneousPolynomial(self.n, self.degree, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, HomogeneousPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, HomogeneousPolynomial):
            self._check_compatible(other, same_degree=False)
            terms = {}
            for ka, va in self._terms.items():
                for kb, vb in other._terms.items():
                    k = tuple(a + b for a, b in zip(ka, kb))
                    terms[k] = terms.get(k, 0.0) + va * vb
            return HomogeneousPolynomial(self.n, self.degree + other.degree, terms)
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = float(other)
            return HomogeneousPolynomial(self.n, self.degree, {k: c * v for k, v in self._terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            raise InputError("negative powers are not polynomials")
        out = HomogeneousPolynomial(self.n, 0, {(0,) * self.n: 1.0})
        for _ in range(k):
            out = out * self
        return out

    # evaluation
    def __call__(self, x):
        """Evaluate at one point (shape ``(n,)``) or many (shape ``(N, n)``)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.n:
            raise InputError(f"point dimension {X.shape[1]} does not match n={self.n}")
        vals = monomial_values(X, self.exps) @ self.coefs if len(self) else np.zeros(X.shape[0])
        return float(vals[0]) if single else vals

    # serialization
    def to_json(self):
        return {
            "n": self.n,
            "degree": self.degree,
            "terms": [{"exps": list(k), "coef": v} for k, v in self._terms.items()],
        }

    @classmethod
    def from_json(cls, obj):
        try:
            n = obj["n"]
            degree = obj["degree"]
            raw = obj["terms"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"polynomial JSON missing field {exc}") from None
        terms = {}
        for i, t in enumerate(raw):
            if "exps" not in t or "coef" not in t:
                raise InputError(f"polynomial term {i} needs 'exps' and 'coef'")
            key = tuple(t["exps"])
            terms[key] = terms.get(key, 0.0) + float(t["coef"])
        return cls(n, degree, terms)


def monomial_values(X, exps, chunk=8192):
    """Matrix of monomial values, rows are points and columns exponent vectors."""
    X = np.asarray(X, dtype=float)
    exps = np.asarray(exps, dtype=np.int64)
    N = X.shape[0]
    out = np.empty((N, exps.shape[0]))
    if exps.shape[0] == 0:
        return out
    top = int(exps.max()) if exps.size else 0
    for start in range(0, N, chunk):
        Xc = X[start:start + chunk]
        # powers[p, i, j] = X[i, j] ** p
        powers = np.empty((top + 1,) + Xc.shape)
        powers[0] = 1.0
        for p in range(1, top + 1):
            powers[p] = powers[p - 1] * Xc
        vals = np.ones((Xc.shape[0], exps.shape[0]))
        for j in range(X.shape[1]):
            vals *= powers[exps[:, j], :, j].T
        out[start:start + chunk] = vals
    return out


@lru_cache(maxsize=None)
def _exponents(n, degree):
    out = []
    for bars in itertools.combinations(range(degree + n - 1), n - 1):
        prev = -1
        exps = []
        for b in bars:
            exps.append(b - prev - 1)
            prev = b
        exps.append(degree + n - 1 - prev - 1)
        out.append(tuple(exps))
    return tuple(sorted(out))


def enumerate_exponents(n, degree):
    """All exponent vectors of ``degree`` in ``n`` variables, lexicographically sorted."""
    if n < 1 or degree < 0:
        raise InputError(f"invalid (n, degree) = ({n}, {degree})")
    return list(_exponents(int(n), int(degree)))


def space_dimension(n, degree):
    """dim of the space of degree-``degree`` forms in ``n`` variables, by enumeration."""
    return len(_exponents(int(n), int(degree)))


def sphere_power(n, d):
    """r = (x_1^2 + ... + x_n^2)^d, identically 1 on the sphere."""
    terms = {}
    for beta in _exponents(n, d):
        coef = math.factorial(d)
        for b in beta:
            coef //= math.factorial(b)
        terms[tuple(2 * b for b in beta)] = float(coef)
    return HomogeneousPolynomial(n, 2 * d, terms)


def power_sum(n, k):
    """M_k = x_1^k + ... + x_n^k for even ``k``."""
    terms = {}
    for i in range(n):
        e = [0] * n
        e[i] = k
        terms[tuple(e)] = 1.0
    return HomogeneousPolynomial(n, k, terms)


class SphereMomentCache:
    """Thread-safe memo of monomial moments over the uniform sphere measure.

    Readers never block; writers take a lock so concurrent fills are serialized.
    """

    def __init__(self):
        self._memo = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._memo)

    def get(self, alpha):
        alpha = tuple(int(a) for a in alpha)
        val = self._memo.get(alpha)
        if val is None:
            val = _moment_closed_form(alpha)
            with self._lock:
                self._memo.setdefault(alpha, val)
        return val


_DEFAULT_CACHE = SphereMomentCache()


def _moment_closed_form(alpha):
    if any(a % 2 for a in alpha):
        return 0.0
    if any(a < 0 for a in alpha):
        raise InputError(f"negative exponent in {alpha}")
    n = len(alpha)
    log_val = (
        math.lgamma(n / 2)
        + sum(math.lgamma((a + 1) / 2) for a in alpha)
        - math.lgamma((n + sum(alpha)) / 2)
        - n * _LOG_GAMMA_HALF
    )
    return math.exp(log_val)


def monomial_sphere_moment(alpha, cache=None):
    """Integral of x^alpha over S^{n-1} against the uniform probability measure."""
    if len(alpha) == 0:
        raise InputError("exponent vector must be nonempty")
    return (_DEFAULT_CACHE if cache is None else cache).get(alpha)


def sphere_moments(alphas):
    """Vectorized :func:`monomial_sphere_moment` over the rows of ``alphas``."""
    alphas = np.asarray(alphas, dtype=np.int64)
    n = alphas.shape[-1]
    odd = (alphas % 2).any(axis=-1)
    logv = (
        math.lgamma(n / 2)
        + gammaln((alphas + 1) / 2).sum(axis=-1)
        - gammaln((n + alphas.sum(axis=-1)) / 2)
        - n * _LOG_GAMMA_HALF
    )
    out = np.exp(logv)
    out[odd] = 0.0
    return out


def moment_matrix(exps_a, exps_b=None):
    """Gram matrix of monomials: entry (i, j) is the moment of exps_a[i] + exps_b[j]."""
    exps_a = np.asarray(exps_a, dtype=np.int64)
    exps_b = exps_a if exps_b is None else np.asarray(exps_b, dtype=np.int64)
    sums = exps_a[:, None, :] + exps_b[None, :, :]
    return sphere_moments(sums.reshape(-1, exps_a.shape[1])).reshape(len(exps_a), len(exps_b))


def inner_product(f, g):
    """<f, g> = integral of f*g over the sphere, computed exactly from moments."""
    if f.n != g.n:
        raise InputError(f"variable count mismatch: {f.n} vs {g.n}")
    if f.degree != g.degree:
        raise InputError(
            f"degree mismatch {f.degree} vs {g.degree}; multiply the lower one by a power of r first"
        )
    if not len(f) or not len(g):
        return 0.0
    return float(f.coefs @ moment_matrix(f.exps, g.exps) @ g.coefs)


def norm2(f):
    return math.sqrt(max(inner_product(f, f), 0.0))


def _uniform_sphere(rng, n, count):
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def norm1(f, samples=100_000, seed=0):
    """Monte Carlo estimate of the sphere 1-norm.

    Returns ``(estimate, stderr)`` with the central-limit standard error.
    """
    if samples < 1000:
        raise InputError(f"norm1 needs at least 1000 samples, got {samples}")
    rng = np.random.default_rng(seed)
    vals = np.abs(f(_uniform_sphere(rng, f.n, samples)))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def gaussian_sphere_ratio(n, d):
    """Gamma(n/2) / (2^{2d} Gamma(n/2 + 2d)).

    Multiplying the Gaussian second moment of a degree-2d form by this ratio
    gives its squared sphere 2-norm.
    """
    if n < 1 or d < 1:
        raise InputError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    return math.exp(math.lgamma(n / 2) - 2 * d * math.log(2) - math.lgamma(n / 2 + 2 * d))


def evaluate(f, v):
    """Evaluate ``f`` at a unit vector ``v``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != f.n:
        raise InputError(f"point of shape {v.shape} does not match n={f.n}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InputError(f"evaluation point must be a unit vector, |v| = {np.linalg.norm(v)!r}")
    return f(v)
