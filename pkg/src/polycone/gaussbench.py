"""Gaussian tail experiments and the vertex-count lower-bound estimator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import InputError
from .polyspace import inner_product, norm2, space_dimension, sphere_power

CHUNK = 50_000


@dataclass
class TailReport:
    kind: str
    thresholds: list
    empirical_probs: list
    stderr: list
    theoretical_bounds: list
    fit_slope: float
    samples: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.thresholds)
        if not (len(self.empirical_probs) == len(self.stderr) == len(self.theoretical_bounds) == k):
            raise ValueError("report lists are not aligned")
        if any(not 0.0 <= p <= 1.0 for p in self.empirical_probs):
            raise ValueError("empirical probabilities must lie in [0, 1]")

    def within_bounds(self, sigmas=3.0):
        """Per threshold: empirical <= bound + sigmas*stderr (None where no bound exists)."""
        return [None if b is None else p <= b + sigmas * s
                for p, s, b in zip(self.empirical_probs, self.stderr, self.theoretical_bounds)]

    def to_json(self):
        return asdict(self)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "empirical", "stderr", "bound"])
        for row in zip(self.thresholds, self.empirical_probs, self.stderr, self.theoretical_bounds):
            w.writerow(["" if x is None else repr(float(x)) for x in row])
        return buf.getvalue()


def _proportion(hits, total):
    p = hits / total
    return float(p), float(math.sqrt(p * (1.0 - p) / total))


def _slope(x, p):
    x, p = np.asarray(x, dtype=float), np.asarray(p, dtype=float)
    ok = p > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], np.log(p[ok]), 1)[0])


def lemma2_experiment(n, eps_grid, samples=100_000, seed=0):
    """Empirical P(||v||^2 <= (1-eps) n) for standard Gaussian v against e^{-eps^2 n/4}.

    ``fit_slope`` is the slope of log p against eps^2 n; the bound corresponds to -1/4.
    """
    if samples < 10_000:
        raise InputError(f"samples must be at least 10^4, got {samples}")
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    eps = np.asarray(list(eps_grid), dtype=float)
    if np.any((eps < 0) | (eps > 1)):
        raise InputError("eps values must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    hits = np.zeros(len(eps))
    done = 0
    while done < samples:
        c = min(CHUNK, samples - done)
        sq = np.einsum("ij,ij->i", v := rng.standard_normal((c, n)), v)
        hits += (sq[:, None] <= (1.0 - eps) * n).sum(axis=0)
        done += c
    probs, errs = zip(*(_proportion(h, samples) for h in hits))
    bounds = [float(math.exp(-e * e * n / 4.0)) for e in eps]
    return TailReport("lemma2", eps.tolist(), list(probs), list(errs), bounds,
                      _slope(eps ** 2 * n, probs), int(samples), int(seed), {"n": int(n)})


def lemma1_experiment(f, t_grid, samples=100_000, seed=0):
    """Empirical P(|f(x)| >= t^{2d} ||f||_2) for standard Gaussian x.

    ``f`` must have zero mean on the sphere.  ``fit_slope`` is the slope of
    log p against t^2/(n+2d); the tail should decay, so it is negative.
    """
    if samples < 10_000:
        raise InputError(f"samples must be at least 10^4, got {samples}")
    n, two_d = f.n, f.degree
    r = sphere_power(n, two_d // 2)
    mean = inner_product(f, r) / inner_product(r, r)
    if abs(mean) > 1e-9:
        raise InputError(f"f must have zero mean on the sphere, got <f, r> = {mean:.3g}")
    t = np.asarray(list(t_grid), dtype=float)
    floor = math.sqrt(n + two_d)
    if np.any(t < floor - 1e-12):
        raise InputError(f"every t must be at least sqrt(n+2d) = {floor:.6g}")
    scale = norm2(f)
    if scale == 0:
        raise InputError("f is the zero polynomial")
    level = t ** two_d * scale
    rng = np.random.default_rng(seed)
    hits = np.zeros(len(t))
    done = 0
    while done < samples:
        c = min(CHUNK, samples - done)
        vals = np.abs(f(rng.standard_normal((c, n))))
        hits += (vals[:, None] >= level).sum(axis=0)
        done += c
    probs, errs = zip(*(_proportion(h, samples) for h in hits))
    return TailReport("lemma1", t.tolist(), list(probs), list(errs), [None] * len(t),
                      _slope(t ** 2 / (n + two_d), probs), int(samples), int(seed),
                      {"n": int(n), "degree": int(two_d), "norm": scale})


@dataclass
class FacetBound:
    estimate: float
    numerator: float
    denominator: float
    denominator_stderr: float
    t_squared: float
    infinite: bool
    caveat: str = ("denominator is a Monte Carlo maximum over vertices of rare-event "
                   "frequencies; it can be biased, so the estimate is indicative only")

    def __float__(self):
        return self.estimate

    def to_json(self):
        return asdict(self)


def facet_lower_bound_estimate(E, P, t_squared=None, samples=100_000, seed=0):
    """Implied lower bound on the number of vertices of a polytope approximating B.

    Counts P{||v||^2 >= t^2 N^{-1/(2d)}} / max_i P{|f_i(v)| >= t^{2d} N^{1/2}}
    for Gaussian v, where N = dim P_{n,2d} and f_i are the vertex polynomials.
    The default t^2 is n(n+2d)/(4ed).
    """
    n, d = E.n, E.d
    N = space_dimension(n, 2 * d)
    if E.m != N:
        raise InputError(f"vertices must live in the full space (dim {N}), subspace has dim {E.m}")
    if samples < 100_000:
        raise InputError(f"samples must be at least 10^5, got {samples}")
    V = np.atleast_2d(np.asarray(getattr(P, "vertices", P), dtype=float))
    if V.shape[1] != E.m - 1:
        raise InputError(f"vertices need {E.m - 1} coordinates, got {V.shape[1]}")
    t2 = n * (n + 2 * d) / (4 * math.e * d) if t_squared is None else float(t_squared)
    numerator = float(chi2.sf(t2 * N ** (-1.0 / (2 * d)), n))
    level = t2 ** d * math.sqrt(N)
    rng = np.random.default_rng(seed)
    hits = np.zeros(len(V))
    done = 0
    while done < samples:
        c = min(CHUNK, samples - done)
        # homogeneous basis values at non-unit points are fine: evaluation is polynomial
        U = E.basis_values(rng.standard_normal((c, n)))[:, 1:]
        hits += (np.abs(U @ V.T) >= level).sum(axis=0)
        done += c
    denom, err = _proportion(hits.max(), samples)
    if denom == 0:
        return FacetBound(math.inf, numerator, 0.0, 0.0, t2, True)
    return FacetBound(numerator / denom, numerator, denom, err, t2, False)
