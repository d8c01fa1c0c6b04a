"""Acceptance criteria, each at its stated tolerance.  Every test prints one PASS/FAIL line."""
import json
import math
import time
import warnings

import numpy as np
import pytest

from polycone.errors import ConfigurationWarning
from polycone.gaussbench import facet_lower_bound_estimate, lemma1_experiment, lemma2_experiment
from polycone.kernel import even_symmetric_sextics, full_space, isotropy_check, reproducing_kernel
from polycone.polyspace import (
    HomogeneousPolynomial,
    enumerate_exponents,
    evaluate,
    norm1,
    norm2,
    space_dimension,
)
from polycone.polytope import build_deterministic, build_random, build_tensorized, sample_sphere, tensor_ratio_bound
from polycone.sparsifier import VectorSystem, bss_sparsify, whiten
from polycone.verifier import SupportOracle, certify_containment, ngon_check


def test_criterion_1_kernel_identity(record):
    start = time.perf_counter()
    worst_diag = worst_sym = 0.0
    for n in (2, 3, 4):
        for d in (1, 2):
            E = full_space(n, d)
            N = len(enumerate_exponents(n, 2 * d))
            assert E.m == N
            V = sample_sphere(n, 100, 1000 * n + d)
            kernels = [reproducing_kernel(E, v) for v in V]
            for i, (v, p) in enumerate(zip(V, kernels)):
                worst_diag = max(worst_diag, abs(evaluate(p, v) - N))
                w = V[(i + 1) % len(V)]
                worst_sym = max(worst_sym, abs(evaluate(p, w) - evaluate(kernels[(i + 1) % len(V)], v)))
    elapsed = time.perf_counter() - start
    assert space_dimension(3, 4) == 15
    ok = worst_diag < 1e-9 and worst_sym < 1e-9 and elapsed < 10
    record(1, "kernel identity p_v(v) = dim and symmetry", ok,
           f"max |p_v(v)-N| {worst_diag:.2e}, max asymmetry {worst_sym:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_isotropy(record):
    start = time.perf_counter()
    rows, ok = [], True
    for name, E in (("P_3,2", full_space(3, 1)), ("sextics n=6", even_symmetric_sextics(6))):
        cov_dev, mean_dev, sq = isotropy_check(E, samples=100_000, seed=0)
        # cov_dev is normalized by sqrt(m-1); the raw Frobenius norm is the stricter reading
        raw = cov_dev * math.sqrt(E.m - 1)
        rel_sq = abs(sq / (E.m - 1) - 1)
        ok &= raw < 0.05 and mean_dev < 0.05 and rel_sq < 0.05
        rows.append(f"{name}: frob {raw:.3f} (normalized {cov_dev:.3f}), centroid {mean_dev:.3f}, "
                    f"sq-norm rel err {rel_sq:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record(2, "isotropy of the pushforward measure", ok, "; ".join(rows) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_3_bss(record):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    ok, worst = True, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigurationWarning)
        for trial in range(20):
            dim = int(rng.integers(6, 13))
            count = int(rng.integers(300, 1001))
            raw = VectorSystem(rng.standard_normal((count, dim)) * rng.uniform(0.2, 2.0, dim))
            _, system = whiten(raw)
            for eps in (0.4, 0.6):
                dec = bss_sparsify(system, eps)
                again = bss_sparsify(system, eps)
                ev = np.linalg.eigvalsh(dec.matrix(system))
                ok &= dec.support <= math.ceil(dim / eps ** 2)
                ok &= ev[0] >= (1 - eps) ** 2 - 1e-12 and ev[-1] <= (1 + eps) ** 2 + 1e-12
                ok &= json.dumps(dec.to_json()) == json.dumps(again.to_json())
                worst = max(worst, (1 - eps) ** 2 - ev[0], ev[-1] - (1 + eps) ** 2)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    record(3, "BSS support and spectral sandwich", ok,
           f"40 runs, worst bound slack {worst:.2e} (negative is inside), {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def P22():
    return full_space(2, 1)


def test_criterion_4_deterministic(record, P22):
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigurationWarning)
        P, Q, bound = build_deterministic(P22, 0.6, seed=0, certify=False)
    rep = certify_containment(P22, Q, directions=1000, oracle=SupportOracle("eigen"), seed=4)
    elapsed = time.perf_counter() - start
    formula = (1 + 2 * 0.6) * 3 ** 1.5
    ok = (rep.inner_inclusion_ok and rep.certified_ratio <= formula and bound == pytest.approx(formula)
          and elapsed < 60)
    record(4, "deterministic polytope ratio", ok,
           f"certified {rep.certified_ratio:.3f} <= {formula:.2f}, inner inclusion "
           f"{rep.inner_inclusion_ok}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_tensorized(record, P22):
    start = time.perf_counter()
    ratios, bounds = {}, {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigurationWarning)
        for k in (1, 2, 3):
            Q, bound = build_tensorized(P22, k, seed=k, certify=False)
            rep = certify_containment(P22, Q, directions=1000, oracle=SupportOracle("eigen"), seed=5)
            assert rep.inner_inclusion_ok
            ratios[k], bounds[k] = rep.certified_ratio, bound
            assert bound == pytest.approx(tensor_ratio_bound(3, k))
    elapsed = time.perf_counter() - start
    ok = ratios[3] <= ratios[1] and all(ratios[k] <= bounds[k] + 0.1 for k in ratios) and elapsed < 300
    record(5, "tensorized ratios", ok,
           ", ".join(f"k={k}: {ratios[k]:.3f} <= {bounds[k]:.3f}" for k in ratios) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_6_random(record, P22):
    start = time.perf_counter()
    alphas, inclusion = [], []
    for seed in range(40):
        K, t = build_random(P22, 0.5, t_override=500, seed=seed)
        assert t == 500
        rep = certify_containment(P22, K, directions=1000, oracle=SupportOracle("eigen"), seed=1000 + seed)
        alphas.append(rep.alpha_achieved)
        inclusion.append(rep.inner_inclusion_ok)
    elapsed = time.perf_counter() - start
    frac = float(np.mean(np.array(alphas) >= 0.5))
    ok = frac >= 0.95 and all(inclusion) and elapsed < 300
    record(6, "random polytope alpha at overridden t=500", ok,
           f"alpha >= 0.5 in {frac:.0%} of 40 seeds (min {min(alphas):.3f}), inclusion "
           f"{sum(inclusion)}/40; the closed-form t is out of desk reach, property check only, {elapsed:.1f}s")
    assert ok


def test_criterion_7_ngon(record):
    start = time.perf_counter()
    reports = {n: ngon_check(n, tol=1e-5) for n in (5, 6, 8, 12)}
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in reports.values()) and elapsed < 30
    record(7, "n-gon cross-sections regular", ok,
           ", ".join(f"n={n}: {r.count} points, residual {r.regularity_residual:.3g}"
                     for n, r in reports.items()) + f", {elapsed:.1f}s")
    assert ok


def random_form(rng, n, d):
    exps = enumerate_exponents(n, 2 * d)
    return HomogeneousPolynomial.from_arrays(n, 2 * d, np.array(exps), rng.standard_normal(len(exps)))


def test_criterion_8_m_bound(record):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    ok, worst, trials = True, -math.inf, 0
    for n in (2, 3, 4):
        for d in (1, 2):
            for i in range(1000):
                f = random_form(rng, n, d)
                l2 = norm2(f)
                l1, s1 = norm1(f, samples=2000, seed=int(rng.integers(2 ** 32)))
                ratio = l2 ** 2 / l1 ** 2
                # delta method: d(ratio)/d(l1) = -2 ratio / l1
                se = 2 * ratio * s1 / l1
                ok &= ratio <= 2 ** (2 * d) + 3 * se
                worst = max(worst, ratio / 2 ** (2 * d))
                trials += 1
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record(8, "2-norm over 1-norm ratio below 2^{2d}", ok,
           f"{trials} trials, largest ratio/2^(2d) = {worst:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_9_tails(record):
    start = time.perf_counter()
    ok = True
    details = []
    for n in (50, 100):
        rep = lemma2_experiment(n, [0.1, 0.2, 0.3, 0.4, 0.5], samples=100_000, seed=n)
        ok &= all(rep.within_bounds(3.0))
        details.append(f"lemma2 n={n} ok={all(rep.within_bounds(3.0))}")
    rng = np.random.default_rng(9)
    slopes = []
    for n, d in ((2, 1), (3, 1), (4, 1), (2, 2), (3, 2)):
        E = full_space(n, d)
        f = E.polynomial(rng.standard_normal(E.m - 1), mean_zero=True)
        t = math.sqrt(n + 2 * d) * np.array([1.0, 1.1, 1.2, 1.3])
        rep = lemma1_experiment(f, t, samples=100_000, seed=n * 10 + d)
        slopes.append(rep.fit_slope)
        ok &= rep.fit_slope < 0
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    details.append("lemma1 slopes " + ", ".join(f"{s:.2f}" for s in slopes))
    record(9, "Gaussian tail bounds", ok, "; ".join(details) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_10_facet_bound_sanity(record):
    E = full_space(3, 1)
    V = E.phi_many(np.eye(3))
    V = np.vstack([V, -V])
    t2 = 0.3
    big = facet_lower_bound_estimate(E, V, t_squared=t2, samples=100_000, seed=0)
    small = facet_lower_bound_estimate(E, 0.6 * V, t_squared=t2, samples=100_000, seed=0)
    default = facet_lower_bound_estimate(E, V, samples=100_000, seed=0)
    ok = big.estimate >= 0 and small.estimate >= big.estimate and default.estimate >= 1
    record(10, "vertex-count estimator sanity (quantitative lower bound not reproducible)", ok,
           f"estimate {big.estimate:.3g}, shrunk {small.estimate:.3g}, cross-polytope default "
           f"{default.estimate:.3g}")
    assert ok
