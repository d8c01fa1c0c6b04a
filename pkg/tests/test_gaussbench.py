import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import k0
from scipy.stats import chi2

from polycone.errors import InputError
from polycone.gaussbench import (
    TailReport,
    facet_lower_bound_estimate,
    lemma1_experiment,
    lemma2_experiment,
)
from polycone.kernel import even_symmetric_sextics, full_space
from polycone.polyspace import HomogeneousPolynomial, norm2, sphere_power

M = HomogeneousPolynomial.monomial


def product_normal_tail(s):
    """P(|Z1 Z2| >= s) for independent standard normals; the density of Z1 Z2 is K0(|u|)/pi."""
    return 2.0 / math.pi * quad(k0, s, np.inf)[0]


def test_lemma2_chi_square_oracle():
    rep = lemma2_experiment(100, [0.0, 0.1, 0.3], samples=100_000, seed=0)
    exact = chi2.cdf(70.0, 100)
    assert rep.theoretical_bounds[2] == pytest.approx(math.exp(-2.25))
    assert abs(rep.empirical_probs[2] - exact) < 4 * rep.stderr[2]
    assert rep.theoretical_bounds[0] == 1.0
    assert all(rep.within_bounds())
    assert rep.fit_slope < 0


def test_lemma2_bound_monotone():
    rep = lemma2_experiment(50, np.linspace(0, 1, 11), samples=10_000, seed=1)
    b = np.array(rep.theoretical_bounds)
    assert np.all(np.diff(b) < 0)
    assert np.all(np.diff(rep.empirical_probs) <= 0)


def test_lemma2_reproducible_and_validated():
    a = lemma2_experiment(20, [0.2], samples=10_000, seed=5)
    b = lemma2_experiment(20, [0.2], samples=10_000, seed=5)
    assert a.to_json() == b.to_json()
    with pytest.raises(InputError):
        lemma2_experiment(20, [0.2], samples=100)
    with pytest.raises(InputError):
        lemma2_experiment(20, [1.5], samples=10_000)


def test_lemma1_product_normal_oracle():
    # x1^2 - x2^2 = 2 z1 z2 with z = (x1 -+ x2)/sqrt 2 independent standard normals
    f = M((2, 0)) - M((0, 2))
    n, two_d = 2, 2
    t = np.sqrt([n + two_d, 4 * (n + two_d)])
    rep = lemma1_experiment(f, t, samples=200_000, seed=0)
    exact = [product_normal_tail(tt ** two_d * norm2(f) / 2.0) for tt in t]
    assert abs(rep.empirical_probs[0] - exact[0]) < 4 * rep.stderr[0] + 1e-12
    assert rep.empirical_probs[1] < 0.05
    assert exact[1] < 0.05


def test_lemma1_slope_and_decay():
    f = M((2, 0, 0)) - M((0, 2, 0))
    floor = math.sqrt(5)
    rep = lemma1_experiment(f, floor * np.array([1.0, 1.05, 1.1, 1.15]), samples=100_000, seed=2)
    assert rep.fit_slope < 0
    assert np.all(np.diff(rep.empirical_probs) <= 0)
    assert rep.theoretical_bounds == [None] * 4


def test_lemma1_stderr_halving():
    # stderr scales as 1/sqrt(samples): doubling samples divides it by sqrt 2
    f = M((2, 0)) - M((0, 2))
    t = [2.0]
    a = lemma1_experiment(f, t, samples=50_000, seed=3).stderr[0]
    b = lemma1_experiment(f, t, samples=100_000, seed=4).stderr[0]
    assert a / b == pytest.approx(math.sqrt(2), rel=0.3)


def test_lemma1_rejects_bad_input():
    with pytest.raises(InputError, match="zero mean"):
        lemma1_experiment(sphere_power(3, 1), [3.0], samples=10_000)
    with pytest.raises(InputError, match="sqrt"):
        lemma1_experiment(M((2, 0)) - M((0, 2)), [1.0], samples=10_000)


def test_tail_report_csv_json():
    rep = lemma2_experiment(10, [0.1, 0.2], samples=10_000, seed=0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "threshold,empirical,stderr,bound"
    assert len(lines) == 3
    obj = rep.to_json()
    assert obj["kind"] == "lemma2" and obj["samples"] == 10_000
    with pytest.raises(ValueError):
        TailReport("x", [1], [2.0], [0.0], [None], 0.0, 1, 0)


def cross_polytope(E):
    return E.phi_many(np.eye(E.n)), -E.phi_many(np.eye(E.n))


@pytest.fixture(scope="module")
def P31():
    return full_space(3, 1)


def test_facet_bound_cross_polytope(P31):
    a, b = cross_polytope(P31)
    V = np.vstack([a, b])
    fb = facet_lower_bound_estimate(P31, V, samples=100_000, seed=0)
    assert fb.estimate >= 1.0
    assert fb.numerator == pytest.approx(chi2.sf(fb.t_squared / math.sqrt(6), 3))
    assert fb.t_squared == pytest.approx(3 * 5 / (4 * math.e))
    assert "bias" in fb.caveat


def test_facet_bound_monotone_under_shrinking(P31):
    V = np.vstack(cross_polytope(P31))
    t2 = 0.3
    big = facet_lower_bound_estimate(P31, V, t_squared=t2, samples=100_000, seed=0)
    small = facet_lower_bound_estimate(P31, 0.6 * V, t_squared=t2, samples=100_000, seed=0)
    assert small.denominator <= big.denominator
    assert small.estimate >= big.estimate


def test_facet_bound_numerator_threshold():
    # at threshold n/2 the chi-square tail dominates 1 - e^{-n/16}
    for n in (4, 10, 30, 100):
        assert chi2.sf(n / 2, n) >= 1 - math.exp(-n / 16)
    E = full_space(4, 1)
    N = 10
    fb = facet_lower_bound_estimate(E, np.vstack(cross_polytope(E)),
                                    t_squared=2.0 * N ** 0.5, samples=100_000, seed=1)
    assert fb.numerator >= 1 - math.exp(-4 / 16)


def test_facet_bound_infinite_flag(P31):
    V = 1e-6 * np.vstack(cross_polytope(P31))
    fb = facet_lower_bound_estimate(P31, V, samples=100_000, seed=0)
    assert fb.infinite and math.isinf(fb.estimate) and fb.numerator > 0


def test_facet_bound_validation(P31):
    V = np.vstack(cross_polytope(P31))
    with pytest.raises(InputError):
        facet_lower_bound_estimate(P31, V, samples=1000)
    with pytest.raises(InputError):
        facet_lower_bound_estimate(even_symmetric_sextics(4), np.zeros((2, 2)))
    with pytest.raises(InputError):
        facet_lower_bound_estimate(P31, np.zeros((2, 3)))
