import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polycone.errors import ConfigurationWarning, InputError, RankError
from polycone.sparsifier import (
    VectorSystem,
    WeightedDecomposition,
    bss_sparsify,
    relative_bounds,
    whiten,
)


def whitened_system(rng, N, dim):
    return whiten(VectorSystem(rng.standard_normal((N, dim))))[1]


def eigen_bounds(system, dec):
    # independent oracle: eigenvalues of the reweighted form in whitened coordinates
    S = system.quadratic_form()
    w, V = np.linalg.eigh(S)
    T = (V / np.sqrt(w)) @ V.T
    X = system.vectors[dec.indices] @ T
    ev = np.linalg.eigvalsh((X * np.asarray(dec.weights)[:, None]).T @ X)
    return ev[0], ev[-1]


def test_orthonormal_basis_input():
    for eps in (0.3, 0.5, 0.9):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConfigurationWarning)
            dec = bss_sparsify(VectorSystem(np.eye(5)), eps)
        assert dec.support <= 5
        lo, hi = eigen_bounds(VectorSystem(np.eye(5)), dec)
        assert (1 - eps) ** 2 - 1e-12 <= lo <= hi <= (1 + eps) ** 2 + 1e-12


def test_random_whitened_system_r8():
    rng = np.random.default_rng(0)
    system = whitened_system(rng, 500, 8)
    dec = bss_sparsify(system, 0.5)
    assert dec.support <= 32
    lo, hi = eigen_bounds(system, dec)
    assert 0.25 - 1e-12 <= lo <= hi <= 2.25 + 1e-12
    assert dec.achieved_bounds == pytest.approx((lo, hi), abs=1e-10)


def test_duplicated_basis_half_weights():
    system = VectorSystem(np.vstack([np.eye(4), np.eye(4)]), [0.5] * 8)
    dec = bss_sparsify(system, 0.5)
    assert len(set(i % 4 for i in dec.indices)) <= 4
    lo, hi = eigen_bounds(system, dec)
    assert 0.25 - 1e-12 <= lo <= hi <= 2.25 + 1e-12


def test_bounds_relative_to_input_form():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((300, 6)) * np.array([10.0, 3.0, 1.0, 1.0, 0.1, 0.01])
    system = VectorSystem(X)
    dec = bss_sparsify(system, 0.6)
    lo, hi = relative_bounds(system, dec.indices, dec.weights)
    assert 0.16 - 1e-12 <= lo <= hi <= 2.56 + 1e-12
    S = system.quadratic_form()
    A = dec.matrix(system)
    # (1-eps)^2 S <= A <= (1+eps)^2 S as quadratic forms
    assert np.linalg.eigvalsh(A - 0.16 * S)[0] >= -1e-9 * np.abs(S).max()
    assert np.linalg.eigvalsh(2.56 * S - A)[0] >= -1e-9 * np.abs(S).max()


def test_deterministic_and_json_round_trip():
    rng = np.random.default_rng(2)
    system = whitened_system(rng, 400, 7)
    a = bss_sparsify(system, 0.4)
    b = bss_sparsify(VectorSystem.from_json(json.loads(json.dumps(system.to_json()))), 0.4)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    assert WeightedDecomposition.from_json(a.to_json()).to_json() == a.to_json()


def test_small_epsilon_warns():
    rng = np.random.default_rng(3)
    system = whitened_system(rng, 200, 9)
    with pytest.warns(ConfigurationWarning):
        bss_sparsify(system, 0.3)


def test_invalid_inputs():
    with pytest.raises(InputError):
        VectorSystem(np.ones((3, 2)), [1.0, -1.0, 1.0])
    with pytest.raises(InputError):
        VectorSystem(np.ones((3, 2)), [1.0, 1.0])
    with pytest.raises(InputError):
        bss_sparsify(VectorSystem(np.eye(3)), 1.0)
    with pytest.raises(InputError):
        VectorSystem.from_json({"dim": 3, "vectors": [[1.0, 0.0]], "weights": [1.0]})


def test_whiten_examples():
    T, W = whiten(VectorSystem(np.eye(3)))
    assert np.allclose(T, np.eye(3))
    T, W = whiten(VectorSystem(np.diag([2.0, 1.0])))
    assert np.allclose(T, np.diag([0.5, 1.0]))
    rng = np.random.default_rng(4)
    A = rng.standard_normal((50, 5))
    T, W = whiten(VectorSystem(A, rng.random(50) + 0.1))
    assert np.allclose(np.linalg.eigvalsh(W.quadratic_form()), 1.0, atol=1e-10)
    assert W.delta < 1e-10
    with pytest.raises(RankError):
        whiten(VectorSystem(np.array([[1.0, 0.0], [2.0, 0.0]])))


def test_monotone_in_epsilon():
    rng = np.random.default_rng(5)
    system = whitened_system(rng, 600, 8)
    grid = [0.36, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95]
    devs = []
    for eps in grid:
        lo, hi = bss_sparsify(system, eps).achieved_bounds
        devs.append(max(1 - lo, hi - 1))
    assert all(a <= b + 1e-12 for a, b in zip(devs, devs[1:]))


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10 ** 6), st.sampled_from([0.4, 0.6, 0.8]))
def test_sandwich_and_support_property(dim, seed, eps):
    rng = np.random.default_rng(seed)
    system = VectorSystem(rng.standard_normal((dim * 20, dim)), rng.random(dim * 20))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigurationWarning)
        dec = bss_sparsify(system, eps)
    assert dec.support <= math.ceil(dim / eps ** 2)
    lo, hi = eigen_bounds(system, dec)
    assert (1 - eps) ** 2 - 1e-9 <= lo <= hi <= (1 + eps) ** 2 + 1e-9
