"""Spectral sparsification of weighted vector systems by the BSS barrier method."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationWarning, InputError, InternalConsistencyError, RankError

RANK_TOL = 1e-10


class VectorSystem:
    """Vectors x_i with weights w_i >= 0, representing the form sum w_i x_i x_i^T."""

    def __init__(self, vectors, weights=None):
        X = np.atleast_2d(np.asarray(vectors, dtype=float))
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise InputError("a vector system needs a nonempty 2-d array of vectors")
        w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float).ravel()
        if w.shape != (len(X),):
            raise InputError(f"{len(X)} vectors but {w.size} weights")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(w))):
            raise InputError("vectors and weights must be finite")
        if np.any(w < 0):
            raise InputError("weights must be nonnegative")
        self.vectors = X
        self.weights = w
        self.dim = X.shape[1]
        ev = np.linalg.eigvalsh(self.quadratic_form())
        self.delta = float(max(abs(ev[0] - 1.0), abs(ev[-1] - 1.0)))

    def __len__(self):
        return len(self.vectors)

    def quadratic_form(self):
        return (self.vectors * self.weights[:, None]).T @ self.vectors

    def to_json(self):
        return {"dim": self.dim, "vectors": self.vectors.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj):
        try:
            sys_ = cls(obj["vectors"], obj.get("weights"))
        except KeyError as exc:
            raise InputError(f"vector system JSON is missing field {exc}") from None
        if "dim" in obj and int(obj["dim"]) != sys_.dim:
            raise InputError(f"field 'dim' = {obj['dim']} disagrees with vector length {sys_.dim}")
        return sys_


@dataclass
class WeightedDecomposition:
    indices: list
    weights: list
    epsilon: float
    achieved_bounds: tuple
    dim: int

    @property
    def support(self):
        return len(self.indices)

    def matrix(self, system):
        X = system.vectors[self.indices]
        return (X * np.asarray(self.weights)[:, None]).T @ X

    def to_json(self):
        return {
            "indices": [int(i) for i in self.indices],
            "weights": [float(s) for s in self.weights],
            "epsilon": float(self.epsilon),
            "achieved_bounds": [float(b) for b in self.achieved_bounds],
            "dim": int(self.dim),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(list(obj["indices"]), list(obj["weights"]), float(obj["epsilon"]),
                   tuple(obj["achieved_bounds"]), int(obj["dim"]))


def _inv_sqrt(S):
    w, V = np.linalg.eigh(S)
    if w[0] < RANK_TOL:
        raise RankError(f"quadratic form is singular: smallest eigenvalue {w[0]:.3g} < {RANK_TOL:g}")
    return (V / np.sqrt(w)) @ V.T


def whiten(system):
    """Return (T, whitened system) with T = S^{-1/2} and sum w (Tx)(Tx)^T = I."""
    T = _inv_sqrt(system.quadratic_form())
    return T, VectorSystem(system.vectors @ T.T, system.weights)


def relative_bounds(system, indices, weights):
    """Extreme eigenvalues of sum s_i x_i x_i^T relative to the system's own form."""
    T = _inv_sqrt(system.quadratic_form())
    Y = system.vectors[indices] @ T.T
    ev = np.linalg.eigvalsh((Y * np.asarray(weights)[:, None]).T @ Y)
    return float(ev[0]), float(ev[-1])


def bss_sparsify(system, epsilon):
    """Reweight at most ceil(dim/eps^2) vectors so the form stays within [(1-eps)^2, (1+eps)^2].

    The bounds are relative to the input: with S = sum w_i x_i x_i^T the result
    satisfies (1-eps)^2 S <= sum s_i x_i x_i^T <= (1+eps)^2 S.  The input
    is whitened first, so no closeness to the identity is required.
    """
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    n = system.dim
    if epsilon < 1.0 / math.sqrt(n):
        warnings.warn(
            f"epsilon = {epsilon:g} is below 1/sqrt(dim) = {1 / math.sqrt(n):.4g}; "
            "the support bound exceeds dim^2 and gives no saving",
            ConfigurationWarning,
            stacklevel=2,
        )
    T = _inv_sqrt(system.quadratic_form())
    live = np.flatnonzero(system.weights > 0)
    Y = (system.vectors[live] @ T.T) * np.sqrt(system.weights[live])[:, None]

    d = 1.0 / epsilon ** 2
    sd = math.sqrt(d)
    delta_l = 1.0
    delta_u = (sd + 1.0) / (sd - 1.0)
    eps_u = (sd - 1.0) / (d + sd)
    l, u = -n * sd, n / eps_u
    steps = math.ceil(n / epsilon ** 2)

    A = np.zeros((n, n))
    s = np.zeros(len(Y))
    for step in range(steps):
        lam, V = np.linalg.eigh(A)
        Z2 = (Y @ V) ** 2
        un, ln = u + delta_u, l + delta_l
        phi_u = np.sum(1.0 / (u - lam))
        phi_un = np.sum(1.0 / (un - lam))
        phi_l = np.sum(1.0 / (lam - l))
        phi_ln = np.sum(1.0 / (lam - ln))
        U = Z2 @ (1.0 / (un - lam) ** 2) / (phi_u - phi_un) + Z2 @ (1.0 / (un - lam))
        L = Z2 @ (1.0 / (lam - ln) ** 2) / (phi_ln - phi_l) - Z2 @ (1.0 / (lam - ln))
        gap = L - U
        j = int(np.argmax(gap))
        if not (gap[j] >= 0 and U[j] > 0):
            raise InternalConsistencyError(
                f"no admissible vector at step {step} of {steps}",
                diagnostics={
                    "step": step, "lower": l, "upper": u, "eigenvalues": lam.tolist(),
                    "best_gap": float(gap[j]), "U": float(U[j]), "L": float(L[j]),
                },
            )
        t = 2.0 / (U[j] + L[j])
        s[j] += t
        A += t * np.outer(Y[j], Y[j])
        l, u = ln, un

    lam = np.linalg.eigvalsh(A)
    c = (1.0 - epsilon ** 2) / math.sqrt(lam[0] * lam[-1])
    keep = np.flatnonzero(s > 0)
    weights = c * s[keep] * system.weights[live[keep]]
    indices = live[keep]
    lo, hi = relative_bounds(system, indices, weights)
    if len(indices) > steps:
        raise InternalConsistencyError("support exceeds ceil(dim/eps^2)", {"support": len(indices)})
    slack = 1e-9
    if lo < (1 - epsilon) ** 2 - slack or hi > (1 + epsilon) ** 2 + slack:
        raise InternalConsistencyError(
            "sandwich bounds violated after sparsification",
            diagnostics={"bounds": (lo, hi), "epsilon": epsilon},
        )
    return WeightedDecomposition(indices.tolist(), weights.tolist(), float(epsilon), (lo, hi), n)
