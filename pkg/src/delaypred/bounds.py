"""Analytical bounds on the irreducible prediction error and norm trackers.

Truncating the disturbance forecast at difference order r leaves the error
term E_r(k); with the residual differences bounded by delta, its norm obeys
|E_r(k)| <= delta * d * mu pointwise, where mu collects the worst-case
amplification over the d propagation steps. Combined with the observer's
l2 gain gamma this yields the running-l2 bound

    (gamma + d*mu) * delta * sqrt(k+1) + sqrt(epsilon).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .model import PlantModel, newton_binomial

__all__ = [
    "compute_Yj",
    "compute_phi_j",
    "compute_mu",
    "composite_bound",
    "RunningL2",
    "running_l2",
    "truncation_errors",
    "residual_sup",
    "BoundReport",
]


def compute_Yj(plant: PlantModel, j: int) -> np.ndarray:
    """Gram matrix of A^{j-1} B_w for 1 <= j <= d."""
    if not 1 <= j <= plant.d:
        raise ValueError(f"j={j} outside 1..{plant.d}")
    M = np.linalg.matrix_power(plant.A, j - 1) @ plant.B_w
    return M.T @ M


def compute_phi_j(d: int, j: int, r: int) -> float:
    """phi_j = sum_{l=0}^{d-j-r-1} C(d-j, l+r+1) 2^l, zero for an empty range."""
    if not 1 <= j <= d:
        raise ValueError(f"j={j} outside 1..{d}")
    if r < 0:
        raise ValueError(f"difference order r must be >= 0, got {r}")
    top = d - j - r - 1
    return float(sum(newton_binomial(d - j, l + r + 1) * 2 ** l for l in range(top + 1)))


def compute_mu(plant: PlantModel, d: int, r: int) -> float:
    """mu = max_j sigma_max(Y_j^{1/2}) * phi_j over j = 1..d.

    The square-root singular value is sqrt(lambda_max(Y_j)) since Y_j is PSD.
    """
    best = 0.0
    Apow = np.eye(plant.n_p)
    for j in range(1, d + 1):
        M = Apow @ plant.B_w
        Yj = M.T @ M
        sigma = float(np.sqrt(max(np.linalg.eigvalsh(Yj)[-1], 0.0)))
        best = max(best, sigma * compute_phi_j(d, j, r))
        Apow = plant.A @ Apow
    return best


def composite_bound(gamma: float, delta: float, d: int, mu: float, epsilon: float, k):
    """Running-l2 prediction-error bound (gamma + d*mu) delta sqrt(k+1) + sqrt(epsilon).

    Accepts a scalar k or an array of sample indices.
    """
    if min(gamma, delta, mu, epsilon) < 0 or d < 0:
        raise ValueError("composite_bound requires nonnegative inputs")
    k = np.asarray(k, dtype=float)
    out = (gamma + d * mu) * delta * np.sqrt(k + 1.0) + np.sqrt(epsilon)
    return float(out) if out.ndim == 0 else out


class RunningL2:
    """Incremental running l2 norm sqrt(sum_{tau<=k} |f(tau)|^2)."""

    def __init__(self):
        self._sumsq = 0.0

    def update(self, vec) -> float:
        v = np.asarray(vec, dtype=float).reshape(-1)
        self._sumsq += float(v @ v)
        return self.value

    @property
    def value(self) -> float:
        return float(np.sqrt(self._sumsq))


def running_l2(seq) -> np.ndarray:
    """Running l2 norm of a sequence of vectors, one value per sample index."""
    arr = np.atleast_2d(np.asarray(seq, dtype=float))
    if arr.shape[0] == 1 and np.asarray(seq).ndim == 1:
        arr = arr.T
    return np.sqrt(np.cumsum(np.sum(arr * arr, axis=1)))


def truncation_errors(plant: PlantModel, r: int, w_samples) -> np.ndarray:
    """Forecast-truncation error E_r(k) for k = 0 .. len(w)-d-1 (inclusive).

    E_r(k) = sum_{m=r+1}^{d-1} [sum_{j=1}^{d-m} C(d-j, m) A^{j-1} B_w] Delta^m w(k);
    the inner binomials vanish for m > d-j, which makes the series finite.
    """
    w = np.atleast_2d(np.asarray(w_samples, dtype=float))
    if np.asarray(w_samples).ndim == 1:
        w = w.T
    d, n_p = plant.d, plant.n_p
    count = w.shape[0] - d + 1
    if count < 1:
        raise ValueError(f"need at least d={d} disturbance samples, got {w.shape[0]}")
    out = np.zeros((count, n_p))
    for m in range(r + 1, d):
        Mm = np.zeros((n_p, plant.q))
        Apow = np.eye(n_p)
        for j in range(1, d - m + 1):
            Mm += newton_binomial(d - j, m) * (Apow @ plant.B_w)
            Apow = plant.A @ Apow
        dm = np.diff(w, n=m, axis=0)
        out += dm[:count] @ Mm.T
    return out


def residual_sup(w_samples, r: int) -> float:
    """Largest residual-difference norm sup_k |Delta^{r+1} w(k)| over the samples."""
    w = np.atleast_2d(np.asarray(w_samples, dtype=float))
    if np.asarray(w_samples).ndim == 1:
        w = w.T
    if w.shape[0] < r + 2:
        raise ValueError(f"need at least r+2={r + 2} samples to difference, got {w.shape[0]}")
    res = np.diff(w, n=r + 1, axis=0)
    return float(np.max(np.linalg.norm(res, axis=1)))


@dataclass
class BoundReport:
    """Ingredients and evaluator of the composite prediction-error bound."""

    mu: float
    per_j: list = field(default_factory=list)  # (j, sigma_max_sqrtYj, phi_j)
    delta: float = 0.0
    gamma: float = 0.0
    epsilon: float = 0.0
    d: int = 1

    @classmethod
    def from_design(cls, plant: PlantModel, r: int, delta: float, gamma: float,
                    epsilon: float) -> "BoundReport":
        per_j = []
        Apow = np.eye(plant.n_p)
        for j in range(1, plant.d + 1):
            M = Apow @ plant.B_w
            sigma = float(np.sqrt(max(np.linalg.eigvalsh(M.T @ M)[-1], 0.0)))
            per_j.append((j, sigma, compute_phi_j(plant.d, j, r)))
            Apow = plant.A @ Apow
        return cls(mu=compute_mu(plant, plant.d, r), per_j=per_j, delta=delta,
                   gamma=gamma, epsilon=epsilon, d=plant.d)

    def bound(self, k):
        return composite_bound(self.gamma, self.delta, self.d, self.mu, self.epsilon, k)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "per_j": [{"j": j, "sigma_max_sqrtYj": s, "phi_j": p} for j, s, p in self.per_j],
            "delta": self.delta,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "d": self.d,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def curve_csv(self, path, measured_running_l2) -> None:
        """Write (k, bound, measured running l2) rows for plotting."""
        measured = np.asarray(measured_running_l2, dtype=float)
        ks = np.arange(measured.shape[0])
        bounds = self.bound(ks)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "bound", "measured_running_l2"])
            for k, b, m in zip(ks, np.atleast_1d(bounds), measured):
                writer.writerow([k, f"{b:.17g}", f"{m:.17g}"])
