"""Prediction laws for the delayed plant.

All predictors estimate x(k+d) from information available at k. The exact
oracle needs the current and future disturbance window and exists for
testing and benchmarking only; every other law is causal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import PlantModel, newton_binomial

__all__ = [
    "InputHistory",
    "PredictorGains",
    "PredictionRecord",
    "METHODS",
    "compute_gains",
    "predict_exact_oracle",
    "predict_classical",
    "predict_proposed",
    "predict_wu1",
    "predict_wu2",
    "records_to_csv",
]

METHODS = ("exact", "classical", "proposed", "modified", "wu1", "wu2")


class InputHistory:
    """Ring buffer holding the last d control inputs u(k-1) .. u(k-d).

    Initial content represents the pre-horizon inputs u(k) = theta(k) for
    k in [-d, -1]; theta defaults to zero.
    """

    def __init__(self, d: int, m_u: int):
        if d < 1:
            raise ValueError(f"history length d must be >= 1, got {d}")
        self._buf = np.zeros((d, m_u))
        self._head = d - 1

    @classmethod
    def from_initial(cls, theta) -> "InputHistory":
        """Build from theta given chronologically: theta[i] = u(-d+i)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        hist = cls(theta.shape[0], theta.shape[1])
        for row in theta:
            hist.push(row)
        return hist

    def __len__(self) -> int:
        return self._buf.shape[0]

    @property
    def m_u(self) -> int:
        return self._buf.shape[1]

    def push(self, u) -> None:
        """Record u(k) and advance to time k+1."""
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != self.m_u:
            raise DimensionError(f"input has dimension {u.shape[0]}, history expects {self.m_u}")
        self._head = (self._head + 1) % len(self)
        self._buf[self._head] = u

    def lagged(self, j: int) -> np.ndarray:
        """u(k-j) for 1 <= j <= d."""
        if not 1 <= j <= len(self):
            raise IndexError(f"lag {j} outside 1..{len(self)}")
        return self._buf[(self._head - j + 1) % len(self)].copy()

    def as_matrix(self) -> np.ndarray:
        """Rows ordered u(k-1), u(k-2), ..., u(k-d)."""
        return np.stack([self.lagged(j) for j in range(1, len(self) + 1)])


@dataclass
class PredictorGains:
    """Prediction gains plus the cached powers of A they are built from.

    T maps the difference stack to the disturbance contribution of the
    d-step solution; Gamma is [A^d  T] in standard form and [0  T] in the
    modified (measured-state) form.
    """

    Gamma: np.ndarray
    T: np.ndarray
    form: str
    Ad: np.ndarray
    ApowBu: np.ndarray
    ApowBw: np.ndarray
    d: int

    @property
    def n(self) -> int:
        return self.Gamma.shape[1]


def _input_convolution(ApowBu: np.ndarray, history: InputHistory) -> np.ndarray:
    # sum_{j=1}^{d} A^{j-1} B_u u(k-j)
    out = np.zeros(ApowBu.shape[1])
    for j in range(1, ApowBu.shape[0] + 1):
        out += ApowBu[j - 1] @ history.lagged(j)
    return out


def compute_gains(plant: PlantModel, r: int, form: str = "standard") -> PredictorGains:
    """Build the prediction gains for difference order r.

    T(d) = sum_{j=1}^{d} A^{j-1} B_w [C(d-j,0) I_q ... C(d-j,r) I_q].
    """
    if form not in ("standard", "modified"):
        raise ValueError(f"form must be 'standard' or 'modified', got {form!r}")
    if r < 0:
        raise ValueError(f"difference order r must be >= 0, got {r}")
    n_p, q, d = plant.n_p, plant.q, plant.d
    eye_q = np.eye(q)

    ApowBu = np.empty((d, n_p, plant.m_u))
    ApowBw = np.empty((d, n_p, q))
    T = np.zeros((n_p, (r + 1) * q))
    Apow = np.eye(n_p)
    for j in range(1, d + 1):
        ApowBu[j - 1] = Apow @ plant.B_u
        ApowBw[j - 1] = Apow @ plant.B_w
        row = np.hstack([newton_binomial(d - j, m) * eye_q for m in range(r + 1)])
        T += ApowBw[j - 1] @ row
        Apow = plant.A @ Apow
    Ad = Apow  # A^d after the loop
    lead = Ad if form == "standard" else np.zeros_like(Ad)
    Gamma = np.hstack([lead, T])
    return PredictorGains(Gamma=Gamma, T=T, form=form, Ad=Ad,
                          ApowBu=np.ascontiguousarray(ApowBu),
                          ApowBw=np.ascontiguousarray(ApowBw), d=d)


def predict_exact_oracle(plant: PlantModel, x_k, history: InputHistory, future_w) -> np.ndarray:
    """d-step solution using the true disturbance window w(k) .. w(k+d-1).

    Not computable online; used as the reference the causal laws approximate.
    """
    future_w = np.asarray(future_w, dtype=float)
    future_w = future_w.reshape(-1, 1) if future_w.ndim == 1 else future_w
    if future_w.shape[0] < plant.d:
        raise ValueError(
            f"exact prediction needs {plant.d} disturbance samples, got {future_w.shape[0]}"
        )
    gains = compute_gains(plant, 0)
    out = gains.Ad @ np.asarray(x_k, dtype=float) + _input_convolution(gains.ApowBu, history)
    for j in range(1, plant.d + 1):
        out += gains.ApowBw[j - 1] @ future_w[plant.d - j]
    return out


def predict_classical(plant: PlantModel, x_k, history: InputHistory) -> np.ndarray:
    """Disturbance-ignoring prediction x_p(k) = A^d x(k) + sum A^{j-1} B_u u(k-j)."""
    gains = compute_gains(plant, 0)
    return gains.Ad @ np.asarray(x_k, dtype=float) + _input_convolution(gains.ApowBu, history)


def predict_proposed(gains: PredictorGains, etahat, history: InputHistory, y_k=None) -> np.ndarray:
    """Observer-based prediction from the extended state estimate.

    Standard form: Gamma(d) etahat + input terms. Modified form additionally
    feeds the measured state through A^d and requires y_k.
    """
    etahat = np.asarray(etahat, dtype=float)
    if etahat.shape[0] != gains.n:
        raise DimensionError(f"etahat has dimension {etahat.shape[0]}, gains expect {gains.n}")
    if gains.form == "modified":
        if y_k is None:
            raise ValueError("modified-form prediction requires the measurement y_k")
        base = gains.Ad @ np.asarray(y_k, dtype=float)
    else:
        if y_k is not None:
            raise ValueError("standard-form prediction takes no measurement argument")
        base = np.zeros(gains.Ad.shape[0])
    return base + gains.Gamma @ etahat + _input_convolution(gains.ApowBu, history)


def predict_wu1(plant: PlantModel, x_k, history: InputHistory, past_xp) -> np.ndarray:
    """First retention baseline: x_p(k) + x(k) - x_p(k-d).

    past_xp is the classical prediction from d steps ago, zero before k=0.
    """
    x_k = np.asarray(x_k, dtype=float)
    return predict_classical(plant, x_k, history) + x_k - np.asarray(past_xp, dtype=float)


def predict_wu2(plant: PlantModel, x_k, history: InputHistory, past_xp1, past_xp) -> np.ndarray:
    """Second retention baseline: x_p1(k) + x(k) - x_p1(k-d).

    past_xp1 and past_xp are the first baseline's and the classical
    prediction's values from d steps ago, zero before k=0 (the classical
    retention is needed to form the current first-baseline value).
    """
    x_k = np.asarray(x_k, dtype=float)
    xp1_now = predict_wu1(plant, x_k, history, past_xp)
    return xp1_now + x_k - np.asarray(past_xp1, dtype=float)


@dataclass
class PredictionRecord:
    """One prediction sample for CSV streaming."""

    k: int
    method: str
    xhat_future: np.ndarray


def records_to_csv(records, path) -> None:
    """Write prediction records as rows of k, method, xhat components."""
    records = list(records)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_p = len(np.atleast_1d(records[0].xhat_future)) if records else 0
        writer.writerow(["k", "method"] + [f"xhat_future_{i}" for i in range(n_p)])
        for rec in records:
            row = [rec.k, rec.method] + [f"{v:.17g}" for v in np.atleast_1d(rec.xhat_future)]
            writer.writerow(row)
