"""Extended Luenberger observer for the augmented plant-and-disturbance state.

The observer copies the augmented dynamics and corrects with the output
innovation:

    etahat(k+1) = Abar etahat(k) + Bbar_u u(k-d) + L (y(k) - Cbar etahat(k))

The observation error e = eta - etahat then evolves autonomously, driven
only by the residual difference Delta^{r+1} w(k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import AugmentedModel
from .predictors import PredictorGains

__all__ = [
    "ObserverState",
    "check_observer_gain",
    "observer_step",
    "error_dynamics_step",
    "observation_error_output",
]


@dataclass
class ObserverState:
    """Estimate of [x(k); w(k); Delta w(k); ...; Delta^r w(k)] at time k."""

    etahat: np.ndarray
    k: int = 0


def check_observer_gain(aug: AugmentedModel, L) -> np.ndarray:
    """Validate an observer gain against the augmented dimensions."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (aug.n, aug.m_y):
        raise DimensionError(f"observer gain has shape {L.shape}, expected ({aug.n}, {aug.m_y})")
    return L


def observer_step(aug: AugmentedModel, L, state: ObserverState, u_delayed, y_k) -> ObserverState:
    """Advance the observer one sample using u(k-d) and y(k)."""
    L = check_observer_gain(aug, L)
    etahat = np.asarray(state.etahat, dtype=float)
    if etahat.shape[0] != aug.n:
        raise DimensionError(f"etahat has dimension {etahat.shape[0]}, expected {aug.n}")
    u_delayed = np.asarray(u_delayed, dtype=float).reshape(-1)
    y_k = np.asarray(y_k, dtype=float).reshape(-1)
    if u_delayed.shape[0] != aug.m_u:
        raise DimensionError(f"u(k-d) has dimension {u_delayed.shape[0]}, expected {aug.m_u}")
    if y_k.shape[0] != aug.m_y:
        raise DimensionError(f"y(k) has dimension {y_k.shape[0]}, expected {aug.m_y}")
    innovation = y_k - aug.Cbar @ etahat
    nxt = aug.Abar @ etahat + aug.Bbar_u @ u_delayed + L @ innovation
    return ObserverState(etahat=nxt, k=state.k + 1)


def error_dynamics_step(aug: AugmentedModel, L, e_eta, residual) -> np.ndarray:
    """One step of the observation-error recursion.

    e(k+1) = (Abar - L Cbar) e(k) + Bbar_w Delta^{r+1} w(k)
    """
    L = check_observer_gain(aug, L)
    e_eta = np.asarray(e_eta, dtype=float)
    residual = np.asarray(residual, dtype=float).reshape(-1)
    return (aug.Abar - L @ aug.Cbar) @ e_eta + aug.Bbar_w @ residual


def observation_error_output(gains: PredictorGains, e_eta) -> np.ndarray:
    """Prediction-error contribution of imperfect observation: Gamma(d) e_eta."""
    e_eta = np.asarray(e_eta, dtype=float)
    if e_eta.shape[0] != gains.n:
        raise DimensionError(f"e_eta has dimension {e_eta.shape[0]}, gains expect {gains.n}")
    return gains.Gamma @ e_eta
