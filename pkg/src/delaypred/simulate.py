"""Closed-loop simulation of plant, observer, predictor, and feedback law.

Each run couples the delayed plant with a configured prediction method and
the state-feedback law u(k) = K xhat(k+d). Traces record states, observer
states, predictions, inputs, and the prediction error once its target
sample is realized (a lag of d steps).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionError
from .model import AugmentedModel, DisturbanceSignal, PlantModel, build_augmented
from .predictors import METHODS, PredictorGains, compute_gains

__all__ = [
    "SimConfig",
    "SimTrace",
    "make_disturbance",
    "bounded_residual_samples",
    "augmented_initial_state",
    "default_etahat0",
    "run_closed_loop",
    "run_comparison",
]

TRACE_COLUMNS = ("k", "x", "u", "w", "xhat_future", "etahat", "ey", "pred_err",
                 "norm_x", "norm_pred_err")


def make_disturbance(kind: str, **params) -> DisturbanceSignal:
    """Disturbance factory for the supported kinds.

    constant:   value (scalar or q-vector)
    polynomial: coeffs, a list of q-vectors [w_0, w_1, ...] for sum w_i k^i
    sinusoid:   amplitude, rate (radians per sample), optional phase
    custom:     samples, a (N, q) array; out-of-range lookups raise
    """
    if kind == "constant":
        value = np.atleast_1d(np.asarray(params["value"], dtype=float))
        return DisturbanceSignal(kind, value.shape[0], lambda k: value.copy(),
                                 params={"value": value.tolist()})
    if kind == "polynomial":
        coeffs = np.atleast_2d(np.asarray(params["coeffs"], dtype=float))
        if np.asarray(params["coeffs"]).ndim == 1:
            coeffs = coeffs.T
        q = coeffs.shape[1]

        def poly(k, coeffs=coeffs):
            out = np.zeros(coeffs.shape[1])
            for c in coeffs[::-1]:
                out = out * k + c
            return out

        return DisturbanceSignal(kind, q, poly, params={"coeffs": coeffs.tolist()})
    if kind == "sinusoid":
        amp = np.atleast_1d(np.asarray(params["amplitude"], dtype=float))
        rate = float(params["rate"])
        phase = float(params.get("phase", 0.0))
        return DisturbanceSignal(kind, amp.shape[0],
                                 lambda k: amp * np.sin(rate * k + phase),
                                 params={"amplitude": amp.tolist(), "rate": rate,
                                         "phase": phase})
    if kind == "custom":
        samples = np.atleast_2d(np.asarray(params["samples"], dtype=float))
        if np.asarray(params["samples"]).ndim == 1:
            samples = samples.T

        def lookup(k, samples=samples):
            if k >= samples.shape[0]:
                raise IndexError(f"custom disturbance has {samples.shape[0]} samples, asked for k={k}")
            return samples[k].copy()

        return DisturbanceSignal(kind, samples.shape[1], lookup,
                                 params={"length": samples.shape[0]})
    raise ConfigError(f"unknown disturbance kind {kind!r}")


def bounded_residual_samples(rng, delta: float, order: int, length: int, q: int = 1) -> np.ndarray:
    """Sample a disturbance whose (order+1)-th difference stays within delta.

    Draws the residual uniformly with norm <= delta and integrates it
    (order+1)-fold by advancing the difference stack from zero, so the
    construction satisfies the residual bound by design.
    """
    # componentwise |res| <= delta/sqrt(q) keeps the norm within delta
    res = rng.uniform(-1.0, 1.0, size=(length, q)) * (delta / np.sqrt(q))
    stack = np.zeros((order + 1, q))
    out = np.empty((length, q))
    for k in range(length):
        out[k] = stack[0]
        nxt = stack.copy()
        nxt[:-1] += stack[1:]
        nxt[-1] += res[k]
        stack = nxt
    return out


def augmented_initial_state(x0, w_samples, r: int) -> np.ndarray:
    """True augmented initial state [x(0); w(0); Delta w(0); ...; Delta^r w(0)]."""
    w = np.atleast_2d(np.asarray(w_samples, dtype=float))
    if np.asarray(w_samples).ndim == 1:
        w = w.T
    if w.shape[0] < r + 1:
        raise ValueError(f"need at least r+1={r + 1} disturbance samples, got {w.shape[0]}")
    stack = [np.diff(w, n=m, axis=0)[0] if m else w[0] for m in range(r + 1)]
    return np.concatenate([np.asarray(x0, dtype=float).reshape(-1)] + stack)


def default_etahat0(plant: PlantModel, r: int, x0) -> np.ndarray:
    """Observer start: [x(0); 0] when the state is measured directly, else 0."""
    n = plant.n_p + (r + 1) * plant.q
    eta = np.zeros(n)
    if plant.state_measured():
        eta[:plant.n_p] = np.asarray(x0, dtype=float).reshape(-1)
    return eta


@dataclass
class SimConfig:
    """Everything one closed-loop run needs."""

    plant: PlantModel
    r: int
    K: np.ndarray
    disturbance: DisturbanceSignal
    method: str = "proposed"
    L: np.ndarray | None = None
    horizon: int = 200
    x0: np.ndarray | None = None
    theta: np.ndarray | None = None
    etahat0: np.ndarray | None = None

    def validate(self) -> None:
        plant = self.plant
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.horizon < plant.d:
            raise ConfigError(f"horizon {self.horizon} shorter than delay d={plant.d}")
        if self.r < 0:
            raise ConfigError(f"difference order r must be >= 0, got {self.r}")
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if K.shape != (plant.m_u, plant.n_p):
            raise DimensionError(f"K has shape {K.shape}, expected ({plant.m_u}, {plant.n_p})")
        if self.disturbance.q != plant.q:
            raise DimensionError(
                f"disturbance dimension {self.disturbance.q} does not match plant q={plant.q}")
        if self.method in ("proposed", "modified") and self.L is None:
            raise ConfigError(f"method {self.method!r} needs an observer gain L")
        if self.method == "modified" and not plant.state_measured():
            raise ConfigError("modified prediction requires y(k) = x(k) (C identity, D_w zero)")


@dataclass
class SimTrace:
    """Time-indexed record of one closed-loop run.

    pred_err[k] = x(k+d) - xhat(k+d|k) and is NaN until its target sample
    exists (the last d rows of a completed run).
    """

    k: np.ndarray
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    xhat_future: np.ndarray
    etahat: np.ndarray
    ey: np.ndarray
    pred_err: np.ndarray
    method: str
    d: int
    diverged: bool = False
    divergence_step: int = -1
    meta: dict = field(default_factory=dict)

    @property
    def state_norms(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)

    @property
    def pred_err_norms(self) -> np.ndarray:
        return np.linalg.norm(self.pred_err, axis=1)

    @property
    def realized(self) -> np.ndarray:
        """Mask of rows whose prediction error is available."""
        return ~np.isnan(self.pred_err[:, 0])

    def metrics(self, steady_fraction: float = 0.2) -> dict:
        """Peak and steady-state summary numbers.

        Steady-state RMS values use the trailing `steady_fraction` of the
        samples (of the realized samples, for the prediction error).
        """
        norms_x = self.state_norms
        if norms_x.size == 0:
            return {"method": self.method, "peak_state_norm": float("nan"),
                    "steady_rms_state_norm": float("nan"), "diverged": self.diverged,
                    "peak_pred_err_norm": float("nan"),
                    "steady_rms_pred_err_norm": float("nan")}
        tail = max(1, int(np.ceil(steady_fraction * norms_x.shape[0])))
        out = {
            "method": self.method,
            "peak_state_norm": float(norms_x.max()),
            "steady_rms_state_norm": float(np.sqrt(np.mean(norms_x[-tail:] ** 2))),
            "diverged": self.diverged,
        }
        realized = self.realized
        if np.any(realized):
            err = self.pred_err_norms[realized]
            tail_e = max(1, int(np.ceil(steady_fraction * err.shape[0])))
            out["peak_pred_err_norm"] = float(err.max())
            out["steady_rms_pred_err_norm"] = float(np.sqrt(np.mean(err[-tail_e:] ** 2)))
        else:
            out["peak_pred_err_norm"] = float("nan")
            out["steady_rms_pred_err_norm"] = float("nan")
        return out

    def to_csv(self, path) -> None:
        """One row per step; column order follows TRACE_COLUMNS with vector
        components expanded; unrealized prediction errors are left empty."""
        header = ["k"]
        header += [f"x_{i}" for i in range(self.x.shape[1])]
        header += [f"u_{i}" for i in range(self.u.shape[1])]
        header += [f"w_{i}" for i in range(self.w.shape[1])]
        header += [f"xhat_future_{i}" for i in range(self.xhat_future.shape[1])]
        header += [f"etahat_{i}" for i in range(self.etahat.shape[1])]
        header += [f"ey_{i}" for i in range(self.ey.shape[1])]
        header += [f"pred_err_{i}" for i in range(self.pred_err.shape[1])]
        header += ["norm_x", "norm_pred_err"]
        norms_x = self.state_norms
        norms_e = self.pred_err_norms
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, kk in enumerate(self.k):
                row = [int(kk)]
                for block in (self.x, self.u, self.w, self.xhat_future, self.etahat, self.ey):
                    row += [f"{v:.17g}" for v in block[i]]
                if np.isnan(self.pred_err[i, 0]):
                    row += [""] * self.pred_err.shape[1]
                    row += [f"{norms_x[i]:.17g}", ""]
                else:
                    row += [f"{v:.17g}" for v in self.pred_err[i]]
                    row += [f"{norms_x[i]:.17g}", f"{norms_e[i]:.17g}"]
                writer.writerow(row)


def _resolve_arrays(config: SimConfig):
    plant = config.plant
    aug = build_augmented(plant, config.r)
    form = "modified" if config.method == "modified" else "standard"
    gains = compute_gains(plant, config.r, form)
    x0 = (np.zeros(plant.n_p) if config.x0 is None
          else np.asarray(config.x0, dtype=float).reshape(-1))
    if x0.shape[0] != plant.n_p:
        raise DimensionError(f"x0 has dimension {x0.shape[0]}, expected {plant.n_p}")
    theta = (np.zeros((plant.d, plant.m_u)) if config.theta is None
             else np.atleast_2d(np.asarray(config.theta, dtype=float)))
    if theta.shape != (plant.d, plant.m_u):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({plant.d}, {plant.m_u})")
    if config.etahat0 is not None:
        eta0 = np.asarray(config.etahat0, dtype=float).reshape(-1)
        if eta0.shape[0] != aug.n:
            raise DimensionError(f"etahat0 has dimension {eta0.shape[0]}, expected {aug.n}")
    else:
        eta0 = default_etahat0(plant, config.r, x0)
    if config.L is not None:
        L = np.atleast_2d(np.asarray(config.L, dtype=float))
        if L.shape != (aug.n, aug.m_y):
            raise DimensionError(f"L has shape {L.shape}, expected ({aug.n}, {aug.m_y})")
        has_obs = True
    else:
        L = np.zeros((aug.n, aug.m_y))
        has_obs = False
    return aug, gains, x0, theta, eta0, L, has_obs


def run_closed_loop(config: SimConfig, w_arr: np.ndarray | None = None) -> SimTrace:
    """Simulate steps k = 0..horizon under the configured prediction method.

    w_arr may pass a pre-sampled disturbance of length horizon + d (used by
    run_comparison to share one realization across methods).
    """
    config.validate()
    plant = config.plant
    N = int(config.horizon)
    aug, gains, x0, theta, eta0, L, has_obs = _resolve_arrays(config)
    if w_arr is None:
        w_arr = config.disturbance.samples(N + plant.d)
    w_arr = np.ascontiguousarray(np.atleast_2d(np.asarray(w_arr, dtype=float)))
    if w_arr.shape != (N + plant.d, plant.q):
        raise DimensionError(
            f"disturbance array has shape {w_arr.shape}, expected ({N + plant.d}, {plant.q})")

    K = np.ascontiguousarray(np.atleast_2d(np.asarray(config.K, dtype=float)))
    out = _kernels.closed_loop(
        plant.A, plant.B_u, plant.B_w, plant.C, plant.D_w,
        np.ascontiguousarray(aug.Abar), np.ascontiguousarray(aug.Bbar_u),
        np.ascontiguousarray(aug.Cbar), np.ascontiguousarray(L), has_obs,
        np.ascontiguousarray(gains.Ad), gains.ApowBu, gains.ApowBw,
        np.ascontiguousarray(gains.Gamma), K,
        w_arr, np.ascontiguousarray(theta), x0, eta0,
        _kernels.METHOD_CODES[config.method], N,
    )
    X, ETA, XHAT, U, EY, div_step = out
    end = N + 1 if div_step < 0 else div_step
    pred_err = np.full((end, plant.n_p), np.nan)
    realized_until = min(end, end + 1 - plant.d if div_step >= 0 else N + 1 - plant.d)
    if realized_until > 0:
        pred_err[:realized_until] = X[plant.d:plant.d + realized_until] - XHAT[:realized_until]
    return SimTrace(
        k=np.arange(end), x=X[:end], u=U[:end], w=w_arr[:end],
        xhat_future=XHAT[:end], etahat=ETA[:end], ey=EY[:end], pred_err=pred_err,
        method=config.method, d=plant.d,
        diverged=div_step >= 0, divergence_step=div_step,
        meta={"r": config.r, "horizon": N, "kernel": "numba" if _kernels.USING_NUMBA else "numpy"},
    )


def run_comparison(config: SimConfig, methods) -> tuple[dict, dict]:
    """Run several methods against one shared disturbance realization.

    Returns (traces, metrics), both keyed by method name. The observer gain
    is reused by observer-based methods and ignored by the others.
    """
    methods = list(methods)
    if not methods:
        raise ConfigError("method list must not be empty")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}, expected one of {METHODS}")
    w_arr = config.disturbance.samples(int(config.horizon) + config.plant.d)
    traces, metrics = {}, {}
    for m in methods:
        cfg = SimConfig(plant=config.plant, r=config.r, K=config.K,
                        disturbance=config.disturbance, method=m, L=config.L,
                        horizon=config.horizon, x0=config.x0, theta=config.theta,
                        etahat0=config.etahat0)
        traces[m] = run_closed_loop(cfg, w_arr=w_arr)
        metrics[m] = traces[m].metrics()
    return traces, metrics
