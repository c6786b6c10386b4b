"""Plant and augmented-system data model plus finite-difference utilities.

The plant is a discrete-time LTI system whose input acts after a fixed
delay of d samples:

    x(k+1) = A x(k) + B_u u(k-d) + B_w w(k)
    y(k)   = C x(k) + D_w w(k)

The augmented system stacks the plant state with the disturbance and its
forward differences up to order r, so an observer for the stack recovers
w(k), Delta w(k), ..., Delta^r w(k) alongside x(k).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "PlantModel",
    "AugmentedModel",
    "DisturbanceSignal",
    "build_augmented",
    "newton_binomial",
    "forward_difference",
    "newton_series_eval",
    "plant_from_dict",
    "load_plant",
]


def _as_matrix(name: str, value, rows=None, cols=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass
class PlantModel:
    """Delayed LTI plant (A, B_u, B_w, C, D_w) with input delay d >= 1 samples."""

    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    C: np.ndarray
    D_w: np.ndarray
    d: int

    def __post_init__(self):
        self.A = _as_matrix("A", self.A)
        n_p = self.A.shape[0]
        if self.A.shape[1] != n_p:
            raise DimensionError(f"A must be square, got {self.A.shape}")
        self.B_u = _as_matrix("B_u", self.B_u, rows=n_p)
        self.B_w = _as_matrix("B_w", self.B_w, rows=n_p)
        self.C = _as_matrix("C", self.C, cols=n_p)
        self.D_w = _as_matrix("D_w", self.D_w, rows=self.C.shape[0], cols=self.B_w.shape[1])
        self.d = int(self.d)
        if self.d < 1:
            raise ConfigError(f"delay d must be >= 1, got {self.d}")

    @property
    def n_p(self) -> int:
        return self.A.shape[0]

    @property
    def m_u(self) -> int:
        return self.B_u.shape[1]

    @property
    def q(self) -> int:
        return self.B_w.shape[1]

    @property
    def m_y(self) -> int:
        return self.C.shape[0]

    def state_measured(self) -> bool:
        """True when y(k) = x(k) exactly (C identity, D_w zero)."""
        return (
            self.C.shape == (self.n_p, self.n_p)
            and np.array_equal(self.C, np.eye(self.n_p))
            and not np.any(self.D_w)
        )


@dataclass
class AugmentedModel:
    """Plant state extended with the disturbance difference stack of order r."""

    Abar: np.ndarray
    Bbar_u: np.ndarray
    Bbar_w: np.ndarray
    Cbar: np.ndarray
    r: int
    n: int
    n_p: int
    q: int

    @property
    def m_y(self) -> int:
        return self.Cbar.shape[0]

    @property
    def m_u(self) -> int:
        return self.Bbar_u.shape[1]


def build_augmented(plant: PlantModel, r: int) -> AugmentedModel:
    """Assemble the extended system of order r from the plant matrices.

    The stack transition Pi is block upper-bidiagonal with identity blocks,
    so [w; Delta w; ...; Delta^r w](k) advances by adding each entry's next
    difference, with Delta^{r+1} w(k) entering through Bbar_w.
    """
    if r < 0:
        raise ConfigError(f"difference order r must be >= 0, got {r}")
    n_p, q, m_u, m_y = plant.n_p, plant.q, plant.m_u, plant.m_y
    nw = (r + 1) * q
    n = n_p + nw

    Abar = np.zeros((n, n))
    Abar[:n_p, :n_p] = plant.A
    Abar[:n_p, n_p:n_p + q] = plant.B_w
    for i in range(r + 1):
        Abar[n_p + i * q:n_p + (i + 1) * q, n_p + i * q:n_p + (i + 1) * q] = np.eye(q)
        if i < r:
            Abar[n_p + i * q:n_p + (i + 1) * q, n_p + (i + 1) * q:n_p + (i + 2) * q] = np.eye(q)

    Bbar_u = np.zeros((n, m_u))
    Bbar_u[:n_p] = plant.B_u
    Bbar_w = np.zeros((n, q))
    Bbar_w[n - q:] = np.eye(q)
    Cbar = np.zeros((m_y, n))
    Cbar[:, :n_p] = plant.C
    Cbar[:, n_p:n_p + q] = plant.D_w

    for arr in (Abar, Bbar_u, Bbar_w, Cbar):
        arr.setflags(write=False)
    return AugmentedModel(Abar=Abar, Bbar_u=Bbar_u, Bbar_w=Bbar_w, Cbar=Cbar,
                          r=r, n=n, n_p=n_p, q=q)


def newton_binomial(s: int, m: int) -> int:
    """Binomial coefficient C(s, m) for nonnegative integers, zero when m > s."""
    if s < 0 or m < 0:
        raise ValueError(f"newton_binomial requires s, m >= 0, got ({s}, {m})")
    return math.comb(s, m)


def forward_difference(samples, order: int, k: int):
    """Forward difference Delta^order f(k) of a sample sequence.

    `samples` holds f(0), f(1), ... along axis 0 (scalars or q-vectors).
    Needs samples at k .. k+order.
    """
    arr = np.asarray(samples, dtype=float)
    if order < 0:
        raise ValueError(f"difference order must be >= 0, got {order}")
    if k < 0 or k + order >= arr.shape[0]:
        raise IndexError(
            f"Delta^{order} f({k}) needs samples {k}..{k + order}, "
            f"only {arr.shape[0]} available"
        )
    window = arr[k:k + order + 1]
    out = np.diff(window, n=order, axis=0)[0] if order > 0 else window[0]
    return float(out) if np.ndim(out) == 0 else out


def newton_series_eval(diffs, s: int, r: int):
    """Forecast w(k+s) from the difference stack: sum_{m=0}^{r} C(s,m) Delta^m w(k)."""
    raw = np.asarray(diffs, dtype=float)
    stack = raw.reshape(-1, 1) if raw.ndim == 1 else raw
    if stack.shape[0] != r + 1:
        raise DimensionError(f"expected r+1={r + 1} difference vectors, got {stack.shape[0]}")
    if s < 0:
        raise ValueError(f"forecast offset s must be >= 0, got {s}")
    coeff = np.array([newton_binomial(s, m) for m in range(r + 1)], dtype=float)
    out = coeff @ stack
    return float(out[0]) if raw.ndim == 1 else out


def _finite_matrix(name: str, value) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"matrix {name} contains NaN or Inf entries")
    return arr


def plant_from_dict(doc: dict) -> PlantModel:
    """Build a PlantModel from a JSON-style document with keys A, B_u, B_w, C, D_w, d.

    Matrices are row-major nested arrays; non-finite entries are rejected.
    """
    missing = [key for key in ("A", "B_u", "B_w", "C", "D_w", "d") if key not in doc]
    if missing:
        raise ConfigError(f"plant document missing keys: {', '.join(missing)}")
    mats = {name: _finite_matrix(name, doc[name]) for name in ("A", "B_u", "B_w", "C", "D_w")}
    try:
        return PlantModel(d=int(doc["d"]), **mats)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (DimensionError, ConfigError)):
            raise
        raise ConfigError(f"invalid plant document: {exc}") from exc


def load_plant(path) -> PlantModel:
    """Load a plant description from a JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return plant_from_dict(doc)


@dataclass
class DisturbanceSignal:
    """Disturbance evaluator w(k) for integer k >= 0.

    kind is one of constant, polynomial, sinusoid, custom. Polynomial signals
    of order n_r satisfy Delta^{n_r+1} w = 0 identically.
    """

    kind: str
    q: int
    _fn: Callable[[int], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, k: int) -> np.ndarray:
        if k < 0:
            raise IndexError(f"disturbance defined for k >= 0, got {k}")
        return self._fn(k)

    def samples(self, count: int) -> np.ndarray:
        """First `count` samples as a (count, q) array."""
        out = np.empty((count, self.q))
        for k in range(count):
            out[k] = self._fn(k)
        return out
