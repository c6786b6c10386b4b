"""LMI assembly, semidefinite solving, and certificate verification.

The observer gain is synthesized from the block inequality

    [ P - Gamma^T Gamma    0           Abar^T P - Cbar^T W^T ]
    [ *                    gbar I      Bbar_w^T P            ]  >  0
    [ *                    *           P                     ]

in the variables P (symmetric), W, and the scalar gbar; the gain is
recovered as L = P^{-1} W and gamma = sqrt(gbar) bounds the l2 gain from
the residual difference to the observation part of the prediction error.
A pole-region pair can be appended to confine Re(lambda) of Abar - L Cbar
to a vertical band (zeta_b, zeta_a).

Problems are stored in a solver-agnostic affine form: one constant block
plus one symmetric coefficient block per scalar decision variable, with
strictness realized as a margin multiple of the identity. Any conic
backend supporting the PSD cone can consume the exported form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasibleError
from .model import AugmentedModel
from .predictors import PredictorGains

__all__ = [
    "LmiConstraint",
    "LmiProblem",
    "DesignCertificate",
    "VerificationReport",
    "assemble_synthesis",
    "assemble_dstability",
    "assemble_design_problem",
    "solve_design",
    "verify_certificate",
    "eigenvalue_report",
    "condensed_form",
    "design_block",
]

_SYMMETRY_TOL = 1e-12


def _check_symmetric(name: str, M: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > _SYMMETRY_TOL * scale:
        raise ValueError(f"constraint block {name} is not symmetric")
    return 0.5 * (M + M.T)


@dataclass
class LmiConstraint:
    """Affine PSD constraint: constant + sum_i x_i coeff_i >= margin * I."""

    name: str
    size: int
    constant: np.ndarray
    coeffs: dict  # scalar-variable index -> symmetric (size, size) block
    margin: float

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.constant.copy()
        for i, F in self.coeffs.items():
            out += x[i] * F
        return out


class LmiProblem:
    """Affine semidefinite problem over the variables (P, W, gbar).

    Scalar layout: upper-triangle entries of P row by row, then W row-major,
    then the scalar gbar. Constraints are collected via `append`.
    """

    def __init__(self, n: int, m_y: int):
        self.n = n
        self.m_y = m_y
        self.pairs = [(i, j) for i in range(n) for j in range(i, n)]
        self.num_p = len(self.pairs)
        self.num_w = n * m_y
        self.num_vars = self.num_p + self.num_w + 1
        self.gamma_index = self.num_vars - 1
        self.constraints: list[LmiConstraint] = []
        self.region = None  # (zeta_a, zeta_b) once pole-band constraints are appended

    # ---- variable packing -------------------------------------------------
    def pack(self, P: np.ndarray, W: np.ndarray, gbar: float) -> np.ndarray:
        x = np.empty(self.num_vars)
        for t, (i, j) in enumerate(self.pairs):
            x[t] = P[i, j]
        x[self.num_p:self.num_p + self.num_w] = np.asarray(W, dtype=float).reshape(-1)
        x[self.gamma_index] = gbar
        return x

    def unpack(self, x: np.ndarray):
        P = np.zeros((self.n, self.n))
        for t, (i, j) in enumerate(self.pairs):
            P[i, j] = P[j, i] = x[t]
        W = np.asarray(x[self.num_p:self.num_p + self.num_w]).reshape(self.n, self.m_y)
        return P, W, float(x[self.gamma_index])

    # ---- assembly ---------------------------------------------------------
    def append(self, name: str, matrix_fn) -> LmiConstraint:
        """Add a constraint from an affine map (P, W, gbar) -> symmetric matrix.

        Coefficient blocks are recovered by probing the map with unit basis
        variables; the strictness margin follows the constant block's size.
        """
        zero_p = np.zeros((self.n, self.n))
        zero_w = np.zeros((self.n, self.m_y))
        constant = _check_symmetric(name, np.asarray(matrix_fn(zero_p, zero_w, 0.0), dtype=float))
        size = constant.shape[0]
        coeffs = {}
        for t, (i, j) in enumerate(self.pairs):
            basis = np.zeros((self.n, self.n))
            basis[i, j] = basis[j, i] = 1.0
            F = np.asarray(matrix_fn(basis, zero_w, 0.0), dtype=float) - constant
            if np.any(F):
                coeffs[t] = _check_symmetric(name, F)
        for u in range(self.num_w):
            basis = np.zeros((self.n, self.m_y))
            basis[u // self.m_y, u % self.m_y] = 1.0
            F = np.asarray(matrix_fn(zero_p, basis, 0.0), dtype=float) - constant
            if np.any(F):
                coeffs[self.num_p + u] = _check_symmetric(name, F)
        F = np.asarray(matrix_fn(zero_p, zero_w, 1.0), dtype=float) - constant
        if np.any(F):
            coeffs[self.gamma_index] = _check_symmetric(name, F)
        margin = 1e-7 * (1.0 + float(np.linalg.norm(constant, 2)))
        con = LmiConstraint(name=name, size=size, constant=constant, coeffs=coeffs, margin=margin)
        self.constraints.append(con)
        return con

    def extend(self, constraints) -> "LmiProblem":
        self.constraints.extend(constraints)
        return self

    def evaluate(self, P: np.ndarray, W: np.ndarray, gbar: float):
        """Constraint matrices at a candidate point, margin not subtracted."""
        x = self.pack(P, W, gbar)
        return {c.name: c.evaluate(x) for c in self.constraints}

    # ---- interchange format -----------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m_y": self.m_y,
            "objective": "minimize_gamma_bar",
            "scalar_layout": "P upper triangle row-major, W row-major, gamma_bar",
            "region": list(self.region) if self.region else None,
            "constraints": [
                {
                    "name": c.name,
                    "size": c.size,
                    "margin": c.margin,
                    "constant": c.constant.tolist(),
                    "coeffs": {str(i): F.tolist() for i, F in c.coeffs.items()},
                }
                for c in self.constraints
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc: dict) -> "LmiProblem":
        prob = cls(int(doc["n"]), int(doc["m_y"]))
        if doc.get("region"):
            prob.region = tuple(doc["region"])
        for c in doc["constraints"]:
            prob.constraints.append(LmiConstraint(
                name=c["name"],
                size=int(c["size"]),
                constant=np.asarray(c["constant"], dtype=float),
                coeffs={int(i): np.asarray(F, dtype=float) for i, F in c["coeffs"].items()},
                margin=float(c["margin"]),
            ))
        return prob

    @classmethod
    def from_json(cls, path) -> "LmiProblem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def design_block(aug: AugmentedModel, Gamma: np.ndarray, P, W, gbar):
    """The 3x3 synthesis block evaluated at (P, W, gbar); affine in all three."""
    n, q = aug.n, aug.q
    cross = aug.Abar.T @ P - aug.Cbar.T @ np.asarray(W).T
    top = np.hstack([P - Gamma.T @ Gamma, np.zeros((n, q)), cross])
    mid = np.hstack([np.zeros((q, n)), gbar * np.eye(q), aug.Bbar_w.T @ P])
    bot = np.hstack([cross.T, P @ aug.Bbar_w, P])
    return np.vstack([top, mid, bot])


def assemble_synthesis(aug: AugmentedModel, gains: PredictorGains) -> LmiProblem:
    """Build the synthesis problem for the given prediction gains."""
    if gains.Gamma.shape[1] != aug.n:
        raise DimensionError(
            f"gains map a state of dimension {gains.Gamma.shape[1]}, augmented model has {aug.n}"
        )
    prob = LmiProblem(aug.n, aug.m_y)
    Gamma = gains.Gamma
    prob.append("design_block", lambda P, W, g: design_block(aug, Gamma, P, W, g))
    return prob


def assemble_dstability(aug: AugmentedModel, zeta_a: float, zeta_b: float) -> list:
    """Pole-band pair for zeta_b < Re(lambda_i) < zeta_a, as appendable constraints.

    Both are Lyapunov-type inequalities in the same (P, W):
        Abar^T P - Cbar^T W^T + P Abar - W Cbar - 2 zeta P,
    required negative definite for zeta_a and positive definite for zeta_b.
    """
    if not (-1.0 <= zeta_b < zeta_a <= 1.0):
        raise ValueError(f"need -1 <= zeta_b < zeta_a <= 1, got zeta_b={zeta_b}, zeta_a={zeta_a}")
    scratch = LmiProblem(aug.n, aug.m_y)

    def band(P, W, _g, zeta, sign):
        M = aug.Abar.T @ P - aug.Cbar.T @ np.asarray(W).T + P @ aug.Abar - W @ aug.Cbar
        return sign * (M - 2.0 * zeta * P)

    upper = scratch.append("pole_band_upper", lambda P, W, g: band(P, W, g, zeta_a, -1.0))
    lower = scratch.append("pole_band_lower", lambda P, W, g: band(P, W, g, zeta_b, +1.0))
    return [upper, lower]


def assemble_design_problem(aug: AugmentedModel, gains: PredictorGains,
                            zeta_a: float | None = None,
                            zeta_b: float | None = None) -> LmiProblem:
    """Synthesis block plus, when a band is given, the pole-region pair."""
    prob = assemble_synthesis(aug, gains)
    if zeta_a is not None or zeta_b is not None:
        if zeta_a is None or zeta_b is None:
            raise ValueError("pole band needs both zeta_a and zeta_b")
        prob.extend(assemble_dstability(aug, zeta_a, zeta_b))
        prob.region = (float(zeta_a), float(zeta_b))
    return prob


@dataclass
class DesignCertificate:
    """Solution of the synthesis problem with the recovered observer gain."""

    P: np.ndarray
    W: np.ndarray
    gamma_bar: float
    L: np.ndarray
    region: tuple | None = None
    solver_status: str = ""

    @property
    def gamma(self) -> float:
        return float(np.sqrt(max(self.gamma_bar, 0.0)))

    def to_dict(self) -> dict:
        return {
            "n": self.P.shape[0],
            "m_y": self.W.shape[1],
            "P": self.P.tolist(),
            "W": self.W.tolist(),
            "gamma_bar": self.gamma_bar,
            "gamma": self.gamma,
            "L": self.L.tolist(),
            "region": list(self.region) if self.region else None,
            "solver_status": self.solver_status,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignCertificate":
        P = np.asarray(doc["P"], dtype=float)
        W = np.asarray(doc["W"], dtype=float)
        L = np.asarray(doc["L"], dtype=float)
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(W)) and np.all(np.isfinite(L))):
            raise ValueError("certificate contains non-finite entries")
        return cls(P=P, W=W, gamma_bar=float(doc["gamma_bar"]), L=L,
                   region=tuple(doc["region"]) if doc.get("region") else None,
                   solver_status=doc.get("solver_status", "imported"))

    @classmethod
    def from_json(cls, path) -> "DesignCertificate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_OK_STATUSES = ("optimal", "optimal_inaccurate")
_INFEASIBLE_STATUSES = ("infeasible", "infeasible_inaccurate")


def solve_design(problem: LmiProblem, minimize_gamma: bool = True,
                 solver: str | None = None) -> DesignCertificate:
    """Solve the assembled problem through a conic backend.

    Tries CLARABEL then SCS unless a solver name is forced. Raises
    InfeasibleError with the backend status when no certificate exists.
    """
    import cvxpy as cp

    x = cp.Variable(problem.num_vars)
    cons = []
    for c in problem.constraints:
        expr = cp.Constant(c.constant)
        for i, F in sorted(c.coeffs.items()):
            expr = expr + x[i] * F
        cons.append(expr >> c.margin * np.eye(c.size))
    objective = cp.Minimize(x[problem.gamma_index] if minimize_gamma else 0)
    prob = cp.Problem(objective, cons)

    solvers = [solver] if solver else ["CLARABEL", "SCS"]
    status = None
    for name in solvers:
        try:
            prob.solve(solver=name)
        except cp.error.SolverError:
            continue
        status = prob.status
        if status in _OK_STATUSES + _INFEASIBLE_STATUSES:
            break
    if status in _INFEASIBLE_STATUSES:
        raise InfeasibleError(f"design problem infeasible (backend status: {status})",
                              status=status)
    if status not in _OK_STATUSES:
        raise RuntimeError(f"semidefinite backend failed (status: {status})")

    P, W, gbar = problem.unpack(np.asarray(x.value))
    L = np.linalg.solve(P, W)
    return DesignCertificate(P=P, W=W, gamma_bar=gbar, L=L,
                             region=problem.region, solver_status=status)


def condensed_form(aug: AugmentedModel, gains: PredictorGains,
                   cert: DesignCertificate) -> np.ndarray:
    """Schur-complement form of the synthesis block, required negative definite.

    [ Ao^T P Ao + Gamma^T Gamma - P    Ao^T P Bbar_w            ]
    [ *                                Bbar_w^T P Bbar_w - gbar ]
    """
    Ao = aug.Abar - cert.L @ aug.Cbar
    P = cert.P
    blk11 = Ao.T @ P @ Ao + gains.Gamma.T @ gains.Gamma - P
    blk12 = Ao.T @ P @ aug.Bbar_w
    blk22 = aug.Bbar_w.T @ P @ aug.Bbar_w - cert.gamma_bar * np.eye(aug.q)
    top = np.hstack([blk11, blk12])
    bot = np.hstack([blk12.T, blk22])
    M = np.vstack([top, bot])
    return 0.5 * (M + M.T)


def eigenvalue_report(aug: AugmentedModel, L, region=None) -> dict:
    """Spectrum of Abar - L Cbar with band membership and spectral radius."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (aug.n, aug.m_y):
        raise DimensionError(f"observer gain has shape {L.shape}, expected ({aug.n}, {aug.m_y})")
    eig = np.linalg.eigvals(aug.Abar - L @ aug.Cbar)
    order = np.argsort(eig.real)
    eig = eig[order]
    out = {
        "eigenvalues": [[float(v.real), float(v.imag)] for v in eig],
        "spectral_radius": float(np.max(np.abs(eig))),
        "schur_stable": bool(np.max(np.abs(eig)) < 1.0),
    }
    if region is not None:
        zeta_a, zeta_b = region
        out["region"] = [float(zeta_a), float(zeta_b)]
        out["in_band"] = bool(np.all((eig.real > zeta_b) & (eig.real < zeta_a)))
    return out


@dataclass
class VerificationReport:
    """Independent numerical check of a certificate, pass/fail per item."""

    min_eig_P: float
    min_eig_block: float
    min_eig_condensed_neg: float
    gain_residual: float
    eigen: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "min_eig_P": self.min_eig_P,
            "min_eig_block": self.min_eig_block,
            "min_eig_condensed_neg": self.min_eig_condensed_neg,
            "gain_residual": self.gain_residual,
            **self.eigen,
            "passed": self.passed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def verify_certificate(aug: AugmentedModel, gains: PredictorGains,
                       cert: DesignCertificate, tol: float = 1e-8) -> VerificationReport:
    """Re-check a certificate without the solver.

    Evaluates the original block inequality and its Schur-complement form,
    the gain reconstruction P L = W, and the spectrum of Abar - L Cbar
    (with band membership when the certificate carries a region). Margin
    tolerances are relative to each matrix's norm, since backend feasibility
    error scales with the size of P.
    """
    if cert.P.shape != (aug.n, aug.n):
        raise DimensionError(f"P has shape {cert.P.shape}, expected ({aug.n}, {aug.n})")
    min_eig_P = float(np.linalg.eigvalsh(cert.P)[0])
    block = design_block(aug, gains.Gamma, cert.P, cert.W, cert.gamma_bar)
    block = 0.5 * (block + block.T)
    min_eig_block = float(np.linalg.eigvalsh(block)[0])
    condensed = condensed_form(aug, gains, cert)
    min_eig_condensed_neg = float(np.linalg.eigvalsh(-condensed)[0])
    gain_residual = float(np.linalg.norm(cert.P @ cert.L - cert.W)
                          / max(1.0, np.linalg.norm(cert.W)))
    eigen = eigenvalue_report(aug, cert.L, region=cert.region)
    passed = (
        min_eig_P > tol * max(1.0, float(np.linalg.norm(cert.P, 2)))
        and min_eig_block > -tol * max(1.0, float(np.linalg.norm(block, 2)))
        and min_eig_condensed_neg > -tol * max(1.0, float(np.linalg.norm(condensed, 2)))
        and gain_residual <= 1e-8
        and eigen["schur_stable"]
        and eigen.get("in_band", True)
    )
    return VerificationReport(min_eig_P=min_eig_P, min_eig_block=min_eig_block,
                              min_eig_condensed_neg=min_eig_condensed_neg,
                              gain_residual=gain_residual, eigen=eigen, passed=passed)
