"""Command-line front end: design, simulate, compare, bound.

Experiments are described by a single JSON file; see README for the
schema. Outputs land in one directory per experiment: a config echo,
certificate and verification JSON, trace CSVs, metrics JSON, and the
bound curve. Exit codes: 0 success, 2 config/parse error, 3 infeasible
design, 4 diverged simulation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundReport, residual_sup, running_l2
from .errors import ConfigError, DimensionError, InfeasibleError
from .lmi import (DesignCertificate, assemble_design_problem, eigenvalue_report,
                  solve_design, verify_certificate)
from .model import PlantModel, build_augmented, plant_from_dict
from .predictors import compute_gains
from .simulate import SimConfig, make_disturbance, run_closed_loop, run_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4


def _load_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return doc


class Experiment:
    """Parsed experiment file plus derived objects."""

    def __init__(self, doc: dict, base: Path):
        self.doc = doc
        plant_ref = doc.get("plant")
        if plant_ref is None:
            raise ConfigError("experiment needs a 'plant' entry (path or inline object)")
        if isinstance(plant_ref, str):
            plant_doc = _load_json((base / plant_ref) if not Path(plant_ref).is_absolute()
                                   else Path(plant_ref))
        else:
            plant_doc = plant_ref
        self.plant: PlantModel = plant_from_dict(plant_doc)
        r = doc.get("r", plant_doc.get("r"))
        if r is None:
            raise ConfigError("experiment needs the difference order 'r'")
        self.r = int(r)
        if self.r < 0:
            raise ConfigError(f"r must be >= 0, got {self.r}")
        self.design = doc.get("design")
        self.gain_L = None
        if doc.get("gain_L") is not None:
            self.gain_L = np.asarray(doc["gain_L"], dtype=float)
        if self.design is not None and self.gain_L is not None:
            raise ConfigError("options 'design' and 'gain_L' are mutually exclusive")
        self.certificate_path = doc.get("certificate")
        self.sim = doc.get("sim")
        self.base = base

    def sim_config(self, method=None, L=None) -> SimConfig:
        if self.sim is None:
            raise ConfigError("experiment has no 'sim' section")
        sim = self.sim
        for key in ("K", "disturbance", "horizon"):
            if key not in sim:
                raise ConfigError(f"sim section missing '{key}'")
        dist_doc = dict(sim["disturbance"])
        kind = dist_doc.pop("kind", None)
        if kind is None:
            raise ConfigError("disturbance needs a 'kind'")
        disturbance = make_disturbance(kind, **dist_doc)
        return SimConfig(
            plant=self.plant,
            r=self.r,
            K=np.asarray(sim["K"], dtype=float),
            disturbance=disturbance,
            method=method or sim.get("method", "proposed"),
            L=L,
            horizon=int(sim["horizon"]),
            x0=np.asarray(sim["x0"], dtype=float) if sim.get("x0") is not None else None,
            theta=np.asarray(sim["theta"], dtype=float) if sim.get("theta") is not None else None,
            etahat0=(np.asarray(sim["etahat0"], dtype=float)
                     if sim.get("etahat0") is not None else None),
        )

    def resolve_gain(self, out_dir: Path):
        """Observer gain and optional certificate: supplied L, a certificate
        file, or a fresh design in that order."""
        if self.gain_L is not None:
            return self.gain_L, None
        if self.certificate_path:
            cert = DesignCertificate.from_json(self.base / self.certificate_path)
            return cert.L, cert
        if self.design is not None:
            cert = self.run_design()
            cert.to_json(out_dir / "certificate.json")
            return cert.L, cert
        return None, None

    def run_design(self) -> DesignCertificate:
        form = "modified" if (self.sim or {}).get("method") == "modified" else "standard"
        aug = build_augmented(self.plant, self.r)
        gains = compute_gains(self.plant, self.r, form)
        design = self.design or {}
        prob = assemble_design_problem(aug, gains,
                                       zeta_a=design.get("zeta_a"),
                                       zeta_b=design.get("zeta_b"))
        return solve_design(prob, minimize_gamma=design.get("minimize_gamma", True),
                            solver=design.get("solver"))


def _prepare(args):
    config_path = Path(args.config)
    exp = Experiment(_load_json(config_path), config_path.parent)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = dict(exp.doc)
    if args.seed is not None:
        echo["seed"] = args.seed
    with open(out_dir / "config_echo.json", "w") as fh:
        json.dump(echo, fh, indent=2)
    return exp, out_dir


def cmd_design(args) -> int:
    exp, out_dir = _prepare(args)
    form = "modified" if (exp.sim or {}).get("method") == "modified" else "standard"
    aug = build_augmented(exp.plant, exp.r)
    gains = compute_gains(exp.plant, exp.r, form)
    if exp.gain_L is not None:
        report = eigenvalue_report(aug, exp.gain_L,
                                   region=tuple(exp.doc["region"]) if exp.doc.get("region") else None)
        with open(out_dir / "verification_report.json", "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"supplied gain: spectral radius {report['spectral_radius']:.6g}, "
              f"schur_stable={report['schur_stable']}")
        return EXIT_OK
    cert = exp.run_design()
    cert.to_json(out_dir / "certificate.json")
    report = verify_certificate(aug, gains, cert)
    report.to_json(out_dir / "verification_report.json")
    print(f"design: gamma = {cert.gamma:.9g} (gamma_bar = {cert.gamma_bar:.9g}), "
          f"status = {cert.solver_status}, verification passed = {report.passed}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    exp, out_dir = _prepare(args)
    method = (exp.sim or {}).get("method", "proposed")
    if method == "exact":
        raise ConfigError("the exact oracle is not available through 'simulate'; "
                          "use 'compare --with-oracle' for benchmarking")
    L, _cert = exp.resolve_gain(out_dir)
    config = exp.sim_config(L=L)
    trace = run_closed_loop(config)
    trace.to_csv(out_dir / f"trace_{config.method}.csv")
    metrics = trace.metrics()
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2)
    print(f"simulate[{config.method}]: peak |x| = {metrics['peak_state_norm']:.6g}, "
          f"peak pred err = {metrics['peak_pred_err_norm']:.6g}, diverged = {trace.diverged}")
    return EXIT_DIVERGED if trace.diverged else EXIT_OK


def cmd_compare(args) -> int:
    exp, out_dir = _prepare(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()] if args.methods else []
    if not methods:
        raise ConfigError("compare needs a non-empty --methods list")
    if "exact" in methods and not args.with_oracle:
        raise ConfigError("method 'exact' needs future disturbances; pass --with-oracle "
                          "to include it in a benchmark run")
    L, _cert = exp.resolve_gain(out_dir)
    config = exp.sim_config(L=L)
    traces, metrics = run_comparison(config, methods)
    for m, trace in traces.items():
        trace.to_csv(out_dir / f"trace_{m}.csv")
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2)
    width = max(len(m) for m in methods)
    print(f"{'method'.ljust(width)}  peak_pred_err  peak_state  steady_rms_state")
    for m in methods:
        mm = metrics[m]
        print(f"{m.ljust(width)}  {mm['peak_pred_err_norm']:13.6g}  "
              f"{mm['peak_state_norm']:10.6g}  {mm['steady_rms_state_norm']:16.6g}")
    diverged = any(t.diverged for t in traces.values())
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_bound(args) -> int:
    exp, out_dir = _prepare(args)
    L, cert = exp.resolve_gain(out_dir)
    if cert is None:
        raise ConfigError("bound needs a certificate: give 'design' options or a "
                          "'certificate' file (a bare gain_L has no P or gamma)")
    config = exp.sim_config(L=L)
    if config.method not in ("proposed", "modified"):
        raise ConfigError("the bound applies to the observer-based methods")
    trace = run_closed_loop(config)
    plant, r = exp.plant, exp.r
    w_all = config.disturbance.samples(int(config.horizon) + plant.d)
    delta = residual_sup(w_all, r)
    from .simulate import augmented_initial_state, default_etahat0
    eta0_true = augmented_initial_state(trace.x[0], w_all, r)
    etahat0 = (np.asarray(config.etahat0, dtype=float) if config.etahat0 is not None
               else default_etahat0(plant, r, trace.x[0]))
    e0 = eta0_true - etahat0
    epsilon = float(e0 @ cert.P @ e0)
    report = BoundReport.from_design(plant, r, delta=delta, gamma=cert.gamma, epsilon=epsilon)
    report.to_json(out_dir / "bound_report.json")
    realized = trace.pred_err[trace.realized]
    measured = running_l2(realized)
    report.curve_csv(out_dir / "bound_curve.csv", measured)
    ks = np.arange(measured.shape[0])
    ok = bool(np.all(measured <= report.bound(ks) + 1e-9))
    print(f"bound: mu = {report.mu:.6g}, delta = {delta:.6g}, gamma = {cert.gamma:.6g}, "
          f"sqrt(epsilon) = {np.sqrt(epsilon):.6g}, measured within bound = {ok}")
    return EXIT_OK if not trace.diverged else EXIT_DIVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaypred",
        description="Observer design, prediction, and closed-loop evaluation "
                    "for input-delayed discrete-time systems")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed recorded in outputs; reserved for randomized disturbances")

    p = sub.add_parser("design", help="solve the observer synthesis problem")
    common(p)
    p.set_defaults(fn=cmd_design)

    p = sub.add_parser("simulate", help="run one closed-loop simulation")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="run several predictors on one disturbance")
    common(p)
    p.add_argument("--methods", required=True,
                   help="comma-separated method names, e.g. proposed,wu1,wu2")
    p.add_argument("--with-oracle", action="store_true",
                   help="allow the exact oracle (benchmark use)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("bound", help="emit the analytic bound and the measured curve")
    common(p)
    p.set_defaults(fn=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
