"""Command-line experiment runner.

Subcommands: ``simulate``, ``fit``, ``evidence``, ``diagnose``, ``coverage``.
Each reads an optional JSON config, merges it over :data:`DEFAULTS`, and
writes its outputs plus a ``manifest.json`` holding the fully resolved
config.  Feeding that manifest back through ``--config`` reproduces the
outputs byte for byte.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from .diagnostics import diagnose, make_block_design, make_gaussian_design
from .errors import CapacityError, NmfGlmError, PairingError, ParameterError
from .families import (
    Dataset,
    GlmModel,
    family_from_dict,
    prior_from_dict,
    simulate_response,
    validate,
)
from .gauss import elbo_gauss_mc, fit_gauss
from .gibbs import posterior_mean, run_chains
from .jj import GaussianPrior, fit_jj, jj_objective_mc
from .metrics import average_coverage, credible_intervals, mse
from .montecarlo import MCConfig, rng
from .oracle import QUADRATURE_MAX_DIM, enumerate_logz, n_configurations, quadrature_logz
from .tilt_solver import elbo_tilt, fit_tilt

METHODS = ("tilt", "gauss", "jj", "gibbs")

DEFAULTS: dict = {
    "seed": 0,
    "method": "tilt",
    "methods": ["tilt"],
    "replicates": 1,
    "record_wallclock": False,
    "design": {"kind": "gaussian", "n": 200, "p": 10, "scale": 1.0},
    "family": {"name": "logistic"},
    "prior": {"kind": "discrete", "support": [-1.0, 0.0, 1.0], "probs": [0.2, 0.6, 0.2]},
    "data": None,
    "tilt": {
        "n_samples": 200,
        "damping": 0.5,
        "max_iter": 500,
        "tol_u": 1e-5,
        "f_method": "auto",
        "elbo_samples": 10000,
    },
    "gauss": {"n_samples": 2000, "v_min": 1e-6, "max_iter": 500, "tol": None, "objective_samples": 10000},
    "jj": {"tol_xi": 1e-8, "max_iter": 1000, "objective_samples": 10000},
    "gibbs": {"chains": 4, "sweeps": 1000, "burn_in": 200},
    "oracle": {"mode": "auto", "enumeration_cap": 2_000_000, "quadrature_nodes": 64},
    "coverage": {"alpha": 0.1, "epsilon": 0.05},
    "diagnostics": {"deltas": [0.01, 0.05, 0.1, 0.5], "Cs": [0.5, 1.0, 2.0], "n_random_probes": 20},
}

# Sections whose keys are checked one level down; "design", "family",
# "prior" and "data" are validated by their own constructors.
_NESTED = ("tilt", "gauss", "jj", "gibbs", "oracle", "coverage", "diagnostics")


# --------------------------------------------------------------------------- config


def resolve_config(user: dict | None, overrides: dict | None = None) -> dict:
    """Merge ``user`` and CLI ``overrides`` over the defaults, rejecting unknown keys."""
    user = dict(user or {})
    unknown = sorted(set(user) - set(DEFAULTS))
    for key in _NESTED:
        if isinstance(user.get(key), dict):
            unknown += [f"{key}.{k}" for k in sorted(set(user[key]) - set(DEFAULTS[key]))]
    if unknown:
        raise ParameterError("unknown config keys: " + ", ".join(unknown))
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in user.items():
        if key in _NESTED and isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    if cfg["method"] not in METHODS:
        raise ParameterError(f"unknown method {cfg['method']!r}; choose from {', '.join(METHODS)}")
    bad = [m for m in cfg["methods"] if m not in METHODS]
    if bad:
        raise ParameterError(f"unknown methods: {', '.join(bad)}")
    if int(cfg["replicates"]) < 1:
        raise ParameterError("replicates must be >= 1")
    if int(cfg["seed"]) < 0 or int(cfg["seed"]) >= 2**64:
        raise ParameterError("seed must be an unsigned 64-bit integer")
    return cfg


def sub_seed(seed: int, stream: str) -> int:
    """Derive an independent 63-bit seed for a named component."""
    return int(rng(int(seed), stream).integers(0, 2**63 - 1))


# --------------------------------------------------------------------------- I/O


def _fmt(x) -> str:
    return repr(float(x))


def write_matrix(path: Path, M) -> None:
    M = np.atleast_2d(np.asarray(M, float))
    with open(path, "w", newline="\n") as fh:
        for row in M:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_vector(path: Path, v) -> None:
    with open(path, "w", newline="\n") as fh:
        for val in np.asarray(v, float).ravel():
            fh.write(_fmt(val) + "\n")


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)


def read_vector(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=1, dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")


# --------------------------------------------------------------------------- data


def make_design(design: dict, seed: int) -> np.ndarray:
    allowed = {"kind", "n", "p", "scale"}
    unknown = sorted(set(design) - allowed)
    if unknown:
        raise ParameterError("unknown config keys: " + ", ".join(f"design.{k}" for k in unknown))
    kind, n, p = design.get("kind", "gaussian"), int(design["n"]), int(design["p"])
    if kind == "block":
        return make_block_design(n, p, seed)
    if kind == "gaussian":
        return make_gaussian_design(n, p, design.get("scale", 1.0), seed)
    if kind == "scaled_identity":
        if n < p:
            raise ParameterError("scaled_identity design needs n >= p")
        X = np.zeros((n, p))
        X[:p, :p] = float(design.get("scale", 1.0)) * np.eye(p)
        return X
    if kind == "zero":
        return np.zeros((n, p))
    raise ParameterError(f"unknown design kind {kind!r}")


def simulate_instance(cfg: dict, seed: int):
    """(X, y, beta_star) from the design, family and prior sections."""
    family = family_from_dict(cfg["family"])
    prior = prior_from_dict(cfg["prior"])
    X = make_design(cfg["design"], sub_seed(seed, "design"))
    y, beta = simulate_response(family, X, prior, rng(sub_seed(seed, "response"), "response"))
    return X, y, beta


def load_instance(cfg: dict, seed: int):
    """Read ``data.X`` / ``data.y`` (and optional ``data.beta_star``) or simulate."""
    data = cfg.get("data")
    if not data:
        return simulate_instance(cfg, seed)
    unknown = sorted(set(data) - {"X", "y", "beta_star"})
    if unknown:
        raise ParameterError("unknown config keys: " + ", ".join(f"data.{k}" for k in unknown))
    X = read_matrix(data["X"])
    y = read_vector(data["y"])
    beta = read_vector(data["beta_star"]) if data.get("beta_star") else None
    return X, y, beta


def build_model(cfg: dict, X, y) -> GlmModel:
    family = family_from_dict(cfg["family"])
    ds = Dataset(X, y)
    validate(ds, family)
    return GlmModel(family, ds, prior_from_dict(cfg["prior"]))


def check_pairing(method: str, model: GlmModel) -> None:
    discrete = model.prior.is_discrete
    if method in ("tilt", "gibbs") and not discrete:
        raise PairingError(f"method {method!r} needs a discrete prior, got {model.prior.kind}")
    if method in ("gauss", "jj") and discrete:
        raise PairingError(f"method {method!r} needs the standard_gaussian prior, got a discrete prior")
    if method == "jj" and model.family.name != "logistic":
        raise PairingError(f"method 'jj' needs the logistic family, got {model.family.name}")


# --------------------------------------------------------------------------- solvers


def run_method(method: str, model: GlmModel, cfg: dict, seed: int) -> dict:
    """Fit one method; returns the result fields shared by ``fit`` and ``evidence``."""
    check_pairing(method, model)
    solver_seed = sub_seed(seed, "solver")
    out: dict = {"method": method}
    if method == "tilt":
        o = cfg["tilt"]
        fit = fit_tilt(
            model,
            MCConfig(int(o["n_samples"]), solver_seed),
            damping=float(o["damping"]),
            max_iter=int(o["max_iter"]),
            tol_u=float(o["tol_u"]),
            method=o["f_method"],
        )
        est, se = elbo_tilt(
            model, fit.state.u, fit.state.d, MCConfig(int(o["elbo_samples"]), solver_seed), return_se=True
        )
        out.update(u=fit.state.u, estimate=est, se=se, converged=fit.converged, iterations=fit.iterations)
    elif method == "gauss":
        o = cfg["gauss"]
        fit = fit_gauss(
            model,
            MCConfig(int(o["n_samples"]), solver_seed),
            v_min=float(o["v_min"]),
            max_iter=int(o["max_iter"]),
            tol=o["tol"],
        )
        # Re-estimate on fresh draws: the optimized CRN objective is biased upward.
        est, se = elbo_gauss_mc(
            model,
            fit.state,
            MCConfig(int(o["objective_samples"]), sub_seed(seed, "evaluation")),
            v_min=float(o["v_min"]),
            return_se=True,
        )
        out.update(
            u=fit.state.u,
            v=fit.state.v,
            estimate=est,
            se=se,
            crn_objective=fit.elbo,
            converged=fit.converged,
            iterations=fit.iterations,
            projected_grad_norm=fit.projected_grad_norm,
        )
    elif method == "jj":
        o = cfg["jj"]
        prior = GaussianPrior.standard(model.p)
        fit = fit_jj(model, prior, tol_xi=float(o["tol_xi"]), max_iter=int(o["max_iter"]))
        obj, se = jj_objective_mc(
            model, fit.state, prior, MCConfig(int(o["objective_samples"]), solver_seed), return_se=True
        )
        out.update(
            u=fit.state.u,
            sigma_diag=np.diag(fit.state.Sigma),
            estimate=obj,
            se=se,
            closed_form_bound=fit.bound,
            converged=fit.converged,
            iterations=fit.iterations,
        )
    elif method == "gibbs":
        o = cfg["gibbs"]
        mean, diag = posterior_mean(
            model, int(o["chains"]), int(o["sweeps"]), int(o["burn_in"]), seed=sub_seed(seed, "gibbs")
        )
        out.update(
            u=mean,
            estimate=None,
            se=None,
            converged=None,
            iterations=int(o["sweeps"]),
            chain_diagnostics=diag,
        )
    return out


def oracle_logz(model: GlmModel, cfg: dict) -> tuple[str | None, float | None]:
    """Exact log Z when feasible (``mode = auto``) or as requested."""
    o = cfg["oracle"]
    mode = o["mode"]
    if mode == "none":
        return None, None
    if mode not in ("auto", "enumerate", "quadrature"):
        raise ParameterError(f"unknown oracle mode {mode!r}")
    cap = int(o["enumeration_cap"])
    if model.prior.is_discrete:
        if mode == "quadrature":
            raise PairingError("the quadrature oracle needs the standard_gaussian prior")
        if mode == "auto" and n_configurations(model) > cap:
            return None, None
        return "enumerate", enumerate_logz(model, cap)
    if mode == "enumerate":
        raise PairingError("enumeration needs a discrete prior")
    if model.p > QUADRATURE_MAX_DIM:
        if mode == "auto":
            return None, None
        raise CapacityError(f"tensor quadrature supports p <= {QUADRATURE_MAX_DIM}, got p = {model.p}")
    return "quadrature", quadrature_logz(model, int(o["quadrature_nodes"]))


# --------------------------------------------------------------------------- commands


def _replicate_seed(cfg: dict, r: int) -> int:
    return (int(cfg["seed"]) + r) % 2**64


def cmd_simulate(cfg: dict, out: Path) -> list[Path]:
    seed = int(cfg["seed"])
    X, y, beta = simulate_instance(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X.csv", X)
    write_vector(out / "y.csv", y)
    write_vector(out / "beta_star.csv", beta)
    write_json(out / "manifest.json", cfg)
    return [out / "X.csv", out / "y.csv", out / "beta_star.csv", out / "manifest.json"]


def cmd_fit(cfg: dict, out: Path) -> dict:
    seed = int(cfg["seed"])
    X, y, beta = load_instance(cfg, seed)
    model = build_model(cfg, X, y)
    method = cfg["method"]
    t0 = time.perf_counter()
    res = run_method(method, model, cfg, seed)
    elapsed = time.perf_counter() - t0
    result = {
        "method": method,
        "u": res.pop("u"),
        "elbo_or_logz_estimate": res.pop("estimate"),
        "converged": res.pop("converged"),
        "iterations": res.pop("iterations"),
        "wallclock_seconds": elapsed if cfg["record_wallclock"] else None,
        "seed": seed,
        "solver_options": cfg[method],
    }
    res.pop("method")
    result.update(res)
    if beta is not None:
        result["mse"] = mse(result["u"], beta)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "result.json", result)
    write_json(out / "manifest.json", cfg)
    return _jsonable(result)


EVIDENCE_COLUMNS = ("replicate", "seed", "p", "n", "method", "estimate", "se", "oracle", "oracle_logz", "gap_per_p")


def cmd_evidence(cfg: dict, out: Path) -> dict:
    """Per-method evidence estimates against the oracle, one CSV row per (replicate, method)."""
    rows = []
    for r in range(int(cfg["replicates"])):
        seed = _replicate_seed(cfg, r)
        X, y, _ = load_instance(cfg, seed)
        model = build_model(cfg, X, y)
        for m in cfg["methods"]:
            check_pairing(m, model)
        oracle, logz = oracle_logz(model, cfg)
        for m in cfg["methods"]:
            res = run_method(m, model, cfg, seed)
            est = res["estimate"]
            gap = None if (logz is None or est is None) else (est - logz) / model.p
            rows.append(
                {
                    "replicate": r,
                    "seed": seed,
                    "p": model.p,
                    "n": model.n,
                    "method": m,
                    "estimate": est,
                    "se": res["se"],
                    "oracle": oracle or "",
                    "oracle_logz": logz,
                    "gap_per_p": gap,
                }
            )
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVIDENCE_COLUMNS)
    for row in rows:
        w.writerow(["" if row[c] is None else (_fmt(row[c]) if isinstance(row[c], float) else row[c]) for c in EVIDENCE_COLUMNS])
    (out / "evidence.csv").write_text(buf.getvalue())
    summary = {"rows": rows, "pairwise_gap_per_p": _pairwise_gaps(rows)}
    write_json(out / "evidence.json", summary)
    write_json(out / "manifest.json", cfg)
    return _jsonable(summary)


def _pairwise_gaps(rows: list[dict]) -> dict:
    by_rep: dict = {}
    for row in rows:
        by_rep.setdefault(row["replicate"], {})[row["method"]] = row
    gaps: dict = {}
    for rep in by_rep.values():
        for a, ra in rep.items():
            for b, rb in rep.items():
                if a < b and ra["estimate"] is not None and rb["estimate"] is not None:
                    gaps.setdefault(f"{a}-{b}", []).append((ra["estimate"] - rb["estimate"]) / ra["p"])
    return {k: {"mean": float(np.mean(v)), "values": v} for k, v in gaps.items()}


def cmd_diagnose(cfg: dict, out: Path) -> dict:
    seed = int(cfg["seed"])
    X, y, _ = load_instance(cfg, seed)
    model = build_model(cfg, X, y)
    o = cfg["diagnostics"]
    report = diagnose(model, o["deltas"], o["Cs"], int(o["n_random_probes"]), seed=sub_seed(seed, "solver"))
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "diagnostics.json", report.to_dict())
    write_json(out / "manifest.json", cfg)
    return _jsonable(report.to_dict())


def cmd_coverage(cfg: dict, out: Path) -> dict:
    """Tilt-fit intervals scored against Gibbs posterior draws, per replicate."""
    o = cfg["coverage"]
    reps = []
    for r in range(int(cfg["replicates"])):
        seed = _replicate_seed(cfg, r)
        X, y, _ = load_instance(cfg, seed)
        model = build_model(cfg, X, y)
        if not model.prior.is_discrete:
            raise PairingError("coverage needs a discrete prior (tilt fit and Gibbs draws)")
        fit = run_method("tilt", model, cfg, seed)
        intervals = credible_intervals(
            model.prior, fit["u"], model.gram_diag, float(o["alpha"]), float(o["epsilon"]), model.family.b2_at_zero
        )
        g = cfg["gibbs"]
        draws = run_chains(model, int(g["chains"]), int(g["sweeps"]), int(g["burn_in"]), seed=sub_seed(seed, "gibbs"))
        summary = average_coverage(draws.reshape(-1, model.p), intervals, float(o["alpha"]), float(o["epsilon"]))
        summary.update(replicate=r, seed=seed, tilt_converged=fit["converged"])
        reps.append(summary)
    result = {
        "replicates": reps,
        "min_exceedance": min(s["exceedance"] for s in reps),
        "alpha": o["alpha"],
        "epsilon": o["epsilon"],
    }
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "coverage.json", result)
    write_json(out / "manifest.json", cfg)
    return _jsonable(result)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evidence": cmd_evidence,
    "diagnose": cmd_diagnose,
    "coverage": cmd_coverage,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmfglm", description="Naive mean-field VI for Bayesian GLMs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config; keys not given fall back to defaults")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides config)")
        p.add_argument("--method", choices=METHODS, help="solver for fit (overrides config)")
        p.add_argument("--methods", help="comma-separated solvers for evidence")
        p.add_argument("--replicates", type=int, help="replicate count for evidence/coverage")
        p.add_argument("--threads", type=int, help="worker count (validated; results never depend on it)")
        p.add_argument("--record-wallclock", action="store_true", default=None, dest="record_wallclock",
                       help="fill wallclock_seconds (output is then no longer byte-reproducible)")
    sub.add_parser("defaults", help="print the default config")
    return parser


def _check_threads(n: int | None) -> None:
    # Every computation runs in one process with deterministic reductions, so
    # the value only has to be valid; BLAS threading is left to the environment.
    if n is not None and n < 1:
        raise ParameterError("--threads must be >= 1")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        print(json.dumps(DEFAULTS, sort_keys=True, indent=2))
        return 0
    try:
        _check_threads(args.threads)
        user = json.loads(args.config.read_text()) if args.config else {}
        if not isinstance(user, dict):
            raise ParameterError("config must be a JSON object")
        overrides = {
            "seed": args.seed,
            "method": args.method,
            "methods": args.methods.split(",") if args.methods else None,
            "replicates": args.replicates,
            "record_wallclock": args.record_wallclock,
        }
        cfg = resolve_config(user, overrides)
        COMMANDS[args.command](cfg, args.out)
    except (NmfGlmError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
