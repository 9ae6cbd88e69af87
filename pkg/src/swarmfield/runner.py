"""Scenario execution: simulate, measure, analyze, write, judge.

A run materializes the scenario's declarations, integrates the closed
loop, evaluates per-sample metrics, executes the requested analysis
operations, and writes trajectory.csv, analysis/<op>.json, and
summary.json into the output directory. Inline assertions on summary
quantities decide the exit code: 0 when all pass, 1 otherwise. Wall
time goes to run.log only, keeping the data files byte-reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as ana
from .catalog import make_density, make_vector_field, scalar_function
from .controllers import make_controller
from .dynamics import IntegratorConfig, Trajectory, simulate
from .errors import SchemaError
from .grid import ScalarField, lp_norm
from .io import dump_json, write_agents_csv, write_trajectory_csv
from .metrics import h_minus1_norm, w2_1d, w2_exact_small
from .particles import KdeConfig, kde_density, sample_density, simulate_agents
from .scenario import Scenario

__all__ = ["RunReport", "run_scenario", "list_catalog"]


@dataclass
class RunReport:
    """What a scenario run produced and whether it passed."""

    name: str
    out_dir: Path
    quantities: dict = field(default_factory=dict)
    assertion_results: list = field(default_factory=list)
    exit_code: int = 0


def _metric_value(name: str, rho: ScalarField, mu: ScalarField) -> float:
    e = rho.values - mu.values
    if name == "l2_error":
        return lp_norm(e, rho.grid, 2.0)
    if name == "linf_error":
        return lp_norm(e, rho.grid, math.inf)
    if name == "w2":
        if rho.grid.dim == 1:
            return w2_1d(rho, mu)
        return w2_exact_small(rho, mu)[0]
    if name == "h_minus1":
        return h_minus1_norm(ScalarField(rho.grid, e))
    raise ValueError(f"unknown metric {name!r}")


def _error_field_from(params: dict, grid, path: str) -> ScalarField:
    spec = dict(params or {"kind": "cosine"})
    kind = spec.get("kind", "cosine")
    fn = scalar_function(kind, grid.extents, spec.get("params"))
    vals = fn(grid.points())
    return ScalarField(grid, vals - vals.mean())


# each analysis op: (scenario, trajectory, mu) -> (outputs dict, quantities dict)


def _op_fit_decay(scn, traj, mu, params):
    metric = params.get("metric", "l2_error")
    series = [_metric_value(metric, d, mu) for d in traj.densities]
    window = params.get("window")
    fit = ana.fit_decay(traj.times, series, tuple(window) if window else None)
    lam1 = ana.neumann_lambda1(scn.grid).analytic
    out = {
        "metric": metric,
        "lambda_hat": fit.lambda_hat,
        "c_hat": fit.c_hat,
        "r_squared": fit.r_squared,
        "window": list(fit.window),
        "lambda1": lam1,
        "lambda_hat_over_lambda1": fit.lambda_hat / lam1,
    }
    return out, {
        "fit_decay.lambda_hat": fit.lambda_hat,
        "fit_decay.lambda_hat_over_lambda1": fit.lambda_hat / lam1,
        "fit_decay.r_squared": fit.r_squared,
    }


def _op_heat_discrepancy(scn, traj, mu, params):
    t = float(params.get("t", traj.times[-1]))
    k = int(np.argmin(np.abs(np.asarray(traj.times) - t)))
    t_k = float(traj.times[k])
    e0 = ScalarField(scn.grid, traj.densities[0].values - mu.values)
    ref = ana.heat_reference(e0, t_k)
    e_k = traj.densities[k].values - mu.values
    rel = lp_norm(e_k - ref.values, scn.grid, 2.0) / max(
        lp_norm(ref.values, scn.grid, 2.0), 1e-300
    )
    out = {"t": t_k, "rel_l2": rel}
    return out, {"heat_discrepancy.rel_l2": rel}


def _op_w2_envelope(scn, traj, mu, params):
    a = float(params.get("a", min(d.values.min() for d in traj.densities)))
    b = float(params.get("b", max(d.values.max() for d in traj.densities)))
    lam1 = ana.neumann_lambda1(scn.grid).analytic
    w2s = np.array([_metric_value("w2", d, mu) for d in traj.densities])
    env = math.sqrt(b / a) * w2s[0] * np.exp(-lam1 * np.asarray(traj.times))
    ratios = w2s[1:] / np.maximum(env[1:], 1e-300)
    max_ratio = float(ratios.max()) if len(ratios) else 0.0
    out = {
        "a": a, "b": b, "lambda1": lam1,
        "w2": w2s.tolist(), "envelope": env.tolist(), "max_ratio": max_ratio,
    }
    return out, {"w2_envelope.max_ratio": max_ratio}


def _op_effort(scn, traj, mu, params):
    t_head = float(params.get("t_head", traj.times[-1]))
    times = np.asarray(traj.effort_times)
    series = np.asarray(traj.effort_series)
    # the series is cumulative, so the head is its last value in-window
    mask = times <= t_head
    head = float(series[mask][-1]) if mask.any() else 0.0
    total = float(traj.effort_integral)
    tail_fraction = (total - head) / total if total > 0 else 0.0
    out = {"total": total, "head": head, "t_head": t_head, "tail_fraction": tail_fraction}
    return out, {"effort.total": total, "effort.tail_fraction": tail_fraction}


def _op_equivariance(scn, traj, mu, params):
    ctrl = make_controller(scn.controller, scn.grid.extents)
    rho0 = traj.densities[0]
    transforms = params.get("transforms")
    if not transforms:
        transforms = [{"type": "translation", "cells": [1] * scn.grid.dim}]
        if scn.grid.dim == 2:
            transforms.append({"type": "rotation", "quarters": 1})
    results = []
    worst = 0.0
    for t in transforms:
        if t.get("type") == "translation":
            tr = ana.Translation(tuple(int(c) for c in t["cells"]))
        elif t.get("type") == "rotation":
            tr = ana.Rotation(int(t.get("quarters", 1)))
        else:
            raise SchemaError("analyses.equivariance", f"unknown transform {t!r}")
        r = ana.equivariance_residual(ctrl, tr, rho0, mu)
        results.append({"transform": t, "residual": r})
        worst = max(worst, r)
    out = {"residuals": results, "max_residual": worst}
    return out, {"equivariance.max_residual": worst}


def _op_transport_l1(scn, traj, mu, params):
    fld = make_vector_field(params.get("field", "rotation_stream"), scn.grid.extents)
    e0 = _error_field_from(params.get("error"), scn.grid, "transport_l1.error")
    t_end = float(params.get("t_end", 5.0))
    samples = int(params.get("samples", 11))
    t_grid = np.linspace(0.0, t_end, samples)
    snaps = ana.transport_linear(e0, fld, t_grid)
    l1 = np.array([lp_norm(s.values, scn.grid, 1.0) for s in snaps])
    l2 = np.array([lp_norm(s.values, scn.grid, 2.0) for s in snaps])
    max_drift = float(np.abs(l1 / l1[0] - 1.0).max())
    min_l2_ratio = float((l2 / l2[0]).min())
    out = {
        "field": fld.name, "t_grid": t_grid.tolist(),
        "l1": l1.tolist(), "l2": l2.tolist(),
        "max_l1_drift": max_drift, "min_l2_ratio": min_l2_ratio,
    }
    return out, {
        "transport_l1.max_drift": max_drift,
        "transport_l1.min_l2_ratio": min_l2_ratio,
    }


def _op_mixing(scn, traj, mu, params):
    fld = make_vector_field(params.get("field", "rotation_stream"), scn.grid.extents)
    pi = make_density(scn.grid, params.get("invariant", "uniform"))
    f_spec = params.get("f", {"kind": "cosine"})
    g_spec = params.get("g", f_spec)
    f = scalar_function(f_spec.get("kind", "cosine"), scn.grid.extents, f_spec.get("params"))
    g = scalar_function(g_spec.get("kind", "cosine"), scn.grid.extents, g_spec.get("params"))
    t_end = float(params.get("t_end", 2.0))
    samples = int(params.get("samples", 41))
    rep = ana.mixing_correlation(fld, pi, f, g, np.linspace(0.0, t_end, samples))
    gaps = np.abs(rep.correlations - rep.product_of_means)
    final_ratio = float(gaps[-1] / rep.initial_gap) if rep.initial_gap > 0 else 0.0
    out = {
        "field": fld.name, "verdict": rep.verdict,
        "t_grid": rep.t_grid.tolist(), "correlations": rep.correlations.tolist(),
        "product_of_means": rep.product_of_means,
        "initial_gap": rep.initial_gap, "final_gap_ratio": final_ratio,
    }
    return out, {"mixing.verdict": rep.verdict, "mixing.final_gap_ratio": final_ratio}


_ANALYSIS_RUNNERS = {
    "fit_decay": _op_fit_decay,
    "heat_discrepancy": _op_heat_discrepancy,
    "w2_envelope": _op_w2_envelope,
    "effort": _op_effort,
    "equivariance": _op_equivariance,
    "transport_l1": _op_transport_l1,
    "mixing": _op_mixing,
}


def _run_particles(scn: Scenario, traj: Trajectory, mu: ScalarField, out_dir: Path):
    p = scn.particles
    kde = KdeConfig(p["bandwidth"]) if "bandwidth" in p else None
    rho0 = traj.densities[0]
    agents0 = sample_density(rho0, p["N"], p["seed"])
    atraj = simulate_agents(agents0, make_controller(scn.controller, scn.grid.extents), mu,
                            scn.integrator, kde)
    write_agents_csv(atraj.times, atraj.snapshots, out_dir / "agents.csv")

    w2s = [
        _metric_value("w2", kde_density(s, scn.grid, kde), mu) for s in atraj.snapshots
    ]
    inversions = int((np.diff(w2s) > 0).sum())
    final_gap = _metric_value(
        "w2", kde_density(atraj.final(), scn.grid, kde), traj.densities[-1]
    )
    outputs = {
        "N": p["N"], "seed": p["seed"], "steps": atraj.step_count,
        "times": list(atraj.times), "w2_to_mu": w2s,
        "w2_inversions": inversions, "w2_vs_continuum_final": final_gap,
    }
    quantities = {
        "particles.w2_inversions": inversions,
        "particles.w2_vs_continuum_final": final_gap,
        "particles.w2_final": w2s[-1],
    }
    return outputs, quantities


def _judge(assertions: list[dict], quantities: dict):
    results = []
    all_pass = True
    for spec in assertions:
        q = spec["quantity"]
        res = {"quantity": q, **{k: spec[k] for k in ("min", "max", "equals") if k in spec}}
        if q not in quantities:
            res.update(passed=False, note="quantity not produced by this run")
            all_pass = False
        else:
            v = quantities[q]
            res["value"] = v
            ok = True
            if "min" in spec:
                ok = ok and not (v < spec["min"])
            if "max" in spec:
                ok = ok and not (v > spec["max"])
            if "equals" in spec:
                eq = spec["equals"]
                ok = ok and (math.isclose(v, eq, rel_tol=1e-12, abs_tol=1e-12)
                             if isinstance(eq, (int, float)) and isinstance(v, (int, float))
                             else v == eq)
            res["passed"] = ok
            all_pass = all_pass and ok
        results.append(res)
    return results, all_pass


def run_scenario(scn: Scenario, out_dir=None) -> RunReport:
    """Execute one scenario and write its outputs. Never calls exit();
    the report carries the exit code for the CLI to use."""
    out = Path(out_dir if out_dir is not None else (scn.output_dir or f"out/{scn.name}"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "analysis").mkdir(exist_ok=True)
    started = time.time()

    rho0 = make_density(scn.grid, *scn.rho0)
    mu = make_density(scn.grid, *scn.mu)
    controller = make_controller(scn.controller, scn.grid.extents)

    traj = simulate(rho0, controller, mu, scn.integrator)

    metric_columns = {
        name: np.array([_metric_value(name, d, mu) for d in traj.densities])
        for name in scn.metrics
    }
    min_rho = np.array([float(d.values.min()) for d in traj.densities])
    write_trajectory_csv(traj.times, metric_columns, min_rho, traj.masses,
                         out / "trajectory.csv")

    quantities = {
        "min_rho": float(traj.min_density),
        "mass_drift": float(np.abs(np.asarray(traj.masses) - traj.masses[0]).max()),
        "steps": traj.step_count,
    }
    for name, col in metric_columns.items():
        quantities[f"metric_max.{name}"] = float(col.max())
        quantities[f"metric_final.{name}"] = float(col[-1])

    for spec in scn.analyses:
        op = spec["op"]
        outputs, qs = _ANALYSIS_RUNNERS[op](scn, traj, mu, spec["params"])
        doc = {
            "operation": op,
            "inputs": {"scenario": scn.name, "params": spec["params"]},
            "outputs": outputs,
        }
        dump_json(doc, out / "analysis" / f"{op}.json")
        quantities.update(qs)

    if scn.particles is not None:
        outputs, qs = _run_particles(scn, traj, mu, out)
        dump_json({"operation": "particles", "outputs": outputs},
                  out / "analysis" / "particles.json")
        quantities.update(qs)

    results, all_pass = _judge(scn.assertions, quantities)
    summary = {
        "scenario": scn.name,
        "seed": scn.seed,
        "quantities": quantities,
        "assertions": results,
        "passed": all_pass,
    }
    dump_json(summary, out / "summary.json")
    # wall time lives outside the reproducible outputs
    (out / "run.log").write_text(
        f"scenario={scn.name} wall_seconds={time.time() - started:.3f}\n"
    )
    return RunReport(
        name=scn.name, out_dir=out, quantities=quantities,
        assertion_results=results, exit_code=0 if all_pass else 1,
    )


def list_catalog() -> str:
    """Human-readable registry of every named thing a scenario can use."""
    from .catalog import density_catalog, scalar_function_catalog, vector_field_catalog
    from .controllers import controller_catalog

    lines = ["initializers:"]
    lines += [f"  {k}" for k in density_catalog()]
    lines.append("controllers:")
    lines += [f"  {k}" for k in controller_catalog()]
    lines.append("vector fields:")
    lines += [f"  {k}" for k in vector_field_catalog()]
    lines.append("scalar functions:")
    lines += [f"  {k}" for k in scalar_function_catalog()]
    lines.append("analyses:")
    lines += [f"  {k}" for k in sorted(_ANALYSIS_RUNNERS)]
    lines.append("metrics:")
    lines += [f"  {k}" for k in ("h_minus1", "l2_error", "linf_error", "w2")]
    return "\n".join(lines) + "\n"
