"""Declarative experiment descriptions and their strict JSON schema.

A scenario file names everything a run needs: the box, the initial and
target densities, the control law, the integrator, per-sample metrics,
analysis operations, optional particle parameters, and inline
assertions on summary quantities. Unknown keys are rejected anywhere in
the document so a typo cannot silently change an experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import density_catalog
from .controllers import controller_catalog
from .dynamics import IntegratorConfig
from .errors import InitializerUnknownError, SchemaError
from .grid import GridSpec, build_grid

__all__ = ["Scenario", "parse_scenario", "scenario_from_dict"]

_METRIC_NAMES = ("l2_error", "linf_error", "w2", "h_minus1")
_ANALYSIS_OPS = (
    "fit_decay",
    "heat_discrepancy",
    "w2_envelope",
    "effort",
    "equivariance",
    "transport_l1",
    "mixing",
)


@dataclass
class Scenario:
    """Validated experiment description; materialized lazily by the runner."""

    name: str
    grid: GridSpec
    rho0: tuple[str, dict]
    mu: tuple[str, dict]
    controller: str
    integrator: IntegratorConfig
    metrics: list[str] = field(default_factory=list)
    analyses: list[dict] = field(default_factory=list)
    particles: dict | None = None
    assertions: list[dict] = field(default_factory=list)
    output_dir: str | None = None
    seed: int = 0


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise SchemaError(path, message)


def _check_keys(obj: dict, allowed: set, required: set, path: str) -> None:
    _require(isinstance(obj, dict), path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{path}.{sorted(missing)[0]}", "required key missing")


def _number(obj, path: str, *, positive: bool = False) -> float:
    _require(isinstance(obj, (int, float)) and not isinstance(obj, bool),
             path, f"expected a number, got {obj!r}")
    v = float(obj)
    if positive:
        _require(v > 0, path, f"must be positive, got {v}")
    return v


def _integer(obj, path: str, *, minimum: int | None = None) -> int:
    _require(isinstance(obj, int) and not isinstance(obj, bool),
             path, f"expected an integer, got {obj!r}")
    if minimum is not None:
        _require(obj >= minimum, path, f"must be >= {minimum}, got {obj}")
    return obj


def _parse_grid(obj, path: str) -> GridSpec:
    _check_keys(obj, {"extents", "cells"}, {"extents", "cells"}, path)
    extents = obj["extents"]
    cells = obj["cells"]
    _require(isinstance(extents, list) and extents, f"{path}.extents", "expected a list")
    _require(isinstance(cells, list) and cells, f"{path}.cells", "expected a list")
    extents = [_number(L, f"{path}.extents", positive=True) for L in extents]
    cells = [_integer(n, f"{path}.cells", minimum=4) for n in cells]
    try:
        return build_grid(extents, cells)
    except ValueError as ex:
        raise SchemaError(path, str(ex)) from ex


def _parse_density(obj, path: str) -> tuple[str, dict]:
    _check_keys(obj, {"kind", "params"}, {"kind"}, path)
    kind = obj["kind"]
    _require(isinstance(kind, str), f"{path}.kind", "expected a string")
    if kind not in density_catalog():
        raise InitializerUnknownError(
            f"{path}.kind", f"unknown initializer {kind!r}; known: {density_catalog()}"
        )
    params = obj.get("params", {})
    _require(isinstance(params, dict), f"{path}.params", "expected an object")
    return kind, dict(params)


def _parse_integrator(obj, path: str) -> IntegratorConfig:
    allowed = {"t_end", "cfl", "max_steps", "dt_override", "sample_stride"}
    _check_keys(obj, allowed, {"t_end"}, path)
    kwargs = {"t_end": _number(obj["t_end"], f"{path}.t_end", positive=True)}
    if "cfl" in obj:
        kwargs["cfl"] = _number(obj["cfl"], f"{path}.cfl", positive=True)
    if "max_steps" in obj:
        kwargs["max_steps"] = _integer(obj["max_steps"], f"{path}.max_steps", minimum=1)
    if "dt_override" in obj:
        kwargs["dt_override"] = _number(
            obj["dt_override"], f"{path}.dt_override", positive=True
        )
    if "sample_stride" in obj:
        kwargs["sample_stride"] = _integer(
            obj["sample_stride"], f"{path}.sample_stride", minimum=1
        )
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as ex:
        raise SchemaError(path, str(ex)) from ex


def _parse_analysis(obj, path: str) -> dict:
    _check_keys(obj, {"op", "params"}, {"op"}, path)
    op = obj["op"]
    _require(isinstance(op, str), f"{path}.op", "expected a string")
    _require(op in _ANALYSIS_OPS, f"{path}.op",
             f"unknown analysis {op!r}; known: {sorted(_ANALYSIS_OPS)}")
    params = obj.get("params", {})
    _require(isinstance(params, dict), f"{path}.params", "expected an object")
    return {"op": op, "params": dict(params)}


def _parse_particles(obj, path: str) -> dict:
    _check_keys(obj, {"N", "seed", "bandwidth"}, {"N", "seed"}, path)
    out = {
        "N": _integer(obj["N"], f"{path}.N", minimum=10),
        "seed": _integer(obj["seed"], f"{path}.seed"),
    }
    if "bandwidth" in obj:
        out["bandwidth"] = _number(obj["bandwidth"], f"{path}.bandwidth", positive=True)
    return out


def _parse_assertion(obj, path: str) -> dict:
    _check_keys(obj, {"quantity", "min", "max", "equals"}, {"quantity"}, path)
    _require(isinstance(obj["quantity"], str), f"{path}.quantity", "expected a string")
    _require(
        len(set(obj) & {"min", "max", "equals"}) > 0,
        path, "assertion needs at least one of min/max/equals",
    )
    out = {"quantity": obj["quantity"]}
    if "min" in obj:
        out["min"] = _number(obj["min"], f"{path}.min")
    if "max" in obj:
        out["max"] = _number(obj["max"], f"{path}.max")
    if "equals" in obj:
        eq = obj["equals"]
        _require(isinstance(eq, (int, float, str)) and not isinstance(eq, bool),
                 f"{path}.equals", "expected a number or string")
        out["equals"] = eq
    return out


def scenario_from_dict(doc: dict, *, source: str = "scenario") -> Scenario:
    """Validate a decoded scenario document. Raises SchemaError with the
    dotted path of the first offending key."""
    allowed = {
        "name", "grid", "rho0", "mu", "controller", "integrator",
        "metrics", "analyses", "particles", "assertions", "output_dir", "seed",
    }
    required = {"name", "grid", "rho0", "mu", "controller", "integrator"}
    _check_keys(doc, allowed, required, source)

    _require(isinstance(doc["name"], str) and doc["name"], f"{source}.name",
             "expected a nonempty string")
    grid = _parse_grid(doc["grid"], f"{source}.grid")
    rho0 = _parse_density(doc["rho0"], f"{source}.rho0")
    mu = _parse_density(doc["mu"], f"{source}.mu")

    controller = doc["controller"]
    _require(isinstance(controller, str), f"{source}.controller", "expected a string")
    if controller not in controller_catalog():
        raise InitializerUnknownError(
            f"{source}.controller",
            f"unknown controller {controller!r}; known: {controller_catalog()}",
        )

    integrator = _parse_integrator(doc["integrator"], f"{source}.integrator")

    metrics = doc.get("metrics", [])
    _require(isinstance(metrics, list), f"{source}.metrics", "expected a list")
    for i, m in enumerate(metrics):
        _require(m in _METRIC_NAMES, f"{source}.metrics[{i}]",
                 f"unknown metric {m!r}; known: {list(_METRIC_NAMES)}")

    analyses_doc = doc.get("analyses", [])
    _require(isinstance(analyses_doc, list), f"{source}.analyses", "expected a list")
    analyses = [
        _parse_analysis(a, f"{source}.analyses[{i}]") for i, a in enumerate(analyses_doc)
    ]

    particles = None
    if "particles" in doc:
        particles = _parse_particles(doc["particles"], f"{source}.particles")

    assertions_doc = doc.get("assertions", [])
    _require(isinstance(assertions_doc, list), f"{source}.assertions", "expected a list")
    assertions = [
        _parse_assertion(a, f"{source}.assertions[{i}]")
        for i, a in enumerate(assertions_doc)
    ]

    output_dir = doc.get("output_dir")
    if output_dir is not None:
        _require(isinstance(output_dir, str), f"{source}.output_dir", "expected a string")

    seed = 0
    if "seed" in doc:
        seed = _integer(doc["seed"], f"{source}.seed")

    return Scenario(
        name=doc["name"], grid=grid, rho0=rho0, mu=mu, controller=controller,
        integrator=integrator, metrics=list(metrics), analyses=analyses,
        particles=particles, assertions=assertions, output_dir=output_dir, seed=seed,
    )


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError as ex:
        raise SchemaError(str(path), "file not found") from ex
    except json.JSONDecodeError as ex:
        raise SchemaError(str(path), f"invalid JSON: {ex}") from ex
    if not isinstance(doc, dict):
        raise SchemaError(str(path), "scenario document must be a JSON object")
    return scenario_from_dict(doc, source=p.stem)
