"""JSON and CSV artifacts.

Floats are written with ``repr`` so files round-trip exactly and repeated
runs produce byte-identical output.
"""
from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from .basis import MomentBasis, MomentVector
from .exceptions import ConfigurationError
from .quadrature import DEFAULT_QUAD_POINTS, FINITE, SupportSpec, build_rule
from .solver import DualProblem, MaxentModel

SCHEMA_NAMES = ("common", "fit", "analyze", "simulate", "invert_laplace", "model")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))


def write_csv(path, header, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("maxentsd").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry() -> Registry:
    return Registry().with_resources(
        (f"{n}.json", Resource.from_contents(load_schema(n))) for n in SCHEMA_NAMES
    )


def validate(doc, schema_name: str) -> None:
    """Raise :class:`ConfigurationError` naming the path of the first violation."""
    validator = Draft202012Validator(load_schema(schema_name), registry=_registry())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        schema_path = "/".join(str(p) for p in err.absolute_schema_path)
        raise ConfigurationError(f"config error at {where} (schema: {schema_path}): {err.message}")


def model_to_dict(model: MaxentModel) -> dict:
    return {
        "basis": model.basis.to_dict(),
        "support": model.support.to_dict(),
        "lambda": model.lam.tolist(),
        "log_z": model.log_z,
        "target": model.d.tolist(),
        "grad_norm": model.grad_norm,
        "iterations": model.iterations,
        "converged": model.converged,
        "quad_points": model.rule.n,
    }


def model_from_dict(doc: dict) -> MaxentModel:
    validate(doc, "model")
    support = SupportSpec.from_dict(doc["support"])
    basis = MomentBasis.from_dict(doc["basis"])
    rule = build_rule(support, int(doc.get("quad_points", DEFAULT_QUAD_POINTS)))
    return MaxentModel(
        basis,
        support,
        rule,
        np.asarray(doc["lambda"], dtype=float),
        float(doc["log_z"]),
        MomentVector(doc["target"]),
        bool(doc.get("converged", True)),
        int(doc["iterations"]),
        float(doc["grad_norm"]),
        DualProblem(basis, rule),
    )


def density_grid(support: SupportSpec, n: int = 512, grid_max: float | None = None) -> np.ndarray:
    """Evenly spaced abscissas; half-lines stop at ``grid_max`` (default ``a + 10 * scale``)."""
    if n < 2:
        raise ConfigurationError("grid_points must be at least 2")
    if support.kind == FINITE:
        return np.linspace(support.a, support.b, n)
    hi = support.a + 10.0 * support.halfline_scale if grid_max is None else float(grid_max)
    if not hi > support.a:
        raise ConfigurationError("grid_max must exceed the lower endpoint")
    return np.linspace(support.a, hi, n)


def write_density_csv(path, model: MaxentModel, x) -> None:
    """Two columns ``x, f`` with ``f`` the density with respect to ``dx``."""
    write_csv(path, ["x", "f"], zip(x, model.lebesgue_density(x)))


def write_band_csv(path, rows) -> None:
    write_csv(path, ["x", "f_star", "sigma2", "band_lo", "band_hi"], rows)


def write_replicates_csv(path, result) -> None:
    """One row per ``(N, replicate)``; failed fits keep ``d_hat`` and carry NaN elsewhere."""
    M = result.config.basis.M
    header = (
        ["N", "replicate"]
        + [f"d_hat_{k + 1}" for k in range(M)]
        + [f"lambda_hat_{k + 1}" for k in range(M)]
        + ["l1_err", "kl", "sup_err", "chan1_resid", "status"]
    )
    rows = []
    for cell in result.cells:
        for r, status in enumerate(cell.status):
            rows.append(
                [cell.N, r, *cell.d_hat[r], *cell.lam_hat[r], cell.l1[r], cell.kl[r], cell.sup[r], cell.chan1_resid[r], status]
            )
    write_csv(path, header, rows)
