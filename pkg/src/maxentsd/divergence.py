"""Entropy and Kullback-Leibler functionals on a shared quadrature grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .quadrature import QuadratureRule

ZERO_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class GridDensity:
    """A non-negative function tabulated at the nodes of ``rule``."""

    rule: QuadratureRule
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape != self.rule.nodes.shape:
            raise InputError("density values must match the quadrature nodes")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("density values must be finite and non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, rule: QuadratureRule, fn, normalize: bool = False) -> "GridDensity":
        values = np.asarray(fn(rule.nodes), dtype=float)
        if normalize:
            values = values / np.dot(rule.weights, values)
        return cls(rule, values)

    @classmethod
    def from_model(cls, model) -> "GridDensity":
        return cls(model.rule, model.node_values())

    @property
    def mass(self) -> float:
        return float(np.dot(self.rule.weights, self.values))

    def normalized(self) -> "GridDensity":
        return GridDensity(self.rule, self.values / self.mass)


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v >= ZERO_FLOOR
    out[pos] = v[pos] * np.log(v[pos])
    return out


def _same_grid(f: GridDensity, g: GridDensity) -> None:
    if f.rule is not g.rule and not (
        np.array_equal(f.rule.nodes, g.rule.nodes) and np.array_equal(f.rule.weights, g.rule.weights)
    ):
        raise InputError("densities live on different quadrature grids")


def shannon_entropy(f: GridDensity) -> float:
    """``-integral f log f dm`` with ``0 log 0 = 0``."""
    return float(-np.dot(f.rule.weights, _xlogx(f.values)))


def extended_entropy(f: GridDensity) -> float:
    """Entropy of an unnormalized density: ``-integral f log f dm + (integral f dm - 1)``."""
    return shannon_entropy(f) + f.mass - 1.0


def kl_divergence(f: GridDensity, g: GridDensity) -> float:
    """``integral f log(f / g) dm``.

    Raises :class:`InputError` if ``f`` charges a node where ``g`` vanishes.
    """
    _same_grid(f, g)
    fv, gv = f.values, g.values
    pos = fv >= ZERO_FLOOR
    bad = pos & (gv < ZERO_FLOOR)
    if bad.any():
        node = float(f.rule.nodes[np.argmax(bad)])
        raise InputError(f"support mismatch: f > 0 but g = 0 at x={node!r}")
    terms = np.zeros_like(fv)
    terms[pos] = fv[pos] * (np.log(fv[pos]) - np.log(gv[pos]))
    return float(np.dot(f.rule.weights, terms))


def l1_distance(f: GridDensity, g: GridDensity) -> float:
    _same_grid(f, g)
    return float(np.dot(f.rule.weights, np.abs(f.values - g.values)))


def pinsker_gap(f: GridDensity, g: GridDensity):
    """``(||f - g||_1**2 / 4, K(f, g))``; the first never exceeds the second."""
    return 0.25 * l1_distance(f, g) ** 2, kl_divergence(f, g)


def dual_form_divergence(model_hat, model_star) -> float:
    """``K(f_hat, f_star)`` from multipliers alone.

    Uses ``<lam_star - lam_hat, d_hat> + log Z(lam_star) - log Z(lam_hat)``,
    which is exact when ``f_hat`` reproduces ``d_hat``.
    """
    if model_hat.basis != model_star.basis or model_hat.support != model_star.support:
        raise InputError("models must share basis and support")
    d_hat = model_hat.d
    return float(
        np.dot(model_star.lam, d_hat)
        - np.dot(model_hat.lam, d_hat)
        + model_star.log_z
        - model_hat.log_z
    )
