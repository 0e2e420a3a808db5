"""Base measure space and Gauss-Legendre integration over it.

A :class:`SupportSpec` describes the set ``S`` together with the measure
``m``; a :class:`QuadratureRule` is a positive-weight discretization of
``m`` that every other module integrates against.

Two measures are available on the half-line ``[a, inf)``:

``lebesgue``
    Plain ``dx``. The rule comes from the substitution
    ``x = a - scale * log(1 - t)`` with the Jacobian folded into the weights.
``exponential``
    The finite measure ``exp(-(x - a) / scale) / scale dx``. Under the same
    substitution this is Lebesgue measure on ``t in (0, 1)``, so the weights
    are the bare Gauss-Legendre weights. Bounded bases (the Laplace kernels
    ``exp(-alpha x)``) have an integrable partition function only under this
    measure.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import ConfigurationError, NumericError

DEFAULT_QUAD_POINTS = 128

FINITE = "finite_interval"
HALF_LINE = "half_line"
LEBESGUE = "lebesgue"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class SupportSpec:
    """The support ``S`` and its base measure ``m``.

    Parameters
    ----------
    kind : {"finite_interval", "half_line"}
    a : float
        Lower endpoint.
    b : float, optional
        Upper endpoint, finite intervals only.
    halfline_scale : float
        Decay scale of the logarithmic change of variables (half-line only).
    measure : {"lebesgue", "exponential"}
        Base measure. ``exponential`` is only meaningful on the half-line.
    """

    kind: str = FINITE
    a: float = 0.0
    b: float | None = 1.0
    halfline_scale: float = 1.0
    measure: str = LEBESGUE

    def __post_init__(self):
        if self.kind == FINITE:
            if self.b is None or not (math.isfinite(self.a) and math.isfinite(self.b)):
                raise ConfigurationError("finite_interval needs finite endpoints a and b")
            if not self.a < self.b:
                raise ConfigurationError(f"finite_interval needs a < b, got a={self.a}, b={self.b}")
            if self.measure != LEBESGUE:
                raise ConfigurationError("finite_interval only supports the lebesgue measure")
        elif self.kind == HALF_LINE:
            if not math.isfinite(self.a):
                raise ConfigurationError("half_line needs a finite lower endpoint")
            if not (self.halfline_scale > 0 and math.isfinite(self.halfline_scale)):
                raise ConfigurationError("half_line needs halfline_scale > 0")
            if self.measure not in (LEBESGUE, EXPONENTIAL):
                raise ConfigurationError(f"unknown measure {self.measure!r}")
            object.__setattr__(self, "b", None)
        else:
            raise ConfigurationError(f"unknown support kind {self.kind!r}")

    @classmethod
    def finite(cls, a: float = 0.0, b: float = 1.0) -> "SupportSpec":
        return cls(FINITE, float(a), float(b))

    @classmethod
    def half_line(cls, a: float = 0.0, scale: float = 1.0, measure: str = LEBESGUE) -> "SupportSpec":
        return cls(HALF_LINE, float(a), None, float(scale), measure)

    @property
    def upper(self) -> float:
        return self.b if self.kind == FINITE else math.inf

    def contains(self, x) -> np.ndarray:
        """Boolean mask of the points of ``x`` lying in ``S``."""
        x = np.asarray(x, dtype=float)
        inside = np.isfinite(x) & (x >= self.a)
        if self.kind == FINITE:
            inside &= x <= self.b
        return inside

    def measure_density(self, x) -> np.ndarray:
        """``dm/dx`` at ``x`` (1 for Lebesgue)."""
        x = np.asarray(x, dtype=float)
        if self.measure == EXPONENTIAL:
            s = self.halfline_scale
            return np.exp(-(x - self.a) / s) / s
        return np.ones_like(x)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "a": self.a}
        if self.kind == FINITE:
            out["b"] = self.b
        else:
            out["halfline_scale"] = self.halfline_scale
            out["measure"] = self.measure
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "SupportSpec":
        kind = doc.get("kind", FINITE)
        if kind == FINITE:
            return cls(FINITE, float(doc.get("a", 0.0)), float(doc.get("b", 1.0)))
        return cls(
            kind,
            float(doc.get("a", 0.0)),
            None,
            float(doc.get("halfline_scale", 1.0)),
            doc.get("measure", LEBESGUE),
        )


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and strictly positive weights discretizing ``m`` on ``S``."""

    nodes: np.ndarray
    weights: np.ndarray
    support: SupportSpec

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ConfigurationError("nodes and weights must be 1-d arrays of equal length")
        if not np.all(weights > 0):
            raise ConfigurationError("quadrature weights must be strictly positive")
        if not np.all(self.support.contains(nodes)):
            raise ConfigurationError("quadrature nodes must lie inside the support")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.nodes.size

    def integrate(self, fn) -> float:
        return integrate(self, fn)


@lru_cache(maxsize=32)
def _unit_gauss(n: int):
    t, w = leggauss(n)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def build_rule(support: SupportSpec, n: int = DEFAULT_QUAD_POINTS) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` points for the measure of ``support``.

    >>> rule = build_rule(SupportSpec.finite(0.0, 2.0), 16)
    >>> round(float(rule.weights.sum()), 12)
    2.0
    """
    if int(n) != n or n < 2:
        raise ConfigurationError(f"quadrature needs an integer n >= 2, got {n!r}")
    t, w = _unit_gauss(int(n))
    if support.kind == FINITE:
        width = support.b - support.a
        return QuadratureRule(support.a + width * t, width * w, support)
    s = support.halfline_scale
    x = support.a - s * np.log1p(-t)
    if support.measure == LEBESGUE:
        w = w * s / (1.0 - t)
    return QuadratureRule(x, w, support)


def build_subrule(support: SupportSpec, lo: float, hi: float, n: int = 64) -> QuadratureRule | None:
    """Rule for ``m`` restricted to ``[lo, hi]``, or ``None`` if the overlap is empty.

    Used to integrate indicator functions without a jump inside a
    Gauss-Legendre panel.
    """
    lo = max(lo, support.a)
    hi = min(hi, support.upper)
    if not lo < hi:
        return None
    if math.isinf(hi):
        shifted = SupportSpec.half_line(lo, support.halfline_scale, LEBESGUE)
        base = build_rule(shifted, n)
        # rescale to m: Lebesgue weights times dm/dx
        weights = base.weights * support.measure_density(base.nodes)
        keep = weights > 0
        return QuadratureRule(base.nodes[keep], weights[keep], support)
    t, w = _unit_gauss(n)
    x = lo + (hi - lo) * t
    return QuadratureRule(x, (hi - lo) * w * support.measure_density(x), support)


def integrate(rule: QuadratureRule, fn: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> float:
    """``sum_i w_i fn(x_i)``.

    ``fn`` is either a vectorized callable evaluated at the nodes or an
    array of values already tabulated on them.
    """
    values = fn(rule.nodes) if callable(fn) else fn
    values = np.broadcast_to(np.asarray(values, dtype=float), rule.nodes.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        node = float(rule.nodes[np.argmax(bad)])
        raise NumericError(f"integrand is not finite at node x={node!r}", node=node)
    return float(np.dot(rule.weights, values))
