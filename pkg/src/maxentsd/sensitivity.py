"""First-order dependence of the maximum entropy density on its moments.

Conventions
-----------
``C`` is the covariance of ``h`` under ``f*`` (the Hessian of ``log Z``).
``D = d lam* / d d = -C^{-1}`` is negative definite, and ``|D| = C^{-1}``.
A moment perturbation ``delta`` then moves the density by
``-f*(x) <h(x) - d, D delta>`` to first order.

Bounds on a functional ``integral g f dm`` go through the vector
``u = integral h g f* dm - d integral g f* dm``. The first-order change is
``-<u, D delta>``, and Cauchy-Schwarz in the ``|D|`` inner product gives
``<u, D delta>**2 <= (u' |D| u) (delta' |D| delta)``. This ``"metric"``
weighting is the default. ``weighting="euclidean"`` uses ``||u||**2`` in
place of ``u' |D| u``, which is not a valid bound in general.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import eval_basis
from .exceptions import ConditioningError, InputError
from .quadrature import build_subrule

EIG_FLOOR = 1e-12
DEFAULT_Z = 1.96


@dataclass(frozen=True)
class Indicator:
    """Indicator of ``[lo, hi]``, integrated exactly on a dedicated sub-rule."""

    lo: float
    hi: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return ((x >= self.lo) & (x <= self.hi)).astype(float)

    def to_dict(self):
        return {"kind": "indicator", "lo": self.lo, "hi": None if math.isinf(self.hi) else self.hi}


def make_functional(doc):
    """Build a test function ``g`` from its JSON description.

    Accepted forms: ``{"kind": "indicator", "lo", "hi"}``, ``{"kind": "one"}``,
    ``{"kind": "constant", "value"}``, ``{"kind": "power", "p"}``, ``{"kind": "exp", "alpha"}``.
    """
    kind = doc.get("kind")
    if kind == "indicator":
        hi = doc.get("hi")
        return Indicator(float(doc["lo"]), math.inf if hi is None else float(hi))
    if kind == "one":
        return Constant(1.0)
    if kind == "constant":
        return Constant(float(doc["value"]))
    if kind == "power":
        return Power(float(doc["p"]))
    if kind == "exp":
        return Laplace(float(doc["alpha"]))
    raise InputError(f"unknown functional kind {kind!r}")


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, x):
        return np.full(np.shape(x), self.value, dtype=float)

    def to_dict(self):
        return {"kind": "one"} if self.value == 1.0 else {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Power:
    p: float

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** self.p

    def to_dict(self):
        return {"kind": "power", "p": self.p}


@dataclass(frozen=True)
class Laplace:
    alpha: float

    def __call__(self, x):
        return np.exp(-self.alpha * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"kind": "exp", "alpha": self.alpha}


def abs_matrix(D) -> np.ndarray:
    """Matrix absolute value ``V |diag| V'`` of a symmetric matrix."""
    D = 0.5 * (np.asarray(D, dtype=float) + np.asarray(D, dtype=float).T)
    vals, vecs = np.linalg.eigh(D)
    return (vecs * np.abs(vals)) @ vecs.T


def jacobian_D(model) -> np.ndarray:
    """``D = -C^{-1}``, the Jacobian of the multipliers with respect to the moments.

    Raises :class:`ConditioningError` when the smallest eigenvalue of ``C`` is
    below ``1e-12`` times the largest.
    """
    C = model.covariance()
    C = 0.5 * (C + C.T)
    eig = np.linalg.eigvalsh(C)
    if eig[-1] <= 0 or eig[0] <= EIG_FLOOR * eig[-1]:
        raise ConditioningError(
            f"covariance of h under f* is not safely invertible (eigenvalues {eig.tolist()})",
            eigenvalues=eig,
        )
    D = -np.linalg.inv(C)
    return 0.5 * (D + D.T)


def perturb_density(model, D, delta_d, x):
    """First-order change ``-f*(x) <h(x) - d, D delta_d>`` of the density at ``x``."""
    delta_d = np.asarray(delta_d, dtype=float).reshape(-1)
    if delta_d.size != model.M:
        raise InputError(f"delta_d needs {model.M} entries")
    if np.linalg.norm(delta_d) > 0.1 * np.linalg.norm(model.d):
        warnings.warn("delta_d exceeds 10% of d; the linearization may be poor", RuntimeWarning, stacklevel=2)
    h = eval_basis(model.basis, x)
    return -model.density(x) * ((h - model.d) @ (np.asarray(D) @ delta_d))


def functional_moments(model, g):
    """Return ``(integral g f* dm, integral h g f* dm)``."""
    if isinstance(g, Constant):
        return g.value, g.value * model.d
    if isinstance(g, Indicator):
        sub = build_subrule(model.support, g.lo, g.hi)
        if sub is None:
            return 0.0, np.zeros(model.M)
        x, w = sub.nodes, sub.weights
        gv = np.ones_like(x)
    else:
        x, w = model.rule.nodes, model.rule.weights
        gv = np.asarray(g(x), dtype=float) if callable(g) else np.broadcast_to(float(g), x.shape)
    f = model.density(x)
    weights = w * gv * f
    return float(weights.sum()), weights @ eval_basis(model.basis, x)


def coefficient_vector(model, g) -> np.ndarray:
    """``u = integral h g f* dm - d integral g f* dm``."""
    mass, hg = functional_moments(model, g)
    return hg - model.d * mass


def _weight(u, D, weighting):
    if weighting == "metric":
        return float(u @ abs_matrix(D) @ u)
    if weighting == "euclidean":
        return float(u @ u)
    raise InputError(f"unknown weighting {weighting!r}")


def functional_delta_bound(model, D, g, delta_d, weighting: str = "metric"):
    """``(lhs, rhs)`` for the squared first-order change of ``integral g f dm``.

    ``lhs = <u, D delta>**2`` and ``rhs = (u' |D| u) |<delta, D delta>|``;
    ``lhs <= rhs`` by Cauchy-Schwarz.
    """
    D = np.asarray(D, dtype=float)
    delta_d = np.asarray(delta_d, dtype=float).reshape(-1)
    u = coefficient_vector(model, g)
    lhs = float(u @ D @ delta_d) ** 2
    rhs = _weight(u, D, weighting) * abs(float(delta_d @ D @ delta_d))
    return lhs, rhs


def chebyshev_tail(sigma_h, D, N, a) -> float:
    """Chebyshev bound ``tr(|D| Sigma(h)) / (N a**2)`` on ``P(|| |D|^{1/2} (d_hat - d) || > a)``."""
    if not a > 0:
        raise InputError("a must be positive")
    if N < 1:
        raise InputError("N must be at least 1")
    return float(np.trace(abs_matrix(D) @ np.asarray(sigma_h, dtype=float))) / (N * a * a)


def corollary_band(model, D, sigma_h, g, N, a, weighting: str = "metric") -> float:
    """Lower bound on ``P(|integral g f_hat dm - integral g f* dm| <= a)``, clipped to ``[0, 1]``."""
    u = coefficient_vector(model, g)
    miss = _weight(u, D, weighting) * chebyshev_tail(sigma_h, D, N, a)
    return float(min(1.0, max(0.0, 1.0 - miss)))


def clt_sigma2_x(model, D, sigma_h, x):
    """Asymptotic variance of ``sqrt(N) (f_hat(x) - f*(x))``."""
    h = eval_basis(model.basis, x)
    v = (h - model.d) @ np.asarray(D)
    quad = np.einsum("...i,ij,...j->...", v, np.asarray(sigma_h, dtype=float), v)
    return model.density(x) ** 2 * np.maximum(quad, 0.0)


def clt_sigma2_g(model, D, sigma_h, g) -> float:
    """Asymptotic variance of ``sqrt(N) (integral g f_hat dm - integral g f* dm)``."""
    w = np.asarray(D) @ coefficient_vector(model, g)
    return max(float(w @ np.asarray(sigma_h, dtype=float) @ w), 0.0)


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    C: np.ndarray
    D: np.ndarray
    sigma_h: np.ndarray
    sigma2_grid: np.ndarray
    model: object = field(repr=False)
    N: int | None = None

    def band(self, x, N=None, z: float = DEFAULT_Z):
        """Rows ``(x, f*, sigma2, lo, hi)`` of the CLT band ``f* +- z sigma(x) / sqrt(N)``."""
        N = N or self.N
        if not N:
            raise InputError("a sample size is needed for the band")
        x = np.asarray(x, dtype=float)
        f = self.model.density(x)
        s2 = clt_sigma2_x(self.model, self.D, self.sigma_h, x)
        half = z * np.sqrt(s2 / N)
        return np.column_stack([x, f, s2, f - half, f + half])

    def to_dict(self) -> dict:
        return {
            "C": self.C.tolist(),
            "D": self.D.tolist(),
            "sigma_h": self.sigma_h.tolist(),
            "nodes": self.model.rule.nodes.tolist(),
            "sigma2_grid": self.sigma2_grid.tolist(),
            "N": self.N,
            "chebyshev_trace": float(np.trace(abs_matrix(self.D) @ self.sigma_h)),
        }


def analyze(model, sigma_h, N: int | None = None) -> SensitivityReport:
    """Assemble ``C``, ``D`` and the ``sigma^2(x)`` grid for a fitted model."""
    sigma_h = np.atleast_2d(np.asarray(sigma_h, dtype=float))
    if sigma_h.shape != (model.M, model.M):
        raise InputError(f"Sigma(h) must be {model.M}x{model.M}")
    C = model.covariance()
    D = jacobian_D(model)
    s2 = clt_sigma2_x(model, D, sigma_h, model.rule.nodes)
    return SensitivityReport(0.5 * (C + C.T), D, sigma_h, s2, model, N)
