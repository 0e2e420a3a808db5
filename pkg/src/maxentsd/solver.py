"""Maximum entropy fit through the convex dual.

The density solving the moment problem has the form
``f(x) = exp(-log_z - <lam, h(x)>)``, where ``lam`` minimizes the dual
objective ``log Z(lam) + <lam, d>``. That objective is convex with gradient
``d - E_lam[h]`` and Hessian ``Cov_lam[h]``, so a damped Newton iteration
converges globally whenever a solution exists.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import EXPONENTIALS, MomentBasis, MomentVector, check_feasible, eval_basis
from .exceptions import (
    ConditioningError,
    ConfigurationError,
    InfeasibleError,
    InputError,
    NonConvergenceError,
    NumericError,
)
from .quadrature import DEFAULT_QUAD_POINTS, HALF_LINE, LEBESGUE, QuadratureRule, SupportSpec, build_rule

logger = logging.getLogger(__name__)

ARMIJO_SLOPE = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60
QUADRATIC_DECREMENT = 1e-10
EIG_FLOOR = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    """Newton solver settings.

    ``lambda_bound`` is the divergence threshold on ``||lam||`` used to
    declare the targets infeasible.
    """

    tol_grad: float = 1e-10
    max_iter: int = 200
    initial_lambda: tuple | None = None
    ridge: float = 0.0
    lambda_bound: float = 1e6

    def __post_init__(self):
        if not self.tol_grad > 0:
            raise ConfigurationError("tol_grad must be positive")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if self.ridge < 0:
            raise ConfigurationError("ridge must be non-negative")
        if not self.lambda_bound > 0:
            raise ConfigurationError("lambda_bound must be positive")

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SolverOptions":
        doc = dict(doc or {})
        if doc.get("initial_lambda") is not None:
            doc["initial_lambda"] = tuple(float(v) for v in doc["initial_lambda"])
        return cls(**doc)


class DualProblem:
    """``log Z`` and its derivatives for one basis on one quadrature rule.

    The basis matrix ``H[i, k] = h_k(x_i)`` is tabulated once at
    construction.
    """

    def __init__(self, basis: MomentBasis, rule: QuadratureRule):
        self.basis = basis
        self.rule = rule
        self.H = np.ascontiguousarray(eval_basis(basis, rule.nodes))
        self.w = rule.weights

    @property
    def M(self) -> int:
        return self.basis.M

    def _lam(self, lam) -> np.ndarray:
        lam = np.ascontiguousarray(lam, dtype=float).reshape(-1)
        if lam.size != self.M:
            raise InputError(f"expected {self.M} multipliers, got {lam.size}")
        if not np.all(np.isfinite(lam)):
            raise NumericError("multipliers must be finite")
        return lam

    def log_partition(self, lam) -> float:
        value = kernels.log_partition(self.H, self.w, self._lam(lam))
        if not math.isfinite(value):
            raise NumericError("partition function integrand vanished on every node")
        return value

    def moments(self, lam):
        """``(log Z, E[h], Cov[h])`` under the density with multipliers ``lam``."""
        log_z, mu, cov = kernels.tilted_moments(self.H, self.w, self._lam(lam))
        if not math.isfinite(log_z):
            raise NumericError("partition function integrand vanished on every node")
        return log_z, np.asarray(mu), np.asarray(cov)

    def objective(self, lam, d) -> float:
        return self.log_partition(lam) + float(np.dot(lam, d))

    def gradient(self, lam, d) -> np.ndarray:
        _, mu, _ = self.moments(lam)
        return np.asarray(d, dtype=float) - mu

    def hessian(self, lam) -> np.ndarray:
        return self.moments(lam)[2]


def partition_function(basis: MomentBasis, support: SupportSpec, rule: QuadratureRule | None, lam):
    """Return ``(Z, log Z)`` for multipliers ``lam``.

    ``Z`` overflows to ``inf`` for extreme multipliers; ``log Z`` stays finite.
    """
    rule = rule or build_rule(support)
    log_z = DualProblem(basis, rule).log_partition(lam)
    z = math.exp(log_z) if log_z < 709.0 else math.inf
    return z, log_z


def dual_objective(problem: DualProblem, lam, d) -> float:
    return problem.objective(lam, d)


def dual_gradient(problem: DualProblem, lam, d) -> np.ndarray:
    return problem.gradient(lam, d)


def dual_hessian(problem: DualProblem, lam) -> np.ndarray:
    return problem.hessian(lam)


@dataclass(frozen=True, eq=False)
class MaxentModel:
    """A fitted maximum entropy density.

    ``density(x) = exp(-log_z - <lam, h(x)>)`` with respect to the base
    measure of ``support``.
    """

    basis: MomentBasis
    support: SupportSpec
    rule: QuadratureRule
    lam: np.ndarray
    log_z: float
    target: MomentVector
    converged: bool = True
    iterations: int = 0
    grad_norm: float = 0.0
    _problem: DualProblem | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        if not isinstance(self.target, MomentVector):
            object.__setattr__(self, "target", MomentVector(self.target))

    @property
    def M(self) -> int:
        return self.basis.M

    @property
    def d(self) -> np.ndarray:
        return self.target.d

    @property
    def problem(self) -> DualProblem:
        if self._problem is None:
            object.__setattr__(self, "_problem", DualProblem(self.basis, self.rule))
        return self._problem

    def log_density(self, x) -> np.ndarray:
        return -self.log_z - eval_basis(self.basis, x) @ self.lam

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def lebesgue_density(self, x) -> np.ndarray:
        """Density with respect to ``dx`` (differs from :meth:`density` only for non-Lebesgue measures)."""
        return self.density(x) * self.support.measure_density(x)

    def node_values(self) -> np.ndarray:
        """Density at the quadrature nodes."""
        return np.exp(-self.log_z - self.problem.H @ self.lam)

    def reproduced_moments(self) -> np.ndarray:
        return self.rule.weights * self.node_values() @ self.problem.H

    def covariance(self) -> np.ndarray:
        return self.problem.hessian(self.lam)


def _dense_exponential_warning(basis, support):
    if basis.family == EXPONENTIALS and support.kind == HALF_LINE and support.measure == LEBESGUE:
        warnings.warn(
            "Laplace kernels on the half-line with Lebesgue measure have no integrable "
            "maximum entropy density; the fit reflects quadrature truncation. "
            "Use measure='exponential' for Laplace inversion.",
            RuntimeWarning,
            stacklevel=3,
        )


def fit(
    d,
    basis: MomentBasis,
    support: SupportSpec,
    opts: SolverOptions | None = None,
    rule: QuadratureRule | None = None,
    n_quad: int = DEFAULT_QUAD_POINTS,
    screen: bool = True,
) -> MaxentModel:
    """Fit the maximum entropy density matching moments ``d``.

    Damped Newton on the dual objective, with Armijo backtracking.

    Parameters
    ----------
    d : array_like or MomentVector
        Targets ``d_1, ..., d_M``.
    basis, support : MomentBasis, SupportSpec
    opts : SolverOptions, optional
    rule : QuadratureRule, optional
        Defaults to an ``n_quad``-point Gauss-Legendre rule on ``support``.
    screen : bool
        Run the cheap feasibility screen before iterating.

    Raises
    ------
    InfeasibleError
        The screen rejects ``d``, the multipliers diverge past
        ``opts.lambda_bound``, or the fitted mass collapses onto one node.
    NonConvergenceError
        ``opts.max_iter`` Newton steps without reaching ``opts.tol_grad``.
    ConditioningError
        The covariance matrix is numerically singular and ``opts.ridge`` is 0.
    """
    opts = opts or SolverOptions()
    target = d if isinstance(d, MomentVector) else MomentVector(d)
    dv = target.d
    if dv.size != basis.M:
        raise InputError(f"expected {basis.M} moments, got {dv.size}")
    if rule is None:
        _dense_exponential_warning(basis, support)
        rule = build_rule(support, n_quad)
    elif rule.support != support:
        raise InputError("quadrature rule was built for a different support")
    if screen:
        check_feasible(basis, support, dv)
    problem = DualProblem(basis, rule)

    if opts.initial_lambda is None:
        lam = np.zeros(basis.M)
    else:
        lam = np.array(opts.initial_lambda, dtype=float)
        if lam.size != basis.M:
            raise ConfigurationError(f"initial_lambda needs {basis.M} entries")

    log_z, mu, cov = problem.moments(lam)
    grad = dv - mu
    obj = log_z + lam @ dv
    gnorm = float(np.max(np.abs(grad)))
    it = 0
    while gnorm > opts.tol_grad:
        if it >= opts.max_iter:
            raise NonConvergenceError(
                f"no convergence after {it} Newton steps (|grad|_inf = {gnorm:.3e})",
                grad_norm=gnorm,
                iterations=it,
            )
        step = _newton_step(problem, lam, cov, grad, opts.ridge)
        slope = float(grad @ step)
        # below this Newton decrement the objective change is under round-off
        # and Armijo cannot discriminate; the full step is in the quadratic regime
        if slope <= QUADRATIC_DECREMENT:
            t, trial = 1.0, lam - step
            _check_bound(trial, opts.lambda_bound)
        else:
            t, trial = _backtrack(problem, lam, step, slope, obj, dv, opts.lambda_bound)
            if trial is None:
                if gnorm <= 1e3 * opts.tol_grad:
                    break
                raise NonConvergenceError(
                    f"line search failed after {it} Newton steps (|grad|_inf = {gnorm:.3e})",
                    grad_norm=gnorm,
                    iterations=it,
                )
        lam = trial
        it += 1
        log_z, mu, cov = problem.moments(lam)
        grad = dv - mu
        obj = log_z + lam @ dv
        gnorm = float(np.max(np.abs(grad)))
        logger.debug("newton %d: obj=%.16g |grad|=%.3e step=%g", it, obj, gnorm, t)

    return MaxentModel(
        basis=basis,
        support=support,
        rule=rule,
        lam=lam,
        log_z=float(log_z),
        target=target,
        converged=True,
        iterations=it,
        grad_norm=gnorm,
        _problem=problem,
    )


def _check_bound(lam, bound):
    if float(np.linalg.norm(lam)) > bound:
        raise InfeasibleError(f"multipliers diverged past {bound:g}; the moments are not attainable")


def _backtrack(problem, lam, step, slope, obj, d, bound):
    """Armijo backtracking; returns ``(t, lam - t * step)`` or ``(t, None)`` on failure."""
    t = 1.0
    for _ in range(MAX_BACKTRACKS):
        trial = lam - t * step
        _check_bound(trial, bound)
        if problem.log_partition(trial) + trial @ d <= obj - ARMIJO_SLOPE * t * slope:
            return t, trial
        t *= BACKTRACK
    return t, None


def _newton_step(problem: DualProblem, lam, cov, grad, ridge):
    mat = cov + ridge * np.eye(cov.shape[0]) if ridge else cov
    eig = np.linalg.eigvalsh(mat)
    if eig[-1] <= 0 or eig[0] <= EIG_FLOOR * eig[-1]:
        p = problem.w * np.exp(-(problem.H @ lam) - (-(problem.H @ lam)).max())
        if p.max() >= (1.0 - 1e-9) * p.sum():
            raise InfeasibleError("the fitted mass collapsed onto a single node; the moments are on the boundary")
        raise ConditioningError(
            f"covariance of h is numerically singular (eigenvalues {eig.tolist()}); "
            "reduce the number of moments or set a positive ridge",
            eigenvalues=eig,
        )
    return np.linalg.solve(mat, grad)


def density_eval(model: MaxentModel, x):
    return model.density(x)


def entropy_primal(model: MaxentModel) -> float:
    """``-integral f log f dm`` by quadrature."""
    logf = -model.log_z - model.problem.H @ model.lam
    return float(-np.dot(model.rule.weights, np.exp(logf) * logf))


def dual_value(model: MaxentModel) -> float:
    return model.log_z + float(model.lam @ model.d)


def duality_gap(model: MaxentModel) -> float:
    """``|primal entropy - dual objective|`` at the fitted multipliers."""
    return abs(entropy_primal(model) - dual_value(model))


def model_from_lambda(basis, support, lam, rule=None, n_quad=DEFAULT_QUAD_POINTS) -> MaxentModel:
    """Materialize the density with given multipliers (its target is its own moments)."""
    rule = rule or build_rule(support, n_quad)
    problem = DualProblem(basis, rule)
    log_z, mu, _ = problem.moments(lam)
    return MaxentModel(basis, support, rule, lam, log_z, MomentVector(mu), True, 0, 0.0, problem)
