"""Maximum entropy reconstruction from moments and its sample dependence.

The main entry points are re-exported here; see the submodules for the
full API.
"""
from .basis import MomentBasis, MomentVector, SampleSet, estimate_moments, eval_basis, sample_covariance
from .divergence import GridDensity, dual_form_divergence, kl_divergence, pinsker_gap, shannon_entropy
from .exceptions import (
    ConditioningError,
    ConfigurationError,
    InfeasibleError,
    InputError,
    MaxentError,
    NonConvergenceError,
    NumericError,
)
from .kernels import BACKEND
from .quadrature import QuadratureRule, SupportSpec, build_rule, integrate
from .sensitivity import SensitivityReport, analyze, jacobian_D, perturb_density
from .solver import MaxentModel, SolverOptions, duality_gap, entropy_primal, fit

__version__ = "0.1.0"
