"""Desk-scale laboratory for the second-term asymptotics of the eigenvalue
counting function of 1d Schrodinger operators with random decaying potential.

Exact Fourier-space computation of the deterministic drift and covariance
constants is combined with Monte Carlo phase dynamics along Brownian paths on
the circle; eigenvalues are counted by oscillation floors with an independent
finite-difference inertia oracle.
"""

__version__ = "0.1.0"

from .constants import (
    ConstantsTable,
    CovarianceConstants,
    MotzkinIndex,
    apply_T,
    compute_Ck,
    covariance_constants,
    critical_variance_per_log_n,
    drift_prediction,
    enumerate_Sk,
    variance_prediction,
)
from .errors import ConfigError, ConsistencyError, DomainError
from .paths import EnvelopeProfile, TorusPath, make_generator, sample_path
from .pruefer import (
    CountResult,
    PrueferTrajectory,
    count_interval,
    fd_count,
    fd_count_interval,
    integrate_theta,
    theta_tilde_at,
)
from .torusfield import (
    TorusFunction,
    carre_du_champ,
    gradient,
    mean,
    multiply,
    resolvent_shifted,
    resolvent_zero,
)

__all__ = [
    "ConstantsTable",
    "CovarianceConstants",
    "MotzkinIndex",
    "apply_T",
    "compute_Ck",
    "covariance_constants",
    "critical_variance_per_log_n",
    "drift_prediction",
    "enumerate_Sk",
    "variance_prediction",
    "ConfigError",
    "ConsistencyError",
    "DomainError",
    "EnvelopeProfile",
    "TorusPath",
    "make_generator",
    "sample_path",
    "CountResult",
    "PrueferTrajectory",
    "count_interval",
    "fd_count",
    "fd_count_interval",
    "integrate_theta",
    "theta_tilde_at",
    "TorusFunction",
    "carre_du_champ",
    "gradient",
    "mean",
    "multiply",
    "resolvent_shifted",
    "resolvent_zero",
    "__version__",
]
