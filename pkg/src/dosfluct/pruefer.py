"""Phase integration and eigenvalue counting along one sampled path.

Counting never detects crossings: the phase theta_t(kappa) can only move
upward through multiples of pi (its slope there is kappa > 0), so the final
floor(theta_n / pi) equals the number of Dirichlet eigenvalues below kappa^2
on [0, n] and the count in (kappa1^2, kappa2^2) is an exact difference of two
floors.  An independent oracle rebuilds the operator as a 3-point
finite-difference matrix on the same frozen potential and counts eigenvalues
below E by Sturm-sequence inertia.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError
from .paths import EnvelopeProfile, TorusPath
from .torusfield import TorusFunction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrueferTrajectory:
    """theta_t(kappa) and theta_tilde_t(kappa) = theta - kappa*t on one path."""

    kappa: float
    times: np.ndarray
    theta: np.ndarray
    theta_tilde: np.ndarray
    path_seed: tuple[int, int]
    envelope: EnvelopeProfile

    def final_theta(self) -> float:
        return float(self.theta[-1])


@dataclass(frozen=True)
class CountResult:
    """Eigenvalue count of the box restriction in (kappa1^2, kappa2^2)."""

    kappa1: float
    kappa2: float
    n: float
    count: int
    floor1: int
    floor2: int

    def to_json_obj(self) -> dict:
        return {
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "n": self.n,
            "count": self.count,
            "floor1": self.floor1,
            "floor2": self.floor2,
        }


def potential_on_grid(path: TorusPath, env: EnvelopeProfile,
                      F: TorusFunction) -> tuple[np.ndarray, np.ndarray]:
    """q = a(t) F(X_t) on the path grid and at step midpoints (linear X)."""
    xs = path.unwrapped()
    xm = 0.5 * (xs[:-1] + xs[1:])
    tg = path.times()
    tm = tg[:-1] + 0.5 * path.dt
    qg = env.values(tg) * F.evaluate_real(xs)
    qm = env.values(tm) * F.evaluate_real(xm)
    return qg, qm


def integrate_theta(
    path: TorusPath,
    env: EnvelopeProfile,
    kappa: float,
    substeps: int = 1,
    F: TorusFunction | None = None,
) -> PrueferTrajectory:
    """Integrate theta' = kappa - (a F(X)/kappa) sin^2 theta, theta(0) = 0,
    with a classical 4th-order step (``substeps`` sub-intervals per path step).
    """
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if substeps < 1:
        raise DomainError(f"substeps must be >= 1, got {substeps}")
    if F is None:
        F = TorusFunction.cosine(1)
    theta = np.empty(path.nsteps + 1)
    f0, fks, fre, fim = F.real_mode_arrays()
    if substeps == 1:
        tg = path.times()
        ag = env.values(tg)
        am = env.values(tg[:-1] + 0.5 * path.dt)
        kernels.rk4_sweep_dense(path.unwrapped(), ag, am, path.dt, kappa,
                                f0, fks, fre, fim, 0.0, theta)
    else:
        env_code, env_param = env.kernel_params()
        kernels.rk4_sweep_substeps(
            path.unwrapped(), 0.0, path.dt, substeps, kappa,
            env_code, env_param, f0, fks, fre, fim, 0.0, theta,
        )
    times = path.times()
    return PrueferTrajectory(
        kappa=kappa,
        times=times,
        theta=theta,
        theta_tilde=theta - kappa * times,
        path_seed=path.seed,
        envelope=env,
    )


def theta_tilde_at(traj: PrueferTrajectory, t: float) -> float:
    """Linear interpolation of theta_tilde at t within the grid span."""
    if t < traj.times[0] or t > traj.times[-1] + 1e-12:
        raise DomainError(
            f"t={t} outside trajectory span [{traj.times[0]}, {traj.times[-1]}]"
        )
    return float(np.interp(t, traj.times, traj.theta_tilde))


def _theta_at(traj: PrueferTrajectory, t: float) -> float:
    if t < traj.times[0] or t > traj.times[-1] + 1e-12:
        raise DomainError(
            f"t={t} outside trajectory span [{traj.times[0]}, {traj.times[-1]}]"
        )
    return float(np.interp(t, traj.times, traj.theta))


def count_interval(traj1: PrueferTrajectory, traj2: PrueferTrajectory,
                   n: float) -> CountResult:
    """N_n(kappa1, kappa2) = floor(theta_n(k2)/pi) - floor(theta_n(k1)/pi)."""
    if traj1.kappa > traj2.kappa:
        raise DomainError(
            f"need kappa1 <= kappa2, got {traj1.kappa} > {traj2.kappa}"
        )
    if traj1.path_seed != traj2.path_seed or traj1.envelope != traj2.envelope:
        raise DomainError(
            "trajectories come from different potentials "
            f"(seeds {traj1.path_seed} vs {traj2.path_seed}); "
            "counts across different potentials are meaningless"
        )
    floor1 = math.floor(_theta_at(traj1, n) / math.pi)
    floor2 = math.floor(_theta_at(traj2, n) / math.pi)
    return CountResult(
        kappa1=traj1.kappa, kappa2=traj2.kappa, n=n,
        count=floor2 - floor1, floor1=floor1, floor2=floor2,
    )


def fd_count(
    path: TorusPath,
    env: EnvelopeProfile,
    n: float,
    h: float,
    E: float,
    F: TorusFunction | None = None,
) -> int:
    """Dirichlet eigenvalues of the 3-point discretization of
    -d^2/dt^2 + a F(X) on [0, n] strictly below E, by Sturm-sequence inertia
    of (A - E I).  O(n/h) time, O(1) factorization state."""
    if h <= 0 or n <= 0:
        raise DomainError(f"need h > 0 and n > 0, got h={h}, n={n}")
    if F is None:
        F = TorusFunction.cosine(1)
    m = int(round(n / h))
    if abs(m * h - n) > 1e-9 * max(1.0, n):
        raise DomainError(f"h={h} does not divide the box length {n}")
    if m < 2:
        raise DomainError(f"grid too coarse: only {m} cells on [0, {n}]")
    ts = h * np.arange(1, m)
    xs = np.interp(ts, path.times(), path.unwrapped())
    q = env.values(ts) * F.evaluate_real(xs)
    shift = 0.0
    scale = max(1.0, abs(E))
    for attempt in range(4):
        count, breakdown = kernels.tridiag_negative_pivots(q, h, E + shift)
        if not breakdown:
            return int(count)
        shift = (1e-11 if shift == 0.0 else shift * 100.0) * scale
        log.warning(
            "pivot breakdown in inertia count at E=%r; retrying with shift %.3e",
            E, shift,
        )
    raise DomainError(f"inertia count failed after shifted retries at E={E}")


def fd_count_interval(
    path: TorusPath,
    env: EnvelopeProfile,
    n: float,
    h: float,
    E1: float,
    E2: float,
    F: TorusFunction | None = None,
) -> int:
    """fd_count(E2) - fd_count(E1) on the same frozen potential."""
    if E1 > E2:
        raise DomainError(f"need E1 <= E2, got {E1} > {E2}")
    if E1 == E2:
        return 0
    return fd_count(path, env, n, h, E2, F=F) - fd_count(path, env, n, h, E1, F=F)
