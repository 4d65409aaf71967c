"""Decay envelopes and Brownian paths on the torus.

The envelope a(t) multiplies the random potential.  Four variants:

* power decay   a(t) = (1+t^2)^(-alpha/2), the canonical smooth representative
  of t^(-alpha) decay (even, a(0)=1, exact asymptotics, closed-form integrals
  at the exponents that matter);
* log decay     a(t) = (log(t+e))^(-delta);
* constant      a(t) = lam;
* dc coupling   a(t) = n^(-alpha) on the whole box [0, n].

Paths are driven by a counter-based, splittable RNG (Philox) keyed by the
pair (experiment seed, path index), so any path can be regenerated in
isolation and results never depend on execution order or worker count.
Brownian increments have variance dt (generator L = Laplacian/2); the initial
position is drawn uniformly on the circle, the stationary law of the driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError

POWER = "power"
LOG = "log"
CONSTANT = "constant"
DC = "dc"

TWO_PI = 2.0 * math.pi

# integer codes for the numba kernels
_ENV_CODE = {POWER: 0, LOG: 1, CONSTANT: 2, DC: 2}


@dataclass(frozen=True)
class EnvelopeProfile:
    """Smooth even decay profile a(t)."""

    kind: str
    alpha: float = 0.0   # power / dc exponent
    delta: float = 0.0   # log-decay exponent
    lam: float = 0.0     # constant value (constant and dc variants)
    n: float = 0.0       # box length the dc coupling was derived from

    @classmethod
    def power_decay(cls, alpha: float) -> "EnvelopeProfile":
        if alpha <= 0:
            raise DomainError(f"power decay needs alpha > 0, got {alpha}")
        return cls(POWER, alpha=alpha)

    @classmethod
    def log_decay(cls, delta: float) -> "EnvelopeProfile":
        if delta <= 0:
            raise DomainError(f"log decay needs delta > 0, got {delta}")
        return cls(LOG, delta=delta)

    @classmethod
    def constant(cls, lam: float) -> "EnvelopeProfile":
        return cls(CONSTANT, lam=lam)

    @classmethod
    def dc_coupling(cls, alpha: float, n: float) -> "EnvelopeProfile":
        if alpha <= 0 or n <= 0:
            raise DomainError(f"dc coupling needs alpha > 0 and n > 0, got {alpha}, {n}")
        return cls(DC, alpha=alpha, lam=n ** (-alpha), n=n)

    def value(self, t: float) -> float:
        if t < 0:
            raise DomainError(f"envelope evaluated at negative time {t}")
        if self.kind == POWER:
            return (1.0 + t * t) ** (-self.alpha / 2.0)
        if self.kind == LOG:
            return math.log(t + math.e) ** (-self.delta)
        return self.lam

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == POWER:
            return (1.0 + t * t) ** (-self.alpha / 2.0)
        if self.kind == LOG:
            return np.log(t + math.e) ** (-self.delta)
        return np.full(t.shape, self.lam)

    def power_integral(self, m: int, T: float) -> float:
        """int_0^T a(s)^m ds, closed form where available, else quadrature
        with relative error <= 1e-10."""
        if m < 1:
            raise DomainError(f"power_integral needs m >= 1, got {m}")
        if T < 0:
            raise DomainError(f"power_integral needs T >= 0, got {T}")
        if T == 0:
            return 0.0
        if self.kind in (CONSTANT, DC):
            return self.lam ** m * T
        if self.kind == POWER and m == 2 and self.alpha == 0.5:
            return math.asinh(T)
        if self.kind == POWER and m * self.alpha == 2.0:
            return math.atan(T)
        integrand = (lambda s: (1.0 + s * s) ** (-m * self.alpha / 2.0)) \
            if self.kind == POWER else \
            (lambda s: math.log(s + math.e) ** (-m * self.delta))
        # split at 1 so quad resolves both the O(1) region and the tail
        if T > 1.0:
            head, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
            tail, _ = integrate.quad(integrand, 1.0, T, epsabs=0.0, epsrel=1e-12, limit=400)
            return head + tail
        val, _ = integrate.quad(integrand, 0.0, T, epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    def kernel_params(self) -> tuple[int, float]:
        """(code, parameter) consumed by the numba integrators."""
        if self.kind == POWER:
            return _ENV_CODE[POWER], self.alpha
        if self.kind == LOG:
            return _ENV_CODE[LOG], self.delta
        return _ENV_CODE[CONSTANT], self.lam

    def to_json_obj(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == POWER:
            out["alpha"] = self.alpha
        elif self.kind == LOG:
            out["delta"] = self.delta
        elif self.kind == CONSTANT:
            out["lam"] = self.lam
        else:
            out["alpha"] = self.alpha
            out["n"] = self.n
        return out


@dataclass(frozen=True)
class TorusPath:
    """One sampled Brownian trajectory on the circle.

    ``positions`` are wrapped to [0, 2*pi); ``raw_increments`` are the
    unwrapped Gaussian steps, so the unwrapped path is
    positions[0] + cumsum(raw_increments).
    """

    dt: float
    positions: np.ndarray
    raw_increments: np.ndarray
    seed: tuple[int, int]

    def __post_init__(self):
        if len(self.positions) != len(self.raw_increments) + 1:
            raise DomainError("positions must have one more entry than increments")

    @property
    def nsteps(self) -> int:
        return len(self.raw_increments)

    @property
    def duration(self) -> float:
        return self.nsteps * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nsteps + 1)

    def unwrapped(self) -> np.ndarray:
        out = np.empty(self.nsteps + 1)
        out[0] = self.positions[0]
        np.cumsum(self.raw_increments, out=out[1:])
        out[1:] += self.positions[0]
        return out


def make_generator(experiment_seed: int, path_index: int) -> np.random.Generator:
    """Counter-based generator keyed by (experiment seed, path index)."""
    key = np.array([path_index, experiment_seed], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def initial_position(gen: np.random.Generator) -> float:
    """Uniform draw on the circle; first consumption from a fresh stream."""
    return float(gen.uniform(0.0, TWO_PI))


def sample_path(T: float, dt: float, seed: tuple[int, int]) -> TorusPath:
    """Sample a Brownian path on [0, T] at uniform step dt.

    Increments are N(0, dt); the path is deterministic given the seed pair.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    if dt > T:
        raise DomainError(f"dt must not exceed T ({dt} > {T})")
    nsteps = math.ceil(T / dt - 1e-12)
    gen = make_generator(*seed)
    x0 = initial_position(gen)
    increments = gen.standard_normal(nsteps) * math.sqrt(dt)
    positions = np.empty(nsteps + 1)
    positions[0] = x0
    np.cumsum(increments, out=positions[1:])
    positions[1:] += x0
    positions %= TWO_PI
    return TorusPath(dt=dt, positions=positions, raw_increments=increments,
                     seed=(int(seed[0]), int(seed[1])))
