"""Deterministic drift and covariance constants of the counting asymptotics.

The drift constants C_k(kappa) are means of nested operator images of the
potential profile F.  The building block is a triple of operators acting on
trig polynomials,

    T+_{beta,kappa} h = -(i beta / 2 kappa) * (1/2) * F * (L + i beta kappa)^{-1} h
    T-_{beta,kappa} h = -(i beta / 2 kappa) * (1/2) * F * (L + i beta kappa)^{-1} h
    T0_{beta,kappa} h = +(i beta / 2 kappa) *         F * (L + i beta kappa)^{-1} h

(plus and minus share one formula; the labels only track the running even
frequency beta, which moves by +2, -2, 0 respectively).  C_1 is the mean of
T-_2 F; C_k for k >= 2 sums, over all admissible label sequences of length
k-1, the mean of the composition finishing with an outer T-_2.  Admissible
sequences are exactly Motzkin paths: steps in {-1,0,+1}, prefix sums
nonnegative, total sum zero, with beta_1 = 2 and beta_{i+1} = beta_i + 2 eps_i.

The Gaussian covariance constants are gradient energies of the correctors
g_kappa = (L + 2 i kappa)^{-1} F and g = L^{-1}(F - <F>).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConsistencyError, DomainError
from .paths import EnvelopeProfile
from .torusfield import (
    DEFAULT_GENERATOR,
    TorusFunction,
    carre_du_champ,
    mean,
    multiply,
    resolvent_shifted,
    resolvent_zero,
)

T_PLUS = "plus"
T_MINUS = "minus"
T_ZERO = "zero"

_KIND_BY_EPSILON = {+1: T_PLUS, -1: T_MINUS, 0: T_ZERO}

DECAYING_POTENTIAL = "decaying_potential"
DC = "dc"

_IMAG_RESIDUE_TOL = 1e-12


@dataclass(frozen=True)
class MotzkinIndex:
    """One admissible label sequence ((eps_1..eps_{k-1}), (beta_1..beta_{k-1}))."""

    epsilons: tuple[int, ...]
    betas: tuple[int, ...]

    def __post_init__(self):
        if len(self.epsilons) != len(self.betas):
            raise DomainError("epsilons and betas must have equal length")
        if self.betas:
            if self.betas[0] != 2:
                raise DomainError(f"beta_1 must be 2, got {self.betas[0]}")
            for i, (eps, beta) in enumerate(zip(self.epsilons, self.betas)):
                if eps not in (-1, 0, 1):
                    raise DomainError(f"epsilon_{i + 1} must be in {{-1,0,1}}, got {eps}")
                if beta < 2 or beta % 2:
                    raise DomainError(f"beta_{i + 1} must be a positive even integer >= 2, got {beta}")
                if i + 1 < len(self.betas) and self.betas[i + 1] != beta + 2 * eps:
                    raise DomainError("beta recursion beta_{i+1} = beta_i + 2 eps_i violated")
            if sum(self.epsilons) != 0:
                raise DomainError("epsilons must sum to zero")

    def order(self) -> int:
        return len(self.epsilons) + 1


@dataclass(frozen=True)
class ConstantsTable:
    """C_1(kappa) .. C_D(kappa) for one kappa."""

    kappa: float
    D: int
    values: tuple[complex, ...]

    def __post_init__(self):
        if len(self.values) != self.D:
            raise DomainError("table length must equal D")

    def __getitem__(self, k: int) -> complex:
        if not 1 <= k <= self.D:
            raise DomainError(f"C_k defined for 1 <= k <= {self.D}, got {k}")
        return self.values[k - 1]


@dataclass(frozen=True)
class CovarianceConstants:
    """<[g_kappa, conj g_kappa]> per kappa, and <[g, g]>."""

    sigma2_of_kappa: Mapping[float, float]
    sigma2_zero: float


def apply_T(
    h: TorusFunction,
    beta: int,
    kappa: float,
    kind: str,
    F: TorusFunction,
    generator: str = DEFAULT_GENERATOR,
) -> TorusFunction:
    """Apply T^kind_{beta,kappa} (built from the ambient profile F) to h."""
    if beta < 2 or beta % 2:
        raise DomainError(f"beta must be a positive even integer >= 2, got {beta}")
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    resolved = resolvent_shifted(h, kappa, beta, generator=generator)
    if kind in (T_PLUS, T_MINUS):
        factor = -1j * beta / (2.0 * kappa) * 0.5
    elif kind == T_ZERO:
        factor = 1j * beta / (2.0 * kappa)
    else:
        raise DomainError(f"kind must be plus/minus/zero, got {kind!r}")
    return multiply(F, resolved).scale(factor)


def enumerate_Sk(k: int) -> list[MotzkinIndex]:
    """All admissible label sequences of order k; |S_k| is the (k-1)-th
    Motzkin number (1, 1, 2, 4, 9, 21, 51, ... for k = 1, 2, 3, ...)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k == 1:
        return [MotzkinIndex((), ())]
    out: list[MotzkinIndex] = []

    def extend(eps: tuple[int, ...], height: int):
        pos = len(eps)
        if pos == k - 1:
            if height == 0:
                betas = [2]
                for e in eps[:-1]:
                    betas.append(betas[-1] + 2 * e)
                out.append(MotzkinIndex(eps, tuple(betas)))
            return
        remaining = k - 1 - pos
        for step in (-1, 0, 1):
            nh = height + step
            # prefix sums stay >= 0 and must be able to return to 0
            if nh < 0 or nh > remaining - 1:
                continue
            extend(eps + (step,), nh)

    extend((), 0)
    return out


def compute_Ck(
    F: TorusFunction,
    kappa: float,
    D: int,
    generator: str = DEFAULT_GENERATOR,
) -> ConstantsTable:
    """Drift constants C_1..C_D via the operator recursion.

    Compositions run right-to-left: the innermost operator hits F first and
    the sequence always finishes with the outer T-_2 that lands the running
    frequency on zero, where taking the mean extracts the coefficient.
    """
    if mean(F) != 0:
        raise DomainError(f"profile must be mean-zero, got mean {mean(F)}")
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if D < 1:
        raise DomainError(f"D must be >= 1, got {D}")
    values = []
    for k in range(1, D + 1):
        total = 0j
        for index in enumerate_Sk(k):
            h = F
            for eps, beta in zip(index.epsilons, index.betas):
                h = apply_T(h, beta, kappa, _KIND_BY_EPSILON[eps], F, generator=generator)
            h = apply_T(h, 2, kappa, T_MINUS, F, generator=generator)
            total += mean(h)
        values.append(total)
    return ConstantsTable(kappa=kappa, D=D, values=tuple(values))


def covariance_constants(
    F: TorusFunction,
    kappas: Sequence[float],
    generator: str = DEFAULT_GENERATOR,
) -> CovarianceConstants:
    """Gradient energies <[g_kappa, conj g_kappa]> and <[g, g]>.

    Both are means of |gradient|^2 of a corrector, hence real and
    nonnegative; a nonvanishing imaginary residue signals a broken
    conjugation somewhere upstream and raises ConsistencyError.
    """
    if mean(F) != 0:
        raise DomainError(f"profile must be mean-zero, got mean {mean(F)}")
    table: dict[float, float] = {}
    for kappa in kappas:
        if kappa <= 0:
            raise DomainError(f"kappa must be positive, got {kappa}")
        g_k = resolvent_shifted(F, kappa, 2, generator=generator)
        val = mean(carre_du_champ(g_k, g_k.conjugate()))
        if abs(val.imag) > _IMAG_RESIDUE_TOL * max(1.0, abs(val)):
            raise ConsistencyError(
                f"<[g_kappa, conj g_kappa]> has imaginary residue {val.imag} at kappa={kappa}"
            )
        table[float(kappa)] = val.real
    g = resolvent_zero(F, generator=generator)
    val0 = mean(carre_du_champ(g, g))
    if abs(val0.imag) > _IMAG_RESIDUE_TOL * max(1.0, abs(val0)):
        raise ConsistencyError(f"<[g, g]> has imaginary residue {val0.imag}")
    return CovarianceConstants(sigma2_of_kappa=table, sigma2_zero=val0.real)


def drift_prediction(
    F: TorusFunction,
    kappa1: float,
    kappa2: float,
    envelope: EnvelopeProfile,
    n: float,
    t: float,
    D: int,
    generator: str = DEFAULT_GENERATOR,
) -> float:
    """Deterministic centering of the count in (kappa1^2, kappa2^2) beyond
    the leading nt(kappa2-kappa1)/pi term:

        sum_{j=1..D} Re(C_j(k2)/(2 pi k2) - C_j(k1)/(2 pi k1)) int_0^{nt} a^{j+1}.
    """
    if not 0 < kappa1 < kappa2:
        raise DomainError(f"need 0 < kappa1 < kappa2, got {kappa1}, {kappa2}")
    if n <= 0 or t <= 0:
        raise DomainError(f"need n, t > 0, got n={n}, t={t}")
    if F.is_zero():
        return 0.0
    c1 = compute_Ck(F, kappa1, D, generator=generator)
    c2 = compute_Ck(F, kappa2, D, generator=generator)
    total = 0.0
    for j in range(1, D + 1):
        coef = (c2[j] / (2.0 * math.pi * kappa2) - c1[j] / (2.0 * math.pi * kappa1)).real
        total += coef * envelope.power_integral(j + 1, n * t)
    return total


def _weighted_sum(
    kappa1: float,
    kappa2: float,
    v_kappa1: float,
    v_kappa2: float,
    v_zero: float,
) -> float:
    if kappa1 == kappa2:
        return 0.0
    a1 = 1.0 / (2.0 * math.pi * kappa1)
    a2 = 1.0 / (2.0 * math.pi * kappa2)
    return a2 * a2 * v_kappa2 + a1 * a1 * v_kappa1 + (a2 - a1) ** 2 * v_zero


def variance_prediction(
    F: TorusFunction,
    kappa1: float,
    kappa2: float,
    alpha: float,
    t: float,
    model: str = DECAYING_POTENTIAL,
    generator: str = DEFAULT_GENERATOR,
) -> float:
    """Variance of the limiting Gaussian of the normalized count fluctuation.

    Decaying potential: v(kappa) = (1/2) sigma2(kappa) t^{1-2a}/(1-2a) and
    v0 = sigma2_zero t^{1-2a}/(1-2a); dc model drops the 1/(1-2a) factor.
    The three fields are independent, so the weights (2 pi kappa)^{-1} add in
    squares (the shared field enters through the difference of weights).
    """
    if not 0 < alpha < 0.5:
        raise DomainError(f"power-law normalization needs 0 < alpha < 1/2, got {alpha}")
    if not 0 < t <= 1:
        raise DomainError(f"need t in (0, 1], got {t}")
    if model not in (DECAYING_POTENTIAL, DC):
        raise DomainError(f"model must be decaying_potential or dc, got {model!r}")
    if F.is_zero():
        return 0.0
    cov = covariance_constants(F, [kappa1, kappa2], generator=generator)
    scale = t ** (1.0 - 2.0 * alpha)
    if model == DECAYING_POTENTIAL:
        scale /= 1.0 - 2.0 * alpha
    v1 = 0.5 * cov.sigma2_of_kappa[kappa1] * scale
    v2 = 0.5 * cov.sigma2_of_kappa[kappa2] * scale
    v0 = cov.sigma2_zero * scale
    return _weighted_sum(kappa1, kappa2, v1, v2, v0)


def subcritical_covariance_prediction(
    F: TorusFunction,
    kappa1: float,
    kappa2: float,
    alpha: float,
    t: float,
    s: float,
    model: str = DECAYING_POTENTIAL,
    generator: str = DEFAULT_GENERATOR,
) -> float:
    """Cov of the limit at times t and s: the variance formula evaluated at
    min(t, s), since every field has covariance proportional to (t^s)^{1-2a}."""
    return variance_prediction(F, kappa1, kappa2, alpha, min(t, s), model=model,
                               generator=generator)


def critical_variance_per_log_n(
    F: TorusFunction,
    kappa1: float,
    kappa2: float,
    generator: str = DEFAULT_GENERATOR,
) -> float:
    """Per-log-n variance of the count fluctuation at critical decay:
    v(kappa) = (1/2) sigma2(kappa), v0 = sigma2_zero."""
    if not 0 < kappa1 < kappa2:
        raise DomainError(f"need 0 < kappa1 < kappa2, got {kappa1}, {kappa2}")
    if F.is_zero():
        return 0.0
    cov = covariance_constants(F, [kappa1, kappa2], generator=generator)
    return _weighted_sum(
        kappa1, kappa2,
        0.5 * cov.sigma2_of_kappa[kappa1],
        0.5 * cov.sigma2_of_kappa[kappa2],
        cov.sigma2_zero,
    )


def cross_pair_covariance_prediction(
    F: TorusFunction,
    pair_a: tuple[float, float],
    pair_b: tuple[float, float],
    scale: float,
    generator: str = DEFAULT_GENERATOR,
) -> float:
    """Covariance between the limit fluctuations of two kappa-intervals.

    Endpoint fields at distinct kappas are independent, so only shared
    endpoints contribute their own field variance; the zero-frequency field
    is common to every interval and enters through the product of the weight
    differences.  ``scale`` is the time/normalization factor of the regime
    (t^{1-2a}/(1-2a), t^{1-2a}, or 1 for the per-log-n critical rate).
    """
    if F.is_zero():
        return 0.0
    kappas = sorted(set(pair_a) | set(pair_b))
    cov = covariance_constants(F, kappas, generator=generator)
    a = {k: 1.0 / (2.0 * math.pi * k) for k in kappas}
    w_a = {pair_a[1]: a[pair_a[1]], pair_a[0]: -a[pair_a[0]]}
    w_b = {pair_b[1]: a[pair_b[1]], pair_b[0]: -a[pair_b[0]]}
    total = (a[pair_a[1]] - a[pair_a[0]]) * (a[pair_b[1]] - a[pair_b[0]]) \
        * cov.sigma2_zero * scale
    for k, wa in w_a.items():
        wb = w_b.get(k)
        if wb is not None:
            total += wa * wb * 0.5 * cov.sigma2_of_kappa[k] * scale
    return total
