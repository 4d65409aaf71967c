"""Exact calculus on finite Fourier series over the circle of circumference 2*pi.

A function is stored as a finite map {frequency k -> complex coefficient c_k},
so f(x) = sum_k c_k e^{ikx}.  The Haar measure is normalized to total mass 1,
hence the mean of f is exactly c_0.  The generator of the driving Brownian
motion acts diagonally, L e^{ikx} = lambda_k e^{ikx}; the default convention is
L = (1/2) d^2/dx^2, i.e. lambda_k = -k^2/2, which pairs with unit-variance
Brownian increments so that quadratic-variation brackets equal grad(f)*grad(g)
with no extra factor.  A "laplacian" convention (lambda_k = -k^2) is available
for sensitivity checks only.

All operations are pure; the algebra is closed on finite series, so there is
no truncation anywhere.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError

HALF_LAPLACIAN = "half_laplacian"
LAPLACIAN = "laplacian"
DEFAULT_GENERATOR = HALF_LAPLACIAN

_SYMMETRY_TOL = 1e-12


def generator_eigenvalue(k: int, generator: str = DEFAULT_GENERATOR) -> float:
    """Eigenvalue of the generator L on the frequency-k mode."""
    if generator == HALF_LAPLACIAN:
        return -0.5 * k * k
    if generator == LAPLACIAN:
        return -float(k * k)
    raise DomainError(f"unknown generator convention {generator!r}")


@dataclass(frozen=True)
class TorusFunction:
    """Finite Fourier series on the circle.

    ``coeffs`` maps integer frequencies to complex coefficients; absent
    frequencies are zero.  If ``real_valued`` is set, c_{-k} == conj(c_k)
    holds exactly for every stored k.
    """

    coeffs: Mapping[int, complex] = field(default_factory=dict)
    real_valued: bool = False

    def __post_init__(self):
        pruned = {int(k): complex(c) for k, c in self.coeffs.items() if c != 0}
        object.__setattr__(self, "coeffs", pruned)
        if self.real_valued:
            for k, c in pruned.items():
                mate = pruned.get(-k, 0j)
                if abs(mate - c.conjugate()) > _SYMMETRY_TOL * max(1.0, abs(c)):
                    raise DomainError(
                        f"real_valued flag set but c_{-k} != conj(c_{k}) "
                        f"({mate} vs {c.conjugate()})"
                    )

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "TorusFunction":
        return cls({}, real_valued=True)

    @classmethod
    def constant(cls, value: complex) -> "TorusFunction":
        value = complex(value)
        return cls({0: value}, real_valued=(value.imag == 0.0))

    @classmethod
    def harmonic(cls, k: int, amplitude: complex = 1.0) -> "TorusFunction":
        """amplitude * e^{ikx}."""
        return cls({int(k): complex(amplitude)}, real_valued=(k == 0 and complex(amplitude).imag == 0.0))

    @classmethod
    def cosine(cls, k: int, amplitude: float = 1.0) -> "TorusFunction":
        """amplitude * cos(kx)."""
        if k == 0:
            return cls.constant(amplitude)
        half = 0.5 * amplitude
        return cls({k: half, -k: half}, real_valued=True)

    @classmethod
    def sine(cls, k: int, amplitude: float = 1.0) -> "TorusFunction":
        """amplitude * sin(kx)."""
        if k == 0:
            return cls.zero()
        half = amplitude / 2j
        return cls({k: half, -k: -half}, real_valued=True)

    # -- basic structure ---------------------------------------------------

    def __getitem__(self, k: int) -> complex:
        return self.coeffs.get(k, 0j)

    def frequencies(self) -> list[int]:
        return sorted(self.coeffs)

    def degree(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def conjugate(self) -> "TorusFunction":
        return TorusFunction(
            {-k: c.conjugate() for k, c in self.coeffs.items()},
            real_valued=self.real_valued,
        )

    def __add__(self, other: "TorusFunction") -> "TorusFunction":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0j) + c
        return TorusFunction(out, real_valued=self.real_valued and other.real_valued)

    def __sub__(self, other: "TorusFunction") -> "TorusFunction":
        return self + other.scale(-1.0)

    def scale(self, factor: complex) -> "TorusFunction":
        factor = complex(factor)
        real = self.real_valued and factor.imag == 0.0
        return TorusFunction({k: factor * c for k, c in self.coeffs.items()}, real_valued=real)

    def reflect(self) -> "TorusFunction":
        """Pullback under x -> -x, i.e. c_k -> c_{-k}."""
        return TorusFunction({-k: c for k, c in self.coeffs.items()}, real_valued=self.real_valued)

    def evaluate(self, x):
        """Pointwise value; ``x`` may be a scalar or an ndarray."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for k, c in self.coeffs.items():
            out += c * np.exp(1j * k * x)
        if self.real_valued:
            return out.real if out.shape else float(out.real)
        return out if out.shape else complex(out)

    def evaluate_real(self, x: np.ndarray) -> np.ndarray:
        """Real evaluation c_0 + sum_{k>0} 2(Re c_k cos kx - Im c_k sin kx);
        requires the real_valued flag."""
        if not self.real_valued:
            raise DomainError("evaluate_real requires a real_valued function")
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self[0].real)
        for k in self.frequencies():
            if k <= 0:
                continue
            c = self.coeffs[k]
            out += 2.0 * (c.real * np.cos(k * x) - c.imag * np.sin(k * x))
        return out

    def real_mode_arrays(self) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """(c_0, positive frequencies, their Re, their Im) for the kernels."""
        if not self.real_valued:
            raise DomainError("kernel evaluation requires a real_valued function")
        ks = np.array([k for k in self.frequencies() if k > 0], dtype=np.float64)
        re = np.array([self.coeffs[int(k)].real for k in ks])
        im = np.array([self.coeffs[int(k)].imag for k in ks])
        return self[0].real, ks, re, im

    def max_abs_coeff_diff(self, other: "TorusFunction") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "real_valued": self.real_valued,
            "coeffs": [[k, self[k].real, self[k].imag] for k in self.frequencies()],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TorusFunction":
        try:
            coeffs = {int(k): complex(re, im) for k, re, im in obj["coeffs"]}
            return cls(coeffs, real_valued=bool(obj["real_valued"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed TorusFunction JSON: {exc}") from exc


# -- operations ------------------------------------------------------------


def mean(f: TorusFunction) -> complex:
    """Integral against normalized Haar measure, i.e. the coefficient c_0."""
    return f[0]


def gradient(f: TorusFunction) -> TorusFunction:
    """d/dx, acting as c_k -> i k c_k."""
    return TorusFunction(
        {k: 1j * k * c for k, c in f.coeffs.items() if k != 0},
        real_valued=f.real_valued,
    )


def multiply(f: TorusFunction, g: TorusFunction) -> TorusFunction:
    """Exact product via coefficient convolution; support is the sumset."""
    out: dict[int, complex] = {}
    for kf, cf in f.coeffs.items():
        for kg, cg in g.coeffs.items():
            k = kf + kg
            out[k] = out.get(k, 0j) + cf * cg
    real = f.real_valued and g.real_valued
    if real:
        # Convolution sums for +k and -k run in different orders and may
        # disagree by an ulp; pin conjugate symmetry exactly.
        for k in [k for k in out if k > 0]:
            if -k in out:
                out[-k] = out[k].conjugate()
        if 0 in out:
            out[0] = complex(out[0].real, 0.0)
    return TorusFunction(out, real_valued=real)


def carre_du_champ(f: TorusFunction, g: TorusFunction) -> TorusFunction:
    """[f, g] := grad(f) * grad(g) (plain product on the 1d torus)."""
    return multiply(gradient(f), gradient(g))


def resolvent_shifted(
    h: TorusFunction,
    kappa_shift: float,
    beta: int,
    generator: str = DEFAULT_GENERATOR,
) -> TorusFunction:
    """(L + i*beta*kappa_shift)^{-1} h, computed diagonally.

    When the shift beta*kappa_shift is zero the operator is only invertible on
    mean-zero input; a nonzero mean raises DomainError.
    """
    shift = beta * kappa_shift
    if shift == 0.0:
        if h[0] != 0:
            raise DomainError(
                f"zero shift requires mean-zero input, got mean {h[0]}"
            )
        out = {
            k: c / generator_eigenvalue(k, generator)
            for k, c in h.coeffs.items()
        }
        return TorusFunction(out, real_valued=h.real_valued)
    out = {
        k: c / (generator_eigenvalue(k, generator) + 1j * shift)
        for k, c in h.coeffs.items()
    }
    return TorusFunction(out, real_valued=False)


def resolvent_zero(h: TorusFunction, generator: str = DEFAULT_GENERATOR) -> TorusFunction:
    """L^{-1}(h - <h>): subtract the mean, invert L diagonally; result is mean-zero."""
    out = {
        k: c / generator_eigenvalue(k, generator)
        for k, c in h.coeffs.items()
        if k != 0
    }
    return TorusFunction(out, real_valued=h.real_valued)


def random_real_trig_poly(rng: np.random.Generator, max_degree: int = 8) -> TorusFunction:
    """Random real-valued trig polynomial of degree <= max_degree (test helper)."""
    degree = int(rng.integers(1, max_degree + 1))
    coeffs: dict[int, complex] = {0: complex(rng.standard_normal(), 0.0)}
    for k in range(1, degree + 1):
        c = complex(rng.standard_normal(), rng.standard_normal())
        coeffs[k] = c
        coeffs[-k] = c.conjugate()
    return TorusFunction(coeffs, real_valued=True)
