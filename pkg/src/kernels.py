"""Radial-derivative calculus, potentials, the Bergman projection and
weighted Besov norms.

(I+R)^s multiplies the homogeneous part of degree k by (1 + k)^s.  It is
exact on polynomials and on kernels u^{-b}, u = 1 - <z, y>, where

    (I+R) u^{-b} = (1 - b) u^{-b} + b u^{-b-1}.

Potentials are Monte-Carlo averages against the normalized volume; every
call returns Estimates carrying the seed and sample count.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_function

from errors import ConfigError, DomainError, ParameterError
from geometry import as_point, inner, norm_sq, region_contains, region_from_spec, region_to_spec
from sampling import Ball, Estimate, Sphere, exact, mc_integrate, mc_integrate_many, radial_integrate
from weights import Constant, Power

logger = logging.getLogger(__name__)

FOCUS_RADIUS = 0.5


@dataclass
class HoloPolynomial:
    """Sparse sum of coefficient * z^m over multi-indices m."""
    n: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        coeffs = {}
        for index, coeff in self.coeffs.items():
            index = tuple(int(i) for i in index)
            if len(index) != self.n or min(index) < 0:
                raise ConfigError(f"multi-index {index} does not fit dimension {self.n}")
            if coeff != 0:
                coeffs[index] = complex(coeff)
        self.coeffs = coeffs

    @classmethod
    def monomial(cls, index, coeff=1.0):
        return cls(len(index), {tuple(index): coeff})

    @property
    def degree(self):
        return max((sum(index) for index in self.coeffs), default=0)

    def evaluate(self, points):
        points = np.asarray(points, dtype=complex)
        value = np.zeros(points.shape[:-1], dtype=complex)
        for index, coeff in self.coeffs.items():
            term = np.full(points.shape[:-1], coeff, dtype=complex)
            for i, power in enumerate(index):
                if power:
                    term = term * points[..., i] ** power
            value = value + term
        return value

    def to_spec(self):
        return {"kind": "poly", "n": self.n,
                "terms": [[list(index), [c.real, c.imag]]
                          for index, c in sorted(self.coeffs.items())]}


def radial_power(f, k):
    """(I+R)^k on a polynomial: coefficient at m times (1 + |m|)^k."""
    coeffs = {}
    for index, coeff in f.coeffs.items():
        factor = float(1 + sum(index))
        coeffs[index] = coeff * factor ** k if k >= 0 else coeff / factor ** -k
    return HoloPolynomial(f.n, coeffs)


@dataclass
class Poly:
    poly: HoloPolynomial
    kind = "poly"
    holomorphic = True

    def evaluate(self, points):
        return self.poly.evaluate(points)

    def radial(self, k):
        return Poly(radial_power(self.poly, k))

    def to_spec(self):
        return self.poly.to_spec()


@dataclass
class KernelFn:
    """(1 - |y|^2)^a (1 - <z, y>)^{-b} as a function of z; with ``modulus``
    the nonnegative profile |.| instead.

    ``terms`` maps exponents to coefficients of the expansion
    sum c_j u^{-b_j}, which is how (I+R)^k of the kernel is carried.
    """
    pole: np.ndarray
    b: float
    a: float = 0.0
    modulus: bool = False
    terms: dict = None
    kind = "kernel"

    def __post_init__(self):
        self.pole = as_point(self.pole, closed=False)
        if not self.b > 0.0:
            raise ConfigError(f"kernel exponent b must be positive, got {self.b}")
        if not self.a >= 0.0:
            raise ConfigError(f"kernel normalisation a must be nonnegative, got {self.a}")
        if self.terms is None:
            self.terms = {float(self.b): 1.0}

    @property
    def holomorphic(self):
        return not self.modulus

    @property
    def scale(self):
        return (1.0 - float(norm_sq(self.pole))) ** self.a

    def evaluate(self, points):
        u = 1.0 - inner(np.asarray(points, dtype=complex), self.pole)
        value = sum(c * np.power(u, -exponent) for exponent, c in self.terms.items())
        value = self.scale * value
        return np.abs(value) if self.modulus else value

    def radial(self, k):
        if self.modulus:
            raise ParameterError("(I+R)^k needs a holomorphic test function")
        if k < 0 or k != int(k):
            raise ParameterError("kernels take nonnegative integer radial powers")
        terms = dict(self.terms)
        for _ in range(int(k)):
            stepped = {}
            for exponent, c in terms.items():
                stepped[exponent] = stepped.get(exponent, 0.0) + (1.0 - exponent) * c
                stepped[exponent + 1.0] = stepped.get(exponent + 1.0, 0.0) + exponent * c
            terms = {e: c for e, c in stepped.items() if c != 0.0}
        return KernelFn(self.pole, self.b, self.a, False, terms)

    def to_spec(self):
        return {"kind": "kernel", "pole": [[z.real, z.imag] for z in self.pole],
                "b": self.b, "a": self.a, "modulus": self.modulus}


@dataclass
class Indicator:
    region: object
    kind = "indicator"
    holomorphic = False

    def evaluate(self, points):
        points = np.asarray(points, dtype=complex)
        return region_contains(self.region, points).astype(float)

    def radial(self, k):
        raise ParameterError("(I+R)^k needs a holomorphic test function")

    def to_spec(self):
        return {"kind": "indicator", "region": region_to_spec(self.region)}


@dataclass
class ConstantFn:
    value: complex = 1.0
    kind = "constant"
    holomorphic = True

    def evaluate(self, points):
        return np.full(np.shape(points)[0], self.value)

    def radial(self, k):
        return self

    def to_spec(self):
        value = complex(self.value)
        return {"kind": "constant", "value": [value.real, value.imag]}


def _complex(value):
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


def function_from_spec(spec, n=None):
    try:
        kind = spec["kind"]
        if kind == "constant":
            return ConstantFn(_complex(spec.get("value", 1.0)))
        if kind == "poly":
            terms = {tuple(index): _complex(c) for index, c in spec["terms"]}
            dimension = spec.get("n", n)
            if dimension is None:
                dimension = len(next(iter(terms)))
            return Poly(HoloPolynomial(int(dimension), terms))
        if kind == "kernel":
            pole = np.array([complex(re, im) for re, im in spec["pole"]])
            return KernelFn(pole, float(spec["b"]), float(spec.get("a", 0.0)),
                            bool(spec.get("modulus", False)))
        if kind == "indicator":
            return Indicator(region_from_spec(spec["region"]))
    except (KeyError, TypeError, StopIteration) as error:
        raise ConfigError(f"malformed test function {spec!r}: {error}") from error
    raise ConfigError(f"unknown test function kind {spec.get('kind')!r}")


def _values(f, points):
    if hasattr(f, "evaluate"):
        return f.evaluate(points)
    return f(points)


def inv_radial(f, m, z):
    """(I+R)^{-m} f(z) = (1/Gamma(m)) int_0^1 (log 1/r)^{m-1} f(r z) dr."""
    if not m > 0:
        raise DomainError(f"m > 0 required, got {m}")
    z = as_point(z)
    value = radial_integrate(lambda r: _values(f, (r * z)[None, :])[0], m)
    return value / gamma_function(m)


def _focus_for(f):
    if isinstance(f, KernelFn) and math.sqrt(float(norm_sq(f.pole))) > FOCUS_RADIUS:
        return f.pole
    return None


def bounded_kernel(t, n):
    """The potential kernel has a nonpositive exponent n + 1 - t."""
    return t >= n + 1


def ball_potential(f, t, z, mode, cfg):
    """int f(y) K(z, y) dv(y), K = |1 - <z, y>|^{-(n+1-t)} (modulus) or
    (1 - <z, y>)^{-(n+1-t)} (holomorphic, principal branch).

    ``z`` may be one point or an (m, n) batch; a batch shares one sample
    set and yields one Estimate per point.
    """
    if mode not in ("modulus", "holomorphic"):
        raise ConfigError(f"unknown potential mode {mode!r}")
    z = as_point(z)
    single = z.ndim == 1
    points = np.atleast_2d(z)
    n = points.shape[1]
    if not t > 0.0:
        raise DomainError(f"t > 0 required, got {t}")
    if bounded_kernel(t, n):
        logger.warning("t = %s >= n + 1: bounded-kernel regime", t)
    exponent = n + 1.0 - t

    def integrand(y):
        u = 1.0 - inner(points[None, :, :], y[:, None, :])
        kernel = np.abs(u) ** -exponent if mode == "modulus" else np.power(u, -exponent)
        values = np.asarray(_values(f, y))
        if values.ndim == 0:
            values = np.full(y.shape[0], values)
        return values[:, None] * kernel

    if isinstance(f, Indicator):
        estimates = mc_integrate_many(f.region, integrand, cfg)
    else:
        estimates = mc_integrate_many(Ball(n), integrand, cfg, focus=_focus_for(f))
    return estimates[0] if single else estimates


def sphere_potential(f, s, z, cfg):
    """int_S f(eta) |1 - <z, eta>|^{-(m-s)} dsigma(eta) over the sphere of
    C^m, m = len(z)."""
    z = as_point(z)
    single = z.ndim == 1
    points = np.atleast_2d(z)
    m = points.shape[1]
    if not 0.0 < s < m:
        raise DomainError(f"s must lie in (0, {m}), got {s}")

    def integrand(eta):
        kernel = np.abs(1.0 - inner(points[None, :, :], eta[:, None, :])) ** -(m - s)
        return np.asarray(_values(f, eta))[:, None] * kernel

    estimates = mc_integrate_many(Sphere(m), integrand, cfg)
    return estimates[0] if single else estimates


def bergman_project(f, z, cfg):
    """Bf(z) = int f(y) (1 - <z, y>)^{-(n+1)} dv(y); reproduces holomorphic
    polynomials."""
    z = as_point(z, closed=False)
    n = z.shape[-1]

    def integrand(y):
        kernel = np.power(1.0 - inner(z, y), -(n + 1.0))
        return np.asarray(_values(f, y)) * kernel

    focus = z if z.ndim == 1 and math.sqrt(float(norm_sq(z))) > FOCUS_RADIUS else None
    return mc_integrate(Ball(n), integrand, cfg, focus=focus)


def weight_tilt(w, gamma):
    """Importance exponent for (1 - |y|^2)^gamma w(y)."""
    if isinstance(w, Power) and gamma + w.alpha > -1.0:
        return gamma + w.alpha
    return gamma


def _root(estimate, p):
    value = float(np.real(estimate.value))
    if value <= 0.0:
        return Estimate(0.0, 0.0, estimate.samples, estimate.seed)
    root = value ** (1.0 / p)
    return Estimate(value=root, stderr=estimate.stderr * root / (p * value),
                    samples=estimate.samples, seed=estimate.seed,
                    acceptance=estimate.acceptance)


def _is_zero(f):
    if isinstance(f, Poly):
        return not f.poly.coeffs
    if isinstance(f, ConstantFn):
        return f.value == 0
    return False


def besov_norm(f, s, p, cfg, k=None, w=None, n=None):
    """(int |(I+R)^k f|^p (1 - |y|^2)^{(k-s)p-1} w dv)^{1/p}."""
    if not p > 1.0:
        raise ParameterError("p > 1 required")
    k = math.floor(s) + 1 if k is None else k
    if not k > s:
        raise ParameterError(f"k > s required, got k = {k}, s = {s}")
    w = Constant(1.0) if w is None else w
    if _is_zero(f):
        return exact(0.0)
    if not getattr(f, "holomorphic", False):
        raise ParameterError("Besov norms need a holomorphic test function")
    n = n or _dimension(f)
    derivative = f.radial(k)
    gamma = (k - s) * p - 1.0

    def integrand(y):
        co_sq = np.clip(1.0 - norm_sq(y), 0.0, None)
        return np.abs(derivative.evaluate(y)) ** p * co_sq ** gamma * w.evaluate(y)

    integral = mc_integrate(Ball(n), integrand, cfg.with_gamma(weight_tilt(w, gamma)),
                            focus=_focus_for(f))
    return _root(integral, p)


def lp_weighted_norm(f, p, w, cfg, n=None):
    """(int |f|^p w dv)^{1/p}; indicators integrate w over their region."""
    if isinstance(f, Indicator):
        return _root(mc_integrate(f.region, w.evaluate, cfg), p)
    n = n or _dimension(f)

    def integrand(y):
        return np.abs(_values(f, y)) ** p * w.evaluate(y)

    integral = mc_integrate(Ball(n), integrand, cfg.with_gamma(weight_tilt(w, 0.0)),
                            focus=_focus_for(f))
    return _root(integral, p)


def _dimension(f):
    if isinstance(f, Poly):
        return f.poly.n
    if isinstance(f, KernelFn):
        return f.pole.shape[-1]
    if isinstance(f, Indicator):
        return f.region.center.shape[-1]
    raise ConfigError("dimension n is required for this test function")
