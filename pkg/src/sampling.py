"""Seeded Monte-Carlo integration over the ball, the sphere and regions.

Samples are drawn in fixed-size chunks; chunk k draws from
SeedSequence(seed, spawn_key=(k,)) and chunk sums are reduced in chunk
order, so an estimate depends only on (seed, samples, integrand) and not on
how many workers evaluated the chunks.

Integrands are vectorised: they receive an array of points of shape
(m, n) and return m values, or an (m, d) array for vector integrands.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import beta as beta_function
from scipy.special import gamma as gamma_function
from scipy.special import gammaincc

from config_object import env_workers
from errors import ConfigError, DegenerateRegionError, DomainError, InputError
from geometry import (
    enclosing_polydisk,
    inner,
    mobius,
    norm_sq,
    polydisk_volume,
    region_contains,
    region_dimension,
    unitary_frame,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 16384
DEFAULT_SAMPLES = 100_000
FOCUS_SHARE = 0.5
LOW_ACCEPTANCE = 0.01


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    samples: int = DEFAULT_SAMPLES
    gamma: float = 0.0
    workers: int = None

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ConfigError("samples >= 1 required")
        if not self.gamma > -1.0:
            raise ConfigError(f"importance exponent must exceed -1, got {self.gamma}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers is not None and int(self.workers) < 1:
            raise ConfigError("workers >= 1 required")

    def with_gamma(self, gamma):
        return replace(self, gamma=float(gamma))

    def with_samples(self, samples):
        return replace(self, samples=int(samples))

    def with_seed(self, seed):
        return replace(self, seed=int(seed) % 2 ** 64)


@dataclass(frozen=True)
class Estimate:
    value: complex
    stderr: float
    samples: int
    seed: int
    acceptance: float = None

    def to_dict(self):
        value = self.value
        if isinstance(value, complex):
            value = [value.real, value.imag]
        result = {
            "value": value,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "provenance": "estimate",
        }
        if self.acceptance is not None:
            result["acceptance"] = self.acceptance
        return result


def exact(value):
    return Estimate(value=value, stderr=0.0, samples=0, seed=0)


@dataclass(frozen=True)
class Ball:
    n: int


@dataclass(frozen=True)
class Sphere:
    m: int


@dataclass
class Moments:
    mean: np.ndarray
    cov: np.ndarray
    drawn: int
    accepted: int
    seed: int
    is_complex: bool
    width: int

    @property
    def acceptance(self):
        return self.accepted / self.drawn

    def variance(self):
        return np.diag(self.cov) if self.cov.ndim == 2 else self.cov

    def estimate(self, index=0):
        variance = self.variance()
        value = float(self.mean[index])
        var = float(variance[index])
        if self.is_complex:
            value = complex(value, float(self.mean[index + self.width]))
            var += float(variance[index + self.width])
        return Estimate(
            value=value,
            stderr=math.sqrt(max(var, 0.0) / self.drawn),
            samples=self.drawn,
            seed=self.seed,
            acceptance=None if self.accepted == self.drawn else self.acceptance)


def chunk_plan(samples):
    full, rest = divmod(int(samples), CHUNK_SIZE)
    plan = [(index, CHUNK_SIZE) for index in range(full)]
    if rest:
        plan.append((full, rest))
    return plan


def chunk_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def derive_seed(seed, *keys):
    """Independent child seed for a labelled sub-computation."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def sphere_directions(rng, size, m):
    g = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
    return g / np.sqrt(norm_sq(g))[:, None]


def disk_points(rng, size):
    return np.sqrt(rng.random(size)) * np.exp(2j * np.pi * rng.random(size))


def tilt_density(co_sq, n, gamma):
    """Density of the radially tilted law with respect to normalized v."""
    if gamma == 0.0:
        return np.ones_like(co_sq)
    return np.clip(co_sq, 1e-300, None) ** gamma / (n * beta_function(n, gamma + 1.0))


def _draw_ball(n, rng, size, gamma, focus):
    directions = sphere_directions(rng, size, n)
    if gamma == 0.0:
        radius = rng.random(size) ** (1.0 / (2 * n))
    else:
        radius = np.sqrt(rng.beta(n, gamma + 1.0, size))
    points = radius[:, None] * directions
    if focus is None:
        return points, 1.0 / tilt_density(1.0 - radius ** 2, n, gamma)
    mapped = rng.random(size) >= FOCUS_SHARE
    if np.any(mapped):
        points[mapped] = mobius(focus, points[mapped])
    co_sq = np.clip(1.0 - norm_sq(points), 0.0, None)
    focus_co = 1.0 - float(norm_sq(focus))
    gap = np.abs(1.0 - inner(points, focus)) ** 2
    jacobian = (focus_co / gap) ** (n + 1)
    density = (FOCUS_SHARE * tilt_density(co_sq, n, gamma)
               + (1.0 - FOCUS_SHARE)
               * tilt_density(focus_co * co_sq / gap, n, gamma) * jacobian)
    return points, 1.0 / density


def _draw_sphere(m, rng, size):
    return sphere_directions(rng, size, m), np.ones(size)


def _draw_polydisk_region(region, rng, size):
    polydisk = enclosing_polydisk(region)
    normal, tangential = polydisk.radii
    n = region_dimension(region)
    r = math.sqrt(float(norm_sq(polydisk.center)))
    local = np.empty((size, n), dtype=complex)
    local[:, 0] = r + normal * disk_points(rng, size)
    for i in range(1, n):
        local[:, i] = tangential * disk_points(rng, size)
    points = local @ polydisk.frame.conj()
    points = points[norm_sq(points) < 1.0]
    if region.kind != "polydisk" and len(points):
        points = points[region_contains(region, points)]
    return points, np.full(len(points), polydisk_volume(polydisk))


def _draw_cap(region, rng, size):
    m = region_dimension(region)
    radius = min(region.radius, 2.0)
    if m == 1:
        half_width = 2.0 * math.asin(radius / 2.0)
        angles = half_width * (2.0 * rng.random(size) - 1.0)
        points = region.center[0] * np.exp(1j * angles)[:, None]
        return points, np.full(size, half_width / math.pi)
    first = 1.0 + radius * disk_points(rng, size)
    tail = sphere_directions(rng, size, m - 1)
    keep = np.abs(first) < 1.0
    first, tail = first[keep], tail[keep]
    co_sq = 1.0 - np.abs(first) ** 2
    local = np.concatenate([first[:, None], np.sqrt(co_sq)[:, None] * tail], axis=1)
    points = local @ unitary_frame(region.center).conj()
    weights = radius ** 2 * (m - 1) * co_sq ** (m - 2)
    return points, weights


def draw(domain, rng, size, gamma=0.0, focus=None):
    """One chunk of (accepted points, weights) for the domain."""
    if isinstance(domain, Ball):
        return _draw_ball(domain.n, rng, size, gamma, focus)
    if isinstance(domain, Sphere):
        return _draw_sphere(domain.m, rng, size)
    kind = getattr(domain, "kind", None)
    if kind in ("pseudo_ball", "tent", "polydisk"):
        return _draw_polydisk_region(domain, rng, size)
    if kind == "boundary_cap":
        return _draw_cap(domain, rng, size)
    raise InputError(f"unsupported integration domain {domain!r}")


def _check_domain(domain):
    if isinstance(domain, Ball) and domain.n < 1:
        raise ConfigError("ball dimension n >= 1 required")
    if isinstance(domain, Sphere) and domain.m < 1:
        raise ConfigError("sphere dimension m >= 1 required")


def sample_ball(n, cfg, focus=None):
    """Stream of (points, weight factors); weighted means estimate
    integrals against normalized volume."""
    _check_domain(Ball(n))
    if focus is not None:
        focus = np.asarray(focus, dtype=complex)
    for index, size in chunk_plan(cfg.samples):
        yield _draw_ball(n, chunk_rng(cfg.seed, index), size, cfg.gamma, focus)


def sample_sphere(m, cfg):
    _check_domain(Sphere(m))
    for index, size in chunk_plan(cfg.samples):
        yield sphere_directions(chunk_rng(cfg.seed, index), size, m)


def _as_matrix(values, count):
    values = np.asarray(values)
    if values.ndim == 0:
        values = np.full(count, values)
    if values.ndim == 1:
        values = values[:, None]
    if np.iscomplexobj(values):
        return np.concatenate([values.real, values.imag], axis=1), True, values.shape[1]
    return values.astype(float), False, values.shape[1]


def _map_chunks(fn, plan, workers):
    if workers == 1 or len(plan) == 1:
        return [fn(index, size) for index, size in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: fn(*item), plan))


def mc_moments(domain, integrand, cfg, focus=None, full_cov=True):
    """Mean vector and covariance of weight * integrand over the domain."""
    _check_domain(domain)
    if focus is not None:
        focus = np.asarray(focus, dtype=complex)
    gamma = cfg.gamma if isinstance(domain, Ball) else 0.0

    def run_chunk(index, size):
        points, weights = draw(domain, chunk_rng(cfg.seed, index), size, gamma, focus)
        if len(points) == 0:
            return None, None, 0, size, None
        matrix, is_complex, width = _as_matrix(integrand(points), len(points))
        values = matrix * weights[:, None]
        s2 = values.T @ values if full_cov else np.sum(values * values, axis=0)
        return values.sum(axis=0), s2, len(points), size, (is_complex, width)

    results = _map_chunks(run_chunk, chunk_plan(cfg.samples),
                          cfg.workers or env_workers())
    s1 = s2 = shape = None
    accepted = drawn = 0
    for chunk_s1, chunk_s2, chunk_accepted, chunk_drawn, chunk_shape in results:
        drawn += chunk_drawn
        if chunk_s1 is None:
            continue
        accepted += chunk_accepted
        shape = chunk_shape
        s1 = chunk_s1 if s1 is None else s1 + chunk_s1
        s2 = chunk_s2 if s2 is None else s2 + chunk_s2
    if s1 is None:
        raise DegenerateRegionError(
            f"no sample accepted in {domain!r} over {drawn} draws")
    if accepted < LOW_ACCEPTANCE * drawn:
        logger.warning("low acceptance %.4f in %s", accepted / drawn,
                       getattr(domain, "kind", domain))
    mean = s1 / drawn
    if full_cov:
        cov = (s2 - drawn * np.outer(mean, mean)) / max(drawn - 1, 1)
    else:
        cov = (s2 - drawn * mean * mean) / max(drawn - 1, 1)
    return Moments(mean=mean, cov=cov, drawn=drawn, accepted=accepted,
                   seed=cfg.seed, is_complex=shape[0], width=shape[1])


def mc_integrate_many(domain, integrand, cfg, focus=None):
    moments = mc_moments(domain, integrand, cfg, focus=focus, full_cov=False)
    return [moments.estimate(i) for i in range(moments.width)]


def mc_integrate(domain, f, cfg, focus=None):
    """Estimate of the integral of f against normalized v (Ball),
    normalized sigma (Sphere), v restricted to a region, or sigma
    restricted to a boundary cap."""
    return mc_moments(domain, f, cfg, focus=focus, full_cov=False).estimate(0)


def radial_cutoff(m):
    return 50.0 + 10.0 * max(m - 1.0, 0.0)


def radial_tail_bound(m, sup_g=1.0):
    """Bound on the part of the u-integral dropped beyond the cutoff."""
    return sup_g * gamma_function(m) * gammaincc(m, radial_cutoff(m))


def radial_integrate(g, m, epsabs=1e-13, epsrel=1e-12, limit=200):
    """Integral over (0, 1) of (log 1/r)^(m-1) g(r) dr.

    With r = exp(-u) this is the integral over (0, inf) of
    u^(m-1) exp(-u) g(exp(-u)) du; the algebraic endpoint weight is handled
    by QUADPACK's QAWS rule and the range is cut at radial_cutoff(m).
    """
    if not m > 0:
        raise DomainError(f"m > 0 required, got {m}")
    upper = radial_cutoff(m)

    def integrate(part):
        value, _error = quad(
            lambda u: part(g(math.exp(-u))) * math.exp(-u),
            0.0, upper, weight="alg", wvar=(m - 1.0, 0.0),
            epsabs=epsabs, epsrel=epsrel, limit=limit)
        return value

    real = integrate(lambda value: float(np.real(value)))
    if np.iscomplexobj(g(0.5)):
        return complex(real, integrate(lambda value: float(np.imag(value))))
    return real
