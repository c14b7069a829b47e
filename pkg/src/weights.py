"""Weights on the ball, their regularisations and class certification.

Every weight exposes a vectorised ``evaluate(points)`` over an (m, n) array
and ``to_spec()`` returning its JSON descriptor; ``weight_from_spec`` is the
inverse.  Certification estimates the two-sided Hölder bracket

    (avg_U w) (avg_U w^{-(p'-1)})^{p-1}

over families of pseudo-balls and tents, and the doubling exponent from
masses of nested pseudo-balls.  Numerical sups can refute class membership
at a given scale but never prove it, so verdicts are one of ``supported``,
``refuted-at-scale`` or ``inconclusive``.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from tqdm import tqdm

from config_object import env_progress
from errors import ConfigError, DegenerateRegionError, DomainError
from geometry import (
    PSEUDO_BALL_ENCLOSURE,
    SPHERE_TOLERANCE,
    BoundaryCap,
    PseudoBall,
    Tent,
    as_point,
    as_sphere_point,
    inner,
    lift,
    norm_sq,
    project,
    region_to_spec,
    rho,
    touches_boundary,
    unitary_frame,
)
from sampling import (
    Estimate,
    derive_seed,
    disk_points,
    mc_integrate,
    mc_moments,
    sphere_directions,
)

logger = logging.getLogger(__name__)

DEFAULT_INNER_SAMPLES = 4096
INNER_BLOCK = 1 << 18

SUPPORTED = "supported"
REFUTED = "refuted-at-scale"
INCONCLUSIVE = "inconclusive"

BRACKET_THRESHOLD = 50.0
TRACE_SLOPE_THRESHOLD = 0.15
SCALE_SLOPE_THRESHOLD = 0.25
TRACE_LEVELS = (2, 4, 6, 8, 10, 12)
TAU_TOLERANCE = 0.1


def _center_to_spec(center):
    return [[float(c.real), float(c.imag)] for c in center]


def _center_from_spec(center):
    return np.array([complex(re, im) for re, im in center])


@dataclass(frozen=True)
class Constant:
    value: float = 1.0
    family = "constant"

    def __post_init__(self):
        if not self.value > 0.0:
            raise ConfigError(f"constant weight must be positive, got {self.value}")

    def evaluate(self, points):
        return np.full(np.shape(points)[0], float(self.value))

    def to_spec(self):
        return {"family": self.family, "value": self.value}


@dataclass(frozen=True)
class Power:
    """w(z) = (1 - |z|)^alpha."""
    alpha: float
    family = "power"

    def evaluate(self, points):
        return (1.0 - np.sqrt(norm_sq(points))) ** self.alpha

    def to_spec(self):
        return {"family": self.family, "alpha": self.alpha}


@dataclass(frozen=True)
class Phi:
    """w(z) = phi(1 - |z|) for a continuous piecewise power phi with phi(1) = 1.

    ``pieces`` lists [breakpoint, exponent] pairs with breakpoints decreasing
    from 1; the exponent applies below its breakpoint.  Exponents are
    nonnegative and the direction flag fixes the sign, so phi is monotone.
    """
    alpha: float = None
    direction: str = "nondecreasing"
    pieces: tuple = None
    family = "phi"

    def __post_init__(self):
        if self.direction not in ("nondecreasing", "nonincreasing"):
            raise ConfigError(f"unknown phi direction {self.direction}")
        pieces = self.pieces
        if pieces is None:
            if self.alpha is None:
                raise ConfigError("phi weight needs alpha or pieces")
            pieces = ((1.0, float(self.alpha)),)
        pieces = tuple((float(b), float(e)) for b, e in pieces)
        breaks = [b for b, _ in pieces]
        if breaks[0] != 1.0 or any(b <= 0.0 for b in breaks) \
                or any(a <= b for a, b in zip(breaks, breaks[1:])):
            raise ConfigError("phi breakpoints must decrease from 1 and stay positive")
        if any(e < 0.0 for _, e in pieces):
            raise ConfigError("phi exponents must be nonnegative")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "alpha", max(e for _, e in pieces))

    @property
    def sign(self):
        return 1.0 if self.direction == "nondecreasing" else -1.0

    def evaluate(self, points):
        t = 1.0 - np.sqrt(norm_sq(points))
        upper = np.array([b for b, _ in self.pieces])
        lower = np.append(upper[1:], 0.0)
        exponents = np.array([e for _, e in self.pieces])
        clipped = np.clip(t[:, None], lower[None, :], upper[None, :])
        log_phi = np.sum(exponents * (np.log(clipped) - np.log(upper)), axis=1)
        return np.exp(self.sign * log_phi)

    def to_spec(self):
        return {"family": self.family, "alpha": self.alpha,
                "direction": self.direction,
                "pieces": [list(piece) for piece in self.pieces]}


@dataclass(frozen=True)
class CapPower:
    """Boundary weight |1 - <eta, center>|^beta on the sphere."""
    beta: float
    center: np.ndarray = field(compare=False)
    family = "cap_power"

    def __post_init__(self):
        object.__setattr__(self, "center", as_sphere_point(self.center))

    def evaluate(self, points):
        return np.abs(1.0 - inner(points, self.center)) ** self.beta

    def to_spec(self):
        return {"family": self.family, "beta": self.beta,
                "center": _center_to_spec(self.center)}


@dataclass(frozen=True)
class Product:
    factors: tuple
    family = "product"

    def __post_init__(self):
        if not self.factors:
            raise ConfigError("product weight needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    def evaluate(self, points):
        value = np.ones(np.shape(points)[0])
        for factor in self.factors:
            value = value * factor.evaluate(points)
        return value

    def to_spec(self):
        return {"family": self.family,
                "factors": [factor.to_spec() for factor in self.factors]}


@dataclass(frozen=True)
class PowerOf:
    base: object
    exponent: float
    family = "power_of"

    def evaluate(self, points):
        return self.base.evaluate(points) ** self.exponent

    def to_spec(self):
        return {"family": self.family, "base": self.base.to_spec(),
                "exponent": self.exponent}


@dataclass(frozen=True)
class Lifted:
    """Weight on the sphere of C^{n+1}, constant along the fibres of the
    projection onto the first n coordinates."""
    base: object
    family = "lifted"

    def evaluate(self, points):
        return self.base.evaluate(np.asarray(points)[..., :-1])

    def to_spec(self):
        return {"family": self.family, "base": self.base.to_spec()}


@lru_cache(maxsize=16)
def _unit_polydisk_sample(n, size, seed):
    rng = np.random.default_rng(derive_seed(seed, 3))
    return np.stack([disk_points(rng, size) for _ in range(n)], axis=1)


@lru_cache(maxsize=16)
def _cap_sample(m, size, seed):
    rng = np.random.default_rng(derive_seed(seed, 3))
    uniform = rng.random(size)
    disk = disk_points(rng, size)
    tails = sphere_directions(rng, size, m - 1) if m > 1 else None
    return uniform, disk, tails


def _blocks(count, inner_samples):
    step = max(1, INNER_BLOCK // inner_samples)
    for start in range(0, count, step):
        yield slice(start, min(start + step, count))


@dataclass(frozen=True)
class Regularized:
    """Average of the base weight over U(z, eps (1 - |z|^2)).

    The inner Monte-Carlo uses one fixed base sample in the unit polydisk,
    drawn from ``inner_seed`` and rescaled to each point's enclosing
    polydisk, so evaluation is a deterministic function of z.
    """
    base: object
    eps: float
    inner_samples: int = DEFAULT_INNER_SAMPLES
    inner_seed: int = 0
    family = "regularized"

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if int(self.inner_samples) < 1:
            raise ConfigError("inner_samples >= 1 required")

    def evaluate(self, points):
        points = np.asarray(points, dtype=complex)
        out = np.empty(points.shape[0])
        base = _unit_polydisk_sample(points.shape[1], int(self.inner_samples),
                                     int(self.inner_seed))
        for block in _blocks(points.shape[0], int(self.inner_samples)):
            out[block] = self._average(points[block], base)
        return out

    def _average(self, z, base):
        count, n = z.shape
        co_sq = np.clip(1.0 - norm_sq(z), 0.0, None)
        radius = self.eps * co_sq
        enclosing = PSEUDO_BALL_ENCLOSURE * radius
        normal = enclosing + np.sqrt(enclosing) * np.sqrt(co_sq)
        local = np.empty((count, base.shape[0], n), dtype=complex)
        local[..., 0] = np.sqrt(norm_sq(z))[:, None] + normal[:, None] * base[None, :, 0]
        local[..., 1:] = np.sqrt(enclosing)[:, None, None] * base[None, :, 1:]
        w = np.einsum("bji,bkj->bki", unitary_frame(z).conj(), local)
        inside = norm_sq(w) < 1.0
        w = np.where(inside[..., None], w, 0.0)
        accept = inside & (rho(z[:, None, :], w) < radius[:, None])
        rows, _ = np.nonzero(accept)
        sums = np.bincount(rows, weights=self.base.evaluate(w[accept]), minlength=count)
        counts = accept.sum(axis=1)
        if np.any(counts == 0):
            logger.debug("regularisation fell back to the point value at %d points",
                         int(np.sum(counts == 0)))
            return np.where(counts > 0, sums / np.maximum(counts, 1),
                            self.base.evaluate(z))
        return sums / counts

    def to_spec(self):
        return {"family": self.family, "eps": self.eps,
                "base": self.base.to_spec(),
                "inner_samples": int(self.inner_samples),
                "inner_seed": int(self.inner_seed)}


@dataclass(frozen=True)
class Induced:
    """w~(z) = (1 - |z|^2)^{-n} times the boundary weight's mass on the cap
    |1 - <zeta, z/|z|>| <= aperture (1 - |z|^2); the cap at z = 0 is the whole
    sphere."""
    boundary: object
    aperture: float = 1.0
    inner_samples: int = DEFAULT_INNER_SAMPLES
    inner_seed: int = 0
    family = "induced"

    def __post_init__(self):
        if not self.aperture > 0.0:
            raise ConfigError(f"aperture must be positive, got {self.aperture}")
        if int(self.inner_samples) < 1:
            raise ConfigError("inner_samples >= 1 required")

    def evaluate(self, points):
        points = np.asarray(points, dtype=complex)
        out = np.empty(points.shape[0])
        base = _cap_sample(points.shape[1], int(self.inner_samples), int(self.inner_seed))
        for block in _blocks(points.shape[0], int(self.inner_samples)):
            out[block] = self._induced(points[block], base)
        return out

    def _induced(self, z, base):
        count, n = z.shape
        uniform, disk, tails = base
        norm = np.sqrt(norm_sq(z))
        co_sq = np.clip(1.0 - norm ** 2, 0.0, None)
        direction = np.where(norm[:, None] > 0.0, z / np.where(norm > 0.0, norm, 1.0)[:, None], 0.0)
        direction[norm == 0.0, 0] = 1.0
        radius = np.where(norm > 0.0, np.minimum(self.aperture * co_sq, 2.0), 2.0)
        if n == 1:
            half_width = 2.0 * np.arcsin(radius / 2.0)
            angles = half_width[:, None] * (2.0 * uniform[None, :] - 1.0)
            eta = (direction[:, 0][:, None] * np.exp(1j * angles))[..., None]
            values = self.boundary.evaluate(eta.reshape(-1, 1)).reshape(count, -1)
            mass = half_width / math.pi * values.mean(axis=1)
        else:
            first = 1.0 + radius[:, None] * disk[None, :]
            keep = np.abs(first) < 1.0
            first = np.where(keep, first, 0.0)
            first_co = 1.0 - np.abs(first) ** 2
            local = np.concatenate(
                [first[..., None],
                 np.sqrt(first_co)[..., None] * tails[None, :, :]], axis=2)
            eta = np.einsum("bji,bkj->bki", unitary_frame(direction).conj(), local)
            density = radius[:, None] ** 2 * (n - 1) * first_co ** (n - 2)
            rows, _ = np.nonzero(keep)
            values = self.boundary.evaluate(eta[keep]) * density[keep]
            mass = np.bincount(rows, weights=values, minlength=count) / disk.shape[0]
        return mass / co_sq ** n

    def to_spec(self):
        return {"family": self.family, "aperture": self.aperture,
                "boundary": self.boundary.to_spec(),
                "inner_samples": int(self.inner_samples),
                "inner_seed": int(self.inner_seed)}


def weight_from_spec(spec):
    try:
        family = spec["family"]
        if family == "constant":
            return Constant(float(spec.get("value", 1.0)))
        if family == "power":
            return Power(float(spec["alpha"]))
        if family == "phi":
            pieces = spec.get("pieces")
            return Phi(alpha=spec.get("alpha"),
                       direction=spec.get("direction", "nondecreasing"),
                       pieces=None if pieces is None else tuple(tuple(p) for p in pieces))
        if family == "cap_power":
            return CapPower(float(spec["beta"]), _center_from_spec(spec["center"]))
        if family == "product":
            return Product(tuple(weight_from_spec(f) for f in spec["factors"]))
        if family == "power_of":
            return PowerOf(weight_from_spec(spec["base"]), float(spec["exponent"]))
        if family == "lifted":
            return Lifted(weight_from_spec(spec["base"]))
        if family == "regularized":
            return Regularized(weight_from_spec(spec["base"]), float(spec["eps"]),
                               int(spec.get("inner_samples", DEFAULT_INNER_SAMPLES)),
                               int(spec.get("inner_seed", 0)))
        if family == "induced":
            return Induced(weight_from_spec(spec["boundary"]),
                           float(spec.get("aperture", 1.0)),
                           int(spec.get("inner_samples", DEFAULT_INNER_SAMPLES)),
                           int(spec.get("inner_seed", 0)))
    except (KeyError, TypeError) as error:
        raise ConfigError(f"malformed weight descriptor {spec!r}: {error}") from error
    raise ConfigError(f"unknown weight family {spec.get('family')!r}")


def eval_weight(w, z):
    """Value of w at z (|z| < 1), or at a sphere point for lifted weights.
    Accepts a single point or an (m, n) batch."""
    if isinstance(w, Lifted):
        z = as_sphere_point(z)
        project(z)
    else:
        z = as_point(z)
        if np.any(norm_sq(z) >= 1.0):
            raise DomainError("weights are evaluated in the open ball, |z| < 1 required")
    single = z.ndim == 1
    values = w.evaluate(np.atleast_2d(z))
    return float(values[0]) if single else values


def regularize(w, eps, inner_samples=DEFAULT_INNER_SAMPLES, inner_seed=0):
    return Regularized(w, eps, inner_samples, inner_seed)


def region_mass(w, region, cfg):
    """Integral of w over the region against v (or sigma for caps)."""
    return mc_integrate(region, w.evaluate, cfg)


def tent_mass(w, tent, cfg):
    return region_mass(w, tent, cfg)


def _depth(points, region):
    if region.kind == "boundary_cap":
        points = points[..., :-1]
    return 1.0 - np.sqrt(norm_sq(points))


def _bracket(mean, cov, draws, columns, p, template):
    a, b, v = columns
    if min(mean[a], mean[b], mean[v]) <= 0.0:
        return None
    value = (mean[a] / mean[v]) * (mean[b] / mean[v]) ** (p - 1.0)
    gradient = np.zeros(len(mean))
    gradient[a] = 1.0 / mean[a]
    gradient[b] = (p - 1.0) / mean[b]
    gradient[v] = -p / mean[v]
    var = float(gradient @ cov @ gradient) / draws
    return Estimate(value=float(value), stderr=float(value * math.sqrt(max(var, 0.0))),
                    samples=draws, seed=template.seed, acceptance=template.acceptance)


@dataclass
class BracketTrace:
    bracket: Estimate
    levels: list
    slope: float

    def to_dict(self):
        return {
            "bracket": self.bracket.to_dict(),
            "levels": [{"depth_level": j, "bracket": None if e is None else e.to_dict()}
                       for j, e in self.levels],
            "slope": self.slope,
        }


def _brackets(w, region, p, cfg, levels):
    if not p > 1.0:
        raise ConfigError("p > 1 required")
    dual = 1.0 / (p - 1.0)
    cutoffs = [region.radius * 2.0 ** -j for j in levels]

    def integrand(points):
        value = w.evaluate(points)
        with np.errstate(divide="ignore", over="ignore"):
            columns = [value, value ** -dual, np.ones_like(value)]
        if cutoffs:
            depth = _depth(points, region)
            for cutoff in cutoffs:
                mask = (depth > cutoff).astype(float)
                columns += [value * mask, columns[1] * mask, mask]
        return np.stack(columns, axis=1)

    moments = mc_moments(region, integrand, cfg, full_cov=True)
    template = moments.estimate(2)
    mean, cov, draws = moments.mean, moments.cov, moments.drawn
    bracket = _bracket(mean, cov, draws, (0, 1, 2), p, template)
    traced = [(j, _bracket(mean, cov, draws, (3 + 3 * i, 4 + 3 * i, 5 + 3 * i), p, template))
              for i, j in enumerate(levels)]
    return bracket, traced


def ap_bracket(w, region, p, cfg):
    """(avg w)(avg w^{-(p'-1)})^{p-1} over the region with delta-method stderr."""
    bracket, _ = _brackets(w, region, p, cfg, ())
    if bracket is None:
        raise DegenerateRegionError(f"weight averages vanish on {region.kind}")
    return bracket


def bracket_trace(w, region, p, cfg, levels=TRACE_LEVELS):
    """The bracket plus brackets restricted to depth 1 - |y| > R 2^-j.

    A non-integrable w or w^{-(p'-1)} keeps growing as the depth cut-off is
    refined; the slope is the log2 growth per level over the last levels.
    """
    bracket, traced = _brackets(w, region, p, cfg, tuple(levels))
    if bracket is None:
        raise DegenerateRegionError(f"weight averages vanish on {region.kind}")
    slope = float("nan")
    finite = [(j, e.value) for j, e in traced if e is not None]
    if len(finite) >= 2:
        j0, b0 = finite[max(len(finite) - 3, 0)]
        j1, b1 = finite[-1]
        slope = (math.log2(b1) - math.log2(b0)) / (j1 - j0)
    return BracketTrace(bracket=bracket, levels=traced, slope=slope)


def lifted_bracket(w, cap, p, cfg):
    """Bracket of the lifted weight over a boundary cap of S^{n+1}."""
    return ap_bracket(Lifted(w), cap, p, cfg)


def fit_slope(xs, ys):
    return float(np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)[0])


def pooled_slope(sequences):
    """Common slope across sequences with their own intercepts, and its
    standard error."""
    xs = [np.asarray(x, dtype=float) for x, _ in sequences]
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in sequences])
    design = np.zeros((len(ys), 1 + len(xs)))
    row = 0
    for column, x in enumerate(xs, start=1):
        design[row:row + len(x), 0] = x
        design[row:row + len(x), column] = 1.0
        row += len(x)
    coeffs, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
    if rank < design.shape[1]:
        raise ConfigError("slope fit needs at least two distinct steps")
    residual = float(np.sum((ys - design @ coeffs) ** 2))
    dof = len(ys) - design.shape[1]
    if dof <= 0:
        return float(coeffs[0]), float("inf")
    covariance = np.linalg.inv(design.T @ design) * residual / dof
    return float(coeffs[0]), math.sqrt(covariance[0, 0])


@dataclass(frozen=True)
class RegionFamily:
    """Pseudo-balls on radial shells times directions at dyadic radii, tents,
    random balls, and the nested sequences used for the doubling fit."""
    n: int = 1
    shells: tuple = (0.0, 0.5, 0.9, 0.99)
    directions: int = 2
    radii: tuple = tuple(2.0 ** -j for j in range(1, 9))
    tents: bool = True
    random_centers: int = 4
    tau_radii: tuple = (2.0 ** -8, 2.0 ** -9, 2.0 ** -10)
    tau_steps: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("family dimension n >= 1 required")
        if any(not 0.0 < r <= 2.0 for r in self.radii + self.tau_radii):
            raise ConfigError("family radii must lie in (0, 2]")
        if any(not 0.0 <= s < 1.0 for s in self.shells):
            raise ConfigError("shell radii must lie in [0, 1)")

    def unit_directions(self):
        e1 = np.zeros(self.n, dtype=complex)
        e1[0] = 1.0
        if self.directions <= 1:
            return [e1]
        rng = np.random.default_rng(derive_seed(self.seed, 7))
        return [e1] + list(sphere_directions(rng, self.directions - 1, self.n))

    def balls(self):
        regions = []
        for shell in self.shells:
            for direction in self.unit_directions()[:1 if shell == 0.0 else None]:
                regions += [PseudoBall(shell * direction, r) for r in self.radii]
        if self.random_centers:
            rng = np.random.default_rng(derive_seed(self.seed, 11))
            directions = sphere_directions(rng, self.random_centers, self.n)
            radius = rng.random(self.random_centers) ** (1.0 / (2 * self.n))
            picks = rng.integers(0, len(self.radii), self.random_centers)
            regions += [PseudoBall(r * d, self.radii[i])
                        for r, d, i in zip(radius, directions, picks)]
        return regions

    def tent_regions(self):
        if not self.tents:
            return []
        return [Tent(d, r) for d in self.unit_directions() for r in self.radii]

    def regions(self):
        regions = self.balls() + self.tent_regions()
        if not regions or not self.radii:
            raise ConfigError("empty region family")
        return regions

    def doubling_sequences(self):
        """(center, base radius) pairs: boundary centres, which drive the
        doubling fit, and interior centres at depth R / 2 whose base ball
        touches the boundary."""
        if 2.0 ** self.tau_steps * max(self.tau_radii, default=0.0) > 2.0:
            raise ConfigError("doubling sequences must stay within radius 2")
        sequences = []
        for direction in self.unit_directions():
            for r in self.tau_radii:
                sequences += [(direction, r), ((1.0 - r / 2.0) * direction, r)]
        if not sequences:
            raise ConfigError("empty doubling family")
        return sequences

    def to_spec(self):
        return {"n": self.n, "shells": list(self.shells), "directions": self.directions,
                "radii": list(self.radii), "tents": self.tents,
                "random_centers": self.random_centers,
                "tau_radii": list(self.tau_radii), "tau_steps": self.tau_steps,
                "seed": self.seed}


def family_from_spec(spec, n=1, seed=0):
    spec = dict(spec or {})
    unknown = set(spec) - set(RegionFamily.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown family keys {sorted(unknown)}")
    spec.setdefault("n", n)
    spec.setdefault("seed", seed)
    for key in ("shells", "radii", "tau_radii"):
        if key in spec:
            spec[key] = tuple(float(value) for value in spec[key])
    return RegionFamily(**spec)


@dataclass
class TauFit:
    value: float
    stderr: float
    value_all_balls: float
    sequences: int

    def to_dict(self):
        return {"tau_fit": self.value, "stderr": self.stderr,
                "tau_fit_all_balls": self.value_all_balls,
                "sequences": self.sequences, "provenance": "estimate"}


def tau_fit(w, family, cfg):
    """Least-squares doubling exponent over nested boundary-touching balls.

    ``value`` fits log2 w(U(zeta, 2^k R)) / w(U(zeta, R)) against k on the
    boundary-centred sequences, where every ball touches S^n, the factor
    R / ((1 - |z|^2) + R) of the boundary-touching normalisation is 1 and
    U(zeta, R) is the tent T(zeta, R).  ``value_all_balls`` pools every
    sequence under the all-balls normalisation, dividing by
    ((1 - |z|^2) + 2^k R) / ((1 - |z|^2) + R) and fitting 2^{k (tau - 1)}.
    """
    touching, all_balls = [], []
    steps = np.arange(family.tau_steps + 1)
    for index, (center, radius) in enumerate(family.doubling_sequences()):
        shared = cfg.with_seed(derive_seed(cfg.seed, 2, index))
        co_sq = max(1.0 - float(norm_sq(center)), 0.0)
        boundary = co_sq < SPHERE_TOLERANCE
        region = Tent if boundary else PseudoBall
        masses = np.array([region_mass(w, region(center, radius * 2.0 ** k), shared).value
                           for k in steps])
        log_ratio = np.log2(masses / masses[0])
        if boundary:
            touching.append((steps, log_ratio))
        all_balls.append((steps, log_ratio - np.log2((co_sq + radius * 2.0 ** steps)
                                                     / (co_sq + radius))))
    value, stderr = pooled_slope(touching)
    value_all, _ = pooled_slope(all_balls)
    return TauFit(value=value, stderr=stderr, value_all_balls=value_all + 1.0,
                  sequences=len(touching))


def predicted_class(w, p, n):
    """Class predictions for the closed-form families, or None."""
    if isinstance(w, Power):
        alpha = w.alpha
        return {"family": "power", "bp": -1.0 < alpha < p - 1.0,
                "tau": n + alpha + 1.0 if alpha >= 0.0 else n + 1.0,
                "tau_strict": False}
    if isinstance(w, Phi):
        alpha = w.alpha
        if w.direction == "nondecreasing":
            return {"family": "phi", "bp": 0.0 < alpha < p - 1.0,
                    "tau": n + alpha + 1.0, "tau_strict": True}
        return {"family": "phi", "bp": 0.0 < alpha < 1.0,
                "tau": n + 1.0, "tau_strict": False}
    return None


@dataclass
class RegionResult:
    region: object
    touches: bool
    trace: BracketTrace

    def to_dict(self):
        return {"region": region_to_spec(self.region), "touches": self.touches,
                **self.trace.to_dict()}


@dataclass
class ClassReport:
    p: float
    ap_sup: Estimate
    bp_sup: Estimate
    tau: TauFit
    regions: list
    scale_slopes: dict
    verdicts: dict
    tau_target: float
    prediction: dict = None

    def to_dict(self):
        return {
            "p": self.p,
            "tau_target": self.tau_target,
            "ap_sup": self.ap_sup.to_dict(),
            "bp_sup": self.bp_sup.to_dict(),
            "tau": self.tau.to_dict(),
            "scale_slopes": self.scale_slopes,
            "verdicts": self.verdicts,
            "prediction": self.prediction,
            "regions": [result.to_dict() for result in self.regions],
        }


def _scale_slope(results):
    """log2 growth of the per-radius sup per halving of the radius, over
    the four finest radii."""
    sups = {}
    for result in results:
        radius = result.region.radius
        sups[radius] = max(sups.get(radius, 0.0), result.trace.bracket.value)
    radii = sorted(sups)[:4]
    if len(radii) < 2:
        return float("nan")
    return fit_slope([-math.log2(r) for r in radii], [math.log2(sups[r]) for r in radii])


def _sup(results):
    best = max(results, key=lambda result: result.trace.bracket.value)
    return best.trace.bracket


def _class_verdict(results, scale_slope, threshold):
    if not results:
        return INCONCLUSIVE
    sup = _sup(results)
    slopes = [r.trace.slope for r in results if not math.isnan(r.trace.slope)]
    if sup.value > threshold or (slopes and max(slopes) > TRACE_SLOPE_THRESHOLD) \
            or (not math.isnan(scale_slope) and scale_slope > SCALE_SLOPE_THRESHOLD):
        return REFUTED
    if sup.stderr > 0.5 * sup.value:
        return INCONCLUSIVE
    return SUPPORTED


def _tau_verdict(estimate, stderr, tau):
    if estimate <= tau + TAU_TOLERANCE:
        return SUPPORTED
    if estimate - 2.0 * stderr > tau + TAU_TOLERANCE:
        return REFUTED
    return INCONCLUSIVE


def class_certify(w, p, family, cfg, tau=None, threshold=BRACKET_THRESHOLD):
    """Brackets over the family, the doubling fit and per-class verdicts.

    A_p uses every region; B_p only tents and balls touching the boundary.
    Doubling verdicts compare the fit with ``tau`` (default p (n + 1)).
    """
    if not p > 1.0:
        raise ConfigError("p > 1 required")
    regions = family.regions()
    logger.info("certifying %s over %d regions", w.family, len(regions))
    results = []
    for index, region in enumerate(tqdm(regions, desc="brackets", disable=not env_progress())):
        try:
            trace = bracket_trace(w, region, p, cfg.with_seed(derive_seed(cfg.seed, 1, index)))
        except DegenerateRegionError as error:
            logger.warning("skipping region %d: %s", index, error)
            continue
        touches = region.kind == "tent" or bool(touches_boundary(region.center, region.radius))
        results.append(RegionResult(region=region, touches=touches, trace=trace))
    if not results:
        raise ConfigError("no region of the family could be integrated")
    boundary = [result for result in results if result.touches]
    fit = tau_fit(w, family, cfg)
    target = p * (family.n + 1.0) if tau is None else tau
    scale_slopes = {"A_p": _scale_slope(results), "B_p": _scale_slope(boundary)}
    verdicts = {
        "A_p": _class_verdict(results, scale_slopes["A_p"], threshold),
        "B_p": _class_verdict(boundary, scale_slopes["B_p"], threshold),
        "d_tau": _tau_verdict(fit.value, fit.stderr, target),
        "D_tau": _tau_verdict(fit.value_all_balls, fit.stderr, target),
    }
    for name, verdict in verdicts.items():
        if verdict != SUPPORTED:
            logger.warning("%s verdict for %s: %s", name, w.family, verdict)
    return ClassReport(
        p=p,
        ap_sup=_sup(results),
        bp_sup=_sup(boundary) if boundary else Estimate(0.0, 0.0, cfg.samples, cfg.seed),
        tau=fit,
        regions=results,
        scale_slopes=scale_slopes,
        verdicts=verdicts,
        tau_target=target,
        prediction=predicted_class(w, p, family.n),
    )


def lifted_caps(z, radius):
    """Boundary caps of S^{n+1} over z: centres on the fibre above z."""
    return [BoundaryCap(lift(z, theta), radius) for theta in (0.0, math.pi / 2)]
