"""Geometry of the unit ball of C^n.

Points are numpy complex arrays whose last axis holds the coordinates, so
every function here also accepts batches of shape (..., n). The
pseudodistance is

    rho(z, w) = |1 - <z, w>| - sqrt(1 - |z|^2) sqrt(1 - |w|^2),

the infimum of |1 - <lift(z), lift(w)>| over the phases of the lifts to the
sphere of C^{n+1}.
"""
import math
from dataclasses import dataclass

import numpy as np

from errors import DomainError, InputError

BALL_TOLERANCE = 1e-12
SPHERE_TOLERANCE = 1e-12

# U(z, R) lies inside P(z, 9R); T(zeta, R) lies inside P(zeta, 2R).
PSEUDO_BALL_ENCLOSURE = 9.0
TENT_ENCLOSURE = 2.0


def as_point(z, closed=True):
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z.reshape(1)
    norm = np.sqrt(norm_sq(z))
    if closed:
        if np.any(norm > 1.0 + BALL_TOLERANCE):
            raise DomainError("point outside the closed unit ball")
    elif np.any(norm >= 1.0):
        raise DomainError("point must lie in the open unit ball")
    return z


def as_sphere_point(zeta):
    zeta = np.asarray(zeta, dtype=complex)
    if zeta.ndim == 0:
        zeta = zeta.reshape(1)
    if np.any(np.abs(norm_sq(zeta) - 1.0) > SPHERE_TOLERANCE):
        raise InputError("sphere point must have unit norm")
    return zeta


def _check_dims(z, w):
    if z.shape[-1] != w.shape[-1]:
        raise InputError(
            f"dimension mismatch: {z.shape[-1]} vs {w.shape[-1]}")


def norm_sq(z):
    return np.sum(z.real * z.real + z.imag * z.imag, axis=-1)


def inner(z, w):
    """<z, w> = sum z_i conj(w_i), built from real parts so that
    inner(w, z) is exactly conj(inner(z, w))."""
    re = np.sum(z.real * w.real + z.imag * w.imag, axis=-1)
    im = np.sum(z.imag * w.real - z.real * w.imag, axis=-1)
    return re + 1j * im


def _co_norm(z):
    return np.sqrt(np.clip(1.0 - norm_sq(z), 0.0, None))


def rho(z, w):
    z = as_point(z)
    w = as_point(w)
    _check_dims(z, w)
    c = inner(z, w)
    value = np.hypot(1.0 - c.real, c.imag) - _co_norm(z) * _co_norm(w)
    return np.clip(value, 0.0, None)


def mobius(a, z):
    a = as_point(a, closed=False)
    z = as_point(z)
    _check_dims(a, z)
    a_sq = norm_sq(a)[..., None]
    za = inner(z, a)[..., None]
    safe_sq = np.where(a_sq > 0.0, a_sq, 1.0)
    projection = np.where(a_sq > 0.0, za / safe_sq * a, 0.0)
    complement = z - projection
    numerator = a - projection - np.sqrt(1.0 - a_sq) * complement
    return numerator / (1.0 - za)


def lift(z, theta):
    z = as_point(z)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast_shapes(z.shape[:-1], theta.shape)
    z = np.broadcast_to(z, shape + z.shape[-1:])
    tail = _co_norm(z) * np.exp(1j * theta)
    return np.concatenate([z, tail[..., None]], axis=-1)


def project(zeta):
    zeta = as_sphere_point(zeta)
    if zeta.shape[-1] < 2:
        raise InputError("projection needs a sphere point of C^{n+1}, n >= 1")
    return zeta[..., :-1]


def unitary_frame(x):
    """Unitary F with F x/|x| = e_1, identity where x = 0.

    Built as a phase-corrected complex Householder reflection.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    norm = np.sqrt(norm_sq(x))[..., None]
    identity = np.broadcast_to(np.eye(n, dtype=complex), x.shape + (n,))
    zero = norm[..., 0] == 0.0
    u = np.where(norm > 0.0, x / np.where(norm > 0.0, norm, 1.0), 0.0)
    u[..., 0] = np.where(zero, 1.0, u[..., 0])
    first = u[..., 0]
    phase = np.where(np.abs(first) > 0.0,
                     first / np.where(np.abs(first) > 0.0,
                                      np.abs(first), 1.0),
                     1.0)
    v = u.copy()
    v[..., 0] = v[..., 0] + phase
    vv = norm_sq(v)[..., None, None]
    householder = identity - 2.0 * v[..., :, None] * v[..., None, :].conj() / vv
    frame = -phase.conj()[..., None, None] * householder
    return np.where(zero[..., None, None], identity, frame)


def to_frame(x, w):
    """Coordinates of w in the frame of x (x/|x| becomes e_1)."""
    frame = unitary_frame(x)
    return np.einsum("...ij,...j->...i", frame, w)


def from_frame(x, w):
    frame = unitary_frame(x)
    return np.einsum("...ji,...j->...i", frame.conj(), w)


@dataclass
class PseudoBall:
    center: np.ndarray
    radius: float
    kind = "pseudo_ball"

    def __post_init__(self):
        self.center = as_point(self.center)
        _check_radius(self.radius, upper=2.0)


@dataclass
class Polydisk:
    center: np.ndarray
    radius: float
    kind = "polydisk"

    def __post_init__(self):
        self.center = as_point(self.center)
        _check_radius(self.radius)

    @property
    def frame(self):
        return unitary_frame(self.center)

    @property
    def radii(self):
        """(normal radius, tangential radius)."""
        co_sq = max(1.0 - float(norm_sq(self.center)), 0.0)
        root = math.sqrt(self.radius)
        return self.radius + root * math.sqrt(co_sq), root


@dataclass
class Tent:
    center: np.ndarray
    radius: float
    kind = "tent"

    def __post_init__(self):
        self.center = as_sphere_point(self.center)
        _check_radius(self.radius, upper=2.0)


@dataclass
class BoundaryCap:
    center: np.ndarray
    radius: float
    kind = "boundary_cap"

    def __post_init__(self):
        self.center = as_sphere_point(self.center)
        _check_radius(self.radius)


def _check_radius(radius, upper=None):
    if not radius > 0.0:
        raise InputError(f"region radius must be positive, got {radius}")
    if upper is not None and radius > upper:
        raise InputError(f"region radius must be at most {upper}, got {radius}")


def region_dimension(region):
    return region.center.shape[-1]


def region_contains(region, p):
    p = np.asarray(p, dtype=complex)
    if p.ndim == 0:
        p = p.reshape(1)
    _check_dims(region.center, p)
    if region.kind == "pseudo_ball":
        return rho(region.center, p) < region.radius
    if region.kind in ("tent", "boundary_cap"):
        if region.kind == "tent":
            as_point(p)
        c = inner(p, region.center)
        return np.hypot(1.0 - c.real, c.imag) < region.radius
    if region.kind == "polydisk":
        normal, tangential = region.radii
        local = np.einsum("ij,...j->...i", region.frame, p)
        r = math.sqrt(float(norm_sq(region.center)))
        inside = np.abs(local[..., 0] - r) < normal
        if local.shape[-1] > 1:
            inside &= np.all(np.abs(local[..., 1:]) < tangential, axis=-1)
        return inside
    raise InputError(f"unknown region kind {region.kind}")


def enclosing_polydisk(region):
    if region.kind == "polydisk":
        return region
    if region.kind == "pseudo_ball":
        return Polydisk(region.center, PSEUDO_BALL_ENCLOSURE * region.radius)
    if region.kind == "tent":
        return Polydisk(region.center, TENT_ENCLOSURE * region.radius)
    raise InputError(f"no enclosing polydisk for {region.kind}")


def polydisk_volume(polydisk):
    """Normalized volume (v(B^n) = 1), ignoring the cut by the ball."""
    n = region_dimension(polydisk)
    normal, tangential = polydisk.radii
    return math.factorial(n) * normal ** 2 * tangential ** (2 * (n - 1))


def touches_boundary(z, radius):
    """rho(z, z/|z|) <= R; for z = 0 every boundary point is at distance 1."""
    z = as_point(z)
    return 1.0 - np.sqrt(norm_sq(z)) <= radius


def pseudo_ball_volume_at_origin(radius, n):
    return (2.0 * radius - radius ** 2) ** n


def region_to_spec(region):
    return {
        "kind": region.kind,
        "center": [[float(c.real), float(c.imag)] for c in region.center],
        "radius": float(region.radius),
    }


def region_from_spec(spec):
    kinds = {
        "pseudo_ball": PseudoBall,
        "polydisk": Polydisk,
        "tent": Tent,
        "boundary_cap": BoundaryCap,
    }
    if spec.get("kind") not in kinds:
        raise InputError(f"unknown region kind {spec.get('kind')}")
    center = np.array([complex(re, im) for re, im in spec["center"]])
    return kinds[spec["kind"]](center, float(spec["radius"]))
