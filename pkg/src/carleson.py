"""Carleson-measure testing for weighted Besov spaces.

Three conditions on a finite atomic measure mu are estimated:

  (i)   ||f||_{L^p(mu)} <= C ||f||_{B_s^p(w)}
  (ii)  ||int f(y) (1 - <z, y>)^{-(n+1-t)} dv(y)||_{L^p(mu)} <= C ||f||_{L^p(w)}
  (iii) the same with the modulus of the kernel, t = s + 1/p

Each estimate is a maximum over a finite test family, so it is only a
lower bound for the best constant.  The tent condition
mu(T(eta, R)) <= C R^e is computed exactly over a tent family.
"""
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from config_object import env_progress
from errors import ConfigError, DomainError, InputError
from geometry import PseudoBall, Tent, as_point, norm_sq, region_contains
from kernels import (
    Indicator,
    KernelFn,
    ball_potential,
    besov_norm,
    bounded_kernel,
    lp_weighted_norm,
)
from sampling import Estimate, derive_seed, exact
from weights import Power, RegionFamily, class_certify

logger = logging.getLogger(__name__)

APERTURES = (1.5, 3.0, 6.0)
FAMILY_DIRECTIONS = 4


@dataclass
class DiscreteMeasure:
    n: int
    atoms: np.ndarray = None
    masses: np.ndarray = None

    def __post_init__(self):
        if self.n < 1:
            raise InputError("measure dimension n >= 1 required")
        atoms = np.zeros((0, self.n), dtype=complex) if self.atoms is None else self.atoms
        masses = np.zeros(0) if self.masses is None else self.masses
        atoms = np.asarray(atoms, dtype=complex).reshape(-1, self.n)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if len(atoms) != len(masses):
            raise InputError("one mass per atom required")
        if len(atoms) and np.any(norm_sq(atoms) >= 1.0):
            raise DomainError("atoms must lie strictly inside the ball")
        if np.any(masses <= 0.0) or not np.all(np.isfinite(masses)):
            raise InputError("atom masses must be positive and finite")
        self.atoms = atoms
        self.masses = masses

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def lp_norm(self, values, p):
        return float(np.sum(self.masses * np.abs(values) ** p) ** (1.0 / p))

    def mass_in(self, region):
        if not len(self):
            return 0.0
        return float(np.sum(self.masses[region_contains(region, self.atoms)]))

    def scaled(self, factor):
        return DiscreteMeasure(self.n, self.atoms, self.masses * factor)

    def with_atom(self, atom, mass):
        atom = as_point(atom, closed=False)
        return DiscreteMeasure(self.n, np.vstack([self.atoms, atom[None, :]]),
                               np.append(self.masses, mass))


def circle_measure(n, j):
    """2^j equal atoms of total mass 1 on |z_1| = 1 - 2^-j."""
    count = 2 ** j
    atoms = np.zeros((count, n), dtype=complex)
    atoms[:, 0] = (1.0 - 2.0 ** -j) * np.exp(2j * np.pi * np.arange(count) / count)
    return DiscreteMeasure(n, atoms, np.full(count, 1.0 / count))


def load_measure(path):
    try:
        with open(path, newline="") as f:
            rows = [row for row in csv.reader(f) if row]
    except OSError as error:
        raise InputError(f"cannot read measure file {path}: {error}") from error
    if not rows or rows[0][0].strip() != "n" or len(rows[0]) != 2:
        raise InputError(f"{path}: first line must be 'n,<dimension>'")
    try:
        n = int(rows[0][1])
        atoms, masses = [], []
        for line, row in enumerate(rows[1:], start=2):
            if len(row) != 2 * n + 1:
                raise InputError(f"{path}: line {line} needs {2 * n + 1} fields")
            values = [float(value) for value in row]
            atoms.append([complex(values[2 * i], values[2 * i + 1]) for i in range(n)])
            masses.append(values[-1])
    except ValueError as error:
        raise InputError(f"{path}: {error}") from error
    return DiscreteMeasure(n, np.array(atoms, dtype=complex).reshape(-1, n), np.array(masses))


def save_measure(mu, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n", mu.n])
        for atom, mass in zip(mu.atoms, mu.masses):
            row = []
            for z in atom:
                row += [repr(float(z.real)), repr(float(z.imag))]
            writer.writerow(row + [repr(float(mass))])


def _representatives(mu, count=FAMILY_DIRECTIONS):
    if not len(mu):
        return [np.eye(1, mu.n, dtype=complex)[0] * 0.5]
    picks = np.unique(np.linspace(0, len(mu) - 1, min(count, len(mu))).astype(int))
    return [mu.atoms[i] for i in picks]


def _direction(atom):
    norm = math.sqrt(float(norm_sq(atom)))
    if norm == 0.0:
        return np.eye(1, len(atom), dtype=complex)[0]
    return atom / norm


def _levels(depth):
    return int(math.ceil(math.log2(1.0 / depth)))


def default_tent_family(mu, count=FAMILY_DIRECTIONS):
    """Dyadic tents over atom directions down to below the smallest depth."""
    tents = []
    for atom in _representatives(mu, count):
        depth = 1.0 - math.sqrt(float(norm_sq(atom)))
        tents += [Tent(_direction(atom), 2.0 ** -i) for i in range(_levels(depth) + 2)]
    return tents


@dataclass
class EmbeddingFamily:
    """Nonnegative test functions for modes ii/iii, holomorphic ones for
    mode i."""
    positive: list = field(default_factory=list)
    holomorphic: list = field(default_factory=list)

    def tents(self):
        return [f.region for f in self.positive
                if isinstance(f, Indicator) and f.region.kind == "tent"]

    def describe(self):
        return {"positive": [f.to_spec() for f in self.positive],
                "holomorphic": [f.to_spec() for f in self.holomorphic]}


def default_family(mu, count=FAMILY_DIRECTIONS):
    """Tents and pseudo-balls at three apertures around representative atoms,
    dyadic tents up to radius 1, and kernels with poles dilated toward the
    boundary."""
    n = mu.n
    family = EmbeddingFamily()
    for atom in _representatives(mu, count):
        eta = _direction(atom)
        depth = 1.0 - math.sqrt(float(norm_sq(atom)))
        for aperture in APERTURES:
            radius = min(aperture * depth, 2.0)
            family.positive += [Indicator(Tent(eta, radius)), Indicator(PseudoBall(atom, radius))]
        family.positive += [Indicator(Tent(eta, 2.0 ** -i)) for i in range(_levels(depth) + 1)]
        for i in range(1, _levels(depth) + 2):
            pole = (1.0 - 2.0 ** -i) * eta
            family.positive.append(KernelFn(pole, n + 1.0, modulus=True))
            family.holomorphic.append(KernelFn(pole, n + 1.0))
    return family


def tent_test(mu, exponent, tents):
    """sup over the tents of mu(T(eta, R)) / R^exponent (exact)."""
    if not exponent > 0.0:
        raise DomainError(f"tent exponent must be positive, got {exponent}")
    if not tents:
        raise ConfigError("empty tent family")
    return max(mu.mass_in(tent) / tent.radius ** exponent for tent in tents)


def _ratio(numerator, numerator_err, denominator, template):
    if denominator.value <= 0.0:
        return None
    value = numerator / denominator.value
    rel = math.hypot(numerator_err / numerator if numerator > 0.0 else 0.0,
                     denominator.stderr / denominator.value)
    return Estimate(value=value, stderr=value * rel, samples=template.samples,
                    seed=template.seed)


def _potential_norm(mu, potentials, p):
    values = np.array([abs(e.value) for e in potentials])
    errors = np.array([e.stderr for e in potentials])
    norm = mu.lp_norm(values, p)
    if norm == 0.0:
        return 0.0, 0.0
    error = float(np.sum(mu.masses * values ** (p - 1.0) * errors)) * norm ** (1.0 - p)
    return norm, error


def embed_estimate(mu, w, s, p, mode, family, cfg):
    """Lower bound for the embedding constant of the given mode: the max
    over the family of ||T f||_{L^p(mu)} / ||f||."""
    if mode not in ("i", "ii", "iii"):
        raise ConfigError(f"unknown embedding mode {mode!r}")
    if not s > 0.0:
        raise DomainError(f"s > 0 required, got {s}")
    if not p > 1.0:
        raise DomainError("p > 1 required")
    if not len(mu):
        return exact(0.0)
    tests = family.holomorphic if mode == "i" else family.positive
    if not tests:
        raise ConfigError(f"empty test family for mode {mode}")
    t = s + 1.0 / p
    best = None
    for index, f in enumerate(tqdm(tests, desc=f"mode {mode}", disable=not env_progress())):
        shared = cfg.with_seed(derive_seed(cfg.seed, 5 if mode != "i" else 6, index))
        if mode == "i":
            numerator = mu.lp_norm(f.evaluate(mu.atoms), p), 0.0
            denominator = besov_norm(f, s, p, shared, w=w, n=mu.n)
        else:
            kernel = "modulus" if mode == "iii" else "holomorphic"
            potentials = ball_potential(f, t, mu.atoms, kernel, shared)
            numerator = _potential_norm(mu, potentials, p)
            denominator = lp_weighted_norm(f, p, w, shared.with_seed(derive_seed(shared.seed, 1)),
                                           n=mu.n)
        ratio = _ratio(*numerator, denominator, shared)
        if ratio is not None and (best is None or ratio.value > best.value):
            best = ratio
    return best if best is not None else exact(0.0)


def tent_exponent(w, s, p, n, tau_value):
    """n + alpha - sp for power weights, otherwise tau_fit - 1 - sp."""
    if isinstance(w, Power):
        return n + w.alpha - s * p, False
    return tau_value - 1.0 - s * p, True


def offset_tent_exponent(w, s, p, n, tau_value):
    """tau_fit + 1 - sp - (n + 1) for non-power weights, reported next to
    the exponent in use; the two coincide for n = 1."""
    if isinstance(w, Power):
        return None
    return tau_value + 1.0 - s * p - (n + 1.0)


def hypothesis_flags(w, s, p, n, tau_value, bp_verdict):
    tau = tau_value - 1.0
    flags = {
        "bp_verdict": bp_verdict,
        "d_tau_plus_1_fit": tau_value,
        "tau": tau,
        "tau_sp_window": bool(0.0 <= tau - s * p < 1.0),
        "tau_sp_bound": bool(tau < 1.0 + s * p),
        "bounded_kernel": bool(bounded_kernel(s + 1.0 / p, n)),
    }
    flags["discrepancy"] = flags["tau_sp_window"] != flags["tau_sp_bound"]
    offset = offset_tent_exponent(w, s, p, n, tau_value)
    if offset is not None:
        exponent, _ = tent_exponent(w, s, p, n, tau_value)
        flags["tent_exponent_rules_agree"] = bool(abs(offset - exponent) < 1e-12)
    if isinstance(w, Power):
        level = n + max(w.alpha, 0.0) - s * p
        flags["power_weight_range"] = bool(-1.0 < w.alpha < p - 1.0 and 0.0 <= level < 1.0)
    return flags


@dataclass
class EmbeddingReport:
    s: float
    p: float
    weight: dict
    tent_constant: float
    tent_exponent: float
    tent_exponent_heuristic: bool
    tent_exponent_offset: float
    kernel_iii_lowerbound: Estimate
    kernel_ii_lowerbound: Estimate
    besov_i_lowerbound: Estimate
    flags: dict
    consistency: dict
    certification: object = None

    def to_dict(self):
        return {
            "s": self.s,
            "p": self.p,
            "weight": self.weight,
            "bounds": "lower",
            "tent_constant": self.tent_constant,
            "tent_exponent": self.tent_exponent,
            "tent_exponent_heuristic": self.tent_exponent_heuristic,
            "tent_exponent_offset": self.tent_exponent_offset,
            "kernel_iii_lowerbound": self.kernel_iii_lowerbound.to_dict(),
            "kernel_ii_lowerbound": self.kernel_ii_lowerbound.to_dict(),
            "besov_i_lowerbound": self.besov_i_lowerbound.to_dict(),
            "flags": self.flags,
            "consistency": self.consistency,
            "certification": None if self.certification is None
            else self.certification.to_dict(),
        }


def _quotient(a, b):
    if b.value <= 0.0:
        return None
    value = a.value / b.value
    rel = math.hypot(a.stderr / a.value if a.value else 0.0, b.stderr / b.value)
    return {"value": value, "stderr": value * rel, "provenance": "estimate"}


def consistency_report(mu, w, s, p, cfg, family=None, region_family=None,
                       certification=None):
    """Certify w, run the tent test and all three embedding modes on one
    shared family, and report the cross-mode ratios and hypothesis flags."""
    n = mu.n
    if certification is None:
        region_family = region_family or RegionFamily(n=n, seed=cfg.seed)
        certification = class_certify(w, p, region_family, cfg)
    family = family or default_family(mu)
    tau_value = certification.tau.value
    exponent, heuristic = tent_exponent(w, s, p, n, tau_value)
    tents = family.tents() or default_tent_family(mu)
    tent_constant = None
    if exponent > 0.0:
        tent_constant = tent_test(mu, exponent, tents)
    else:
        logger.warning("tent exponent %.3f is not positive; tent test skipped", exponent)
    estimates = {mode: embed_estimate(mu, w, s, p, mode, family, cfg)
                 for mode in ("iii", "ii", "i")}
    flags = hypothesis_flags(w, s, p, n, tau_value, certification.verdicts["B_p"])
    for name in ("tau_sp_window", "tau_sp_bound"):
        if not flags[name]:
            logger.warning("hypothesis check %s fails for tau = %.3f", name, flags["tau"])
    consistency = {
        "iii_over_ii": _quotient(estimates["iii"], estimates["ii"]),
        "iii_over_i": _quotient(estimates["iii"], estimates["i"]),
        "necessity_ratio": None,
    }
    if tent_constant is not None and estimates["iii"].value > 0.0:
        consistency["necessity_ratio"] = tent_constant / estimates["iii"].value ** p
    return EmbeddingReport(
        s=s, p=p, weight=w.to_spec(),
        tent_constant=tent_constant, tent_exponent=exponent,
        tent_exponent_heuristic=heuristic,
        tent_exponent_offset=offset_tent_exponent(w, s, p, n, tau_value),
        kernel_iii_lowerbound=estimates["iii"],
        kernel_ii_lowerbound=estimates["ii"],
        besov_i_lowerbound=estimates["i"],
        flags=flags, consistency=consistency, certification=certification,
    )


