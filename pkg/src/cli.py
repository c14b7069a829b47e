import argparse
import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone

import numpy as np
from dotenv import load_dotenv

from carleson import circle_measure, consistency_report, load_measure
from config_object import env_log_level, load_config
from errors import ToolkitError, ValidationError
from geometry import (
    Polydisk,
    PseudoBall,
    enclosing_polydisk,
    inner,
    mobius,
    norm_sq,
    pseudo_ball_volume_at_origin,
    region_contains,
    rho,
    to_frame,
)
from kernels import besov_norm, function_from_spec
from sampling import SamplerConfig, chunk_rng, derive_seed, draw, mc_integrate, sphere_directions
from weights import class_certify, family_from_spec, weight_from_spec

logger = logging.getLogger(__name__)

TOOL_NAME = "besov-toolkit"
TOOLKIT_VERSION = "0.1.0"

IDENTITY_SAMPLES = 10000
QUASI_TRIANGLE_SAMPLES = 100000
SANDWICH_SHELLS = (0.0, 0.5, 0.9, 0.99)
SANDWICH_RADII = (1e-3, 1e-2, 0.1)
SANDWICH_BUDGET = 16.0
VOLUME_RADII = (0.1, 0.5)


def sampler_config(config):
    return SamplerConfig(seed=config.seed, samples=config.samples)


def with_inner(spec, inner_samples, seed):
    """Fill inner sampling defaults into nested regularized/induced weights."""
    spec = dict(spec)
    if spec.get("family") in ("regularized", "induced"):
        spec.setdefault("inner_samples", inner_samples)
        spec.setdefault("inner_seed", seed)
    for key in ("base", "boundary"):
        if isinstance(spec.get(key), dict):
            spec[key] = with_inner(spec[key], inner_samples, seed)
    if isinstance(spec.get("factors"), list):
        spec["factors"] = [with_inner(f, inner_samples, seed) for f in spec["factors"]]
    return spec


def build_context(config):
    """Turn every descriptor of the config into objects before any
    computation starts."""
    context = {"cfg": sampler_config(config)}
    try:
        context["weight"] = weight_from_spec(
            with_inner(config.weight, config.inner_samples, config.seed))
        context["family"] = family_from_spec(config.family, n=config.n, seed=config.seed)
        if config.test_function is not None:
            context["test_function"] = function_from_spec(config.test_function, n=config.n)
    except ToolkitError as error:
        raise ValidationError(str(error)) from error
    return context


def random_points(rng, count, n, radius_cap=1.0):
    radius = radius_cap * rng.random(count) ** (1.0 / (2 * n))
    return radius[:, None] * sphere_directions(rng, count, n)


def quasi_triangle_ratio(n, seed, count=QUASI_TRIANGLE_SAMPLES):
    """Largest rho(z, w) / (rho(z, u) + rho(u, w)) over random triples."""
    rng = np.random.default_rng(derive_seed(seed, 21, n))
    z, w, u = (random_points(rng, count, n, 0.999) for _ in range(3))
    pair = rho(z, u) + rho(u, w)
    return float(np.max(rho(z, w) / np.where(pair > 0.0, pair, np.inf)))


def identity_checks(n, seed):
    rng = np.random.default_rng(derive_seed(seed, 20, n))
    z = random_points(rng, IDENTITY_SAMPLES, n, 0.999)
    w = random_points(rng, IDENTITY_SAMPLES, n, 0.999)
    a = random_points(rng, IDENTITY_SAMPLES, n, 0.99)
    phi = mobius(a, z)
    gap = np.abs(1.0 - inner(z, a)) ** 2
    co = np.sqrt((1.0 - norm_sq(z)) * (1.0 - norm_sq(w)))
    c = np.abs(1.0 - inner(z, w))
    distance = rho(z, w)
    return {
        "mobius_involution": float(np.max(np.abs(mobius(a, phi) - z))),
        "mobius_identity": float(np.max(np.abs(
            (1.0 - norm_sq(phi)) * gap - (1.0 - norm_sq(a)) * (1.0 - norm_sq(z))))),
        "rho_symmetry": float(np.max(np.abs(distance - rho(w, z)))),
        "rho_factorization": float(np.max(np.abs(
            distance * (1.0 + co / c) - c * norm_sq(mobius(z, w))))),
        "quasi_triangle_ratio": quasi_triangle_ratio(n, seed),
        "samples": IDENTITY_SAMPLES,
        "quasi_triangle_samples": QUASI_TRIANGLE_SAMPLES,
        "provenance": "exact",
    }


def outer_constant(center, radius, points):
    """Smallest C with the points inside P(center, C radius)."""
    local = to_frame(center, points)
    r = math.sqrt(float(norm_sq(center)))
    co = math.sqrt(max(1.0 - r * r, 0.0))
    normal = np.abs(local[:, 0] - r)
    needed = ((-co + np.sqrt(co * co + 4.0 * normal)) / 2.0) ** 2
    if local.shape[1] > 1:
        needed = np.maximum(needed, np.max(np.abs(local[:, 1:]) ** 2, axis=1))
    return float(np.max(needed)) / radius


def sandwich_checks(n, cfg):
    rows = []
    for shell in SANDWICH_SHELLS:
        center = np.zeros(n, dtype=complex)
        center[0] = shell
        for radius in SANDWICH_RADII:
            rng = chunk_rng(derive_seed(cfg.seed, 21, n, len(rows)), 0)
            ball = PseudoBall(center, radius)
            inside, _ = draw(ball, rng, min(cfg.samples, 50000))
            small, _ = draw(Polydisk(center, radius / SANDWICH_BUDGET), rng, 20000)
            volume = mc_integrate(ball, lambda y: np.ones(len(y)), cfg)
            rows.append({
                "shell": shell,
                "radius": radius,
                "outer_constant": outer_constant(center, radius, inside) if len(inside) else None,
                "inner_inclusion": bool(np.all(region_contains(ball, small))),
                "volume_ratio": volume.value / (radius ** n * (radius + 1.0 - shell ** 2)),
                "volume": volume.to_dict(),
                "enclosing_radius": enclosing_polydisk(ball).radius,
            })
    return rows


def volume_checks(n, cfg):
    rows = []
    for radius in VOLUME_RADII:
        estimate = mc_integrate(PseudoBall(np.zeros(n), radius), lambda y: np.ones(len(y)), cfg)
        exact = pseudo_ball_volume_at_origin(radius, n)
        rows.append({"radius": radius, "estimate": estimate.to_dict(), "closed_form": exact,
                     "relative_error": abs(estimate.value - exact) / exact})
    return rows


def perform_geom_check(context, config):
    cfg = context["cfg"]
    return {
        "identities": identity_checks(config.n, config.seed),
        "volume_at_origin": volume_checks(config.n, cfg),
        "sandwich": sandwich_checks(config.n, cfg),
    }


def perform_weight_certify(context, config):
    report = class_certify(context["weight"], config.p, context["family"], context["cfg"])
    return report.to_dict()


def perform_besov_norm(context, config):
    f = context.get("test_function") or function_from_spec({"kind": "constant"})
    k = config.k if config.k is not None else math.floor(config.s) + 1
    estimate = besov_norm(f, config.s, config.p, context["cfg"], k=k,
                          w=context["weight"], n=config.n)
    return {"k": k, "test_function": f.to_spec(), "norm": estimate.to_dict()}


def perform_carleson_test(context, config):
    if config.measure:
        mu = load_measure(config.measure)
    else:
        mu = circle_measure(config.n, 5)
    if mu.n != config.n:
        raise ValidationError(f"measure dimension {mu.n} does not match n = {config.n}")
    report = consistency_report(mu, context["weight"], config.s, config.p, context["cfg"],
                                region_family=context["family"])
    return {"atoms": len(mu), "total_mass": mu.total_mass, **report.to_dict()}


def perform_full_suite(context, config):
    return {name: perform(context, config) for name, perform in SUITES.items()
            if name != "full-suite"}


SUITES = {
    "geom-check": perform_geom_check,
    "weight-certify": perform_weight_certify,
    "besov-norm": perform_besov_norm,
    "carleson-test": perform_carleson_test,
    "full-suite": perform_full_suite,
}


def plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"not serialisable: {type(value).__name__}")


def execute(config):
    context = build_context(config)
    logger.info("running %s", config.command)
    result = SUITES[config.command](context, config)
    logger.info("finished %s", config.command)
    body = {
        "tool": TOOL_NAME,
        "toolkit_version": TOOLKIT_VERSION,
        "command": config.command,
        "config": config.echo(),
        "result": result,
    }
    return {
        "header": {"timestamp": datetime.now(timezone.utc).isoformat()},
        "body": json.loads(json.dumps(body, default=plain)),
    }


def flatten(value, path=""):
    if isinstance(value, dict):
        for key in sorted(value):
            yield from flatten(value[key], f"{path}.{key}" if path else key)
    elif isinstance(value, list):
        for index, item in enumerate(value):
            yield from flatten(item, f"{path}.{index}")
    else:
        yield path, value


def save_report(report, path, output_format):
    with open(path, "w", newline="") as f:
        if output_format == "csv":
            writer = csv.writer(f)
            writer.writerow(["path", "value"])
            writer.writerow(["header.timestamp", report["header"]["timestamp"]])
            for key, value in flatten(report["body"], "body"):
                writer.writerow([key, value])
        else:
            json.dump(report, f, indent="  ", sort_keys=True)
            f.write("\n")


def parse_args(argv):
    parser = argparse.ArgumentParser(prog=TOOL_NAME,
                                     description="Weighted Besov space toolkit on the unit ball")
    parser.add_argument("command", choices=list(SUITES))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--out", help="report path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"))
    return parser.parse_args(argv)


def run(argv=None):
    args = parse_args(argv)
    try:
        config = load_config(args.config)
        config = config.with_overrides(seed=args.seed, samples=args.samples, out=args.out,
                                       output_format=args.format)
        if config.command != args.command:
            raise ValidationError(
                f"config command {config.command!r} does not match {args.command!r}")
        report = execute(config)
    except OSError as error:
        print(f"error: cannot read {args.config}: {error}", file=sys.stderr)
        return 2
    except ToolkitError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    try:
        if config.output_path:
            save_report(report, config.output_path, config.output_format)
        else:
            json.dump(report, sys.stdout, indent="  ", sort_keys=True)
            sys.stdout.write("\n")
    except OSError as error:
        print(f"error: cannot write report: {error}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    load_dotenv()
    logging.basicConfig(level=env_log_level(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
