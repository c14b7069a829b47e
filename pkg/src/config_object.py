import os
import json
import math
from dotenv import load_dotenv

from errors import ConfigError, ConfigParseError, ValidationError

COMMANDS = ("geom-check", "weight-certify", "besov-norm", "carleson-test", "full-suite")
KEYS = ("command", "n", "p", "s", "k", "weight", "test_function", "measure", "seed",
        "samples", "family", "preset", "inner_samples", "output")
FORMATS = ("json", "csv")
DEFAULTS = {
    "seed": 0,
    "samples": 100000,
    "n": 1,
    "p": 2.0,
    "weight": {"family": "constant", "value": 1.0},
    "inner_samples": 4096,
}
NEEDS_S = ("besov-norm", "carleson-test", "full-suite")

PRESETS = {
    "remark-4.3-n1": {
        "n": 1,
        "p": 2.0,
        "s": 0.4,
        "weight": {"family": "phi", "alpha": 0.5, "direction": "nondecreasing"},
    },
    "remark-4.3-n1-induced": {
        "n": 1,
        "p": 2.0,
        "s": 0.4,
        "weight": {
            "family": "induced",
            "aperture": 1.0,
            "boundary": {"family": "cap_power", "beta": 0.5, "center": [[1.0, 0.0]]},
        },
    },
}


def env_workers():
    raw = os.environ.get("BESOV_WORKERS", "").strip()
    if raw == "":
        return os.cpu_count() or 1
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"BESOV_WORKERS must be a positive integer, got {raw!r}")
    if workers < 1:
        raise ConfigError(f"BESOV_WORKERS must be a positive integer, got {raw!r}")
    return workers


def env_progress():
    return os.environ.get("BESOV_PROGRESS", "") == "1"


def env_log_level():
    return os.environ.get("BESOV_LOG_LEVEL", "WARNING").upper()


def _number(values, key, kind=float):
    value = values[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{key} must be a number, got {value!r}")
    if kind is int and value != int(value):
        raise ValidationError(f"{key} must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{key} must be finite")
    return kind(value)


class Run_config:
    def __init__(self, values):
        load_dotenv()
        self.values = values
        self.command = values["command"]
        self.n = values["n"]
        self.p = values["p"]
        self.s = values.get("s")
        self.k = values.get("k")
        self.weight = values["weight"]
        self.test_function = values.get("test_function")
        self.measure = values.get("measure")
        self.seed = values["seed"]
        self.samples = values["samples"]
        self.family = values.get("family")
        self.preset = values.get("preset")
        self.inner_samples = values["inner_samples"]
        self.output = values.get("output") or {}

    def with_overrides(self, seed=None, samples=None, out=None, output_format=None):
        values = dict(self.values)
        if seed is not None:
            values["seed"] = seed
        if samples is not None:
            values["samples"] = samples
        output = dict(values.get("output") or {})
        if out is not None:
            output["path"] = out
        if output_format is not None:
            output["format"] = output_format
        if output:
            values["output"] = output
        return Run_config(validate(values))

    @property
    def output_path(self):
        return self.output.get("path")

    @property
    def output_format(self):
        return self.output.get("format", "json")

    def echo(self):
        return json.loads(json.dumps(self.values))


def validate(values):
    """Check every numeric precondition; returns the normalised values."""
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ValidationError(f"unknown configuration keys {unknown}")
    values = dict(values)
    if values.get("command") not in COMMANDS:
        raise ValidationError(
            f"command must be one of {', '.join(COMMANDS)}, got {values.get('command')!r}")
    values["n"] = _number(values, "n", int)
    if values["n"] < 1:
        raise ValidationError("n >= 1 required")
    values["p"] = _number(values, "p")
    if not values["p"] > 1.0:
        raise ValidationError("p > 1 required")
    values["seed"] = _number(values, "seed", int)
    if not 0 <= values["seed"] < 2 ** 64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    values["samples"] = _number(values, "samples", int)
    if values["samples"] < 1:
        raise ValidationError("samples >= 1 required")
    values["inner_samples"] = _number(values, "inner_samples", int)
    if values["inner_samples"] < 1:
        raise ValidationError("inner_samples >= 1 required")
    if "s" in values:
        values["s"] = _number(values, "s")
    elif values["command"] in NEEDS_S:
        raise ValidationError(f"s is required for {values['command']}")
    if values["command"] in ("carleson-test", "full-suite") and "s" in values \
            and not values["s"] > 0.0:
        raise ValidationError("s > 0 required")
    if "k" in values:
        values["k"] = _number(values, "k", int)
        if "s" in values and not values["k"] > values["s"]:
            raise ValidationError("k > s required")
    if values["command"] == "carleson-test" and not values.get("measure"):
        raise ValidationError("measure path is required for carleson-test")
    for key in ("weight", "test_function", "family", "output"):
        if key in values and not isinstance(values[key], dict):
            raise ValidationError(f"{key} must be an object")
    output = values.get("output") or {}
    if set(output) - {"path", "format"}:
        raise ValidationError("output accepts only path and format")
    if output.get("format", "json") not in FORMATS:
        raise ValidationError(f"output format must be json or csv, got {output.get('format')!r}")
    return values


def parse_config(text):
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise ConfigParseError(error.msg, error.lineno, error.colno) from error
    if not isinstance(document, dict):
        raise ConfigParseError("configuration must be a JSON object", 1, 1)
    values = dict(DEFAULTS)
    preset = document.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}")
        values.update(PRESETS[preset])
    values.update(document)
    return Run_config(validate(values))


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())
