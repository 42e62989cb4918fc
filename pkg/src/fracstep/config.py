"""Run configuration: JSON loading, schema validation, object building.

The schema ships with the package (``config_schema.json``) and is the
single authority on accepted keys; anything it does not know is
rejected, so configs cannot silently carry typos.  Semantic rules that
JSON Schema cannot express (monotone breakpoints, length agreement
between mode lists) surface as :class:`ConfigError` with a JSON pointer
to the offending element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ConfigError, DomainError
from .operator import OperatorSpec
from .schedule import OrderSchedule
from .solver import ModalSource, ProblemSpec, SeparableSource

__all__ = ["RunConfig", "load_config", "build_run_config", "schema"]

_SCHEMA_CACHE: dict = {}


def schema() -> dict:
    """The published configuration schema, loaded once per process."""
    if "schema" not in _SCHEMA_CACHE:
        text = resources.files("fracstep").joinpath(
            "config_schema.json").read_text()
        _SCHEMA_CACHE["schema"] = json.loads(text)
    return _SCHEMA_CACHE["schema"]


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration: the problem plus run parameters.

    ``raw`` keeps the parsed JSON so artifacts can echo the exact input
    back out for reproduction.
    """

    problem: ProblemSpec
    run: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def run_value(self, key: str, default):
        return self.run.get(key, default)


def load_config(path: str) -> dict:
    """Parse a JSON config file; malformed text is a config error."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc


def _validate_schema(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw),
                    key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        pointer = "/" + "/".join(str(p) for p in first.absolute_path)
        raise ConfigError(first.message, pointer=pointer)


def _build_source(block: dict | None, num_modes: int) -> ModalSource | None:
    if block is None or block["kind"] == "zero":
        return None
    coeffs = block["coefficients"]
    if len(coeffs) != num_modes:
        raise ConfigError(
            f"source carries {len(coeffs)} mode coefficients but the "
            f"initial data defines {num_modes} modes",
            pointer="/problem/source/coefficients")
    profile = block["time_profile"]
    if profile["kind"] == "polynomial":
        poly = list(profile["coefficients"])

        def value(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            for c in reversed(poly):
                out = out * t + c
            return out

        def rate(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            for k in range(len(poly) - 1, 0, -1):
                out = out * t + k * poly[k]
            return out

        return SeparableSource(coeffs, value, rate)
    scale = float(profile["scale"])
    exponent = float(profile["exponent"])

    def power_rate(t):
        # the derivative of t**exponent is unbounded at zero when the
        # exponent is below one; inf is the faithful sample there
        with np.errstate(divide="ignore"):
            return scale * exponent * np.asarray(t, dtype=float) \
                ** (exponent - 1.0)

    return SeparableSource(coeffs, lambda t: scale * t ** exponent,
                           power_rate)


def build_run_config(raw: dict) -> RunConfig:
    """Validate raw JSON and construct the problem objects it encodes."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _validate_schema(raw)
    prob = raw["problem"]
    try:
        sched = OrderSchedule(
            breakpoints=tuple(prob["schedule"]["breakpoints"]),
            orders=tuple(prob["schedule"]["orders"]))
    except DomainError as exc:
        raise ConfigError(str(exc), pointer="/problem/schedule") from exc

    op_block = prob.get("operator", {})
    try:
        operator = OperatorSpec(
            diffusion=op_block.get("diffusion", 1.0),
            reaction=op_block.get("reaction", 0.0),
            length=op_block.get("length", 1.0))
    except DomainError as exc:
        raise ConfigError(str(exc), pointer="/problem/operator") from exc

    initial = prob["initial"]
    if initial["kind"] == "zero":
        coefficients = (0.0,) * initial["num_modes"]
    else:
        coefficients = tuple(float(c) for c in initial["coefficients"])

    source = _build_source(prob.get("source"), len(coefficients))
    margins = prob.get("margins")
    try:
        problem = ProblemSpec(
            schedule=sched, operator=operator,
            initial_coefficients=coefficients, source=source,
            regularity_margins=None if margins is None else tuple(margins))
    except DomainError as exc:
        raise ConfigError(str(exc), pointer="/problem") from exc
    return RunConfig(problem=problem, run=dict(raw.get("run", {})), raw=raw)
