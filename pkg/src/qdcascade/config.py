"""Run configuration: sectioned keys, unit-suffixed values, provenance.

Configuration files are YAML (JSON is accepted as a subset). Every value
may be a bare number in the canonical unit of its field or a string with an
explicit unit, e.g. ``"405 ps"`` for a decay rate (read as a lifetime),
``"335 GHz"`` for an angular frequency (converted with ``2 pi f``) or
``"76 MHz"`` for a count rate.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

import yaml

from .errors import InvalidArgument
from .experiments import InhomogeneousNoise
from .model import PhysicalParams
from .solver import REPETITION_PERIOD, Method, SolverConfig

__all__ = ["ConfigError", "Field", "SCHEMA", "RunConfig", "load", "parse_quantity"]

TWO_PI = 2.0 * math.pi


class ConfigError(InvalidArgument):
    """Configuration cannot be parsed or violates a field invariant."""


# canonical units: time ps, rate 1/ps, angular rad/ps, frequency Hz
_TIME = {"ps": 1.0, "fs": 1e-3, "ns": 1e3, "us": 1e6}
_RATE = {"1/ps": 1.0, "1/ns": 1e-3, "1/fs": 1e3, "ps^-1": 1.0, "ns^-1": 1e-3}
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
_ANGULAR = {"rad/ps": 1.0, "rad/ns": 1e-3, "rad/fs": 1e3}
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(value, kind: str) -> float:
    """Convert ``value`` to the canonical unit of ``kind``.

    ``kind`` is one of ``"time"``, ``"rate"``, ``"angular"``, ``"frequency"``
    or ``"number"``. A time unit on a rate is read as a lifetime and a
    frequency unit on an angular quantity is multiplied by ``2 pi``.
    """
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a number or a string with unit, got {value!r}")
    m = _NUM.match(value)
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}")
    x = float(m.group(1))
    unit = m.group(2).replace(" ", "")
    if not unit:
        return x
    low = unit.lower()
    if kind == "time" and low in _TIME:
        return x * _TIME[low]
    if kind == "rate":
        if low in _RATE:
            return x * _RATE[low]
        if low in _TIME:
            if x <= 0.0:
                raise ConfigError(f"lifetime must be > 0, got {value!r}")
            return 1.0 / (x * _TIME[low])
    if kind == "angular":
        if low in _ANGULAR:
            return x * _ANGULAR[low]
        if low in _FREQ:
            return TWO_PI * x * _FREQ[low] * 1e-12
    if kind == "frequency" and low in _FREQ:
        return x * _FREQ[low]
    if kind == "number" and low in ("", "dimensionless"):
        return x
    raise ConfigError(f"unit {m.group(2)!r} is not valid for a {kind} quantity ({value!r})")


@dataclass(frozen=True)
class Field:
    default: Any
    kind: str = "number"
    unit: str = ""
    measured: bool = False
    check: Callable[[Any], str | None] | None = None


def _positive(v):
    return None if v > 0.0 else "must be > 0"


def _nonneg(v):
    return None if v >= 0.0 else "must be >= 0"


def _count(minimum):
    def check(v):
        return None if v == int(v) and v >= minimum else f"must be an integer >= {minimum}"
    return check


def _odd(v):
    return None if v == int(v) and v >= 3 and int(v) % 2 == 1 else "must be an odd integer >= 3"


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(map(str, options))}"
    return check


_DETUNINGS_GHZ = [0.0, 22.0, 35.0, 57.0]

SCHEMA: dict[str, dict[str, Field]] = {
    "physics": {
        "gamma_b": Field(1.0 / 405.0, "rate", "1/ps", True, _nonneg),
        "gamma_x": Field(1.0 / 771.0, "rate", "1/ps", True, _nonneg),
        "gamma_db": Field(1.0 / 211.0, "rate", "1/ps", True, _nonneg),
        "gamma_dx": Field(1.0 / 119.0, "rate", "1/ps", True, _nonneg),
        "delta_e": Field(TWO_PI * 0.335, "angular", "rad/ps", True, _positive),
        "k": Field(0.47, "number", "", True, _nonneg),
        "incoherent_ref": Field(None, "angular", "rad/ps", False, _positive),
    },
    "pulse": {
        "sigma": Field(4.0, "time", "ps", True, _positive),
        "delta_b": Field(0.0, "angular", "rad/ps", False),
    },
    "solver": {
        "rtol": Field(1e-8, "number", "", False, _positive),
        "atol": Field(1e-10, "number", "", False, _positive),
        "max_step_pulse": Field(None, "time", "ps", False, _positive),
        "max_step_dark": Field(10.0, "time", "ps", False, _positive),
        "method": Field("rk45", "choice", "", False, _choice("rk45", "rk4")),
        "fixed_step": Field(1e-3, "time", "ps", False, _positive),
        "min_step": Field(1e-6, "time", "ps", False, _positive),
        "interaction_frame": Field(True, "bool"),
    },
    "trajectory": {
        "omega_peak": Field(None, "angular", "rad/ps", False, _nonneg),
        "phase": Field(0.0, "number", "rad"),
        "initial": Field("g", "choice", "", False, _choice("g", "x", "b")),
        "t_start": Field(-20.0, "time", "ps"),
        "t_end": Field(REPETITION_PERIOD, "time", "ps", True),
        "samples": Field(2001, "number", "", False, _count(2)),
    },
    "rabi": {
        "omega_min": Field(0.05, "angular", "rad/ps", False, _nonneg),
        "omega_max": Field(6.0, "angular", "rad/ps", False, _positive),
        "points": Field(50, "number", "", False, _count(3)),
        "detunings": Field([TWO_PI * f * 1e-3 for f in _DETUNINGS_GHZ], "angular_list", "rad/ps", True),
    },
    "ramsey": {
        "tau_min": Field(8.0, "time", "ps", True, _positive),
        "tau_max": Field(480.0, "time", "ps", False, _positive),
        "points": Field(24, "number", "", False, _count(4)),
        "phases": Field(12, "number", "", False, _count(8)),
        "omega_half": Field(None, "angular", "rad/ps", False, _positive),
        "target_T2star": Field(179.0, "time", "ps", True, _positive),
        "sigma_inh": Field(None, "angular", "rad/ps", False, _nonneg),
        "quadrature_order": Field(21, "number", "", False, _odd),
        "allow_overlap": Field(True, "bool"),
        "observable": Field("p_xx", "choice", "", False, _choice("p_xx", "p_x")),
    },
    "echo": {
        "tau_min": Field(32.0, "time", "ps", False, _positive),
        "tau_max": Field(480.0, "time", "ps", False, _positive),
        "points": Field(15, "number", "", False, _count(4)),
        "phases": Field(12, "number", "", False, _count(8)),
        "omega_half": Field(None, "angular", "rad/ps", False, _positive),
        "target_T2star": Field(179.0, "time", "ps", True, _positive),
        "sigma_inh": Field(None, "angular", "rad/ps", False, _nonneg),
        "quadrature_order": Field(21, "number", "", False, _odd),
        "phase_on": Field("last", "choice", "", False, _choice("last", "middle")),
        "allow_overlap": Field(False, "bool"),
        "observable": Field("p_xx", "choice", "", False, _choice("p_xx", "p_x")),
    },
    "lifetime": {
        "duration": Field(4000.0, "time", "ps", False, _positive),
        "samples": Field(401, "number", "", False, _count(3)),
    },
    "efficiency": {
        "singles_xx": Field(23e3, "frequency", "Hz", True, _positive),
        "singles_x": Field(24e3, "frequency", "Hz", True, _positive),
        "coincidences": Field(62.0, "frequency", "Hz", True, _positive),
        "rep_rate": Field(76e6, "frequency", "Hz", True, _positive),
        "suppression_factor": Field(2.0, "number", "", True, _positive),
    },
}

_INT_FIELDS = {("trajectory", "samples"), ("rabi", "points"), ("ramsey", "points"),
               ("ramsey", "phases"), ("ramsey", "quadrature_order"), ("echo", "points"),
               ("echo", "phases"), ("echo", "quadrature_order"), ("lifetime", "samples")}


def _convert(section: str, name: str, spec: Field, raw):
    where = f"{section}.{name}"
    if raw is None:
        if spec.default is None:
            return None
        raise ConfigError(f"{where}: null is not allowed")
    try:
        if spec.kind == "bool":
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.strip().lower() in ("true", "false", "yes", "no", "1", "0"):
                return raw.strip().lower() in ("true", "yes", "1")
            raise ConfigError(f"expected true/false, got {raw!r}")
        if spec.kind == "choice":
            value = str(raw).strip().lower()
        elif spec.kind == "angular_list":
            if isinstance(raw, str):
                raw = [s for s in raw.split(",") if s.strip()]
            if not isinstance(raw, (list, tuple)) or not raw:
                raise ConfigError("expected a non-empty list")
            return [parse_quantity(v, "angular") for v in raw]
        else:
            value = parse_quantity(raw, spec.kind)
            if not math.isfinite(value):
                raise ConfigError("must be finite")
            if (section, name) in _INT_FIELDS:
                if value != int(value):
                    raise ConfigError("must be an integer")
                value = int(value)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if spec.check is not None:
        problem = spec.check(value)
        if problem:
            raise ConfigError(f"{where} = {value!r}: {problem}")
    return value


@dataclass
class RunConfig:
    """Resolved configuration with per-field provenance."""

    values: dict[str, dict[str, Any]]
    provenance: dict[str, dict[str, str]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def resolved(self) -> dict[str, dict[str, Any]]:
        """Plain nested dict in canonical units; loading it reproduces this config."""
        return copy.deepcopy(self.values)

    def params(self) -> PhysicalParams:
        try:
            return PhysicalParams(**self.values["physics"])
        except InvalidArgument as exc:
            raise ConfigError(f"physics: {exc}") from None

    def solver_config(self, **extra) -> SolverConfig:
        s = dict(self.values["solver"])
        s["method"] = Method(s["method"])
        try:
            return SolverConfig(**s, **extra)
        except InvalidArgument as exc:
            raise ConfigError(f"solver: {exc}") from None

    def noise(self, section: str) -> InhomogeneousNoise:
        sec = self.values[section]
        sigma = sec["sigma_inh"]
        if sigma is None:
            sigma = 1.0 / (math.sqrt(2.0) * sec["target_T2star"])
        return InhomogeneousNoise(sigma, sec["quadrature_order"])

    def report(self) -> list[tuple[str, Any, str, str]]:
        """``(key, value, unit, provenance)`` for every field."""
        rows = []
        for section, fields in SCHEMA.items():
            for name, spec in fields.items():
                rows.append((f"{section}.{name}", self.values[section][name], spec.unit,
                             self.provenance[section][name]))
        return rows


def _set_path(tree: dict, key: str, value):
    parts = key.split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"override key {key!r} must look like section.name")
    tree.setdefault(parts[0], {})
    if not isinstance(tree[parts[0]], dict):
        raise ConfigError(f"section {parts[0]!r} must be a mapping")
    tree[parts[0]][parts[1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.name=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None
    return key.strip(), value


def load(source: dict | str | None = None, overrides=()) -> RunConfig:
    """Resolve a configuration from a mapping, a YAML/JSON file path or None.

    ``overrides`` is an iterable of ``"section.name=value"`` strings applied
    on top of the file.

    Raises
    ------
    ConfigError
        Unknown sections or keys (all offenders are listed), unparsable
        values, or values that violate a field invariant.
    """
    if source is None:
        tree: dict = {}
    elif isinstance(source, dict):
        tree = copy.deepcopy(source)
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                tree = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {source!r}: {exc}") from None
    if not isinstance(tree, dict):
        raise ConfigError("config must be a mapping of sections")
    for text in overrides:
        _set_path(tree, *parse_override(text))

    unknown = []
    for section, body in tree.items():
        if section not in SCHEMA:
            unknown.append(str(section))
            continue
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        unknown.extend(f"{section}.{k}" for k in body if k not in SCHEMA[section])
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))

    values: dict[str, dict[str, Any]] = {}
    prov: dict[str, dict[str, str]] = {}
    for section, fields in SCHEMA.items():
        given = tree.get(section) or {}
        values[section] = {}
        prov[section] = {}
        for name, spec in fields.items():
            if name in given:
                values[section][name] = _convert(section, name, spec, given[name])
                prov[section][name] = "override"
            else:
                values[section][name] = copy.deepcopy(spec.default)
                prov[section][name] = "measured" if spec.measured else "default"
    cfg = RunConfig(values, prov)
    cfg.params()
    cfg.solver_config()
    for section in ("ramsey", "echo"):
        if values[section]["tau_max"] <= values[section]["tau_min"]:
            raise ConfigError(f"{section}.tau_max must exceed {section}.tau_min")
    if values["rabi"]["omega_max"] <= values["rabi"]["omega_min"]:
        raise ConfigError("rabi.omega_max must exceed rabi.omega_min")
    if values["trajectory"]["t_end"] <= values["trajectory"]["t_start"]:
        raise ConfigError("trajectory.t_end must exceed trajectory.t_start")
    return cfg
