"""Run configuration as flat ``section.key = value`` text.

Only the keys listed in ``KEYS`` are accepted; anything else is an error so
that typos never silently fall back to defaults. Numbers may be written as
fractions (``1/320``) and lists are comma separated.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bath import BathSpec
from .inchworm import SolveSpec, steps_for
from .system import SIGMA_X, SIGMA_Y, SIGMA_Z, SystemSpec

__all__ = ["ConfigError", "KEYS", "RunSpec", "load", "parse", "to_text"]


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


STATES = {
    "up": np.array([[1, 0], [0, 0]], dtype=complex),
    "down": np.array([[0, 0], [0, 1]], dtype=complex),
    "mixed": np.eye(2, dtype=complex) / 2,
}
OBSERVABLES = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}


@dataclass(frozen=True)
class RunSpec:
    system: SystemSpec = field(default_factory=SystemSpec)
    bath: BathSpec = field(default_factory=BathSpec)
    solver: SolveSpec = field(default_factory=SolveSpec)
    t_final: float = 5.0
    seed: int = 0
    output: str | None = None
    bath_literal: bool = False
    table_step: float | None = None
    reference: str | None = None
    bare_orders: tuple = (0, 2, 4)
    bare_samples: int = 100_000
    h_list: tuple = (1 / 10, 1 / 20, 1 / 30, 1 / 40, 1 / 50, 1 / 60)
    reference_h: float = 1 / 320
    probe_times: tuple = (0.5, 1.0, 1.5, 2.0)
    variance_lengths: tuple = (1.0, 2.0, 3.0, 4.0)
    variance_samples: int = 100_000
    variance_M: int = 4

    def __post_init__(self):
        if not self.t_final > 0:
            raise ConfigError("run.t_final must be positive")
        if self.seed < 0:
            raise ConfigError("run.seed must be nonnegative")
        try:
            steps_for(self.t_final, self.solver.dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if any(m < 0 or m % 2 for m in self.bare_orders):
            raise ConfigError("compare.bare_orders must be even and nonnegative")
        if self.table_step is not None and not self.table_step > 0:
            raise ConfigError("bath.table_step must be positive")

    @property
    def N(self) -> int:
        return steps_for(self.t_final, self.solver.dt)

    def replace(self, **changes) -> "RunSpec":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------- value codecs


def _number(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _integer(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional(parse):
    def inner(text):
        return None if text.strip() in ("", "none") else parse(text)
    return inner


def _string(text: str) -> str:
    return text.strip()


def _numbers(text: str) -> tuple:
    return tuple(_number(x) for x in text.split(",") if x.strip())


def _integers(text: str) -> tuple:
    return tuple(_integer(x) for x in text.split(",") if x.strip())


def _matrix(named: dict):
    def inner(text: str):
        key = text.strip().lower()
        if key in named:
            return named[key].copy()
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != 4:
            raise ConfigError(f"expected a name from {sorted(named)} or four comma-separated entries, got {text!r}")
        try:
            return np.array([complex(p.strip().replace(" ", "")) for p in parts]).reshape(2, 2)
        except ValueError:
            raise ConfigError(f"bad matrix entries: {text!r}") from None
    return inner


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _fmt_matrix(named: dict, value) -> str:
    for name, mat in named.items():
        if np.array_equal(mat, value):
            return name
    return ", ".join(repr(complex(z)) for z in np.asarray(value).ravel())


# key -> (group, field, parser); groups are "system", "bath", "solver" and "run"
KEYS = {
    "system.epsilon": ("system", "epsilon", _number),
    "system.delta": ("system", "delta", _number),
    "system.rho": ("system", "rho_s", _matrix(STATES)),
    "system.observable": ("system", "observable", _matrix(OBSERVABLES)),
    "bath.L": ("bath", "L", _integer),
    "bath.beta": ("bath", "beta", _number),
    "bath.omega_c": ("bath", "omega_c", _number),
    "bath.omega_max": ("bath", "omega_max", _number),
    "bath.xi": ("bath", "xi", _number),
    "bath.literal_difference": ("run", "bath_literal", _boolean),
    "bath.table_step": ("run", "table_step", _optional(_number)),
    "solver.M": ("solver", "M", _integer),
    "solver.mode": ("solver", "mode", _string),
    "solver.samples_per_order": ("solver", "samples_per_order", _integer),
    "solver.integrator": ("solver", "integrator", _string),
    "solver.dt": ("solver", "dt", _number),
    "solver.replicas": ("solver", "replicas", _integer),
    "run.t_final": ("run", "t_final", _number),
    "run.seed": ("run", "seed", _integer),
    "output.path": ("run", "output", _optional(_string)),
    "compare.reference": ("run", "reference", _optional(_string)),
    "compare.bare_orders": ("run", "bare_orders", _integers),
    "compare.bare_samples": ("run", "bare_samples", _integer),
    "converge.h_list": ("run", "h_list", _numbers),
    "converge.reference_h": ("run", "reference_h", _number),
    "converge.probe_times": ("run", "probe_times", _numbers),
    "variance.lengths": ("run", "variance_lengths", _numbers),
    "variance.samples": ("run", "variance_samples", _integer),
    "variance.M": ("run", "variance_M", _integer),
}


def parse(text: str) -> RunSpec:
    """Build a ``RunSpec`` from configuration text; raises ``ConfigError``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string("[__flat__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    if cp.sections() != ["__flat__"]:
        raise ConfigError("section headers are not allowed; write keys as section.key = value")
    groups: dict[str, dict] = {"system": {}, "bath": {}, "solver": {}, "run": {}}
    for key, raw in cp.items("__flat__"):
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        group, name, conv = KEYS[key]
        groups[group][name] = conv(raw)
    try:
        system = SystemSpec(**groups["system"])
        bath = BathSpec(**groups["bath"])
        solver = SolveSpec(**groups["solver"])
        return RunSpec(system=system, bath=bath, solver=solver, **groups["run"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load(path) -> RunSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse(text)


def to_text(run: RunSpec) -> str:
    """Serialize every key; ``parse(to_text(run)) == run``."""
    objs = {"system": run.system, "bath": run.bath, "solver": run.solver, "run": run}
    lines = []
    for key, (group, name, _) in KEYS.items():
        value = getattr(objs[group], name)
        if name == "rho_s":
            text = _fmt_matrix(STATES, value)
        elif name == "observable":
            text = _fmt_matrix(OBSERVABLES, value)
        else:
            text = _fmt(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
