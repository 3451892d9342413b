"""Run configuration: a versioned JSON document describing one experiment.

Example::

    {
      "version": 1,
      "run_name": "sphere-grid",
      "results_root": "results",
      "optimizee": "sphere",
      "optimizee_params": {"dimension": 2},
      "optimizer": "grid",
      "grid": {"resolution": 3},
      "population_size": 9,
      "generations": 1,
      "seed": 0,
      "worst_fitness": -1e9
    }

The optimizer's hyper-parameters live in a block named after the optimizer
(``ga``, ``enkf``, ``gd``, ``mga``, ``ce``, ``sa``, ``grid`` or ``es``).
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigurationError
from .optimizers import OPTIMIZERS

CONFIG_VERSION = 1

_SCALAR_FIELDS = {
    "run_name": str,
    "results_root": str,
    "optimizee": str,
    "optimizer": str,
    "population_size": int,
    "generations": int,
    "max_parallel": int,
    "seed": int,
    "worst_fitness": float,
    "keep_workdirs": bool,
    "record_wall_time": bool,
    "isolation": str,
}


class ConfigError(ConfigurationError):
    """Configuration error anchored to a line of the config file."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = f"{source or '<config>'}" + (f":{line}" if line else "")
        super().__init__(f"{where}: {message}")


@dataclass
class RunConfig:
    run_name: str
    optimizee: str
    optimizer: str
    population_size: int
    generations: int
    results_root: str = "results"
    optimizee_params: dict = field(default_factory=dict)
    optimizer_params: dict = field(default_factory=dict)
    fitness_weights: list | None = None
    max_parallel: int = 1
    timeout_seconds: float | None = None
    seed: int = 0
    worst_fitness: float = 0.0
    keep_workdirs: bool = False
    record_wall_time: bool = False
    isolation: str = "auto"
    external: dict | None = None
    version: int = CONFIG_VERSION

    @property
    def results_dir(self) -> Path:
        return Path(self.results_root) / self.run_name

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"version": self.version, "run_name": self.run_name, "results_root": self.results_root,
                               "optimizee": self.optimizee, "optimizee_params": self.optimizee_params,
                               "optimizer": self.optimizer, self.optimizer: self.optimizer_params}
        for f in dataclasses.fields(self):
            if f.name not in out and f.name != "optimizer_params":
                out[f.name] = getattr(self, f.name)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def build(self):
        """Instantiate ``(optimizee, optimizer)``."""
        from .benchmarks import make_optimizee
        from .optimizers import make_optimizer

        optimizee = make_optimizee(self.optimizee, self.optimizee_params)
        optimizer = make_optimizer(self.optimizer, optimizee.bounds, self.population_size, self.optimizer_params)
        return optimizee, optimizer


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def parse_config(data: dict, text: str | None = None, source: str | None = None, check: bool = True) -> RunConfig:
    """Validate a decoded config document; with ``check`` the optimizee and optimizer are also built."""

    def fail(message, key=None):
        raise ConfigError(message, _line_of(text, key) if key else None, source)

    if not isinstance(data, dict):
        fail("config must be a JSON object")
    if data.get("version") != CONFIG_VERSION:
        fail(f"unsupported or missing config version {data.get('version')!r}, expected {CONFIG_VERSION}", "version")
    for key in ("run_name", "optimizee", "optimizer", "population_size", "generations"):
        if key not in data:
            fail(f"missing required field {key!r}")
    optimizer = data["optimizer"]
    if not isinstance(optimizer, str) or optimizer not in OPTIMIZERS:
        fail(f"unknown optimizer {optimizer!r}; available: {sorted(OPTIMIZERS)}", "optimizer")
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"optimizer_params"}
    for key in data:
        if key not in known and key != optimizer:
            hint = " (parameter block of a different optimizer?)" if key in OPTIMIZERS else ""
            fail(f"unknown field {key!r}{hint}", key)

    kwargs: dict[str, Any] = {}
    for key, typ in _SCALAR_FIELDS.items():
        if key not in data:
            continue
        value = data[key]
        ok = isinstance(value, typ) and not (typ is int and isinstance(value, bool))
        if typ is float and isinstance(value, int) and not isinstance(value, bool):
            value, ok = float(value), True
        if not ok:
            fail(f"field {key!r} must be of type {typ.__name__}, got {value!r}", key)
        kwargs[key] = value
    if not re.fullmatch(r"[A-Za-z0-9._-]+", kwargs["run_name"]):
        fail("run_name may only contain letters, digits, '.', '_' and '-'", "run_name")
    if kwargs["population_size"] < 1:
        fail("population_size must be >= 1", "population_size")
    if kwargs["generations"] < 1:
        fail("generations must be >= 1", "generations")
    if kwargs.get("max_parallel", 1) < 1:
        fail("max_parallel must be >= 1", "max_parallel")
    if kwargs.get("isolation", "auto") not in ("auto", "inline", "process"):
        fail("isolation must be 'auto', 'inline' or 'process'", "isolation")
    timeout = data.get("timeout_seconds")
    if timeout is not None and (isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or timeout <= 0):
        fail("timeout_seconds must be a positive number or null", "timeout_seconds")
    kwargs["timeout_seconds"] = None if timeout is None else float(timeout)
    for key in ("optimizee_params", optimizer):
        if key in data and not isinstance(data[key], dict):
            fail(f"{key!r} must be an object", key)
    kwargs["optimizee_params"] = dict(data.get("optimizee_params", {}))
    kwargs["optimizer_params"] = dict(data.get(optimizer, {}))
    weights = data.get("fitness_weights")
    if weights is not None:
        if not isinstance(weights, list) or not weights or not all(
                isinstance(w, (int, float)) and not isinstance(w, bool) for w in weights):
            fail("fitness_weights must be a non-empty list of numbers", "fitness_weights")
        weights = [float(w) for w in weights]
    kwargs["fitness_weights"] = weights
    external = data.get("external")
    if external is not None:
        if not isinstance(external, dict) or "command" not in external:
            fail("external must be an object with a 'command' template", "external")
        kwargs["external"] = dict(external)

    config = RunConfig(**kwargs)
    if check:
        validate_config(config, text, source)
    return config


def validate_config(config: RunConfig, text: str | None = None, source: str | None = None):
    """Build the optimizee, optimizer and external spec to surface semantic errors; returns the pair."""
    from .core import check_weights
    from .runner import ExternalCommandSpec

    try:
        optimizee, optimizer = config.build()
    except ConfigurationError as exc:
        key = config.optimizer if config.optimizer in str(exc) and "optimizee" not in str(exc) else "optimizee"
        raise ConfigError(str(exc), _line_of(text, key), source) from None
    weights = config.fitness_weights or [1.0] * optimizee.fitness_length
    try:
        check_weights(weights, optimizee.fitness_length)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), _line_of(text, "fitness_weights"), source) from None
    if config.external is not None:
        try:
            ExternalCommandSpec(config.external["command"],
                                int(config.external.get("expected_fitness_length", optimizee.fitness_length)))
        except (ConfigurationError, ValueError) as exc:
            raise ConfigError(str(exc), _line_of(text, "external"), source) from None
    elif config.optimizee == "external":
        raise ConfigError("the external optimizee needs an 'external' command block", _line_of(text, "optimizee"),
                          source)
    return optimizee, optimizer


def load_config(path, check: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, str(path)) from None
    return parse_config(data, text, str(path), check)
