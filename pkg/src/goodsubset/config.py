"""JSON experiment configuration.

A config file is one JSON object::

    {
      "schema_version": 1,
      "env": "experiment1",
      "m": 5,                      # or a list, e.g. [5, 15, 25]
      "T": 1000,
      "policy": "aoa-gs",          # or a list, e.g. ["aoa-gs", "ea"]
      "seed": 7,
      "n0": 10,                    # optional, default 10
      "macros": 20000,             # optional, default 20000
      "checkpoints": [500, 1000],  # optional, default [T]
      "variance": "plugin",        # "plugin", "plugin-frozen" or "known"
      "variances": [...],          # optional with "known"
      "prior": {"mean": 0.0, "variance": 4.0}   # optional, default flat
    }

``env`` is either ``"experiment1"``, ``"inventory"`` or an object with a
``kind`` key:

* ``{"kind": "synthetic", "means": [...], "stds": [...]}``
* ``{"kind": "inventory", "table": "table2.csv", "backlog": true,
  "initial_level": "zero", "demand_mean": 25, "horizon": 30, "best": 12}``

Alternative numbers in config files (``best``) are 1-based, as in every CSV.
Unknown keys are rejected. List-valued ``m`` and ``policy`` expand into one
experiment per combination.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
from pathlib import Path

import numpy as np

from .belief import InvalidConfigurationError, PriorSpec, VarianceMode
from .envs import Experiment1, Inventory, SyntheticNormal, load_inventory_table
from .harness import ExperimentConfig
from .policy import PolicyKind

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULTS = {"n0": 10, "macros": 20_000, "variance": "plugin"}

_TOP_KEYS = {"schema_version", "env", "m", "T", "policy", "seed", "n0", "macros",
             "checkpoints", "variance", "variances", "prior"}
_REQUIRED = ("schema_version", "env", "m", "T", "policy", "seed")
_ENV_KEYS = {
    "synthetic": {"kind", "means", "stds"},
    "experiment1": {"kind"},
    "inventory": {"kind", "table", "backlog", "initial_level", "demand_mean", "horizon", "best"},
}


class ConfigError(InvalidConfigurationError):
    """Schema violation in a config file; the message carries path and line."""


class _Source:
    def __init__(self, path: Path, text: str):
        self.path = path
        self.text = text

    def line_of(self, key: str) -> int:
        match = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, match.start()) + 1 if match else 1

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{self.path}:{self.line_of(key)}: {key}: {message}")


def _int(src: _Source, key: str, value, minimum: int = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise src.error(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise src.error(key, f"must be >= {minimum}, got {value}")
    return value


def _numbers(src: _Source, key: str, value) -> list[float]:
    if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise src.error(key, "expected a non-empty list of numbers")
    return [float(v) for v in value]


def _as_list(value):
    return value if isinstance(value, list) else [value]


def _build_env(src: _Source, spec, base: Path):
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise src.error("env", "expected a name or an object with a 'kind' key")
    kind = spec["kind"]
    if kind not in _ENV_KEYS:
        raise src.error("kind", f"unknown environment {kind!r}")
    for key in spec:
        if key not in _ENV_KEYS[kind]:
            raise src.error(key, f"unknown key for {kind} environment")
    if kind == "experiment1":
        return Experiment1()
    if kind == "synthetic":
        for key in ("means", "stds"):
            if key not in spec:
                raise src.error("env", f"synthetic environment needs '{key}'")
        try:
            return SyntheticNormal(np.array(_numbers(src, "means", spec["means"])),
                                   np.array(_numbers(src, "stds", spec["stds"])))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise src.error("stds", str(exc)) from exc
    kwargs = {}
    if "table" in spec:
        table = Path(spec["table"])
        if not table.is_absolute():
            table = base / table
        try:
            kwargs["policies"] = load_inventory_table(table)
        except (OSError, ValueError) as exc:
            raise src.error("table", str(exc)) from exc
    if "backlog" in spec:
        if not isinstance(spec["backlog"], bool):
            raise src.error("backlog", "expected true or false")
        kwargs["backlog"] = spec["backlog"]
    if "initial_level" in spec:
        kwargs["initial_level"] = spec["initial_level"]
    if "demand_mean" in spec:
        kwargs["demand_mean"] = float(spec["demand_mean"])
    if "horizon" in spec:
        kwargs["horizon"] = _int(src, "horizon", spec["horizon"], 1)
    if "best" in spec:
        kwargs["best"] = None if spec["best"] is None else _int(src, "best", spec["best"], 1) - 1
    elif "policies" in kwargs and len(kwargs["policies"]) != 20:
        kwargs["best"] = None
    try:
        return Inventory(**kwargs)
    except ValueError as exc:
        raise src.error("env", str(exc)) from exc


def _var_mode(src: _Source, raw: dict, env) -> VarianceMode:
    kind = raw.get("variance", DEFAULTS["variance"])
    if kind in ("plugin", "plugin-frozen"):
        if "variances" in raw:
            raise src.error("variances", "only allowed with \"variance\": \"known\"")
        return VarianceMode.plugin(freeze_after_init=kind == "plugin-frozen")
    if kind != "known":
        raise src.error("variance", f"expected plugin, plugin-frozen or known, got {kind!r}")
    if "variances" in raw:
        return VarianceMode.known(_numbers(src, "variances", raw["variances"]))
    if isinstance(env, (SyntheticNormal, Experiment1)):
        return VarianceMode.known(np.asarray(env.stds, dtype=float) ** 2)
    raise src.error("variance", "known variances must be listed for this environment")


def _prior(src: _Source, raw) -> PriorSpec:
    if raw is None:
        return PriorSpec.uninformative()
    if not isinstance(raw, dict) or set(raw) - {"mean", "variance"}:
        raise src.error("prior", "expected an object with keys 'mean' and 'variance'")
    if raw.get("variance") is None:
        return PriorSpec.uninformative()
    try:
        return PriorSpec.informative(raw.get("mean", 0.0), raw["variance"])
    except (TypeError, ValueError) as exc:
        raise src.error("prior", str(exc)) from exc


def parse_config(text: str, path: str | Path = "<config>") -> list[ExperimentConfig]:
    """Validate a config document and expand it into experiment configs."""
    path = Path(path)
    src = _Source(path, text)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    for key in raw:
        if key not in _TOP_KEYS:
            raise src.error(key, "unknown key")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{path}:1: {key}: required key is missing")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise src.error("schema_version", f"unsupported version {raw['schema_version']!r}")
    for key, value in DEFAULTS.items():
        if key not in raw:
            log.info("%s: using default %s=%r", path, key, value)

    env = _build_env(src, raw["env"], path.parent)
    T = _int(src, "T", raw["T"], 1)
    n0 = _int(src, "n0", raw.get("n0", DEFAULTS["n0"]), 1)
    macros = _int(src, "macros", raw.get("macros", DEFAULTS["macros"]), 1)
    seed = _int(src, "seed", raw["seed"], 0)
    ms = [_int(src, "m", v, 1) for v in _as_list(raw["m"])]
    policies = []
    for name in _as_list(raw["policy"]):
        try:
            policies.append(PolicyKind(name))
        except ValueError:
            raise src.error("policy", f"unknown policy {name!r}") from None
    checkpoints = tuple(_int(src, "checkpoints", c, 0) for c in raw.get("checkpoints", []))
    var_mode = _var_mode(src, raw, env)
    prior = _prior(src, raw.get("prior"))

    configs = []
    for policy, m in itertools.product(policies, ms):
        try:
            configs.append(ExperimentConfig(env=env, m=m, T=T, n0=n0, policy=policy,
                                            macros=macros, seed=seed, checkpoints=checkpoints,
                                            prior=prior, var_mode=var_mode))
        except InvalidConfigurationError as exc:
            key = "checkpoints" if "checkpoint" in str(exc) else "T"
            if "m=" in str(exc):
                key = "m"
            raise src.error(key, str(exc)) from exc
    return configs


def load_configs(path: str | Path) -> list[ExperimentConfig]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_config(text, path)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a config that describes exactly one experiment."""
    configs = load_configs(path)
    if len(configs) != 1:
        raise ConfigError(f"{path}: describes {len(configs)} experiments; use load_configs")
    return configs[0]
