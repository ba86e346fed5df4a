"""Flat, typed run configuration.

A config file is a JSON object whose keys are the dotted names in
:data:`SCHEMA`, for example ``{"fwa.generations": 40, "grid.g": "auto"}``.
Unknown keys and wrongly typed values are rejected.  A ``report.json`` from
an earlier run is also accepted: its embedded ``config`` is used, which
reproduces that run.
"""

import json
from pathlib import Path

from .controller import PipelineConfig
from .embedding import EmbedConfig
from .errors import ConfigError, ValidationError
from .fwa import FwaConfig

INT, FLOAT, STR, PAIR = "int", "float", "str", "pair"

# key -> (type, default, nullable)
SCHEMA = {
    "seed": (INT, 0, False),
    "fwa.n_fireworks": (INT, 8, False),
    "fwa.sparks": (INT, 40, False),
    "fwa.mutants": (INT, None, True),
    "fwa.generations": (INT, 30, False),
    "fwa.amplitude_max": (FLOAT, None, True),
    "fwa.mutation": (STR, "symmetric", False),
    "fwa.search_space": (STR, "log", False),
    "fwa.min_amplitude": (PAIR, [1e-1, 1e-6], True),
    "fwa.sigma_low": (FLOAT, None, True),
    "fwa.sigma_high": (FLOAT, None, True),
    "fwa.seed": (INT, None, True),
    "embed.iterations": (INT, 500, False),
    "embed.learning_rate": (FLOAT, None, True),
    "embed.momentum_early": (FLOAT, 0.5, False),
    "embed.momentum_late": (FLOAT, 0.8, False),
    "embed.exaggeration_factor": (FLOAT, 4.0, False),
    "embed.exaggeration_iters": (INT, 50, False),
    "embed.init_std": (FLOAT, 1e-4, False),
    "embed.seed": (INT, None, True),
    "grid.g": (INT, "auto", False),
    "grid.alpha": (FLOAT, 0.8, False),
    "controller.pi0": (FLOAT, 30.0, False),
    "controller.delta_pi": (FLOAT, 2.0, False),
    "controller.epsilon": (FLOAT, 1e-8, False),
    "controller.max_iters": (INT, 12, False),
    "controller.max_step": (INT, 16, False),
    "sampler.m": (INT, None, True),
    "sampler.keep_ratio": (FLOAT, 0.1, True),
    "sampler.pick": (STR, "centroid", False),
    "sampler.mode": (STR, "round-robin", False),
    "sampler.seed": (INT, None, True),
}


def defaults():
    return {k: v[1] for k, v in SCHEMA.items()}


def _check(key, value):
    kind, _, nullable = SCHEMA[key]
    if value is None:
        if not nullable:
            raise ConfigError(f"{key} may not be null")
        return None
    if key == "grid.g" and value == "auto":
        return value
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        if key.endswith("seed") and not 0 <= value < 2**64:
            raise ConfigError(f"{key} must be an unsigned 64-bit integer")
        return value
    if kind == FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if kind == STR:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{key} must be a list of two numbers or null")
    return [float(v) for v in value]


def resolve(doc=None, **overrides):
    """Merge ``doc`` and non-None ``overrides`` over the defaults, type-checked.

    Sub-seeds left null inherit ``seed``.  The result is the fully resolved
    flat mapping that every report embeds.
    """
    flat = defaults()
    for source in (doc or {}, {k: v for k, v in overrides.items() if v is not None}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            flat[key] = _check(key, value)
    if overrides.get("seed") is not None:
        # an explicit master seed wins over every sub-seed
        for key in ("fwa.seed", "embed.seed", "sampler.seed"):
            flat[key] = overrides["seed"]
    for key in ("fwa.seed", "embed.seed", "sampler.seed"):
        if flat[key] is None:
            flat[key] = flat["seed"]
    if overrides.get("sampler.m") is not None:
        flat["sampler.keep_ratio"] = None
    elif overrides.get("sampler.keep_ratio") is not None:
        flat["sampler.m"] = None
    if flat["sampler.m"] is not None and flat["sampler.keep_ratio"] is not None:
        raise ConfigError("set only one of sampler.m and sampler.keep_ratio")
    if flat["sampler.m"] is None and flat["sampler.keep_ratio"] is None:
        raise ConfigError("one of sampler.m and sampler.keep_ratio is required")
    return flat


def load_config_file(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    if "config" in doc and "trajectory" in doc:
        doc = doc["config"]
    return doc


def pipeline_config(flat):
    """Build the typed :class:`PipelineConfig` from a resolved flat mapping."""
    lo, hi = flat["fwa.sigma_low"], flat["fwa.sigma_high"]
    if (lo is None) != (hi is None):
        raise ConfigError("set both fwa.sigma_low and fwa.sigma_high, or neither")
    try:
        fwa = FwaConfig(
            n_fireworks=flat["fwa.n_fireworks"],
            n_sparks_total=flat["fwa.sparks"],
            amplitude_max=flat["fwa.amplitude_max"],
            n_mutants=flat["fwa.mutants"],
            generations=flat["fwa.generations"],
            bounds=None if lo is None else (lo, hi),
            seed=flat["fwa.seed"],
            mutation=flat["fwa.mutation"],
            min_amplitude=None if flat["fwa.min_amplitude"] is None else tuple(flat["fwa.min_amplitude"]),
            search_space=flat["fwa.search_space"],
        )
        emb = EmbedConfig(
            iterations=flat["embed.iterations"],
            learning_rate=flat["embed.learning_rate"],
            momentum_early=flat["embed.momentum_early"],
            momentum_late=flat["embed.momentum_late"],
            exaggeration_factor=flat["embed.exaggeration_factor"],
            exaggeration_iters=flat["embed.exaggeration_iters"],
            init_std=flat["embed.init_std"],
            seed=flat["embed.seed"],
        )
        return PipelineConfig(
            fwa=fwa,
            embed=emb,
            g=None if flat["grid.g"] == "auto" else flat["grid.g"],
            alpha=flat["grid.alpha"],
            pi0=flat["controller.pi0"],
            delta_pi=flat["controller.delta_pi"],
            epsilon=flat["controller.epsilon"],
            max_iters=flat["controller.max_iters"],
            max_step=flat["controller.max_step"],
            m=flat["sampler.m"],
            keep_ratio=flat["sampler.keep_ratio"],
            pick=flat["sampler.pick"],
            sampler_mode=flat["sampler.mode"],
            sampler_seed=flat["sampler.seed"],
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
