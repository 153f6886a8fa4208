"""Experiment configuration: JSON layout, matrix specs, and defaults.

A config document has three sections::

    {
      "system": {"d": 2, "n": 16, "a": <matrix spec>, "b": <matrix spec>},
      "run":    {"trials": 10000, "seed": 42, "epsilon": 0.1, "alpha": 0.5,
                 "constant_c": 1.0, "grid_points": 4096, "s": 0.0,
                 "t_levels": [1, 2, 3]},
      "output": {"format": "csv", "path": "report.csv"}
    }

A matrix spec is either explicit row-major entries (list of rows) or one of
{"kind": "diag", "values": [...]}, {"kind": "identity", "scale": c},
{"kind": "rotation", "angle": theta, "scale": rho} (2x2 blocks repeated along
the diagonal, so d must be even). ``seed`` has no default: reports must never
be silently nondeterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

RUN_DEFAULTS: dict[str, Any] = {
    "trials": 10000,
    "epsilon": 0.1,
    "alpha": 0.5,
    "constant_c": 1.0,
    "grid_points": 4096,
    "s": 0.0,
    "t_levels": [1.0, 2.0, 3.0],
}
OUTPUT_DEFAULTS: dict[str, Any] = {"format": "csv", "path": None}


class ConfigError(ValueError):
    """Configuration schema violation with a field-level message."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field_name = field_name
        super().__init__(f"config field '{field_name}': {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    n: int
    a: np.ndarray
    b: np.ndarray
    trials: int
    seed: int
    epsilon: float
    alpha: float
    constant_c: float
    grid_points: int
    s: float
    t_levels: tuple[float, ...]
    out_format: str
    out_path: str | None
    echo: dict = field(repr=False, default_factory=dict)


def build_matrix(spec: Any, d: int, name: str) -> np.ndarray:
    """Materialize a matrix spec into a d x d array."""
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=float)
        if arr.shape != (d, d):
            raise ConfigError(name, f"explicit entries must form a {d}x{d} matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError(name, "entries must be finite")
        return arr
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(name, "must be a list of rows or an object with a 'kind' key")
    kind = spec["kind"]
    if kind == "diag":
        values = spec.get("values")
        if not isinstance(values, list) or len(values) != d:
            raise ConfigError(name, f"'diag' needs a 'values' list of length {d}")
        return np.diag(np.asarray(values, dtype=float))
    if kind == "identity":
        scale = float(spec.get("scale", 1.0))
        return scale * np.eye(d)
    if kind == "rotation":
        if d % 2 != 0:
            raise ConfigError(name, "'rotation' needs an even dimension")
        if "angle" not in spec:
            raise ConfigError(name, "'rotation' needs an 'angle'")
        theta = float(spec["angle"])
        rho = float(spec.get("scale", 1.0))
        block = rho * np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        out = np.zeros((d, d))
        for k in range(d // 2):
            out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = block
        return out
    raise ConfigError(name, f"unknown matrix kind {kind!r}")


def _require(section: dict, key: str, where: str) -> Any:
    if key not in section:
        raise ConfigError(f"{where}.{key}", "is required")
    return section[key]


def _matrix_echo(arr: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in arr]


def resolve_config(raw: dict, seed_override: int | None = None) -> ExperimentConfig:
    """Validate a parsed config document and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    system = raw.get("system")
    if not isinstance(system, dict):
        raise ConfigError("system", "is required and must be an object")
    run = raw.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("run", "must be an object")
    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output", "must be an object")

    d = _require(system, "d", "system")
    if not isinstance(d, int) or d < 1:
        raise ConfigError("system.d", f"must be a positive integer, got {d!r}")
    n = _require(system, "n", "system")
    if not isinstance(n, int) or n < d + 1:
        raise ConfigError("system.n", f"must be an integer >= d + 1 = {d + 1}, got {n!r}")
    a = build_matrix(_require(system, "a", "system"), d, "system.a")
    b = build_matrix(_require(system, "b", "system"), d, "system.b")
    if np.linalg.svd(b, compute_uv=False)[-1] <= 1e-12:
        raise ConfigError("system.b", "must be full rank")

    merged = dict(RUN_DEFAULTS)
    for key in run:
        if key not in RUN_DEFAULTS and key != "seed":
            raise ConfigError(f"run.{key}", "is not a recognized run option")
    merged.update(run)
    if seed_override is not None:
        merged["seed"] = seed_override
    if "seed" not in merged:
        raise ConfigError("run.seed", "is required (pass it in config or with --seed)")
    seed = merged["seed"]
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("run.seed", f"must be a nonnegative integer, got {seed!r}")
    trials = merged["trials"]
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("run.trials", f"must be a positive integer, got {trials!r}")
    epsilon = float(merged["epsilon"])
    if epsilon <= 0:
        raise ConfigError("run.epsilon", f"must be > 0, got {epsilon}")
    alpha = float(merged["alpha"])
    if not 0.0 < alpha < 1.0:
        raise ConfigError("run.alpha", f"must be in (0, 1), got {alpha}")
    constant_c = float(merged["constant_c"])
    if constant_c <= 0:
        raise ConfigError("run.constant_c", f"must be > 0, got {constant_c}")
    grid_points = merged["grid_points"]
    if not isinstance(grid_points, int) or grid_points < 64:
        raise ConfigError("run.grid_points", f"must be an integer >= 64, got {grid_points!r}")
    s = float(merged["s"])
    if s < 0:
        raise ConfigError("run.s", f"must be >= 0, got {s}")
    t_levels = merged["t_levels"]
    if (
        not isinstance(t_levels, list)
        or not t_levels
        or any((not isinstance(t, (int, float))) or t <= 0 for t in t_levels)
    ):
        raise ConfigError("run.t_levels", f"must be a nonempty list of positive reals, got {t_levels!r}")

    out = dict(OUTPUT_DEFAULTS)
    out.update(output)
    if out["format"] not in ("csv", "json"):
        raise ConfigError("output.format", f"must be 'csv' or 'json', got {out['format']!r}")

    echo = {
        "system": {"d": d, "n": n, "a": _matrix_echo(a), "b": _matrix_echo(b)},
        "run": {
            "trials": trials,
            "seed": seed,
            "epsilon": epsilon,
            "alpha": alpha,
            "constant_c": constant_c,
            "grid_points": grid_points,
            "s": s,
            "t_levels": [float(t) for t in t_levels],
        },
        "output": {"format": out["format"], "path": out["path"]},
    }
    return ExperimentConfig(
        d=d,
        n=n,
        a=a,
        b=b,
        trials=trials,
        seed=seed,
        epsilon=epsilon,
        alpha=alpha,
        constant_c=constant_c,
        grid_points=grid_points,
        s=s,
        t_levels=tuple(float(t) for t in t_levels),
        out_format=out["format"],
        out_path=out["path"],
        echo=echo,
    )


def load_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    """Read and resolve a JSON config file.

    json.JSONDecodeError propagates with line/column information so the CLI
    can report the parse location.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return resolve_config(raw, seed_override)
