"""Scenario configuration: YAML (or JSON) files, schema version 1.

Layout::

    schema: 1
    seed: 7                      # optional, default 0
    model:
      kind: spin-boson           # see MODEL_KEYS
      omega: 1.0
      ...
    run:
      kind: trajectory           # optional; must match the subcommand
      ...
    output:
      dir: runs/traj             # optional; --out-dir overrides

Unknown keys anywhere are rejected. Complex matrix entries are written either
as real numbers or as ``[re, im]`` pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

SCHEMA_VERSION = 1

SUBCOMMAND_RUNS = {
    "flow": "flow-grid",
    "traj": "trajectory",
    "ensemble": "ensemble",
    "compress": "compressibility",
    "fluxcheck": "boundary-flux",
    "nz": "nz-kernel",
    "classical": "classical",
}

MODEL_KEYS = {
    "closed-spin": {"omega"},
    "spin-boson": {"omega", "gamma_phi", "Gamma"},
    "classical-harmonic": {"m", "omega"},
    "classical-damped": {"m", "omega", "gamma", "dissipator"},
    "gksl-custom": {"hamiltonian", "lindblad"},
    "nz-composite": {"n_sys", "n_bath", "H_S", "H_B", "V", "rho_B", "random", "center"},
}

RUN_KEYS = {
    "flow-grid": {"grid_points", "extent", "ball_only"},
    "trajectory": {"initial_states", "t_end", "dt", "snapshot_times", "record_stride"},
    "ensemble": {"distribution", "n", "snapshot_times", "dump_samples"},
    "compressibility": {"n_points", "points", "step"},
    "boundary-flux": {"distribution", "center", "radius", "t", "n", "n_quad", "h"},
    "nz-kernel": {"times", "prefactor"},
    "classical": {"initial_states", "t_end", "snapshot_times", "grid_points", "extent",
                  "distribution", "record_stride"},
}

QUANTUM_MODELS = {"closed-spin", "spin-boson", "gksl-custom"}
CLASSICAL_MODELS = {"classical-harmonic", "classical-damped"}
RUN_MODELS = {
    "flow-grid": QUANTUM_MODELS | CLASSICAL_MODELS,
    "trajectory": QUANTUM_MODELS,
    "ensemble": {"closed-spin", "spin-boson"},
    "compressibility": QUANTUM_MODELS | CLASSICAL_MODELS,
    "boundary-flux": {"closed-spin", "spin-boson", "gksl-custom"},
    "nz-kernel": {"nz-composite"},
    "classical": CLASSICAL_MODELS,
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    subcommand: str
    model: dict[str, Any]
    run: dict[str, Any]
    seed: int = 0
    out_dir: Path = field(default_factory=lambda: Path("runs"))
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def model_kind(self) -> str:
        return self.model["kind"]

    @property
    def run_kind(self) -> str:
        return SUBCOMMAND_RUNS[self.subcommand]


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    extra = sorted(set(section) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def as_float(value, name: str, minimum: float | None = None, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(f"{name} must be finite")
    if positive and x <= 0:
        raise ConfigError(f"{name} must be > 0, got {x}")
    if minimum is not None and x < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {x}")
    return x


def as_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def as_vector(value, name: str, length: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if arr.ndim != 1 or (length is not None and arr.size != length) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be a finite vector of length {length}")
    return arr


def as_matrix(value, name: str) -> np.ndarray:
    """Nested list to a complex square matrix; entries are numbers or ``[re, im]``."""
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{name} must be a nested list")
    n = len(value)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ConfigError(f"{name} must be square")
        for j, entry in enumerate(row):
            if isinstance(entry, list) and len(entry) == 2:
                out[i, j] = complex(as_float(entry[0], name), as_float(entry[1], name))
            else:
                out[i, j] = as_float(entry, name)
    return out


def as_times(value, name: str) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{name} must be a list of times")
    return [as_float(v, name, minimum=0.0) for v in value]


def load_config(path: str | Path, subcommand: str, out_dir: str | None = None,
                seed: int | None = None) -> ScenarioConfig:
    if subcommand not in SUBCOMMAND_RUNS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _reject_unknown(raw, {"schema", "seed", "model", "run", "output"}, "top level")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema must be {SCHEMA_VERSION}, got {raw.get('schema')!r}")

    model = raw.get("model")
    if not isinstance(model, dict) or model.get("kind") not in MODEL_KEYS:
        raise ConfigError(f"model.kind must be one of {sorted(MODEL_KEYS)}")
    _reject_unknown(model, MODEL_KEYS[model["kind"]] | {"kind"}, "model")

    run = raw.get("run") or {}
    if not isinstance(run, dict):
        raise ConfigError("run must be a mapping")
    run_kind = SUBCOMMAND_RUNS[subcommand]
    if run.get("kind", run_kind) != run_kind:
        raise ConfigError(f"run.kind {run.get('kind')!r} does not match subcommand {subcommand!r}")
    run = {k: v for k, v in run.items() if k != "kind"}
    _reject_unknown(run, RUN_KEYS[run_kind], "run")
    if model["kind"] not in RUN_MODELS[run_kind]:
        raise ConfigError(f"model kind {model['kind']!r} is not supported by {subcommand!r}")

    output = raw.get("output") or {}
    if not isinstance(output, dict):
        raise ConfigError("output must be a mapping")
    _reject_unknown(output, {"dir"}, "output")

    cfg_seed = raw.get("seed", 0) if seed is None else seed
    cfg_seed = as_int(cfg_seed, "seed")
    if cfg_seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits")
    directory = Path(out_dir or output.get("dir") or Path("runs") / subcommand)
    return ScenarioConfig(subcommand, dict(model), run, cfg_seed, directory, raw)
