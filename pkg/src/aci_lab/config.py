"""Experiment configuration.

Configs are TOML files.  Top-level keys hold run controls; tables group the
model, budgets, channel and per-experiment options::

    kind = "figure3"          # bounds | tails | benchmark | simulate | figure3 | check
    seed = 2024
    replications = 400
    threads = 1

    [model]
    p = 0.01
    epsilon = 0.1             # omit to run only the target_auc strengths
    target_auc = [0.55, 0.70, 0.79, 0.90]
    g_dist = "normal"         # or { pareto = 4.0 }

    [budgets]
    K = 10000
    B = [10, 20, 50, 100, 200, 500, 1000]
    # alpha = [0.001, 0.01]   # alternative to B; B = floor(alpha * K)

    [channel]
    rho = 0.1

    [output]
    dir = "aci_out"
    formats = ["csv"]         # add "json" for a JSON mirror

Optional tables: ``[bounds]`` (``jk``, ``c``, ``B_max``), ``[tails]``
(``k_over_b_min``, ``k_over_b_max``, ``points``, ``nu``), ``[benchmark]``
(``replications``), ``[simulate]`` (``policies``), ``[check]``
(``tolerance_scale``).  Unset values fall back to per-kind defaults.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("bounds", "tails", "benchmark", "simulate", "figure3", "check")
OUT_DIR_ENV = "ACI_LAB_OUT_DIR"
DEFAULT_OUT_DIR = "aci_out"

_BASE: Dict[str, Any] = {
    "seed": 2024,
    "replications": 400,
    "threads": 1,
    "model": {"p": 0.01, "epsilon": 0.1, "target_auc": [], "g_dist": "normal"},
    "budgets": {"K": 10_000, "B": [10, 20, 50, 100, 200, 500, 1000]},
    "channel": {"rho": 0.1},
    "output": {"formats": ["csv"]},
    "bounds": {"jk": [10, 100, 200, 400], "c": 0.45, "B_max": 200},
    "tails": {"k_over_b_min": 10.0, "k_over_b_max": 1e5, "points": 41, "nu": [3, 4, 5]},
    "benchmark": {"replications": 4000},
    "simulate": {"policies": ["top", "random", "oracle"]},
    "check": {"tolerance_scale": 1.0},
}

_PER_KIND: Dict[str, Dict[str, Any]] = {
    "figure3": {"model": {"target_auc": [0.55, 0.70, 0.79, 0.90]}},
    "bounds": {"model": {"p": 0.05}},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    kind: str
    data: Dict[str, Any] = field(default_factory=dict)

    # Convenience accessors over the resolved table.
    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def replications(self) -> int:
        return int(self.data["replications"])

    @property
    def threads(self) -> int:
        return int(self.data["threads"])

    @property
    def K(self) -> int:
        return int(self.data["budgets"]["K"])

    @property
    def B_grid(self) -> List[int]:
        budgets = self.data["budgets"]
        if budgets.get("alpha"):
            return [max(1, math.floor(a * self.K)) for a in budgets["alpha"]]
        return [int(b) for b in budgets["B"]]

    @property
    def out_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    @property
    def formats(self) -> List[str]:
        return list(self.data["output"]["formats"])

    def section(self, name: str) -> Dict[str, Any]:
        return self.data[name]

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.replications < 2:
            raise ValueError("replications must be at least 2")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        grid = self.B_grid
        if not grid or any(b < 1 or b > self.K for b in grid):
            raise ValueError(f"budget grid must lie in [1, K={self.K}], got {grid}")
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ValueError(f"unsupported output formats {sorted(bad)}")
        return self

    def reproducible_dict(self) -> Dict[str, Any]:
        """Resolved config minus fields that cannot change output bytes."""
        d = copy.deepcopy(self.data)
        d.pop("threads", None)
        d.get("output", {}).pop("dir", None)
        d["kind"] = self.kind
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.reproducible_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def resolve(kind: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    overrides = dict(overrides or {})
    overrides.pop("kind", None)
    data = _merge(_merge(_BASE, _PER_KIND.get(kind, {})), overrides)
    if not data["output"].get("dir"):
        data["output"]["dir"] = os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR)
    return ExperimentConfig(kind=kind, data=data).validate()


def load_config(path, kind: Optional[str] = None) -> ExperimentConfig:
    """Read a TOML config; ``kind`` (from the CLI subcommand) wins over the file."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    file_kind = raw.get("kind")
    if kind and file_kind and file_kind != kind:
        raise ValueError(f"config kind {file_kind!r} does not match subcommand {kind!r}")
    return resolve(kind or file_kind or "figure3", raw)
