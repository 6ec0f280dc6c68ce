"""Experiment configuration files (JSON).

Matrices are nested row arrays with ``A[i][j] = P(next = i | current = j)``.
The ``model.convention`` field must read ``"col-stochastic"`` so that a
row-stochastic file is rejected instead of being silently transposed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .chain import validate_matrix
from .errors import ConfigError, ValidationError
from .model import ChangePointModel

CONVENTION = "col-stochastic"
BUNDLED = ("scenario_vA", "scenario_vB")


def _get(block: dict, key: str, path: str, required: bool = True, default=None):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing")
        return default
    return block[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _matrix(value, n: int, path: str) -> list:
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(path, f"expected {n} rows")
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{path}[{i}]", f"expected {n} entries")
        for j, x in enumerate(row):
            _number(x, f"{path}[{i}][{j}]")
    try:
        validate_matrix(value)
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from exc
    return value


@dataclass(frozen=True)
class ModelBlock:
    n: int
    A_b: list
    A_a: list
    rho: float
    initial: Union[str, list] = "stationary_b"
    convention: str = CONVENTION

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBlock":
        conv = _get(d, "convention", "model")
        if conv != CONVENTION:
            raise ConfigError("model.convention", f"must be {CONVENTION!r}, got {conv!r}")
        n = _integer(_get(d, "N", "model"), "model.N")
        if n < 2:
            raise ConfigError("model.N", f"need N >= 2, got {n}")
        A_b = _matrix(_get(d, "A_b", "model"), n, "model.A_b")
        A_a = _matrix(_get(d, "A_a", "model"), n, "model.A_a")
        rho = _number(_get(d, "rho", "model"), "model.rho")
        if not 0 < rho < 1:
            raise ConfigError("model.rho", f"must lie in (0, 1), got {rho!r}")
        initial = _get(d, "initial", "model", required=False, default="stationary_b")
        if isinstance(initial, str):
            if initial != "stationary_b":
                raise ConfigError("model.initial", f"unknown value {initial!r}")
        else:
            if not isinstance(initial, list) or len(initial) != n:
                raise ConfigError("model.initial", f"expected 'stationary_b' or {n} probabilities")
            for i, x in enumerate(initial):
                if _number(x, f"model.initial[{i}]") < 0:
                    raise ConfigError(f"model.initial[{i}]", "negative probability")
            if abs(sum(initial) - 1.0) > 1e-12:
                raise ConfigError("model.initial", f"sums to {sum(initial)!r}, not 1")
        return cls(n, A_b, A_a, rho, initial, conv)

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "N": self.n,
            "A_b": self.A_b,
            "A_a": self.A_a,
            "rho": self.rho,
            "initial": self.initial,
        }

    def build(self, allow_nonergodic: bool = False) -> ChangePointModel:
        return ChangePointModel.create(
            self.A_b, self.A_a, self.rho, initial=self.initial, allow_nonergodic=allow_nonergodic
        )


@dataclass(frozen=True)
class DetectionBlock:
    threshold_h: float
    cost_c: float

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionBlock":
        h = _number(_get(d, "threshold_h", "detection"), "detection.threshold_h")
        if not 0 <= h <= 1:
            raise ConfigError("detection.threshold_h", f"must lie in [0, 1], got {h!r}")
        c = _number(_get(d, "cost_c", "detection"), "detection.cost_c")
        if not c > 0:
            raise ConfigError("detection.cost_c", f"must be positive, got {c!r}")
        return cls(h, c)

    def to_dict(self) -> dict:
        return {"threshold_h": self.threshold_h, "cost_c": self.cost_c}


@dataclass(frozen=True)
class RunBlock:
    horizon: int
    trials: int
    master_seed: int
    change_time: Union[int, str] = "sample"

    @classmethod
    def from_dict(cls, d: dict) -> "RunBlock":
        horizon = _integer(_get(d, "horizon", "run"), "run.horizon")
        if horizon < 1:
            raise ConfigError("run.horizon", "must be >= 1")
        trials = _integer(_get(d, "trials", "run"), "run.trials")
        if trials < 1:
            raise ConfigError("run.trials", "must be >= 1")
        seed = _integer(_get(d, "master_seed", "run"), "run.master_seed")
        if seed < 0:
            raise ConfigError("run.master_seed", "must be nonnegative")
        ct = _get(d, "change_time", "run", required=False, default="sample")
        if isinstance(ct, str):
            if ct not in ("sample", "never"):
                raise ConfigError("run.change_time", f"expected integer, 'sample' or 'never', got {ct!r}")
        elif _integer(ct, "run.change_time") < 1:
            raise ConfigError("run.change_time", "must be >= 1")
        return cls(horizon, trials, seed, ct)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "change_time": self.change_time,
        }


@dataclass(frozen=True)
class StudyBlock:
    family: str
    grid: Union[list, dict]
    h_report: float

    @classmethod
    def from_dict(cls, d: dict) -> "StudyBlock":
        from .diagnostics import FAMILIES

        family = _get(d, "family", "study")
        if family not in FAMILIES:
            raise ConfigError("study.family", f"unknown family {family!r}; known: {sorted(FAMILIES)}")
        grid = _get(d, "grid", "study")
        if isinstance(grid, dict):
            for key in ("start", "stop", "step"):
                _number(_get(grid, key, "study.grid"), f"study.grid.{key}")
            if not grid["step"] > 0:
                raise ConfigError("study.grid.step", "must be positive")
        elif isinstance(grid, list):
            if not grid:
                raise ConfigError("study.grid", "must be nonempty")
            for i, x in enumerate(grid):
                _number(x, f"study.grid[{i}]")
        else:
            raise ConfigError("study.grid", "expected a list or {start, stop, step}")
        h = _number(_get(d, "h_report", "study"), "study.h_report")
        if not 0 <= h <= 1:
            raise ConfigError("study.h_report", f"must lie in [0, 1], got {h!r}")
        return cls(family, grid, h)

    def values(self) -> list[float]:
        if isinstance(self.grid, list):
            return [float(x) for x in self.grid]
        start, stop, step = self.grid["start"], self.grid["stop"], self.grid["step"]
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]

    def to_dict(self) -> dict:
        return {"family": self.family, "grid": self.grid, "h_report": self.h_report}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelBlock
    detection: DetectionBlock
    run: RunBlock
    study: Optional[StudyBlock] = None

    @classmethod
    def from_dict(cls, d: Any) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "expected a JSON object")
        study = d.get("study")
        return cls(
            model=ModelBlock.from_dict(_get(d, "model", "")),
            detection=DetectionBlock.from_dict(_get(d, "detection", "")),
            run=RunBlock.from_dict(_get(d, "run", "")),
            study=None if study is None else StudyBlock.from_dict(study),
        )

    def to_dict(self) -> dict:
        out = {
            "model": self.model.to_dict(),
            "detection": self.detection.to_dict(),
            "run": self.run.to_dict(),
        }
        if self.study is not None:
            out["study"] = self.study.to_dict()
        return out

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("qcd_markov") / "scenarios" / f"{name}.json"))


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a config file; a bare bundled scenario name also works."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(p), f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(data)
