"""JSON experiment configuration."""

from __future__ import annotations

import copy
import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelError
from .model import MutationModel, model_from_dict, sample_coalescent_data, sample_initial_data
from .simulator import WEIGHTINGS

_KNOWN = {
    "model", "mu_grid", "data", "tm_levels", "replicates", "repeats", "seed",
    "output", "workers", "weighting", "chunk_size", "oracle_m", "oracle_h", "scenario",
}


def _int(doc, key, where, minimum=None, default=None):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}{key}: must be at least {minimum}, got {value}")
    return value


@dataclasses.dataclass
class ExperimentConfig:
    model: dict
    data: dict
    tm_levels: list = dataclasses.field(default_factory=lambda: [1])
    mu_grid: dict | None = None
    replicates: int = 10_000
    repeats: int = 20
    seed: int = 0
    output: str = "out"
    workers: int = 1
    weighting: str = "exact"
    chunk_size: int = 4096
    oracle_m: list | None = None
    oracle_h: str = "pim"
    scenario: str = ""

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        unknown = sorted(set(doc) - _KNOWN)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
        if "model" not in doc:
            raise ConfigError("model: missing")
        if "data" not in doc:
            raise ConfigError("data: missing")
        cfg = cls(model=copy.deepcopy(doc["model"]), data=copy.deepcopy(doc["data"]))
        try:
            cfg._model = model_from_dict(cfg.model)
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        cfg._check_data()
        grid = doc.get("mu_grid")
        if grid is not None:
            if not isinstance(grid, dict) or set(grid) != {"start", "stop", "count"}:
                raise ConfigError("mu_grid: expected {start, stop, count}")
            start, stop = grid["start"], grid["stop"]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (start, stop)):
                raise ConfigError("mu_grid: start and stop must be numbers")
            count = _int(grid, "count", "mu_grid.", minimum=1)
            if start <= 0:
                raise ConfigError("mu_grid.start: must be positive")
            if count > 1 and stop <= start:
                raise ConfigError("mu_grid.stop: must exceed start")
            cfg.mu_grid = {"start": float(start), "stop": float(stop), "count": count}
        levels = doc.get("tm_levels", [1])
        if not isinstance(levels, list) or not levels:
            raise ConfigError("tm_levels: expected a nonempty list of integers")
        n = sum(cfg.counts())
        for k, t in enumerate(levels):
            if isinstance(t, bool) or not isinstance(t, int) or not 1 <= t <= n:
                raise ConfigError(f"tm_levels[{k}]: expected an integer in [1, {n}], got {t!r}")
        cfg.tm_levels = list(levels)
        cfg.replicates = _int(doc, "replicates", "", 1, cfg.replicates)
        cfg.repeats = _int(doc, "repeats", "", 1, cfg.repeats)
        cfg.seed = _int(doc, "seed", "", 0, cfg.seed)
        cfg.workers = _int(doc, "workers", "", 1, cfg.workers)
        cfg.chunk_size = _int(doc, "chunk_size", "", 1, cfg.chunk_size)
        cfg.output = doc.get("output", cfg.output)
        if not isinstance(cfg.output, str) or not cfg.output:
            raise ConfigError("output: expected a directory path")
        cfg.weighting = doc.get("weighting", cfg.weighting)
        if cfg.weighting not in WEIGHTINGS:
            raise ConfigError(f"weighting: expected one of {', '.join(WEIGHTINGS)}")
        cfg.oracle_h = doc.get("oracle_h", cfg.oracle_h)
        if cfg.oracle_h not in ("pim", "exact"):
            raise ConfigError("oracle_h: expected 'pim' or 'exact'")
        om = doc.get("oracle_m")
        if om is not None:
            if not isinstance(om, list) or any(
                isinstance(m, bool) or not isinstance(m, int) or not 2 <= m <= n for m in om
            ):
                raise ConfigError(f"oracle_m: expected integers in [2, {n}]")
            cfg.oracle_m = list(om)
        cfg.scenario = doc.get("scenario", "")
        if not isinstance(cfg.scenario, str):
            raise ConfigError("scenario: expected a string")
        return cfg

    def _check_data(self):
        data = self.data
        d = self._model.type_count
        if not isinstance(data, dict) or len(data) != 1 or not set(data) <= {"counts", "generate"}:
            raise ConfigError("data: expected {counts: [...]} or {generate: {n, seed}}")
        if "counts" in data:
            counts = data["counts"]
            if not isinstance(counts, list) or len(counts) != d:
                raise ConfigError(f"data.counts: expected {d} integers")
            for k, c in enumerate(counts):
                if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                    raise ConfigError(f"data.counts[{k}]: expected a nonnegative integer")
            if sum(counts) < 2:
                raise ConfigError("data.counts: need at least two sequences")
        else:
            gen = data["generate"]
            if not isinstance(gen, dict) or set(gen) - {"n", "seed", "mu"} or "n" not in gen:
                raise ConfigError("data.generate: expected {n, seed, mu?}")
            _int(gen, "n", "data.generate.", minimum=2)
            _int(gen, "seed", "data.generate.", minimum=0, default=0)
            mu = gen.get("mu")
            if mu is not None and (isinstance(mu, bool) or not isinstance(mu, (int, float)) or mu <= 0):
                raise ConfigError("data.generate.mu: expected a positive number")

    @property
    def mutation_model(self) -> MutationModel:
        return self._model

    def counts(self) -> tuple:
        if "counts" in self.data:
            return tuple(self.data["counts"])
        gen = self.data["generate"]
        rng = np.random.default_rng(gen.get("seed", 0))
        if gen.get("mu") is None:
            # multinomial draw from the stationary vector
            return sample_initial_data(self._model, gen["n"], rng)
        return sample_coalescent_data(self._model.with_mu(gen["mu"]), gen["n"], rng)

    def mus(self) -> list:
        from .estimator import mu_grid

        if self.mu_grid is None:
            return [self._model.mu]
        g = self.mu_grid
        return mu_grid(g["start"], g["stop"], g["count"])

    def to_dict(self) -> dict:
        out = {
            "model": copy.deepcopy(self.model),
            "data": copy.deepcopy(self.data),
            "tm_levels": list(self.tm_levels),
            "replicates": self.replicates,
            "repeats": self.repeats,
            "seed": self.seed,
            "output": self.output,
            "workers": self.workers,
            "weighting": self.weighting,
            "chunk_size": self.chunk_size,
            "oracle_h": self.oracle_h,
        }
        if self.mu_grid is not None:
            out["mu_grid"] = dict(self.mu_grid)
        if self.oracle_m is not None:
            out["oracle_m"] = list(self.oracle_m)
        if self.scenario:
            out["scenario"] = self.scenario
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def loads_config(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(doc)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text)
