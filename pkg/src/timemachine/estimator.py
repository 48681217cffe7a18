"""Likelihood estimates from batches of backward replicates.

Replicate ``r`` of repeat ``k`` at grid cell ``(a, b)`` always uses the
stream ``derive_key(seed, a, b, k, r)``. Replicates are grouped in chunks
of fixed size, so results do not depend on the number of workers.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import time
from typing import Sequence

import numpy as np

from .batch import simulate_batch
from .errors import EmptyInput, TimeMachineError
from .model import Configuration, MutationModel
from .rng import CounterStream, derive_key, derive_keys
from .simulator import DEFAULT_MAX_EVENTS, WEIGHTINGS, SimulationSettings, run_replicate

DEFAULT_CHUNK = 4096


def aggregate_log_likelihood(log_weights) -> float:
    """Log of the mean of ``exp(log_weights)``, shifted by the maximum."""
    w = np.asarray(log_weights, dtype=float).ravel()
    if w.size == 0:
        raise EmptyInput("no log-weights to aggregate")
    if not np.all(np.isfinite(w)):
        raise ValueError("log-weights must be finite")
    top = w.max()
    return float(np.log(np.mean(np.exp(w - top))) + top)


@dataclasses.dataclass(frozen=True)
class EstimateRequest:
    model: MutationModel
    data: Configuration
    stop_population: int = 1
    replicates: int = 10_000
    repeats: int = 1
    seed: int = 0
    weighting: str = "exact"
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK
    max_events: int = DEFAULT_MAX_EVENTS
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "data", tuple(int(c) for c in self.data))
        if self.replicates < 1 or self.repeats < 1:
            raise ValueError("replicates and repeats must be at least 1")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.workers < 1 or self.chunk_size < 1:
            raise ValueError("workers and chunk_size must be positive")
        if len(self.data) != self.model.type_count:
            raise ValueError("data length differs from the model's type count")
        n = sum(self.data)
        if n < 2:
            raise ValueError("data must hold at least two sequences")
        if not 1 <= self.stop_population <= n:
            raise ValueError(f"stop_population must lie in [1, {n}]")


@dataclasses.dataclass(frozen=True)
class GridRow:
    mu: float
    ntm: int
    mean_loglik: float
    sd_loglik: float
    mean_events: float
    mean_wall_ms: float
    n: int
    repeats: int
    seed: int

    FIELDS = ("mu", "ntm", "mean_loglik", "sd_loglik", "mean_events", "mean_wall_ms", "n", "repeats", "seed")


@dataclasses.dataclass
class GridResult:
    rows: list

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def level(self, ntm: int) -> list:
        return [r for r in self.rows if r.ntm == ntm]

    def mus(self) -> list:
        return sorted({r.mu for r in self.rows})

    def argmax_mu(self, ntm: int) -> float:
        rows = self.level(ntm)
        return max(rows, key=lambda r: r.mean_loglik).mu


@dataclasses.dataclass
class Estimate:
    """Per-repeat results for one (mu, stopping level) cell."""

    log_likelihoods: np.ndarray
    log_second_moments: np.ndarray
    replicates: int
    row: GridRow

    def pooled(self) -> tuple[float, float]:
        """Mean of ``exp(W)`` over all replicates and its standard error."""
        R = len(self.log_likelihoods)
        total = R * self.replicates
        log_mean = aggregate_log_likelihood(self.log_likelihoods)
        log_m2 = aggregate_log_likelihood(self.log_second_moments)
        mean = math.exp(log_mean)
        if total < 2:
            return mean, math.nan
        rel_var = max(math.expm1(log_m2 - 2 * log_mean), 0.0) * total / (total - 1)
        return mean, mean * math.sqrt(rel_var / total)


def _run_chunk(task):
    model, y, ntm, weighting, max_events, base, start, stop = task
    t0 = time.perf_counter()
    if weighting == "exact":
        keys = derive_keys(base, np.arange(start, stop))
        res = simulate_batch(model, y, ntm, keys, max_events)
        logw, events = res.log_weights, res.events
    else:
        settings = SimulationSettings(ntm, weighting=weighting, max_events=max_events)
        keys = derive_keys(base, np.arange(start, stop))
        out = [run_replicate(model, y, settings, CounterStream(int(k))) for k in keys]
        logw = np.array([r.log_weight for r in out])
        events = np.array([r.events for r in out])
    return logw, events, time.perf_counter() - t0


def _cell_tasks(request, model, ntm, mu_index, ntm_index):
    tasks = []
    for rep in range(request.repeats):
        base = derive_key(request.seed, mu_index, ntm_index, rep)
        for start in range(0, request.replicates, request.chunk_size):
            stop = min(start + request.chunk_size, request.replicates)
            tasks.append((model, request.data, ntm, request.weighting, request.max_events, base, start, stop))
    return tasks


def _execute(tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [_run_chunk(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chunk, tasks))


def _summarise(request, model, ntm, results) -> Estimate:
    per_rep = math.ceil(request.replicates / request.chunk_size)
    loglik, second, events, wall = [], [], 0, 0.0
    for rep in range(request.repeats):
        chunk = results[rep * per_rep : (rep + 1) * per_rep]
        w = np.concatenate([c[0] for c in chunk])
        loglik.append(aggregate_log_likelihood(w))
        second.append(aggregate_log_likelihood(2 * w))
        events += int(sum(int(c[1].sum()) for c in chunk))
        wall += sum(c[2] for c in chunk)
    total = request.repeats * request.replicates
    loglik = np.array(loglik)
    row = GridRow(
        mu=model.mu,
        ntm=ntm,
        mean_loglik=float(loglik.mean()),
        sd_loglik=float(loglik.std(ddof=1)) if len(loglik) > 1 else 0.0,
        mean_events=events / total,
        mean_wall_ms=1000 * wall / total if request.timing else math.nan,
        n=sum(request.data),
        repeats=request.repeats,
        seed=request.seed,
    )
    return Estimate(loglik, np.array(second), request.replicates, row)


def estimate(request: EstimateRequest, mu_index: int = 0, ntm_index: int = 0) -> Estimate:
    """Estimate the log-likelihood at ``request.model.mu``, once per repeat."""
    tasks = _cell_tasks(request, request.model, request.stop_population, mu_index, ntm_index)
    try:
        results = _execute(tasks, request.workers)
    except TimeMachineError as exc:
        raise type(exc)(f"mu={request.model.mu}, ntm={request.stop_population}: {exc}") from exc
    return _summarise(request, request.model, request.stop_population, results)


def grid_sweep(
    request: EstimateRequest, mu_grid: Sequence[float], ntm_levels: Sequence[int]
) -> tuple[GridResult, dict]:
    """Estimate every (mu, stopping level) pair of the cross product.

    Returns the grid rows and a dict mapping ``(mu_index, ntm_index)`` to
    the full :class:`Estimate`.
    """
    mu_grid = [float(m) for m in mu_grid]
    ntm_levels = [int(t) for t in ntm_levels]
    if not mu_grid or not ntm_levels:
        raise ValueError("grid must be nonempty")
    if any(m <= 0 for m in mu_grid) or any(b <= a for a, b in zip(mu_grid, mu_grid[1:])):
        raise ValueError("mu grid must be positive and strictly increasing")
    n = sum(request.data)
    if any(not 1 <= t <= n for t in ntm_levels):
        raise ValueError(f"stopping levels must lie in [1, {n}]")
    cells, tasks = [], []
    for a, mu in enumerate(mu_grid):
        model = request.model.with_mu(mu)
        for b, ntm in enumerate(ntm_levels):
            cell_tasks = _cell_tasks(request, model, ntm, a, b)
            cells.append((a, b, model, ntm, len(tasks), len(cell_tasks)))
            tasks.extend(cell_tasks)
    results = _execute(tasks, request.workers)
    rows, estimates = [], {}
    for a, b, model, ntm, offset, count in cells:
        est = _summarise(request, model, ntm, results[offset : offset + count])
        rows.append(est.row)
        estimates[(a, b)] = est
    return GridResult(rows), estimates


def relative_sd(tm_rows: Sequence[GridRow], baseline_rows: Sequence[GridRow]) -> list:
    """Per-mu ratio of repeat SDs, time machine over full tree.

    A zero baseline SD gives ``nan`` (undefined) rather than an error.
    """
    base = {r.mu: r.sd_loglik for r in baseline_rows}
    if sorted(base) != sorted(r.mu for r in tm_rows):
        raise ValueError("mu grids differ")
    out = []
    for r in tm_rows:
        denom = base[r.mu]
        out.append((r.mu, r.sd_loglik / denom if denom > 0 else math.nan))
    return out


def mu_grid(start: float, stop: float, count: int) -> list:
    """``count`` evenly spaced rates from ``start`` to ``stop`` inclusive."""
    if count < 1:
        raise ValueError("count must be positive")
    if count == 1:
        return [float(start)]
    return [float(v) for v in np.linspace(start, stop, count)]
