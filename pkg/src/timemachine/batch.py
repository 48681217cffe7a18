"""Lockstep simulation of many replicates with numpy.

Every active replicate performs one backward event per step, drawing its
two uniforms from its own counter-based stream at counters ``2s`` and
``2s + 1``. The arithmetic mirrors :func:`timemachine.simulator.run_replicate`
with ``weighting="exact"``, so a replicate gives the same history whether
it runs here or through the scalar path.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateStationary, ImpossibleAncestry, IterationCap
from .model import MutationModel
from .rng import uniforms
from .simulator import DEFAULT_MAX_EVENTS


@dataclasses.dataclass
class BatchResult:
    log_weights: np.ndarray
    mutation_events: np.ndarray
    coalescent_events: np.ndarray
    final_counts: np.ndarray

    @property
    def events(self) -> np.ndarray:
        return self.mutation_events + self.coalescent_events


def log_bias_correction_many(model: MutationModel, counts: np.ndarray) -> np.ndarray:
    """Row-wise :func:`~timemachine.simulator.log_bias_correction`."""
    mu = model.mu
    counts = np.asarray(counts)
    n = counts.sum(axis=1)
    a = mu * np.asarray(model.stationary, dtype=float)
    present = counts > 0
    if np.any(present & (a <= 0)):
        raise DegenerateStationary("a present type has zero stationary mass")
    safe_a = np.where(a > 0, a, 1.0)
    terms = gammaln(counts + safe_a) - gammaln(counts + 1.0) - gammaln(safe_a)
    terms = np.where(present, terms, 0.0)
    return gammaln(n + 1.0) + gammaln(mu) - gammaln(mu + n) + terms.sum(axis=1)


def simulate_batch(
    model: MutationModel,
    y,
    stop_population: int,
    keys: np.ndarray,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> BatchResult:
    """Run one replicate per stream key and return their log weights."""
    if not model.mu > 0:
        raise ValueError("simulation needs mu > 0")
    y = np.asarray(y, dtype=np.int64)
    n0 = int(y.sum())
    if n0 < 2:
        raise ValueError("need at least two sequences")
    if not 1 <= stop_population <= n0:
        raise ValueError(f"stop_population must lie in [1, {n0}]")
    keys = np.asarray(keys, dtype=np.uint64)
    B = keys.size
    mu = model.mu
    psi = np.asarray(model.stationary, dtype=float)
    par_idx, par_val = model.parents
    D = par_idx.shape[1]

    counts = np.tile(y, (B, 1))
    size = np.full(B, n0, dtype=np.int64)
    logw = np.zeros(B)
    n_mut = np.zeros(B, dtype=np.int64)
    n_coal = np.zeros(B, dtype=np.int64)
    act = np.arange(B)
    step = 0
    with np.errstate(over="ignore"):
        while True:
            act = act[size[act] > stop_population]
            if act.size == 0:
                break
            if step >= max_events:
                raise IterationCap(f"replicate exceeded {max_events} events")
            A = act.size
            rows = np.arange(A)
            x = counts[act]
            n = size[act]
            ctr = np.full(A, 2 * step, dtype=np.uint64)
            k_act = keys[act]
            u1 = uniforms(k_act, ctr)
            u2 = uniforms(k_act, ctr + np.uint64(1))

            pick = np.floor(u1 * n).astype(np.int64)
            i = (np.cumsum(x, axis=1) <= pick[:, None]).sum(axis=1)
            xi = x[rows, i]

            J = par_idx[i]
            pv = par_val[i]
            xJ = x[rows[:, None], J]
            delta = J == i[:, None]
            denom = n - 1 + mu
            kap = (xJ - delta + mu * psi[J]) / denom[:, None]
            weights = np.empty((A, D + 1))
            weights[:, 0] = xi - 1
            weights[:, 1:] = mu * kap * pv
            cum = np.cumsum(weights, axis=1)
            Z = cum[:, -1]
            if np.any(~(Z > 0)):
                raise ImpossibleAncestry("no ancestral event possible")

            t = u2 * Z
            k = (cum <= t[:, None]).sum(axis=1)
            inc = np.diff(cum, axis=1, prepend=0.0) > 0
            last = D - np.argmax(inc[:, ::-1], axis=1)
            k = np.minimum(k, last)

            coal = k == 0
            km = np.maximum(k - 1, 0)
            jj = J[rows, km]
            kj = kap[rows, km]
            xj_next = xJ[rows, km] - delta[rows, km] + 1
            w = np.where(
                coal,
                n * Z / (denom * xi),
                Z * xj_next / (denom * xi * np.where(coal, 1.0, kj)),
            )
            logw[act] += np.log(w)

            counts[act, i] -= 1
            mut = ~coal
            counts[act[mut], jj[mut]] += 1
            size[act[coal]] -= 1
            n_coal[act[coal]] += 1
            n_mut[act[mut]] += 1
            step += 1

    if stop_population == 1:
        roots = np.argmax(counts, axis=1)
        logw += np.log(psi[roots])
    else:
        logw += log_bias_correction_many(model, counts)
    return BatchResult(logw, n_mut, n_coal, counts)
