"""Backward-in-time importance sampling of coalescent histories.

One replicate starts from the observed counts and repeatedly picks an
offspring lineage, proposes its ancestry (coalescence, or a mutation from
some type ``j``), updates the counts and accumulates the log importance
weight. It stops when ``stop_population`` lineages remain; stopping above
one lineage closes the weight with the parent-independent sample
distribution of the stopped configuration.

Two weightings are available:

``"exact"`` (default)
    weight = forward coalescent probability of the reversed step divided
    by its proposal probability. ``exp(W)`` is then an unbiased estimate
    of the configuration probability (or of the stopped approximation
    when ``stop_population > 1``).
``"ratio"``
    closed-form per-event weights built from ratios of ``|x|(|x|-1+mu)``,
    with a special two-sequence final stage, kept for comparison. They do not
    include the proposal normalisation and are biased.
"""

from __future__ import annotations

import dataclasses
import math
import time
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateStationary,
    ImpossibleAncestry,
    InvalidConfiguration,
    InvalidEvent,
    IterationCap,
)
from .model import Configuration, MutationModel

WEIGHTINGS = ("exact", "ratio")
DEFAULT_MAX_EVENTS = 10**7


class AncestralEvent(NamedTuple):
    kind: str  # "coalescent" or "mutation"
    offspring: int
    ancestor: int

    @classmethod
    def coalescent(cls, i: int) -> "AncestralEvent":
        return cls("coalescent", i, i)

    @classmethod
    def mutation(cls, i: int, j: int) -> "AncestralEvent":
        """Lineage of type ``i`` whose ancestor had type ``j``."""
        return cls("mutation", i, j)


@dataclasses.dataclass(frozen=True)
class SimulationSettings:
    stop_population: int
    seed: int = 0
    weighting: str = "exact"
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self):
        if int(self.stop_population) != self.stop_population or self.stop_population < 1:
            raise ValueError("stop_population must be a positive integer")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")

    @property
    def mode(self) -> str:
        return "full" if self.stop_population == 1 else "time-machine"

    def validate_for(self, y: Sequence[int]) -> None:
        n = sum(y)
        if self.stop_population > n:
            raise ValueError(f"stop_population {self.stop_population} exceeds sample size {n}")


@dataclasses.dataclass(frozen=True)
class ReplicateResult:
    log_weight: float
    stop_generation: int
    final_configuration: Configuration
    mutation_events: int
    coalescent_events: int
    elapsed: float

    @property
    def events(self) -> int:
        return self.mutation_events + self.coalescent_events


@dataclasses.dataclass
class FinalStage:
    """Output of :func:`final_stage_sd`."""

    log_weights: list
    events: list
    configuration: Configuration


def _total(x) -> int:
    return int(sum(x))


def sample_offspring_type(x: Sequence[int], rng) -> int:
    """Type of a lineage drawn uniformly from the ``|x|`` present."""
    n = _total(x)
    if n < 2:
        raise InvalidConfiguration(f"need at least two sequences, got {tuple(x)}")
    pick = math.floor(rng.random() * n)
    cum = 0
    for i, c in enumerate(x):
        cum += c
        if cum > pick:
            return i
    raise AssertionError("unreachable")


def kappa(model: MutationModel, x: Sequence[int], i: int, j: int) -> float:
    """Parent-independent chance that an extra draw from ``x - e_i`` has type ``j``."""
    n = _total(x)
    return (x[j] - (i == j) + model.mu * model.stationary[j]) / (n - 1 + model.mu)


def _proposal(model: MutationModel, x, i: int, allow_coalescence: bool = True):
    """Unnormalised proposal weights for offspring type ``i``.

    Returns the candidate ancestor types, their kappa values, and the
    running sums of ``[coalescence, mutation from each candidate]``. The
    arithmetic order matches the vectorised engine.
    """
    par_idx, par_val = model.parents
    mu = model.mu
    psi = model.stationary
    n = _total(x)
    denom = n - 1 + mu
    cols = par_idx[i]
    probs = par_val[i]
    m = int(np.count_nonzero(probs))
    cw = float(x[i] - 1) if allow_coalescence else 0.0
    cum = [cw]
    kap = []
    total = cw
    for k in range(m):
        j = int(cols[k])
        kj = (x[j] - (j == i) + mu * float(psi[j])) / denom
        kap.append(kj)
        total = total + mu * kj * float(probs[k])
        cum.append(total)
    return [int(c) for c in cols[:m]], kap, cum


def _select(cum: list, u: float) -> int:
    t = u * cum[-1]
    k = sum(1 for c in cum if c <= t)
    # u * Z can round up to Z; fall back to the last positive weight
    last = max(idx for idx in range(len(cum)) if cum[idx] > (cum[idx - 1] if idx else 0.0))
    return min(k, last)


def ancestor_event_distribution(model: MutationModel, x: Sequence[int], i: int) -> np.ndarray:
    """Normalised proposal over ancestral events for an offspring of type ``i``.

    Returns
    -------
    probs : (d + 1,) ndarray
        ``probs[0]`` is the coalescence probability and ``probs[1 + j]``
        the probability that the ancestor had type ``j``.
    """
    if x[i] < 1 or _total(x) < 2:
        raise InvalidConfiguration(f"type {i} not present in {tuple(x)} or too few sequences")
    cols, _, cum = _proposal(model, x, i)
    Z = cum[-1]
    if not Z > 0:
        raise ImpossibleAncestry(f"no ancestral event possible for type {i} in {tuple(x)}")
    out = np.zeros(model.type_count + 1)
    out[0] = cum[0] / Z
    for k, j in enumerate(cols):
        out[1 + j] = (cum[k + 1] - cum[k]) / Z
    return out


def apply_event(x: Sequence[int], e: AncestralEvent) -> Configuration:
    x = list(x)
    i, j = e.offspring, e.ancestor
    if not (0 <= i < len(x) and 0 <= j < len(x)) or x[i] < 1:
        raise InvalidEvent(f"{e} is not applicable to {tuple(x)}")
    if e.kind == "coalescent":
        if x[i] < 2:
            raise InvalidEvent(f"coalescence needs two lineages of type {i} in {tuple(x)}")
        x[i] -= 1
    elif e.kind == "mutation":
        x[i] -= 1
        x[j] += 1
    else:
        raise InvalidEvent(f"unknown event kind {e.kind!r}")
    return tuple(x)


def event_weight(
    model: MutationModel, x_t: Sequence[int], x_next: Sequence[int], e: AncestralEvent
) -> float:
    """Closed-form per-event weight of the ``"ratio"`` scheme.

    ``(K1/K2) (kappa_ii/kappa_ij) x'_j/|x|`` for a mutation and
    ``(K1/K2) (1/kappa_ii) x'_i (|x'|-1) / (x_i (x_i-1))`` for a
    coalescence, with ``K = |x| (|x| - 1 + mu)`` before (K1) and after
    (K2) the event. Used by ``weighting="ratio"``.
    """
    if tuple(x_next) != apply_event(x_t, e):
        raise InvalidEvent(f"{tuple(x_next)} does not follow from {tuple(x_t)} by {e}")
    mu = model.mu
    n, n2 = _total(x_t), _total(x_next)
    K1 = n * (n - 1 + mu)
    K2 = n2 * (n2 - 1 + mu)
    i, j = e.offspring, e.ancestor
    kii = kappa(model, x_t, i, i)
    if e.kind == "mutation":
        return K1 / K2 * kii / kappa(model, x_t, i, j) * x_next[j] / n
    return K1 / K2 / kii * x_next[i] * (n2 - 1) / (x_t[i] * (x_t[i] - 1))


def _exact_weight(n, mu, xi, Z, kap_j, xj_next, coalescent):
    if coalescent:
        return n * Z / ((n - 1 + mu) * xi)
    return Z * xj_next / ((n - 1 + mu) * xi * kap_j)


def importance_weight(model: MutationModel, x_t: Sequence[int], e: AncestralEvent) -> float:
    """Forward probability of the reversed event over its proposal probability.

    The forward terms are ``(x_i - 1)/(n - 1 + mu)`` for a coalescence and
    ``mu p_ji x'_j / (n (n - 1 + mu))`` for a ``j -> i`` mutation, where
    ``x'`` is the configuration after the backward step.
    """
    x_next = apply_event(x_t, e)
    i, j = e.offspring, e.ancestor
    cols, kap, cum = _proposal(model, x_t, i)
    if e.kind == "mutation" and j not in cols:
        raise InvalidEvent(f"{e} has zero proposal probability (p_ji = 0)")
    kj = kap[cols.index(j)] if e.kind == "mutation" else None
    return _exact_weight(
        _total(x_t), model.mu, x_t[i], cum[-1], kj, x_next[j], e.kind == "coalescent"
    )


def log_bias_correction(model: MutationModel, x: Sequence[int]) -> float:
    """Log probability of unordered counts ``x`` under parent-independent mutation.

    This is the Dirichlet-multinomial with parameters ``mu * psi``; it
    replaces the unsimulated top of the tree when the backward run stops.
    """
    mu = model.mu
    if not mu > 0:
        raise ValueError("bias correction needs mu > 0")
    n = _total(x)
    if n < 1:
        raise InvalidConfiguration("empty configuration")
    out = math.lgamma(n + 1) + math.lgamma(mu) - math.lgamma(mu + n)
    for xi, p in zip(x, model.stationary):
        if xi == 0:
            continue
        a = mu * float(p)
        if a <= 0:
            raise DegenerateStationary(f"type with count {xi} has zero stationary mass")
        out += math.lgamma(xi + a) - math.lgamma(xi + 1) - math.lgamma(a)
    return out


def _step(model, x, rng, allow_coalescence=True):
    """One proposal step; returns (event, next configuration, cols, kap, cum, k)."""
    n = _total(x)
    pick = math.floor(rng.random() * n)
    cum_x = 0
    for i, c in enumerate(x):
        cum_x += c
        if cum_x > pick:
            break
    cols, kap, cum = _proposal(model, x, i, allow_coalescence)
    if not cum[-1] > 0:
        raise ImpossibleAncestry(f"no ancestral event possible for type {i} in {tuple(x)}")
    k = _select(cum, rng.random())
    if k == 0:
        e = AncestralEvent.coalescent(i)
    else:
        e = AncestralEvent.mutation(i, cols[k - 1])
    return e, apply_event(x, e), kap, cum, k


def _log_exact(model, x, x_next, e, kap, cum, k):
    i, j = e.offspring, e.ancestor
    w = _exact_weight(
        _total(x), model.mu, x[i], cum[-1], kap[k - 1] if k else None, x_next[j], k == 0
    )
    return math.log(w)


def final_stage_sd(
    model: MutationModel,
    x: Sequence[int],
    rng,
    weighting: str = "exact",
    max_events: int = DEFAULT_MAX_EVENTS,
) -> FinalStage:
    """Finish a full-tree replicate from two remaining lineages.

    With ``weighting="ratio"`` mutations are simulated, coalescence
    disabled, until both lineages share a type, using the weights
    ``mu psi_i / (x_j + mu psi_j)`` on the last step and half that
    otherwise. If the pair already shares a type on entry one
    last-generation step is taken.

    With ``weighting="exact"`` the ordinary proposal runs on to a single
    lineage and ``log psi`` of the root type closes the weight.
    """
    x = tuple(int(c) for c in x)
    if _total(x) != 2:
        raise InvalidConfiguration(f"final stage needs exactly two sequences, got {x}")
    logs, events = [], []
    if weighting == "exact":
        while _total(x) > 1:
            if len(events) >= max_events:
                raise IterationCap(f"final stage exceeded {max_events} events")
            e, x_next, kap, cum, k = _step(model, x, rng)
            logs.append(_log_exact(model, x, x_next, e, kap, cum, k))
            events.append(e)
            x = x_next
        root = x.index(1)
        logs.append(math.log(float(model.stationary[root])))
        return FinalStage(logs, events, x)
    if weighting != "ratio":
        raise ValueError(f"unknown weighting {weighting!r}")
    mu, psi = model.mu, model.stationary
    entered_matched = max(x) == 2
    while True:
        if len(events) >= max_events:
            raise IterationCap(f"final stage exceeded {max_events} events")
        e, x_next, _, _, _ = _step(model, x, rng, allow_coalescence=False)
        i, j = e.offspring, e.ancestor
        last = entered_matched or max(x_next) == 2
        w = mu * float(psi[i]) / (x[j] + mu * float(psi[j]))
        if not last:
            w /= 2
        logs.append(math.log(w))
        events.append(e)
        x = x_next
        if last:
            return FinalStage(logs, events, x)


def run_replicate(
    model: MutationModel, y: Sequence[int], settings: SimulationSettings, rng
) -> ReplicateResult:
    """Simulate one backward history from ``y`` and return its log weight.

    ``rng`` is any object with a ``random()`` method returning uniforms on
    [0, 1): a :class:`~timemachine.rng.CounterStream` or a
    :class:`numpy.random.Generator`. Each event consumes exactly two draws.
    """
    start = time.perf_counter()
    x = tuple(int(c) for c in y)
    if _total(x) < 2:
        raise InvalidConfiguration(f"need at least two sequences, got {x}")
    settings.validate_for(x)
    if not model.mu > 0:
        raise ValueError("simulation needs mu > 0")
    stop = settings.stop_population
    full = stop == 1
    floor = 2 if full else stop
    exact = settings.weighting == "exact"
    W = 0.0
    n_mut = n_coal = 0
    while _total(x) > floor:
        if n_mut + n_coal >= settings.max_events:
            raise IterationCap(f"replicate exceeded {settings.max_events} events")
        e, x_next, kap, cum, k = _step(model, x, rng)
        if exact:
            W += _log_exact(model, x, x_next, e, kap, cum, k)
        else:
            W += math.log(event_weight(model, x, x_next, e))
        if e.kind == "coalescent":
            n_coal += 1
        else:
            n_mut += 1
        x = x_next
    if full:
        budget = settings.max_events - n_mut - n_coal
        tail = final_stage_sd(model, x, rng, settings.weighting, max_events=budget)
        for lw in tail.log_weights:
            W += lw
        n_coal += sum(1 for e in tail.events if e.kind == "coalescent")
        n_mut += sum(1 for e in tail.events if e.kind == "mutation")
        x = tail.configuration
    else:
        W += log_bias_correction(model, x)
    return ReplicateResult(
        log_weight=W,
        stop_generation=n_mut + n_coal + 1,
        final_configuration=x,
        mutation_events=n_mut,
        coalescent_events=n_coal,
        elapsed=time.perf_counter() - start,
    )
