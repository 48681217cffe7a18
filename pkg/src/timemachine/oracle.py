"""Exact sample probabilities for small type spaces and sample sizes.

The forward process is tracked one size level at a time. At level ``k``
each event is a mutation with probability ``c = mu / (k - 1 + mu)`` and a
split otherwise, so the configuration at the moment of the split is the
entering distribution pushed through ``(1 - c) sum_m (c M_k)^m``. That
split-moment distribution at level ``n`` is the probability of an
unordered sample of size ``n``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .errors import CapacityExceeded, SingularSystem, SizeMismatch
from .model import Configuration, MutationModel, unit
from .simulator import (
    _proposal,
    apply_event,
    AncestralEvent,
    event_weight,
    importance_weight,
    log_bias_correction,
)

SUM_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class OracleLimits:
    max_types: int = 4
    max_sample: int = 12
    max_level_states: int = 5000

    def check(self, d: int, k: int) -> None:
        if d > self.max_types or k > self.max_sample:
            raise CapacityExceeded(
                f"oracle limited to {self.max_types} types and samples of "
                f"{self.max_sample}; got d={d}, k={k}"
            )
        states = math.comb(k + d - 1, d - 1)
        if states > self.max_level_states:
            raise CapacityExceeded(
                f"level {k} has {states} configurations, limit {self.max_level_states}"
            )


DEFAULT_LIMITS = OracleLimits()


def enumerate_configurations(
    d: int, k: int, limits: OracleLimits = DEFAULT_LIMITS
) -> list[Configuration]:
    """All count vectors of ``d`` types summing to ``k``, largest first type first."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be positive")
    limits.check(d, k)

    def rec(d, k):
        if d == 1:
            yield (k,)
            return
        for a in range(k, -1, -1):
            for rest in rec(d - 1, k - a):
                yield (a,) + rest

    return list(rec(d, k))


@dataclasses.dataclass(frozen=True, eq=False)
class LevelDistribution:
    size: int
    support: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (len(self.support),):
            raise ValueError("probabilities must align with support")
        object.__setattr__(self, "support", tuple(tuple(c) for c in self.support))
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "_index", {c: a for a, c in enumerate(self.support)})

    @classmethod
    def point_mass(cls, config: Sequence[int], limits: OracleLimits = DEFAULT_LIMITS):
        config = tuple(config)
        support = enumerate_configurations(len(config), sum(config), limits)
        probs = np.zeros(len(support))
        probs[support.index(config)] = 1.0
        return cls(sum(config), support, probs)

    @classmethod
    def from_mapping(cls, d: int, k: int, mapping: dict, limits: OracleLimits = DEFAULT_LIMITS):
        support = enumerate_configurations(d, k, limits)
        return cls(k, support, np.array([mapping.get(c, 0.0) for c in support]))

    def __getitem__(self, config) -> float:
        idx = self._index.get(tuple(config))
        return 0.0 if idx is None else float(self.probabilities[idx])

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probabilities.tolist()))

    def total_variation(self, other: "LevelDistribution") -> float:
        if other.support != self.support:
            raise SizeMismatch("distributions live on different levels")
        return 0.5 * float(np.abs(self.probabilities - other.probabilities).sum())

    def check(self, tol: float = SUM_TOL) -> None:
        if np.any(self.probabilities < -tol) or abs(self.probabilities.sum() - 1) > tol:
            raise AssertionError(f"level {self.size} is not a probability vector")


def _mutation_matrix(model: MutationModel, support) -> np.ndarray:
    """Within-level chain: a lineage of type i picked w.p. z_i/k mutates by row i of P."""
    P = model.dense_transition()
    index = {c: a for a, c in enumerate(support)}
    M = np.zeros((len(support), len(support)))
    for a, z in enumerate(support):
        k = sum(z)
        for i, zi in enumerate(z):
            if not zi:
                continue
            for l in np.flatnonzero(P[i]):
                nxt = list(z)
                nxt[i] -= 1
                nxt[l] += 1
                M[a, index[tuple(nxt)]] += zi / k * P[i, l]
    return M


def split_moment_distribution(
    model: MutationModel, entering: LevelDistribution
) -> LevelDistribution:
    """Distribution of the configuration when the level's split occurs."""
    k = entering.size
    if k < 2:
        raise ValueError("levels start at two sequences")
    c = model.mu / (k - 1 + model.mu)
    if c == 0:
        return entering
    M = _mutation_matrix(model, entering.support)
    A = (np.eye(len(entering.support)) - c * M).T
    try:
        out = np.linalg.solve(A, entering.probabilities)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"level {k} system is singular") from exc
    return LevelDistribution(k, entering.support, (1 - c) * out)


def split(model: MutationModel, dist: LevelDistribution, limits=DEFAULT_LIMITS) -> LevelDistribution:
    """Push a split-moment distribution through the birth z -> z + e_i (w.p. z_i/k)."""
    k = dist.size
    d = len(dist.support[0])
    support = enumerate_configurations(d, k + 1, limits)
    index = {c: a for a, c in enumerate(support)}
    probs = np.zeros(len(support))
    for z, p in zip(dist.support, dist.probabilities):
        if p == 0:
            continue
        for i, zi in enumerate(z):
            if zi:
                nxt = tuple(v + (a == i) for a, v in enumerate(z))
                probs[index[nxt]] += p * zi / k
    return LevelDistribution(k + 1, support, probs)


def founder_distribution(model: MutationModel, limits=DEFAULT_LIMITS) -> LevelDistribution:
    """Entering distribution at two sequences: a psi-distributed founder, doubled."""
    d = model.type_count
    return LevelDistribution.from_mapping(
        d, 2, {unit(d, i, 2): float(p) for i, p in enumerate(model.stationary)}, limits
    )


def _propagate(model, dist, n, limits, on_level=None):
    """Carry a split-moment distribution at ``dist.size`` up to level ``n``."""
    if on_level:
        on_level(dist)
    while dist.size < n:
        dist = split_moment_distribution(model, split(model, dist, limits))
        if on_level:
            on_level(dist)
    return dist


def exact_last_exit_marginal(
    model: MutationModel, m: int, limits: OracleLimits = DEFAULT_LIMITS
) -> LevelDistribution:
    """Distribution of the configuration at the last moment there are ``m`` lineages."""
    if m < 2:
        raise ValueError("m must be at least 2")
    limits.check(model.type_count, m)
    first = split_moment_distribution(model, founder_distribution(model, limits))
    return _propagate(model, first, m, limits)


def _ordered_factor(y) -> float:
    n = sum(y)
    return math.exp(sum(math.lgamma(c + 1) for c in y) - math.lgamma(n + 1))


def exact_likelihood(
    model: MutationModel, y: Sequence[int], limits: OracleLimits = DEFAULT_LIMITS
) -> tuple[float, float]:
    """Exact (configuration probability, ordered-sample probability) of ``y``."""
    y = tuple(y)
    n = sum(y)
    if len(y) != model.type_count:
        raise SizeMismatch("configuration length differs from the type count")
    limits.check(model.type_count, n)
    if n == 1:
        p = float(model.stationary[y.index(1)])
        return p, p
    p = exact_last_exit_marginal(model, n, limits)[y]
    return p, p * _ordered_factor(y)


def exact_biased_likelihood(
    model: MutationModel,
    y: Sequence[int],
    m: int,
    h: LevelDistribution,
    limits: OracleLimits = DEFAULT_LIMITS,
) -> tuple[float, float]:
    """Likelihood with the level-``m`` marginal replaced by ``h``.

    With ``h = exact_last_exit_marginal(model, m)`` this equals
    :func:`exact_likelihood`. For ``m == |y|`` it is ``h(y)`` itself.
    """
    y = tuple(y)
    n = sum(y)
    if h.size != m:
        raise SizeMismatch(f"h lives on level {h.size}, expected {m}")
    if not 2 <= m <= n:
        raise ValueError(f"need 2 <= m <= n, got m={m}, n={n}")
    limits.check(model.type_count, n)
    p = _propagate(model, h, n, limits)[y]
    return p, p * _ordered_factor(y)


def pim_sample_distribution(
    model: MutationModel, k: int, limits: OracleLimits = DEFAULT_LIMITS
) -> LevelDistribution:
    """Parent-independent (Dirichlet-multinomial) law of unordered size-``k`` samples."""
    d = model.type_count
    support = enumerate_configurations(d, k, limits)
    probs = np.array([math.exp(log_bias_correction(model, z)) for z in support])
    dist = LevelDistribution(k, support, probs)
    dist.check()
    return dist


def tv_contraction_profile(
    model: MutationModel,
    start_a: Sequence[int],
    start_b: Sequence[int],
    n_max: int,
    limits: OracleLimits = DEFAULT_LIMITS,
) -> list[float]:
    """Total variation between two forward runs started from point masses.

    Entry ``s`` compares the split-moment distributions at size
    ``m + s``, where ``m = |start_a|``; entry 0 is the distance between
    the starts.
    """
    m = sum(start_a)
    if sum(start_b) != m or m < 2:
        raise SizeMismatch("starts must have the same size, at least 2")
    if n_max < m:
        raise ValueError("n_max must be at least the starting size")
    limits.check(model.type_count, n_max)
    levels_a, levels_b = [], []
    _propagate(model, LevelDistribution.point_mass(start_a, limits), n_max, limits, levels_a.append)
    _propagate(model, LevelDistribution.point_mass(start_b, limits), n_max, limits, levels_b.append)
    return [a.total_variation(b) for a, b in zip(levels_a, levels_b)]


def proposal_expectation(
    model: MutationModel,
    y: Sequence[int],
    stop_population: int,
    weighting: str = "exact",
    limits: OracleLimits = DEFAULT_LIMITS,
) -> float:
    """Exact expected value of ``exp(W)`` for one backward replicate.

    Solves, level by level, the linear system for the expected product of
    weights under the proposal. This checks a weighting scheme without
    sampling: an unbiased scheme reproduces :func:`exact_likelihood`
    (``stop_population == 1``) or the PIM-closed biased likelihood.
    """
    y = tuple(y)
    n = sum(y)
    d = model.type_count
    limits.check(d, n)
    if not 1 <= stop_population <= n:
        raise ValueError("stop_population out of range")
    if stop_population == n:
        return math.exp(log_bias_correction(model, y))
    if stop_population > 1:
        below = {z: math.exp(log_bias_correction(model, z)) for z in enumerate_configurations(d, stop_population, limits)}
        first = stop_population + 1
    elif weighting == "exact":
        below = {unit(d, i): float(p) for i, p in enumerate(model.stationary)}
        first = 2
    else:
        below = _ratio_final_expectation(model, limits)
        first = 3
    for k in range(first, n + 1):
        below = _level_expectation(model, k, below, weighting, limits)
    return below[y]


def _level_expectation(model, k, below, weighting, limits):
    d = model.type_count
    support = enumerate_configurations(d, k, limits)
    index = {c: a for a, c in enumerate(support)}
    A = np.zeros((len(support), len(support)))
    b = np.zeros(len(support))
    for x in support:
        for i in range(d):
            if not x[i]:
                continue
            cols, _, cum = _proposal(model, x, i)
            Z = cum[-1]
            choices = [(AncestralEvent.coalescent(i), cum[0])] + [
                (AncestralEvent.mutation(i, j), cum[t + 1] - cum[t]) for t, j in enumerate(cols)
            ]
            for e, wgt in choices:
                if wgt <= 0:
                    continue
                q = x[i] / k * wgt / Z
                nxt = apply_event(x, e)
                if weighting == "exact":
                    w = importance_weight(model, x, e)
                else:
                    w = event_weight(model, x, nxt, e)
                if e.kind == "coalescent":
                    b[index[x]] += q * w * below[nxt]
                else:
                    A[index[x], index[nxt]] += q * w
    g = np.linalg.solve(np.eye(len(support)) - A, b)
    return dict(zip(support, g))


def _ratio_final_expectation(model, limits):
    """Expected product of the two-sequence final-stage weights (ratio scheme)."""
    d = model.type_count
    mu, psi = model.mu, model.stationary
    support = enumerate_configurations(d, 2, limits)
    index = {c: a for a, c in enumerate(support)}
    A = np.zeros((len(support), len(support)))
    b = np.zeros(len(support))
    for z in support:
        matched = max(z) == 2
        for i in range(d):
            if not z[i]:
                continue
            cols, _, cum = _proposal(model, z, i, allow_coalescence=False)
            Z = cum[-1]
            for t, j in enumerate(cols):
                q = z[i] / 2 * (cum[t + 1] - cum[t]) / Z
                if q <= 0:
                    continue
                nxt = apply_event(z, AncestralEvent.mutation(i, j))
                last = matched or max(nxt) == 2
                w = mu * psi[i] / (z[j] + mu * psi[j])
                if last:
                    b[index[z]] += q * w
                else:
                    A[index[z], index[nxt]] += q * w / 2
    g = np.linalg.solve(np.eye(len(support)) - A, b)
    return dict(zip(support, g))
