"""Mutation models, sample configurations and the forward coalescent kernel.

A configuration is a tuple of nonnegative integer counts, one entry per
type. Tuples are hashable, which the exact oracle relies on, and cheap to
build at the sample sizes used here.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    CapacityExceeded,
    InvalidConfiguration,
    ModelError,
    NonConvergence,
    NonUniqueStationary,
)

Configuration = tuple[int, ...]

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10
MAX_PRODUCT_TYPES = 2**16
# Above this many types the product matrix is kept sparse.
DENSE_TYPE_LIMIT = 4096


def as_configuration(counts: Sequence[int], d: int | None = None) -> Configuration:
    """Validate ``counts`` and return it as a tuple of ints."""
    try:
        out = tuple(int(c) for c in counts)
    except (TypeError, ValueError) as exc:
        raise InvalidConfiguration(f"counts must be integers: {counts!r}") from exc
    if any(float(c) != int(c) for c in counts):
        raise InvalidConfiguration(f"counts must be integers: {counts!r}")
    if any(c < 0 for c in out):
        raise InvalidConfiguration(f"negative count in {out}")
    if sum(out) < 1:
        raise InvalidConfiguration("configuration must hold at least one sequence")
    if d is not None and len(out) != d:
        raise InvalidConfiguration(f"expected {d} types, got {len(out)}")
    return out


def unit(d: int, i: int, times: int = 1) -> Configuration:
    return tuple(times if k == i else 0 for k in range(d))


def _check_stochastic(P, name="transition"):
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ModelError(f"{name} must be a square matrix, got shape {P.shape}")
    dense = P.toarray() if sp.issparse(P) else P
    if not np.all(np.isfinite(dense)):
        raise ModelError(f"{name} has non-finite entries")
    if np.any(dense < 0) or np.any(dense > 1):
        raise ModelError(f"{name} entries must lie in [0, 1]")
    sums = np.asarray(dense.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        r = int(bad[0])
        raise ModelError(f"{name} row {r} sums to {sums[r]:.12g}, expected 1")


def stationary_distribution(P, tol: float = 1e-12, max_iter: int = 10**6, seed: int = 0):
    """Stationary vector of a row-stochastic matrix by power iteration.

    Iterates the lazy chain ``(P + I) / 2`` (same fixed points, aperiodic)
    from the uniform vector, then repeats from one randomly chosen vertex.
    Two distinct limits mean more than one closed class.

    Parameters
    ----------
    P : (d, d) array_like or scipy.sparse matrix
        Row-stochastic matrix.
    tol : float
        Bound on ``max |psi P - psi|`` at convergence.
    max_iter : int
        Iteration cap per start.
    seed : int
        Seed for the choice of the second starting vertex.

    Returns
    -------
    psi : (d,) ndarray
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not sp.issparse(P):
        P = np.asarray(P, dtype=float)
    _check_stochastic(P)
    d = P.shape[0]
    if d == 1:
        return np.ones(1)

    def iterate(v):
        for _ in range(max_iter):
            vp = np.asarray(v @ P).ravel()
            if np.max(np.abs(vp - v)) <= tol:
                return v
            v = 0.5 * (v + vp)
            v /= v.sum()
        raise NonConvergence(f"power iteration did not reach tol={tol} in {max_iter} steps")

    first = iterate(np.full(d, 1.0 / d))
    start = np.zeros(d)
    start[np.random.default_rng(seed).integers(d)] = 1.0
    second = iterate(start)
    if np.max(np.abs(first - second)) > 1e-6:
        raise NonUniqueStationary("matrix has more than one stationary distribution")
    psi = np.clip(first, 0.0, None)
    return psi / psi.sum()


@dataclasses.dataclass(frozen=True, eq=False)
class MutationModel:
    """Mutation rate ``mu``, transition matrix and its stationary vector.

    ``transition`` is a dense ndarray, or a scipy.sparse CSR array for very
    large multi-locus type spaces. Use :meth:`from_matrix` to build a
    validated instance.
    """

    mu: float
    transition: np.ndarray
    stationary: np.ndarray

    @classmethod
    def from_matrix(cls, transition, mu: float, stationary=None) -> "MutationModel":
        P = transition if sp.issparse(transition) else np.array(transition, dtype=float)
        _check_stochastic(P)
        mu = float(mu)
        if not math.isfinite(mu) or mu < 0:
            raise ModelError(f"mutation rate must be a nonnegative number, got {mu}")
        if stationary is None:
            psi = stationary_distribution(P)
        else:
            psi = np.array(stationary, dtype=float)
            if psi.shape != (P.shape[0],):
                raise ModelError("stationary override has the wrong length")
            if np.any(psi < 0) or abs(psi.sum() - 1.0) > ROW_TOL:
                raise ModelError("stationary override is not a probability vector")
            if np.max(np.abs(np.asarray(psi @ P).ravel() - psi)) > STATIONARY_TOL:
                raise ModelError("stationary override does not satisfy psi P = psi")
        psi.setflags(write=False)
        if not sp.issparse(P):
            P.setflags(write=False)
        return cls(mu=mu, transition=P, stationary=psi)

    @property
    def type_count(self) -> int:
        return self.transition.shape[0]

    def with_mu(self, mu: float) -> "MutationModel":
        mu = float(mu)
        if not math.isfinite(mu) or mu < 0:
            raise ModelError(f"mutation rate must be a nonnegative number, got {mu}")
        new = dataclasses.replace(self, mu=mu)
        # the parent table does not depend on mu
        if "parents" in self.__dict__:
            new.__dict__["parents"] = self.__dict__["parents"]
        return new

    def dense_transition(self) -> np.ndarray:
        if sp.issparse(self.transition):
            return self.transition.toarray()
        return self.transition

    def p(self, i: int, j: int) -> float:
        """Probability that a mutating type ``i`` becomes ``j``."""
        return float(self.transition[i, j])

    @functools.cached_property
    def parents(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded table of possible ancestor types for each offspring type.

        Row ``i`` lists, in increasing order, every ``j`` with ``p_ji > 0``;
        the matching row of the second array holds ``p_ji``. Padding uses
        index 0 with probability 0.
        """
        P = sp.csc_array(self.transition) if sp.issparse(self.transition) else None
        d = self.type_count
        cols = []
        for i in range(d):
            if P is None:
                col = self.transition[:, i]
                idx = np.flatnonzero(col > 0)
                val = col[idx]
            else:
                start, stop = P.indptr[i], P.indptr[i + 1]
                idx, val = P.indices[start:stop], P.data[start:stop]
                keep = val > 0
                order = np.argsort(idx[keep])
                idx, val = idx[keep][order], val[keep][order]
            cols.append((idx, val))
        width = max(1, max(len(c[0]) for c in cols))
        par_idx = np.zeros((d, width), dtype=np.int64)
        par_val = np.zeros((d, width))
        for i, (idx, val) in enumerate(cols):
            par_idx[i, : len(idx)] = idx
            par_val[i, : len(idx)] = val
        par_idx.setflags(write=False)
        par_val.setflags(write=False)
        return par_idx, par_val


@dataclasses.dataclass(frozen=True)
class LocusSpec:
    """Per-locus mutation matrices combined into one product type space."""

    loci: tuple

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.loci)
        if not mats:
            raise ModelError("at least one locus is required")
        for k, m in enumerate(mats):
            _check_stochastic(m, name=f"locus {k} matrix")
        object.__setattr__(self, "loci", mats)

    @property
    def locus_sizes(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.loci)

    @property
    def type_count(self) -> int:
        return math.prod(self.locus_sizes)

    def type_label(self, index: int) -> tuple[int, ...]:
        """Per-locus states of a combined type (first locus most significant)."""
        return tuple(int(s) for s in np.unravel_index(index, self.locus_sizes))

    def type_index(self, label: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(label), self.locus_sizes))


def build_multilocus_model(
    spec: LocusSpec, mu: float, max_types: int = MAX_PRODUCT_TYPES
) -> MutationModel:
    """Combine per-locus matrices into one mutation model.

    Each mutation event picks one locus uniformly at random and applies
    that locus's matrix to it, so the combined matrix is the average over
    loci of ``I x ... x P_l x ... x I``.
    """
    d = spec.type_count
    if d > max_types:
        raise CapacityExceeded(f"product type space has {d} types, limit is {max_types}")
    L = len(spec.loci)
    T = sp.csr_array((d, d))
    for l, m in enumerate(spec.loci):
        term = sp.csr_array(np.ones((1, 1)))
        for k, other in enumerate(spec.loci):
            factor = sp.csr_array(m) if k == l else sp.identity(other.shape[0], format="csr")
            term = sp.kron(term, factor, format="csr")
        T = T + term
    T = sp.csr_array(T / L)
    T.sum_duplicates()
    if d <= DENSE_TYPE_LIMIT:
        return MutationModel.from_matrix(T.toarray(), mu)
    return MutationModel.from_matrix(T, mu)


def sample_initial_data(model: MutationModel, n: int, rng: np.random.Generator) -> Configuration:
    """Draw ``n`` sequences from the stationary distribution."""
    if n < 2:
        raise ValueError("n must be at least 2")
    psi = np.asarray(model.stationary, dtype=float)
    return tuple(int(c) for c in rng.multinomial(n, psi / psi.sum()))


def forward_transition_probability(
    model: MutationModel, z: Sequence[int], z_next: Sequence[int]
) -> float:
    """One-event probability of the forward (birth with mutation) chain."""
    z = tuple(z)
    z_next = tuple(z_next)
    n = sum(z)
    if n < 2:
        raise InvalidConfiguration(f"forward kernel needs at least two sequences, got {z}")
    if len(z_next) != len(z):
        return 0.0
    mu = model.mu
    diff = [b - a for a, b in zip(z, z_next)]
    total = sum(diff)
    if total == 1:
        if sorted(diff) != [0] * (len(z) - 1) + [1]:
            return 0.0
        i = diff.index(1)
        return z[i] / n * (n - 1) / (n - 1 + mu)
    if total != 0:
        return 0.0
    scale = mu / (n - 1 + mu)
    if all(v == 0 for v in diff):
        # self-mutation, summed over every type present
        return sum(z[i] / n * scale * model.p(i, i) for i in range(len(z)) if z[i])
    if sorted(diff) != [-1] + [0] * (len(z) - 2) + [1]:
        return 0.0
    i, l = diff.index(-1), diff.index(1)
    return z[i] / n * scale * model.p(i, l)


def forward_successors(model: MutationModel, z: Sequence[int]) -> dict[Configuration, float]:
    """All one-event successors of ``z`` with their forward probabilities."""
    z = tuple(z)
    n = sum(z)
    if n < 2:
        raise InvalidConfiguration(f"forward kernel needs at least two sequences, got {z}")
    out: dict[Configuration, float] = {}
    d = len(z)
    for i, l in itertools.product(range(d), repeat=2):
        if z[i] == 0:
            continue
        nxt = list(z)
        nxt[i] -= 1
        nxt[l] += 1
        key = tuple(nxt)
        out[key] = out.get(key, 0.0) + z[i] / n * model.mu / (n - 1 + model.mu) * model.p(i, l)
    for i in range(d):
        if z[i]:
            key = tuple(c + (k == i) for k, c in enumerate(z))
            out[key] = out.get(key, 0.0) + z[i] / n * (n - 1) / (n - 1 + model.mu)
    return out


def model_from_dict(doc: dict, where: str = "model") -> MutationModel:
    """Build a model from the JSON layout ``{mu, matrix | loci, stationary?}``."""
    if not isinstance(doc, dict):
        raise ModelError(f"{where}: expected an object")
    if "mu" not in doc:
        raise ModelError(f"{where}.mu: missing")
    mu = doc["mu"]
    if not isinstance(mu, (int, float)) or isinstance(mu, bool):
        raise ModelError(f"{where}.mu: expected a number")
    has_matrix, has_loci = "matrix" in doc, "loci" in doc
    if has_matrix == has_loci:
        raise ModelError(f"{where}: give exactly one of 'matrix' or 'loci'")
    if has_matrix:
        rows = doc["matrix"]
        _check_rows(rows, f"{where}.matrix")
        try:
            return MutationModel.from_matrix(rows, mu, doc.get("stationary"))
        except ModelError as exc:
            raise ModelError(f"{where}: {exc}") from None
    loci = doc["loci"]
    if not isinstance(loci, list) or not loci:
        raise ModelError(f"{where}.loci: expected a nonempty list of matrices")
    for k, rows in enumerate(loci):
        _check_rows(rows, f"{where}.loci[{k}]")
    model = build_multilocus_model(LocusSpec(tuple(loci)), mu)
    if doc.get("stationary") is not None:
        try:
            return MutationModel.from_matrix(model.transition, mu, doc["stationary"])
        except ModelError as exc:
            raise ModelError(f"{where}: {exc}") from None
    return model


def _check_rows(rows, where):
    if not isinstance(rows, list) or not rows:
        raise ModelError(f"{where}: expected a list of rows")
    d = len(rows)
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != d:
            raise ModelError(f"{where}[{r}]: expected a row of {d} numbers")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise ModelError(f"{where}[{r}]: non-numeric entry")
        if any(v < 0 or v > 1 for v in row):
            raise ModelError(f"{where}[{r}]: entries must lie in [0, 1]")
        s = math.fsum(row)
        if abs(s - 1.0) > ROW_TOL:
            raise ModelError(f"{where}[{r}]: row sums to {s:.12g}, expected 1")


def load_model(path) -> MutationModel:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))


def sample_coalescent_data(model: MutationModel, n: int, rng: np.random.Generator) -> Configuration:
    """Draw an unordered sample of size ``n`` by running the forward chain.

    The founder type is drawn from the stationary vector and doubled; the
    chain then mutates or splits until a split would take it past ``n``.
    The counts just before that split are returned.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    P = model.dense_transition()
    psi = np.asarray(model.stationary, dtype=float)
    d = model.type_count
    z = np.zeros(d, dtype=np.int64)
    z[rng.choice(d, p=psi / psi.sum())] = 2
    mu = model.mu
    while True:
        k = int(z.sum())
        i = rng.choice(d, p=z / k)
        if rng.random() < (k - 1) / (k - 1 + mu):
            if k == n:
                return tuple(int(c) for c in z)
            z[i] += 1
        else:
            z[i] -= 1
            z[rng.choice(d, p=P[i])] += 1
