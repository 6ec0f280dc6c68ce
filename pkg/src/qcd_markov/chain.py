"""Finite-state Markov chain primitives.

All matrices use the column-stochastic convention: ``entries[i, j]`` is the
probability of moving to state ``i`` from state ``j``, so every column sums to
one. States are plain integer indices in ``[0, N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    NegativeEntry,
    NoConvergence,
    NonStochastic,
    NotErgodic,
)

COLUMN_TOL = 1e-9

ChainState = int


class TransitionMatrix:
    """A validated, immutable column-stochastic matrix.

    Build through :func:`validate_matrix`; the constructor assumes its input
    has already been checked.
    """

    __slots__ = ("_entries", "_cumulative")

    def __init__(self, entries: np.ndarray):
        entries = np.array(entries, dtype=float)
        entries.setflags(write=False)
        self._entries = entries
        cum = np.cumsum(entries, axis=0)
        # Pin the top of each column so a uniform draw in (0, 1] always lands.
        cum[-1, :] = 1.0
        cum.setflags(write=False)
        self._cumulative = cum

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def cumulative(self) -> np.ndarray:
        """Column-wise cumulative sums used for inverse-CDF sampling."""
        return self._cumulative

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def __getitem__(self, idx):
        return self._entries[idx]

    def __array__(self, dtype=None, copy=None):
        return self._entries if dtype is None else self._entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return np.array_equal(self._entries, other._entries)

    def __hash__(self):
        return hash(self._entries.tobytes())

    def __repr__(self):
        return f"TransitionMatrix({self._entries.tolist()!r})"


def validate_matrix(raw, atol: float = COLUMN_TOL) -> TransitionMatrix:
    """Check ``raw`` is a square column-stochastic matrix and wrap it."""
    if isinstance(raw, TransitionMatrix):
        return raw
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionTooSmall(f"need N >= 2, got N = {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonStochastic(f"entry ({bad[0]}, {bad[1]}) is not finite")
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise NegativeEntry(f"entry ({i}, {j}) is negative: {arr[i, j]!r}")
    sums = arr.sum(axis=0)
    off = np.abs(sums - 1.0) > atol
    if np.any(off):
        j = int(np.flatnonzero(off)[0])
        raise NonStochastic(f"column {j} sums to {sums[j]!r}, not 1")
    return TransitionMatrix(arr)


@dataclass(frozen=True)
class StructureReport:
    irreducible: bool
    aperiodic: bool
    period: int

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


def _successors(A: TransitionMatrix) -> list[np.ndarray]:
    # edge j -> i whenever P(next=i | current=j) > 0
    return [np.flatnonzero(A.entries[:, j] > 0) for j in range(A.n)]


def _reachable(succ: list[np.ndarray], start: int) -> np.ndarray:
    seen = np.zeros(len(succ), dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def structure(A: TransitionMatrix) -> StructureReport:
    """Irreducibility and period of the transition graph.

    Irreducibility is strong connectivity (everything reachable from state 0
    in the graph and in its reverse). The period is the gcd of
    ``level[u] + 1 - level[v]`` over edges ``u -> v`` inside the class of
    state 0, with ``level`` the BFS depth from state 0.
    """
    succ = _successors(A)
    pred = [np.flatnonzero(A.entries[i, :] > 0) for i in range(A.n)]
    forward = _reachable(succ, 0)
    backward = _reachable(pred, 0)
    irreducible = bool(forward.all() and backward.all())

    in_class = forward & backward
    level = np.full(A.n, -1)
    level[0] = 0
    queue = [0]
    for u in queue:
        for v in succ[u]:
            if in_class[v] and level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
    diffs = [
        int(level[u] + 1 - level[v])
        for u in range(A.n)
        if in_class[u]
        for v in succ[u]
        if in_class[v]
    ]
    period = reduce(math.gcd, diffs, 0) or 1
    return StructureReport(irreducible=irreducible, aperiodic=period == 1, period=period)


def require_ergodic(A: TransitionMatrix, name: str = "matrix") -> None:
    rep = structure(A)
    if not rep.irreducible:
        raise NotErgodic(f"{name} is reducible")
    if not rep.aperiodic:
        raise NotErgodic(f"{name} is periodic with period {rep.period}")


def stationary(
    A: TransitionMatrix, tol: float = 1e-12, max_iter: int = 1_000_000
) -> np.ndarray:
    """Stationary distribution of an ergodic chain by power iteration.

    Iterates ``p <- A p`` with l1 renormalisation until the sup-norm residual
    ``|A p - p|`` drops to ``tol``.
    """
    require_ergodic(A)
    M = A.entries
    p = np.full(A.n, 1.0 / A.n)
    for _ in range(max_iter):
        q = M @ p
        q /= q.sum()
        if np.max(np.abs(q - p)) <= tol:
            return q
        p = q
    raise NoConvergence(f"power iteration did not reach residual {tol} in {max_iter} steps")


def relative_entropy_rate(A_b: TransitionMatrix, A_a: TransitionMatrix) -> float:
    """Relative entropy rate of chain ``A_b`` with respect to chain ``A_a``.

    ``sum_ij pi_b[j] * A_b[i, j] * log(A_b[i, j] / A_a[i, j])`` in nats, where
    ``pi_b`` is the stationary law of ``A_b``. Terms with ``A_b[i, j] == 0``
    vanish; a positive ``A_b`` entry against a zero ``A_a`` entry gives
    ``math.inf``.
    """
    if A_b.n != A_a.n:
        raise DimensionMismatch(f"dimensions differ: {A_b.n} vs {A_a.n}")
    if not structure(A_b).irreducible:
        raise NotErgodic("before-change matrix is reducible")
    P, Q = A_b.entries, A_a.entries
    support = P > 0
    if np.any(support & (Q == 0)):
        return math.inf
    if np.array_equal(P, Q):
        return 0.0
    pi = _stationary_irreducible(A_b)
    terms = np.zeros_like(P)
    terms[support] = P[support] * np.log(P[support] / Q[support])
    rate = float(terms.sum(axis=0) @ pi)
    # KL per column is nonnegative; only rounding can push the total below 0.
    return max(rate, 0.0)


def _stationary_irreducible(A: TransitionMatrix) -> np.ndarray:
    rep = structure(A)
    if rep.aperiodic:
        return stationary(A)
    # Periodic but irreducible: the lazy chain has the same fixed point.
    lazy = TransitionMatrix(0.5 * (A.entries + np.eye(A.n)))
    return stationary(lazy)


def sample_step(A: TransitionMatrix, current: ChainState, rng: np.random.Generator) -> int:
    """Draw the next state from column ``current`` of ``A``."""
    return draw_from_cumulative(A.cumulative[:, current], 1.0 - rng.random())


def draw_from_cumulative(cum: np.ndarray, u: float) -> int:
    """Inverse-CDF draw for ``u`` in ``(0, 1]``: first index with ``cum >= u``."""
    return int(np.searchsorted(cum, u, side="left"))
