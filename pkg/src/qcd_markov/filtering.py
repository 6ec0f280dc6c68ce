"""No-change posterior filters.

Two routes compute the same quantity, the posterior probability that the
change has not happened yet given ``X_0..X_k``:

* :func:`hmm_filter_step` propagates the full 2N-vector over the augmented
  hidden chain and is kept as the reference;
* :func:`scalar_filter_step` carries a single number with O(1) work per step.

:func:`scalar_filter_batch` is the vectorised form of the scalar route used
by the Monte Carlo harnesses. It performs the same floating-point operations
in the same order, so its output is bitwise equal to repeated scalar steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import ImpossibleObservation, ImpossibleTransition
from .model import AugmentedModel, ChangePointModel, Trajectory, build_augmented


@dataclass(frozen=True)
class PosteriorState:
    m_b: float
    log_m_b: float
    step_multiplier: float
    last_state: int
    k: int


def initial_posterior(x0: int) -> PosteriorState:
    return PosteriorState(m_b=1.0, log_m_b=0.0, step_multiplier=1.0, last_state=int(x0), k=0)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def scalar_filter_step(model: ChangePointModel, prev: PosteriorState, obs: int) -> PosteriorState:
    """Advance the no-change posterior by one observed transition."""
    b = model.before.entries[obs, prev.last_state]
    a = model.after.entries[obs, prev.last_state]
    ninv = a + prev.m_b * (b - a)
    if ninv <= 0.0:
        raise ImpossibleTransition(
            f"transition {prev.last_state} -> {obs} at k={prev.k + 1} has zero probability "
            f"(posterior {prev.m_b!r})"
        )
    # b / ninv first: it is exactly 1 when the chains agree on this entry.
    mult = (1.0 - model.rho) * (b / ninv)
    return PosteriorState(
        m_b=mult * prev.m_b,
        log_m_b=prev.log_m_b + _log(mult),
        step_multiplier=mult,
        last_state=int(obs),
        k=prev.k + 1,
    )


@dataclass(frozen=True, eq=False)
class AugmentedPosterior:
    z_hat: np.ndarray

    @property
    def m_b(self) -> float:
        n = len(self.z_hat) // 2
        return float(self.z_hat[:n].sum())


def initial_augmented_posterior(n: int, x0: int) -> AugmentedPosterior:
    z = np.zeros(2 * n)
    z[x0] = 1.0
    return AugmentedPosterior(z)


def hmm_filter_step(aug: AugmentedModel, prev: AugmentedPosterior, obs: int) -> AugmentedPosterior:
    """One predict/correct step of the augmented HMM filter.

    The emission selector keeps positions ``obs`` and ``N + obs``; the
    result is renormalised to a probability vector.
    """
    n = aug.n
    pred = aug.A @ prev.z_hat
    z = np.zeros_like(pred)
    z[obs] = pred[obs]
    z[n + obs] = pred[n + obs]
    total = z[obs] + z[n + obs]
    if total <= 0.0:
        raise ImpossibleObservation(f"state {obs} has zero predicted probability")
    return AugmentedPosterior(z / total)


@dataclass(frozen=True, eq=False)
class FilterTrace:
    posteriors: list
    augmented: Optional[list] = None
    discrepancy: Optional[np.ndarray] = None

    @property
    def m_b(self) -> np.ndarray:
        return np.array([p.m_b for p in self.posteriors])

    @property
    def log_m_b(self) -> np.ndarray:
        return np.array([p.log_m_b for p in self.posteriors])

    @property
    def max_discrepancy(self) -> float:
        if self.discrepancy is None:
            raise ValueError("discrepancy is only recorded in 'both' mode")
        return float(self.discrepancy.max())


Mode = Literal["scalar", "full", "both"]


def run_filter(model: ChangePointModel, traj: Trajectory, mode: Mode = "scalar") -> FilterTrace:
    """Filter a whole trajectory.

    ``"full"`` reports the augmented route's block sums as the posterior
    trace (log shadow from the block sums); ``"both"`` runs the two routes
    side by side and records ``|scalar - full|`` at each step.
    """
    if mode not in ("scalar", "full", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    states = [int(s) for s in traj.states]
    x0 = states[0]
    scalar = [initial_posterior(x0)] if mode != "full" else None
    full = None
    if mode != "scalar":
        aug = build_augmented(model)
        full = [initial_augmented_posterior(model.n, x0)]

    for k in range(1, len(states)):
        try:
            if scalar is not None:
                scalar.append(scalar_filter_step(model, scalar[-1], states[k]))
            if full is not None:
                full.append(hmm_filter_step(aug, full[-1], states[k]))
        except (ImpossibleTransition, ImpossibleObservation) as exc:
            raise type(exc)(f"row {k}: {exc}") from exc

    if mode == "scalar":
        return FilterTrace(posteriors=scalar)
    if mode == "full":
        posts, log_m = [], 0.0
        prev_m = 1.0
        for k, z in enumerate(full):
            m = z.m_b
            mult = m / prev_m if k and prev_m > 0 else 1.0
            if k:
                log_m = _log(m)
            posts.append(PosteriorState(m, log_m, mult, states[k], k))
            prev_m = m
        return FilterTrace(posteriors=posts, augmented=full)
    disc = np.array([abs(s.m_b - z.m_b) for s, z in zip(scalar, full)])
    return FilterTrace(posteriors=scalar, augmented=full, discrepancy=disc)


def scalar_filter_batch(
    model: ChangePointModel, states: np.ndarray, with_log_multiplier: bool = False
):
    """Posterior paths for a ``(trials, T + 1)`` array of state paths.

    Returns the ``(trials, T + 1)`` array of posteriors and, when requested,
    the ``(trials, T)`` array of ``log`` step multipliers.
    """
    states = np.asarray(states)
    trials, steps = states.shape
    P = model.before.entries
    Q = model.after.entries
    keep = 1.0 - model.rho
    m = np.empty((trials, steps))
    m[:, 0] = 1.0
    logmult = np.empty((trials, steps - 1)) if with_log_multiplier else None
    for k in range(1, steps):
        prev, cur = states[:, k - 1], states[:, k]
        b = P[cur, prev]
        a = Q[cur, prev]
        ninv = a + m[:, k - 1] * (b - a)
        if np.any(ninv <= 0.0):
            t = int(np.flatnonzero(ninv <= 0.0)[0])
            raise ImpossibleTransition(
                f"trial {t}, row {k}: transition {prev[t]} -> {cur[t]} has zero probability"
            )
        mult = keep * (b / ninv)
        m[:, k] = mult * m[:, k - 1]
        if logmult is not None:
            with np.errstate(divide="ignore"):
                logmult[:, k - 1] = np.log(mult)
    if with_log_multiplier:
        return m, logmult
    return m
