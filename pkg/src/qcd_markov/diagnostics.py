"""Separation diagnostics for before/after chains that are too close.

When the relative entropy rate ``R(A_b | A_a)`` falls below the prior's
per-step information ``log(1 / (1 - rho))``, the log no-change posterior
drifts downward once it is small, even if no change has happened. This
module reports the verdict, solves for the critical parameter of a family,
estimates the conditional drift empirically and runs the no-change trap
study.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .chain import TransitionMatrix, relative_entropy_rate, require_ergodic, stationary, validate_matrix
from .errors import InsufficientSamples, NonMonotone, NoRoot, ValidationError
from .filtering import scalar_filter_batch
from .model import ChangePointModel, simulate_batch
from .seeding import chunked, derive_rng, ordered_map

Family = Callable[[float], TransitionMatrix]


def symmetric_family(a: float) -> TransitionMatrix:
    """Two-state chain that stays put with probability ``a``."""
    return validate_matrix([[a, 1.0 - a], [1.0 - a, a]])


FAMILIES = {"symmetric2": symmetric_family}


def prior_bound(rho: float) -> float:
    """``log(1 / (1 - rho))`` in nats."""
    return -math.log1p(-rho)


@dataclass(frozen=True)
class SeparationReport:
    rer_b_to_a: float
    rer_a_to_b: float
    prior_bound: float
    sufficiently_separated: bool
    margin: float


def separation_report(model: ChangePointModel) -> SeparationReport:
    require_ergodic(model.before, "A_b")
    require_ergodic(model.after, "A_a")
    fwd = relative_entropy_rate(model.before, model.after)
    rev = relative_entropy_rate(model.after, model.before)
    bound = prior_bound(model.rho)
    margin = fwd - bound
    return SeparationReport(fwd, rev, bound, margin >= 0, margin)


def critical_parameter(
    family: Family,
    A_b,
    rho: float,
    bracket: tuple[float, float],
    xtol: float = 1e-6,
    ftol: float = 1e-10,
    max_iter: int = 200,
    monotone_samples: int = 33,
) -> float:
    """Solve ``R(A_b | family(theta)) = log(1/(1 - rho))`` by bisection.

    Stops once the bracket is narrower than ``xtol`` and the residual is
    within ``ftol``.
    """
    A_b = validate_matrix(A_b)
    bound = prior_bound(rho)

    def f(theta: float) -> float:
        return relative_entropy_rate(A_b, family(theta)) - bound

    lo, hi = map(float, bracket)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise NoRoot(f"no sign change on [{lo}, {hi}]: f = {f_lo:.6g}, {f_hi:.6g}")

    grid = np.linspace(lo, hi, monotone_samples)
    vals = np.array([f(t) for t in grid])
    steps = np.diff(vals)
    if not (np.all(steps <= 0) or np.all(steps >= 0)):
        warnings.warn(f"rate is not monotone on [{lo}, {hi}]", NonMonotone, stacklevel=2)

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if hi - lo <= xtol and abs(f_mid) <= ftol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DriftEstimate:
    conditioning_band: tuple[float, float]
    mean_log_multiplier: float
    std_error: float
    drift_bound: float
    samples: int
    burn_in: int


def estimate_drift(
    model: ChangePointModel,
    band_upper: float,
    trials: int,
    horizon: int,
    seed: int,
    burn_in: Optional[int] = None,
) -> DriftEstimate:
    """Mean of ``log M_k`` over steps whose previous posterior lies in the band.

    Paths are drawn with the change time sampled from the prior. Only steps
    ``k > burn_in`` (default ``10 / rho``) with ``M_{k-1} <= band_upper``
    contribute. The standard error treats each trial as one cluster.
    """
    if not 0.0 < band_upper < 1.0:
        raise ValidationError(f"band_upper must lie in (0, 1), got {band_upper!r}")
    if burn_in is None:
        burn_in = int(math.ceil(10.0 / model.rho))
    require_ergodic(model.before, "A_b")
    require_ergodic(model.after, "A_a")
    if not np.allclose(model.initial, stationary(model.before), atol=1e-10, rtol=0):
        warnings.warn("initial distribution is not the before-change stationary law", stacklevel=2)
    bound = math.log1p(-model.rho) + relative_entropy_rate(model.before, model.after)

    def run_chunk(idx: range):
        rngs = [derive_rng(seed, "drift", t) for t in idx]
        states, _ = simulate_batch(model, horizon, "sample", rngs)
        m, logmult = scalar_filter_batch(model, states, with_log_multiplier=True)
        # logmult[:, k-1] is log M_k, conditioned on m[:, k-1]
        ks = np.arange(1, horizon + 1)
        mask = (m[:, :-1] <= band_upper) & (ks > burn_in)[None, :]
        return [logmult[t][mask[t]] for t in range(len(idx))]

    per_trial = [x for part in ordered_map(run_chunk, chunked(trials, 100)) for x in part]
    counts = np.array([len(x) for x in per_trial])
    total = int(counts.sum())
    band = (0.0, float(band_upper))
    if total == 0:
        empty = DriftEstimate(band, math.nan, math.nan, bound, 0, burn_in)
        raise InsufficientSamples("no posterior excursion entered the band", estimate=empty)

    values = np.concatenate(per_trial)
    # Shift by one sample so a constant sequence averages to itself exactly.
    ref = values[0]
    mean = float(ref + (values - ref).mean())
    sums = np.array([float((x - ref).sum()) for x in per_trial])
    resid = sums - (mean - ref) * counts
    used = int(np.count_nonzero(counts))
    if used > 1:
        se = math.sqrt(float((resid**2).sum()) * used / (used - 1)) / total
    else:
        se = math.nan
    return DriftEstimate(band, mean, se, bound, total, burn_in)


@dataclass(frozen=True, eq=False)
class StudyResult:
    """Fraction of no-change runs whose final posterior stays above ``h_report``.

    This is a finite-horizon surrogate for the trap: low values mean the
    posterior has collapsed toward "change happened" although it has not.
    """

    parameter_grid: list
    trap_frequency: list
    trials: int
    horizon: int
    h_report: float


def supermartingale_study(
    A_b,
    family: Family,
    grid: Sequence[float],
    rho: float,
    trials: int,
    horizon: int,
    h_report: float,
    seed: int,
    initial="stationary_b",
) -> StudyResult:
    """No-change Monte Carlo over a family of after-change chains.

    Grid point ``g`` and trial ``t`` use the stream ``(seed, "study", g, t)``.
    """
    grid = [float(a) for a in grid]
    if not grid:
        raise ValidationError("grid must be nonempty")
    A_b = validate_matrix(A_b)

    def run_point(job):
        g, a = job
        model = ChangePointModel.create(A_b, family(a), rho, initial=initial)
        hits = 0
        for idx in chunked(trials, 500):
            rngs = [derive_rng(seed, "study", g, t) for t in idx]
            states, _ = simulate_batch(model, horizon, "never", rngs)
            m = scalar_filter_batch(model, states)
            hits += int(np.count_nonzero(m[:, -1] > h_report))
        return hits / trials

    freqs = ordered_map(run_point, list(enumerate(grid)))
    return StudyResult(grid, freqs, trials, horizon, h_report)
