"""Threshold stopping rule on the no-change posterior, and Bayes-risk estimation.

The detector alarms at the first ``k >= 1`` with posterior ``<= h``. Risk is
``c * E[(tau - nu)^+] + P(tau < nu)`` under a change time drawn from the
geometric prior.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AlreadyStopped, InvalidCost, ValidationError
from .filtering import PosteriorState, initial_posterior, scalar_filter_batch, scalar_filter_step
from .model import ChangePointModel, Trajectory, simulate_batch
from .seeding import chunked, derive_rng, ordered_map

CHUNK = 500


@dataclass(frozen=True, eq=False)
class DetectorConfig:
    model: ChangePointModel
    threshold_h: float

    def __post_init__(self):
        if not 0.0 <= self.threshold_h <= 1.0:
            raise ValidationError(f"threshold_h must lie in [0, 1], got {self.threshold_h!r}")


class Decision(enum.Enum):
    CONTINUE = "continue"
    ALARM = "alarm"


def detector_step(
    cfg: DetectorConfig, state: PosteriorState, obs: int
) -> tuple[PosteriorState, Decision]:
    new = scalar_filter_step(cfg.model, state, obs)
    if new.k >= 1 and new.m_b <= cfg.threshold_h:
        return new, Decision.ALARM
    return new, Decision.CONTINUE


class OnlineDetector:
    """Streaming wrapper: feed states one at a time until the alarm."""

    def __init__(self, cfg: DetectorConfig, x0: int):
        self.cfg = cfg
        self.state = initial_posterior(x0)
        self.stopped = False

    def update(self, obs: int) -> Decision:
        if self.stopped:
            raise AlreadyStopped(f"detector alarmed at k={self.state.k}")
        self.state, decision = detector_step(self.cfg, self.state, obs)
        self.stopped = decision is Decision.ALARM
        return decision


@dataclass(frozen=True)
class DetectionResult:
    stopped: bool
    tau: Optional[int]
    posterior_at_stop: Optional[float]
    change_time: Optional[int]

    @property
    def delay(self) -> Optional[int]:
        if not self.stopped or self.change_time is None:
            return None
        return max(self.tau - self.change_time, 0)

    @property
    def false_alarm(self) -> bool:
        return self.stopped and (self.change_time is None or self.tau < self.change_time)


def run_detection(cfg: DetectorConfig, traj: Trajectory) -> DetectionResult:
    det = OnlineDetector(cfg, int(traj.states[0]))
    for obs in traj.states[1:]:
        if det.update(int(obs)) is Decision.ALARM:
            return DetectionResult(True, det.state.k, float(det.state.m_b), traj.change_time)
    return DetectionResult(False, None, None, traj.change_time)


def first_crossing(posteriors: np.ndarray, h: float) -> np.ndarray:
    """Stopping index per row of a posterior array; ``T + 1`` where none.

    Column 0 (the prior ``M_0 = 1``) is never tested.
    """
    hit = posteriors[:, 1:] <= h
    tau = hit.argmax(axis=1) + 1
    tau[~hit.any(axis=1)] = posteriors.shape[1]
    return tau


@dataclass(frozen=True, eq=False)
class RiskEstimate:
    threshold_h: float
    cost_c: float
    mean_delay: float
    false_alarm_prob: float
    bayes_risk: float
    trials: int
    std_errors: dict
    censored: int
    zero_delay: int
    taus: np.ndarray = field(repr=False)
    change_times: np.ndarray = field(repr=False)


def _se(x: np.ndarray) -> float:
    if len(x) < 2:
        return math.nan
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _score(h, cost_c, taus, nus, horizon) -> RiskEstimate:
    delays = np.maximum(taus - nus, 0).astype(float)
    alarms_early = (taus < nus).astype(float)
    mean_delay = float(delays.mean())
    pfa = float(alarms_early.mean())
    censored = int(np.count_nonzero(taus > horizon))
    return RiskEstimate(
        threshold_h=h,
        cost_c=cost_c,
        mean_delay=mean_delay,
        false_alarm_prob=pfa,
        bayes_risk=cost_c * mean_delay + pfa,
        trials=len(taus),
        std_errors={
            "delay": _se(delays),
            "false_alarm": _se(alarms_early),
            "bayes_risk": _se(cost_c * delays + alarms_early),
        },
        censored=censored,
        zero_delay=int(np.count_nonzero((taus == nus) & (taus <= horizon))),
        taus=taus,
        change_times=nus,
    )


def sweep_thresholds(
    model: ChangePointModel,
    cost_c: float,
    thresholds: Sequence[float],
    trials: int,
    horizon: int,
    seed: int,
) -> list[RiskEstimate]:
    """Risk at each threshold, all scored on the same simulated paths.

    Trial ``t`` always uses the stream derived from ``(seed, "risk", t)``,
    so the threshold list and the chunking do not change any path.
    Censored runs (no alarm by ``horizon``) are scored at ``tau = horizon + 1``.
    """
    if not cost_c > 0:
        raise InvalidCost(f"cost_c must be positive, got {cost_c!r}")
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    thresholds = [float(h) for h in thresholds]
    for h in thresholds:
        if not 0.0 <= h <= 1.0:
            raise ValidationError(f"threshold {h!r} outside [0, 1]")
    if not thresholds:
        return []

    def run_chunk(idx: range):
        rngs = [derive_rng(seed, "risk", t) for t in idx]
        states, nus = simulate_batch(model, horizon, "sample", rngs)
        m = scalar_filter_batch(model, states)
        return nus, [first_crossing(m, h) for h in thresholds]

    parts = ordered_map(run_chunk, chunked(trials, CHUNK))
    nus = np.concatenate([p[0] for p in parts])
    out = []
    for i, h in enumerate(thresholds):
        taus = np.concatenate([p[1][i] for p in parts]).astype(np.int64)
        est = _score(h, cost_c, taus, nus, horizon)
        if est.censored:
            warnings.warn(
                f"h={h}: {est.censored} of {trials} trials did not alarm by horizon {horizon}",
                stacklevel=2,
            )
        out.append(est)
    return out


def estimate_risk(cfg: DetectorConfig, cost_c: float, trials: int, horizon: int, seed: int) -> RiskEstimate:
    return sweep_thresholds(cfg.model, cost_c, [cfg.threshold_h], trials, horizon, seed)[0]


def best_threshold(estimates: Sequence[RiskEstimate]) -> RiskEstimate:
    """The empirical risk minimiser of a sweep."""
    if not estimates:
        raise ValueError("no estimates to compare")
    return min(estimates, key=lambda e: e.bayes_risk)
