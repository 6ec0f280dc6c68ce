"""Change-point model: geometric prior, augmented HMM, trajectory simulation.

Indexing convention for a change at time ``nu >= 1``: the transition into
state ``X_l`` is drawn from the before-change matrix for ``l <= nu`` and from
the after-change matrix for ``l >= nu + 1``. So ``X_nu`` is still generated
by ``A_b`` while the augmented state ``Z_nu`` already sits in the
after-change block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .chain import TransitionMatrix, require_ergodic, stationary, validate_matrix
from .errors import DimensionMismatch, InvalidChangeTime, ValidationError

ChangeTime = Union[int, str]  # an integer >= 1, "sample" or "never"

INITIAL_TOL = 1e-12


@dataclass(frozen=True)
class GeometricPrior:
    """``P(nu = k) = (1 - rho)**(k - 1) * rho`` for ``k >= 1``."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"rho must lie in (0, 1), got {self.rho!r}")

    def pmf(self, k: int) -> float:
        if k < 1:
            return 0.0
        return (1.0 - self.rho) ** (k - 1) * self.rho

    def survival(self, k: int) -> float:
        """``P(nu > k)``."""
        return (1.0 - self.rho) ** max(k, 0)


@dataclass(frozen=True, eq=False)
class ChangePointModel:
    before: TransitionMatrix
    after: TransitionMatrix
    prior: GeometricPrior
    initial: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.before.n != self.after.n:
            raise DimensionMismatch(
                f"before/after dimensions differ: {self.before.n} vs {self.after.n}"
            )
        init = np.array(self.initial, dtype=float)
        if init.shape != (self.n,):
            raise DimensionMismatch(f"initial must have length {self.n}, got shape {init.shape}")
        if np.any(init < 0) or abs(init.sum() - 1.0) > INITIAL_TOL:
            raise ValidationError(f"initial is not a probability vector (sum {init.sum()!r})")
        init.setflags(write=False)
        object.__setattr__(self, "initial", init)

    @classmethod
    def create(
        cls,
        A_b,
        A_a,
        rho: float,
        initial: Union[str, Sequence[float]] = "stationary_b",
        allow_nonergodic: bool = False,
    ) -> "ChangePointModel":
        """Validate raw matrices and assemble a model.

        Both chains must be irreducible and aperiodic unless
        ``allow_nonergodic`` is set. ``initial="stationary_b"`` uses the
        stationary law of the before-change chain.
        """
        before = validate_matrix(A_b)
        after = validate_matrix(A_a)
        if before.n != after.n:
            raise DimensionMismatch(f"before/after dimensions differ: {before.n} vs {after.n}")
        if not allow_nonergodic:
            require_ergodic(before, "A_b")
            require_ergodic(after, "A_a")
        if isinstance(initial, str):
            if initial != "stationary_b":
                raise ValidationError(f"unknown initial distribution {initial!r}")
            init = stationary(before)
        else:
            init = np.asarray(initial, dtype=float)
        return cls(before, after, GeometricPrior(float(rho)), init)

    @property
    def n(self) -> int:
        return self.before.n

    @property
    def rho(self) -> float:
        return self.prior.rho


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    """The 2N-state hidden chain and its 0/1 emission matrix."""

    A: np.ndarray
    emission: np.ndarray

    @property
    def n(self) -> int:
        return self.emission.shape[0]


def build_augmented_matrix(A_b, A_a, rho: float) -> np.ndarray:
    """``[[(1-rho) A_b, 0], [rho A_b, A_a]]``; ``rho`` may be 0 here."""
    P = np.asarray(A_b, dtype=float)
    Q = np.asarray(A_a, dtype=float)
    n = P.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = (1.0 - rho) * P
    A[n:, :n] = rho * P
    A[n:, n:] = Q
    return A


def build_augmented(model: ChangePointModel) -> AugmentedModel:
    A = build_augmented_matrix(model.before.entries, model.after.entries, model.rho)
    eye = np.eye(model.n)
    emission = np.hstack([eye, eye])
    A.setflags(write=False)
    emission.setflags(write=False)
    return AugmentedModel(A=A, emission=emission)


def sample_change_time(prior: GeometricPrior, rng: np.random.Generator) -> int:
    return int(rng.geometric(prior.rho))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``X_0..X_T`` and the change time that generated them.

    ``change_time`` is ``None`` for a path drawn entirely from the
    before-change chain; it may exceed ``T`` when the sampled change falls
    past the horizon.
    """

    states: np.ndarray
    change_time: Union[int, None]

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    def regime(self, k: int) -> str:
        """Block of the augmented state ``Z_k``: ``"before"`` iff ``k < nu``."""
        if self.change_time is None or k < self.change_time:
            return "before"
        return "after"

    def generator(self, step: int) -> str:
        """Which matrix drew the transition into ``X_step`` (``"b"`` or ``"a"``)."""
        if step < 1:
            raise ValueError("transitions are indexed from 1")
        if self.change_time is None or step <= self.change_time:
            return "b"
        return "a"


NEVER = np.iinfo(np.int64).max


def resolve_change_time(
    change_time: ChangeTime, prior: GeometricPrior, rng: np.random.Generator
) -> Union[int, None]:
    if isinstance(change_time, str):
        if change_time == "sample":
            return sample_change_time(prior, rng)
        if change_time == "never":
            return None
        raise InvalidChangeTime(f"unknown change_time {change_time!r}")
    nu = int(change_time)
    if nu < 1 or nu != change_time:
        raise InvalidChangeTime(f"change time must be an integer >= 1, got {change_time!r}")
    return nu


def draw_trial(
    model: ChangePointModel, horizon: int, change_time: ChangeTime, rng: np.random.Generator
) -> tuple[Union[int, None], np.ndarray]:
    """Consume one trial's randomness: change time first, then T+1 uniforms in (0, 1]."""
    nu = resolve_change_time(change_time, model.prior, rng)
    u = 1.0 - rng.random(horizon + 1)
    return nu, u


def paths_from_uniforms(
    model: ChangePointModel, uniforms: np.ndarray, change_times: np.ndarray
) -> np.ndarray:
    """Vectorised inverse-CDF simulation of a batch of paths.

    ``uniforms`` has shape ``(trials, T + 1)``; ``change_times`` holds one
    integer per trial with :data:`NEVER` for no change.
    """
    trials, steps = uniforms.shape
    n = model.n
    dtype = np.int8 if n <= 127 else np.int32
    states = np.empty((trials, steps), dtype=dtype)
    init_cum = np.cumsum(model.initial)
    init_cum[-1] = 1.0
    states[:, 0] = (init_cum[None, :] < uniforms[:, :1]).sum(axis=1)
    cum_b = model.before.cumulative
    cum_a = model.after.cumulative
    for step in range(1, steps):
        prev = states[:, step - 1]
        u = uniforms[:, step]
        nxt_b = (cum_b[:, prev] < u).sum(axis=0)
        nxt_a = (cum_a[:, prev] < u).sum(axis=0)
        states[:, step] = np.where(step <= change_times, nxt_b, nxt_a)
    return states


def simulate(
    model: ChangePointModel,
    horizon: int,
    change_time: ChangeTime,
    rng: np.random.Generator,
) -> Trajectory:
    """Simulate ``X_0..X_horizon`` under a fixed, sampled or absent change."""
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    nu, u = draw_trial(model, horizon, change_time, rng)
    states = paths_from_uniforms(model, u[None, :], np.array([NEVER if nu is None else nu]))
    path = states[0].astype(np.int64)
    path.setflags(write=False)
    return Trajectory(states=path, change_time=nu)


def simulate_batch(
    model: ChangePointModel,
    horizon: int,
    change_time: ChangeTime,
    rngs: Sequence[np.random.Generator],
) -> tuple[np.ndarray, np.ndarray]:
    """Many trials at once. Row ``t`` equals ``simulate(..., rngs[t]).states``.

    Returns ``(states, change_times)``, with :data:`NEVER` marking no change.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    nus = np.empty(len(rngs), dtype=np.int64)
    uniforms = np.empty((len(rngs), horizon + 1))
    for t, rng in enumerate(rngs):
        nu, uniforms[t] = draw_trial(model, horizon, change_time, rng)
        nus[t] = NEVER if nu is None else nu
    return paths_from_uniforms(model, uniforms, nus), nus
