"""Discrete-time stochastic SIR dynamics with time-varying rates.

All functions broadcast over numpy arrays, so the same code advances a
single trajectory or a whole particle ensemble. One step is one day.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidHorizonError, InvalidPopulationError


@dataclass(frozen=True)
class SirState:
    s: np.ndarray | float
    i: np.ndarray | float
    r: np.ndarray | float


@dataclass(frozen=True)
class SirParams:
    beta: np.ndarray | float
    gamma: np.ndarray | float


@dataclass(frozen=True)
class NoiseConfig:
    """Process-noise magnitudes; all zero gives deterministic dynamics.

    ``state_noise_std`` is an absolute std (persons) added to each daily
    flow. ``flow_noise_rel`` adds a std proportional to the flow itself,
    which keeps the noise meaningful across epidemic sizes.

    With ``jump_prob > 0`` each rate increment is, with that probability,
    drawn with its std multiplied by ``jump_scale`` (a two-component scale
    mixture), so abrupt rate changes can be followed without inflating the
    day-to-day walk.
    """

    state_noise_std: float = 0.0
    beta_walk_std: float = 0.0
    gamma_walk_std: float = 0.0
    flow_noise_rel: float = 0.0
    jump_prob: float = 0.0
    jump_scale: float = 1.0

    def __post_init__(self):
        for name in ("state_noise_std", "beta_walk_std", "gamma_walk_std", "flow_noise_rel",
                     "jump_prob"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.jump_prob > 1 or self.jump_scale < 1:
            raise ValueError("jump_prob must be <= 1 and jump_scale >= 1")

    @property
    def flow_noise(self) -> bool:
        return self.state_noise_std > 0 or self.flow_noise_rel > 0

    def without_walk(self) -> "NoiseConfig":
        return NoiseConfig(self.state_noise_std, 0.0, 0.0, self.flow_noise_rel)

    def walk_scale(self, shape, rng) -> np.ndarray | float:
        if self.jump_prob <= 0 or self.jump_scale == 1:
            return 1.0
        return np.where(rng.uniform(size=shape) < self.jump_prob, self.jump_scale, 1.0)


ZERO_NOISE = NoiseConfig()


def _flow_noise(flow, noise: NoiseConfig, rng):
    if not noise.flow_noise:
        return flow
    std = np.sqrt(noise.state_noise_std ** 2 + (noise.flow_noise_rel * flow) ** 2)
    return flow + std * rng.standard_normal(np.shape(flow))


def step(state: SirState, params: SirParams, N: float, noise: NoiseConfig = ZERO_NOISE,
         rng: np.random.Generator | None = None) -> SirState:
    """Advance one day.

    The daily infection and removal flows get additive noise, then are
    clipped so every compartment stays in ``[0, N]``. Each flow leaves one
    compartment and enters the next, so the population is conserved.
    """
    if not N > 0:
        raise InvalidPopulationError(f"population must be positive, got {N}")
    s, i = np.asarray(state.s, dtype=float), np.asarray(state.i, dtype=float)
    r = np.asarray(state.r, dtype=float)
    infections = params.beta * s * i / N
    removals = params.gamma * i
    if noise.flow_noise:
        if rng is None:
            raise ValueError("rng required when process noise is enabled")
        infections = _flow_noise(infections, noise, rng)
        removals = _flow_noise(removals, noise, rng)
    infections = np.clip(infections, 0.0, s)
    removals = np.clip(removals, 0.0, i)
    s_next = s - infections
    i_next = i + infections - removals
    r_next = r + removals
    if np.ndim(s_next) == 0:
        return SirState(float(s_next), float(i_next), float(r_next))
    return SirState(s_next, i_next, r_next)


def walk_params(params: SirParams, noise: NoiseConfig,
                rng: np.random.Generator | None = None) -> SirParams:
    """Gaussian random walk on both rates, reflected at zero."""
    beta, gamma = params.beta, params.gamma
    if noise.beta_walk_std == 0 and noise.gamma_walk_std == 0:
        return params
    shape = np.broadcast_shapes(np.shape(beta), np.shape(gamma))
    scale = noise.walk_scale(shape, rng)
    if noise.beta_walk_std > 0:
        beta = np.abs(beta + scale * noise.beta_walk_std * rng.standard_normal(shape))
    if noise.gamma_walk_std > 0:
        gamma = np.abs(gamma + scale * noise.gamma_walk_std * rng.standard_normal(shape))
    if np.ndim(beta) == 0 and np.ndim(gamma) == 0:
        return SirParams(float(beta), float(gamma))
    return SirParams(beta, gamma)


@dataclass(frozen=True)
class Trajectory:
    """Daily path; states have ``days + 1`` entries (day 0 is the initial
    state), rates have ``days`` entries (entry k drives day k -> k+1)."""

    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    @property
    def days(self) -> int:
        return len(self.beta)

    def state(self, day: int) -> SirState:
        return SirState(float(self.s[day]), float(self.i[day]), float(self.r[day]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "s", "i", "r", "beta", "gamma"])
        for k in range(len(self.s)):
            b = repr(float(self.beta[k])) if k < self.days else ""
            g = repr(float(self.gamma[k])) if k < self.days else ""
            w.writerow([k, repr(float(self.s[k])), repr(float(self.i[k])),
                        repr(float(self.r[k])), b, g])
        return buf.getvalue()


def simulate(init: SirState, params: SirParams | list[SirParams] | tuple, days: int, N: float,
             noise: NoiseConfig = ZERO_NOISE,
             rng: np.random.Generator | None = None) -> Trajectory:
    """Simulate ``days`` daily steps.

    ``params`` is either a single :class:`SirParams` (rates then follow the
    random walk in ``noise``) or a per-day sequence of rates, or a
    ``(beta_array, gamma_array)`` pair of per-day arrays, which are used as
    given.
    """
    if days < 1:
        raise InvalidHorizonError(f"days must be >= 1, got {days}")
    if isinstance(params, SirParams):
        fixed = None
    elif isinstance(params, tuple) and len(params) == 2 and np.ndim(params[0]) == 1:
        fixed = (np.asarray(params[0], float), np.asarray(params[1], float))
    else:
        fixed = (np.array([p.beta for p in params], float), np.array([p.gamma for p in params], float))
    if fixed is not None and len(fixed[0]) < days:
        raise InvalidHorizonError(f"rate trajectory covers {len(fixed[0])} days, need {days}")

    s = np.empty(days + 1)
    i = np.empty(days + 1)
    r = np.empty(days + 1)
    beta = np.empty(days)
    gamma = np.empty(days)
    s[0], i[0], r[0] = init.s, init.i, init.r
    state, p = init, params
    for k in range(days):
        if fixed is None:
            p = walk_params(p, noise, rng)
        else:
            p = SirParams(float(fixed[0][k]), float(fixed[1][k]))
        state = step(state, p, N, noise, rng)
        s[k + 1], i[k + 1], r[k + 1] = state.s, state.i, state.r
        beta[k], gamma[k] = p.beta, p.gamma
    return Trajectory(s, i, r, beta, gamma)
