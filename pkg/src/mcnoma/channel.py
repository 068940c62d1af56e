"""Statistical channel model.

The small-scale fading is Rayleigh, so the channel power gain of a user at
distance ``d`` is exponential with rate ``1 + d**alpha``. Only these
statistics are known at the base station; all allocation decisions are made
from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts):
    """Convert watts to dBm; works elementwise on arrays. Zero maps to -inf."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(watts, dtype=float) * 1000.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SystemParams:
    """Per-subcarrier noise power (watts) and path-loss exponent."""

    noise_power: float
    path_loss_exponent: float = 3.6

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ValueError(f"noise_power must be positive, got {self.noise_power}")
        if not self.path_loss_exponent > 0:
            raise ValueError(
                f"path_loss_exponent must be positive, got {self.path_loss_exponent}"
            )

    @classmethod
    def from_dbm(cls, noise_dbm: float = -128.0, path_loss_exponent: float = 3.6):
        return cls(dbm_to_watts(noise_dbm), path_loss_exponent)

    @property
    def noise_dbm(self) -> float:
        return watts_to_dbm(self.noise_power)


def _fading_rate(distance: float, params: SystemParams) -> float:
    return 1.0 + distance**params.path_loss_exponent


def path_attenuation(distance: float, params: SystemParams) -> float:
    """Large-scale power attenuation ``1 / (1 + d**alpha)``.

    Distance zero is accepted here (it gives 1); user profiles reject it.
    """
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    return 1.0 / _fading_rate(distance, params)


def channel_gain_cdf(x: float, distance: float, params: SystemParams) -> float:
    if x < 0:
        raise ValueError(f"gain must be non-negative, got {x}")
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    return -math.expm1(-_fading_rate(distance, params) * x)


def compute_beta(distance: float, outage_req: float, params: SystemParams) -> float:
    """QoS-stringency coefficient ``-ln(1 - delta) / (noise * (1 + d**alpha))``.

    A user with larger beta is cheaper to serve; ``1/beta`` grows with both
    distance and outage strictness.
    """
    if not 0.0 < outage_req < 1.0:
        raise ValueError(f"outage requirement must lie in (0, 1), got {outage_req}")
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    return -math.log1p(-outage_req) / (params.noise_power * _fading_rate(distance, params))


def sample_channel_gain(distance, params: SystemParams, rng: np.random.Generator, size=None):
    """Draw ``|h|**2`` by inverting the exponential CDF of uniform draws.

    ``distance`` may be an array, in which case it broadcasts against ``size``.
    """
    u = rng.random(size)
    rate = 1.0 + np.asarray(distance, dtype=float) ** params.path_loss_exponent
    # 1 - u lies in (0, 1], so the log is finite
    return -np.log1p(-u) / rate


@dataclass(frozen=True)
class UserProfile:
    """A downlink user: distance (m), total target rate (bit/s/Hz), outage target.

    ``beta`` is derived; build instances with :meth:`create` or pass ``params``.
    """

    id: int
    distance: float
    total_rate: float
    outage_req: float
    beta: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"user {self.id}: distance must be positive")
        if not self.total_rate > 0:
            raise ValueError(f"user {self.id}: total_rate must be positive")
        if not 0.0 < self.outage_req < 1.0:
            raise ValueError(f"user {self.id}: outage_req must lie in (0, 1)")
        if not self.beta > 0:
            raise ValueError(f"user {self.id}: beta must be positive (use UserProfile.create)")

    @classmethod
    def create(cls, id: int, distance: float, total_rate: float, outage_req: float,
               params: SystemParams) -> "UserProfile":
        if not distance > 0:
            raise ValueError(f"user {id}: distance must be positive")
        beta = compute_beta(distance, outage_req, params)
        return cls(id, distance, total_rate, outage_req, beta)
