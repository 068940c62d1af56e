"""Empirical outage under Rayleigh fading.

Outage events are evaluated from the achievable-rate expressions on each
fading draw, with no use of the closed-form thresholds, so the estimates can
serve as an independent check on the power allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import SystemParams, channel_gain_cdf, sample_channel_gain
from .power import PairSolution, VirtualUser
from .rng import split

BLOCK = 1 << 20
DEFAULT_SAMPLES = 10**6
MAX_SAMPLES = 10**8
RARE_OUTAGE = 1e-4


@dataclass(frozen=True)
class OutageEstimate:
    samples: int
    outage_rate: float
    std_error: float

    @classmethod
    def from_count(cls, count: int, samples: int) -> "OutageEstimate":
        rate = count / samples
        return cls(samples, rate, math.sqrt(rate * (1.0 - rate) / samples))


class PairOutage(NamedTuple):
    a: OutageEstimate
    b: OutageEstimate


def samples_for(outage_req: float, base: int = DEFAULT_SAMPLES) -> int:
    """Sample count giving at least ~100 expected outage events for rare targets."""
    if outage_req >= RARE_OUTAGE:
        return base
    return int(min(MAX_SAMPLES, max(base, math.ceil(100.0 / outage_req))))


def _blocks(n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError("need at least one sample")
    sizes = [BLOCK] * (n // BLOCK) + ([n % BLOCK] if n % BLOCK else [])
    return zip(sizes, split(rng, len(sizes)))


def _distance(u: VirtualUser) -> float:
    if u.distance is None:
        raise ValueError(f"user {u.user_id} has no distance; fading cannot be simulated")
    return u.distance


def _roles(solution: PairSolution, a: VirtualUser, b: VirtualUser):
    s, o = (a, b) if solution.sic_user == "a" else (b, a)
    p_s, p_o = solution.performer_powers()
    if not p_o - p_s * o.target_sinr > 0:
        raise ValueError("the other user's signal is undecodable: p_o - p_s*g_o <= 0")
    return s, o, p_s, p_o


def pair_outage_events(h_s, h_o, p_s, p_o, s: VirtualUser, o: VirtualUser, noise: float):
    """Boolean outage indicators (SIC performer, other) for gain draws.

    The SIC performer first tries to decode the other user's message. On
    success it decodes its own message interference-free; on failure it
    decodes while treating the other signal as noise.
    """
    r_s_to_o = np.log2(1.0 + p_o * h_s / (p_s * h_s + noise))
    sic_ok = r_s_to_o >= o.per_sc_rate
    r_clean = np.log2(1.0 + p_s * h_s / noise)
    r_interf = np.log2(1.0 + p_s * h_s / (p_o * h_s + noise))
    out_s = np.where(sic_ok, r_clean < s.per_sc_rate, r_interf < s.per_sc_rate)
    r_o = np.log2(1.0 + p_o * h_o / (p_s * h_o + noise))
    out_o = r_o < o.per_sc_rate
    return out_s, out_o


def simulate_pair_outage(solution: PairSolution, a: VirtualUser, b: VirtualUser,
                         params: SystemParams, n: int, rng: np.random.Generator) -> PairOutage:
    s, o, p_s, p_o = _roles(solution, a, b)
    d_s, d_o = _distance(s), _distance(o)
    count_s = count_o = 0
    for size, g in _blocks(n, rng):
        h_s = sample_channel_gain(d_s, params, g, size)
        h_o = sample_channel_gain(d_o, params, g, size)
        out_s, out_o = pair_outage_events(h_s, h_o, p_s, p_o, s, o, params.noise_power)
        count_s += int(out_s.sum())
        count_o += int(out_o.sum())
    est_s, est_o = OutageEstimate.from_count(count_s, n), OutageEstimate.from_count(count_o, n)
    return PairOutage(est_s, est_o) if solution.sic_user == "a" else PairOutage(est_o, est_s)


def _thresholds(solution, a, b, params):
    s, o, p_s, p_o = _roles(solution, a, b)
    t_o = o.target_sinr * params.noise_power / (p_o - p_s * o.target_sinr)
    t_s = max(s.target_sinr * params.noise_power / p_s, t_o)
    return s, o, t_s, t_o


def closed_form_outage(solution: PairSolution, a: VirtualUser, b: VirtualUser,
                       params: SystemParams) -> tuple[float, float]:
    """Exact outage of (a, b) from the gain thresholds and the fading CDF."""
    s, o, t_s, t_o = _thresholds(solution, a, b, params)
    out_s = channel_gain_cdf(t_s, _distance(s), params)
    out_o = channel_gain_cdf(t_o, _distance(o), params)
    return (out_s, out_o) if solution.sic_user == "a" else (out_o, out_s)


def simulate_threshold_outage(solution: PairSolution, a: VirtualUser, b: VirtualUser,
                              params: SystemParams, n: int, rng: np.random.Generator) -> PairOutage:
    """Empirical frequency of the single-threshold events ``|h|^2 < t``."""
    s, o, t_s, t_o = _thresholds(solution, a, b, params)
    count_s = count_o = 0
    for size, g in _blocks(n, rng):
        count_s += int((sample_channel_gain(_distance(s), params, g, size) < t_s).sum())
        count_o += int((sample_channel_gain(_distance(o), params, g, size) < t_o).sum())
    est_s, est_o = OutageEstimate.from_count(count_s, n), OutageEstimate.from_count(count_o, n)
    return PairOutage(est_s, est_o) if solution.sic_user == "a" else PairOutage(est_o, est_s)


def simulate_single_outage(power: float, u: VirtualUser, params: SystemParams, n: int,
                           rng: np.random.Generator) -> OutageEstimate:
    if not power > 0:
        raise ValueError("power must be positive")
    count = 0
    for size, g in _blocks(n, rng):
        h = sample_channel_gain(_distance(u), params, g, size)
        count += int((np.log2(1.0 + power * h / params.noise_power) < u.per_sc_rate).sum())
    return OutageEstimate.from_count(count, n)


def single_closed_form_outage(power: float, u: VirtualUser, params: SystemParams) -> float:
    return channel_gain_cdf(u.target_sinr * params.noise_power / power, _distance(u), params)
