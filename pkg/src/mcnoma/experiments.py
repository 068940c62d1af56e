"""Randomised scenarios and parameter sweeps.

Users are dropped uniformly between 30 m and the cell size ``D`` with total
target rates uniform in [0.1, 10] bit/s/Hz. Outage targets are either all
1e-2 (case 1) or uniform in [1e-5, 0.1] (case 2).

Realization ``r`` of a sweep always draws its users from the stream
``(seed, r)``, whatever the sweep point, so every method and every x value
sees the same underlying uniforms (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import SystemParams, UserProfile, watts_to_dbm
from .power import virtual_users
from .rng import child_rng
from .scheduling import (
    EXHAUSTIVE_LIMIT,
    build_cost_matrix,
    count_combinations,
    schedule_exhaustive,
    schedule_random,
    schedule_virtual,
)

MIN_DISTANCE = 30.0
RATE_RANGE = (0.1, 10.0)
CASE1_OUTAGE = 1e-2
CASE2_OUTAGE_RANGE = (1e-5, 0.1)
METHODS = ("proposed", "random", "exhaustive", "oma")


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int
    num_subcarriers: int
    per_user: int = 1
    cell_size: float = 200.0
    outage_case: int = 1
    noise_dbm: float = -128.0
    alpha: float = 3.6
    realizations: int = 1000
    seed: int = 0

    def __post_init__(self):
        kl = self.num_users * self.per_user
        if self.per_user < 1 or self.num_users < 1:
            raise ValueError("num_users and per_user must be positive")
        if not self.num_subcarriers < kl <= 2 * self.num_subcarriers:
            raise ValueError(
                f"need M < K*L <= 2M, got K={self.num_users}, L={self.per_user}, "
                f"M={self.num_subcarriers}"
            )
        if not self.cell_size > MIN_DISTANCE:
            raise ValueError(f"cell size must exceed {MIN_DISTANCE} m")
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")
        if self.outage_case not in (1, 2):
            raise ValueError("outage_case must be 1 or 2")

    @property
    def params(self) -> SystemParams:
        return SystemParams.from_dbm(self.noise_dbm, self.alpha)


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> list[UserProfile]:
    """Draw ``cfg.num_users`` users (ids from 1).

    One row of three uniforms per user, so the first k users of a larger
    scenario coincide with a k-user scenario drawn from the same stream.
    """
    u = rng.random((cfg.num_users, 3))
    d = MIN_DISTANCE + (cfg.cell_size - MIN_DISTANCE) * u[:, 0]
    rate = RATE_RANGE[0] + (RATE_RANGE[1] - RATE_RANGE[0]) * u[:, 1]
    if cfg.outage_case == 1:
        delta = np.full(cfg.num_users, CASE1_OUTAGE)
    else:
        lo, hi = CASE2_OUTAGE_RANGE
        delta = lo + (hi - lo) * u[:, 2]
    params = cfg.params
    return [
        UserProfile.create(i + 1, float(d[i]), float(rate[i]), float(delta[i]), params)
        for i in range(cfg.num_users)
    ]


def oma_system_power(users: Sequence[UserProfile], K: int, M: int) -> float:
    """Total OMA power when the M subcarriers are split equally among K users.

    Each user gets bandwidth M/K (in subcarriers) and must carry its whole
    target rate in it: ``(2**(f*R) - 1) / (f*beta)`` with ``f = K/M``.
    """
    if K <= 0 or M <= 0:
        raise ValueError("K and M must be positive")
    f = K / M
    return math.fsum((2.0 ** (f * u.total_rate) - 1.0) / (f * u.beta) for u in users)


def exhaustive_feasible(cfg: ScenarioConfig) -> bool:
    kl = cfg.num_users * cfg.per_user
    return count_combinations(kl, cfg.num_subcarriers) <= EXHAUSTIVE_LIMIT


def run_realization(cfg: ScenarioConfig, r: int, exhaustive: bool = True) -> dict[str, float]:
    """Total power of every method on realization ``r`` (same users for all)."""
    users = generate_scenario(cfg, child_rng(cfg.seed, r, 0))
    vusers = virtual_users(users, cfg.per_user)
    M = cfg.num_subcarriers
    costs = build_cost_matrix(vusers)
    out = {
        "proposed": schedule_virtual(vusers, M, costs=costs).total_power,
        "random": schedule_random(vusers, M, child_rng(cfg.seed, r, 1)).total_power,
        "oma": oma_system_power(users, cfg.num_users, M),
    }
    if exhaustive and exhaustive_feasible(cfg):
        out["exhaustive"] = schedule_exhaustive(vusers, M, costs=costs).total_power
    return out


@dataclass
class SweepResult:
    """Per-method realization totals (watts) at each x value.

    ``totals[method]`` has shape ``(len(x_values), realizations)``; rows are
    NaN where a method did not run.
    """

    axis: str
    x_values: list
    realizations: int
    outage_case: int
    totals: dict[str, np.ndarray] = field(default_factory=dict)

    def ran(self, method: str, k: int) -> bool:
        return not np.isnan(self.totals[method][k]).any()

    def mean_watts(self, method: str) -> np.ndarray:
        rows = self.totals[method]
        return np.array([math.fsum(row) / len(row) if not np.isnan(row).any() else np.nan
                         for row in rows])

    def mean_dbm(self, method: str) -> np.ndarray:
        return watts_to_dbm(self.mean_watts(method))

    def std_error(self, method: str) -> np.ndarray:
        rows = self.totals[method]
        if rows.shape[1] < 2:
            return np.zeros(rows.shape[0])
        return rows.std(axis=1, ddof=1) / math.sqrt(rows.shape[1])

    def gain_db(self, method: str = "proposed") -> np.ndarray:
        """OMA mean power over ``method`` mean power, in dB."""
        return self.mean_dbm("oma") - self.mean_dbm(method)

    def rows(self) -> list[dict]:
        out = []
        for method in METHODS:
            if method not in self.totals:
                continue
            watts, dbm, se = self.mean_watts(method), self.mean_dbm(method), self.std_error(method)
            for k, x in enumerate(self.x_values):
                if not self.ran(method, k):
                    continue
                out.append({
                    "x": x,
                    "method": method,
                    "mean_watts": float(watts[k]),
                    "mean_dbm": float(dbm[k]),
                    "std_error": float(se[k]),
                    "realizations": self.realizations,
                })
        return out


def sweep(template: ScenarioConfig, field_name: str, values: Sequence,
          exhaustive: bool = True) -> SweepResult:
    res = SweepResult(field_name, list(values), template.realizations, template.outage_case)
    R = template.realizations
    totals = {m: np.full((len(values), R), np.nan) for m in METHODS}
    for k, v in enumerate(values):
        cfg = replace(template, **{field_name: v})
        for r in range(R):
            for m, p in run_realization(cfg, r, exhaustive).items():
                totals[m][k, r] = p
    res.totals = totals
    return res


def sweep_cell_size(template: ScenarioConfig, cell_sizes: Sequence[float],
                    exhaustive: bool = True) -> SweepResult:
    return sweep(template, "cell_size", cell_sizes, exhaustive)


def sweep_num_users(template: ScenarioConfig, user_counts: Sequence[int],
                    exhaustive: bool = True) -> SweepResult:
    return sweep(template, "num_users", user_counts, exhaustive)
