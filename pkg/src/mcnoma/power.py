"""Per-subcarrier power allocation with statistical CSIT.

Two users share a subcarrier and exactly one of them performs SIC. For a
fixed SIC performer ``s`` and other user ``o`` the minimum-power allocation
is closed form::

    p_s = g_s / b_s
    p_o = max(g_s*g_o/b_s + g_o/b_s,  g_s*g_o/b_s + g_o/b_o,  1/b_s)

where ``g`` is the per-subcarrier target SINR and ``b`` the QoS-stringency
coefficient (see :func:`mcnoma.channel.compute_beta`). The pair solution is
the cheaper of the two SIC choices.

Outage probabilities used by the feasibility checks are evaluated on the
noise-normalised gain ``|h|^2 / noise``. For a user with coefficient ``b``
and outage target ``delta`` that normalised gain is exponential with rate
``-ln(1 - delta) / b``, so the outage at threshold ``t`` is
``1 - (1 - delta) ** (t / b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import UserProfile

# outage target for which the normalised fading rate is exactly 1/beta
UNIT_OUTAGE = -math.expm1(-1.0)

PREREQ_RTOL = 1e-12


@dataclass(frozen=True)
class VirtualUser:
    """One per-subcarrier demand of a real user.

    ``target_sinr`` is derived from ``per_sc_rate``. ``outage_req`` defaults
    to ``UNIT_OUTAGE`` for abstract instances given only by beta and SINR;
    feasibility statements do not depend on that choice. ``distance`` is only
    needed for fading simulation.
    """

    user_id: int
    replica_index: int
    per_sc_rate: float
    beta: float
    outage_req: float = UNIT_OUTAGE
    distance: float | None = None
    target_sinr: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "target_sinr", 2.0**self.per_sc_rate - 1.0)

    @classmethod
    def from_sinr(cls, beta: float, sinr: float, user_id: int = 0, **kw) -> "VirtualUser":
        return cls(user_id, 0, math.log2(1.0 + sinr), beta, **kw)

    @classmethod
    def from_profile(cls, profile: UserProfile, per_user: int, replica: int = 0) -> "VirtualUser":
        return cls(profile.id, replica, profile.total_rate / per_user, profile.beta,
                   profile.outage_req, profile.distance)


def virtual_users(profiles, per_user: int) -> list[VirtualUser]:
    """Replicate each profile ``per_user`` times, user-major order."""
    if per_user < 1:
        raise ValueError("per_user must be at least 1")
    return [VirtualUser.from_profile(p, per_user, r) for p in profiles for r in range(per_user)]


@dataclass(frozen=True)
class PairSolution:
    power_a: float
    power_b: float
    sic_user: str  # "a" or "b"
    total: float = field(init=False)

    def __post_init__(self):
        if self.sic_user not in ("a", "b"):
            raise ValueError(f"sic_user must be 'a' or 'b', got {self.sic_user!r}")
        if self.power_a < 0 or self.power_b < 0:
            raise ValueError("powers must be non-negative")
        object.__setattr__(self, "total", self.power_a + self.power_b)

    def performer_powers(self) -> tuple[float, float]:
        """(SIC performer power, other user power)."""
        if self.sic_user == "a":
            return self.power_a, self.power_b
        return self.power_b, self.power_a


def _check(u: VirtualUser):
    if not u.beta > 0:
        raise ValueError(f"beta must be positive, got {u.beta}")
    if not u.target_sinr > 0:
        raise ValueError(f"target SINR must be positive, got {u.target_sinr}")


def solve_case(sic_performer: VirtualUser, other: VirtualUser) -> PairSolution:
    """Minimum powers when ``sic_performer`` decodes ``other`` first.

    Returned with ``a`` = SIC performer, ``b`` = other.
    """
    _check(sic_performer)
    _check(other)
    gs, go = sic_performer.target_sinr, other.target_sinr
    bs, bo = sic_performer.beta, other.beta
    p_s = gs / bs
    p_o = max(gs * go / bs + go / bs, gs * go / bs + go / bo, 1.0 / bs)
    return PairSolution(p_s, p_o, "a")


def _swap(sol: PairSolution) -> PairSolution:
    return PairSolution(sol.power_b, sol.power_a, "b" if sol.sic_user == "a" else "a")


def solve_both_cases(a: VirtualUser, b: VirtualUser) -> tuple[PairSolution, PairSolution]:
    """Solutions with ``a`` performing SIC and with ``b`` performing SIC, in (a, b) order."""
    return solve_case(a, b), _swap(solve_case(b, a))


def solve_pair(a: VirtualUser, b: VirtualUser) -> PairSolution:
    """Cheaper of the two SIC choices; equal totals go to ``a``."""
    case_a, case_b = solve_both_cases(a, b)
    return case_a if case_a.total <= case_b.total else case_b


def sic_order_rule(a: VirtualUser, b: VirtualUser) -> str:
    """SIC performer by QoS stringency: the user with larger beta decodes.

    Only valid when both target SINRs are at least 1; otherwise the two
    cases must be compared explicitly with :func:`solve_pair`.
    """
    if a.target_sinr < 1.0 or b.target_sinr < 1.0:
        raise ValueError(
            "ordering rule requires both target SINRs >= 1; use solve_pair instead"
        )
    return "a" if a.beta >= b.beta else "b"


def solve_single(u: VirtualUser) -> float:
    """Power for a user alone on a subcarrier."""
    _check(u)
    return u.target_sinr / u.beta


def oma_pair_power(a: VirtualUser, b: VirtualUser) -> tuple[float, float]:
    """Powers when the subcarrier is split into two equal halves."""
    _check(a)
    _check(b)
    return (
        (2.0 ** (2.0 * a.per_sc_rate) - 1.0) / (2.0 * a.beta),
        (2.0 ** (2.0 * b.per_sc_rate) - 1.0) / (2.0 * b.beta),
    )


def oma_minus_noma(a: VirtualUser, b: VirtualUser) -> float:
    return sum(oma_pair_power(a, b)) - solve_pair(a, b).total


def gain_closed_form(a: VirtualUser, b: VirtualUser) -> float:
    """Power saved by NOMA over half-band OMA, valid when both rates are >= 1 bit/s/Hz."""
    if a.beta >= b.beta:
        (g1, b1), (g2, b2) = (a.target_sinr, a.beta), (b.target_sinr, b.beta)
    else:
        (g1, b1), (g2, b2) = (b.target_sinr, b.beta), (a.target_sinr, a.beta)
    r1, r2 = math.sqrt(b1), math.sqrt(b2)
    return g1 * g2 / r1 * (1.0 / r2 - 1.0 / r1) + 0.5 * (g2 / r2 - g1 / r1) ** 2


class NomaGain(NamedTuple):
    watts: float
    guaranteed: bool


def noma_gain_over_oma(a: VirtualUser, b: VirtualUser) -> NomaGain:
    """NOMA power reduction over OMA on one subcarrier.

    With both per-subcarrier rates >= 1 bit/s/Hz the closed-form expression is
    returned and is non-negative. Otherwise the directly computed difference is
    returned with ``guaranteed=False``; it may be negative.
    """
    if a.per_sc_rate >= 1.0 and b.per_sc_rate >= 1.0:
        return NomaGain(gain_closed_form(a, b), True)
    return NomaGain(oma_minus_noma(a, b), False)


def outage_at_threshold(threshold, u: VirtualUser):
    """Outage of ``u`` when its normalised gain must exceed ``threshold``."""
    t = np.asarray(threshold, dtype=float)
    with np.errstate(invalid="ignore"):
        out = -np.expm1(np.log1p(-u.outage_req) * t / u.beta)
    out = np.where(np.isinf(t), 1.0, out)
    return float(out) if out.ndim == 0 else out


def case_outage(p_s, p_o, s: VirtualUser, o: VirtualUser):
    """Analytic outage (SIC performer, other) for powers with ``s`` performing SIC.

    Returns ``(1, 1)`` wherever the other user's signal cannot be decoded at
    any gain (``p_o <= p_s * g_o``).
    """
    p_s = np.asarray(p_s, dtype=float)
    p_o = np.asarray(p_o, dtype=float)
    margin = p_o - p_s * o.target_sinr
    with np.errstate(divide="ignore", invalid="ignore"):
        t_other = np.where(margin > 0, o.target_sinr / margin, np.inf)
        t_own = np.where(p_s > 0, s.target_sinr / p_s, np.inf)
    t_s = np.maximum(t_own, t_other)
    return outage_at_threshold(t_s, s), outage_at_threshold(t_other, o)


def prerequisites_hold(p_s, p_o, s: VirtualUser, o: VirtualUser):
    """Only ``s`` may perform SIC: ``p_o - p_s*g_o > 0`` and ``p_s - p_o*g_s <= 0``.

    The non-strict condition is tested with a relative slack of
    ``PREREQ_RTOL`` of the pair total so that exact closed-form boundary points
    are not rejected by rounding.
    """
    p_s = np.asarray(p_s, dtype=float)
    p_o = np.asarray(p_o, dtype=float)
    strict = p_o - p_s * o.target_sinr > 0
    loose = p_s - p_o * s.target_sinr <= PREREQ_RTOL * (p_s + p_o)
    return strict & loose


def pair_outage(sol: PairSolution, a: VirtualUser, b: VirtualUser) -> tuple[float, float]:
    """Analytic outage of (a, b) under ``sol``."""
    s, o = (a, b) if sol.sic_user == "a" else (b, a)
    p_s, p_o = sol.performer_powers()
    out_s, out_o = case_outage(p_s, p_o, s, o)
    return (out_s, out_o) if sol.sic_user == "a" else (out_o, out_s)


class InfeasibleError(ValueError):
    pass


def oracle_min_power(a: VirtualUser, b: VirtualUser, sic_performer: str = "a",
                     tolerance: float = 1e-4, *, grid: int = 512, rounds: int = 8,
                     upper: float | None = None) -> PairSolution:
    """Numerically minimise ``p_a + p_b`` for a fixed SIC performer.

    Feasibility is judged only from the analytic outage and the SIC
    prerequisites. The SIC performer's power is searched on a ``grid``-point
    grid over ``[0, upper]`` that is refined around the incumbent for up to
    ``rounds`` rounds. For each grid value the other user's smallest feasible
    power is located by bisection, which is valid because raising the other
    user's power never breaks a constraint.

    ``upper`` defaults to four times the closed-form total, which only sets
    the search scale.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if sic_performer not in ("a", "b"):
        raise ValueError("sic_performer must be 'a' or 'b'")
    s, o = (a, b) if sic_performer == "a" else (b, a)
    if upper is None:
        upper = 4.0 * solve_case(s, o).total

    g_s, g_o = s.target_sinr, o.target_sinr
    log_s = math.log1p(-s.outage_req) / s.beta
    log_o = math.log1p(-o.outage_req) / o.beta

    def feasible(p_s, p_o):
        # same quantities as case_outage/prerequisites_hold, without the
        # per-call wrapping that dominates the cost inside the bisection
        margin = p_o - p_s * g_o
        strict = margin > 0
        t_other = np.where(strict, g_o / np.where(strict, margin, 1.0), np.inf)
        t_s = np.maximum(g_s / p_s, t_other)
        out_s = -np.expm1(log_s * t_s)
        out_o = -np.expm1(log_o * t_other)
        loose = p_s - p_o * g_s <= PREREQ_RTOL * (p_s + p_o)
        return strict & loose & (out_s <= s.outage_req) & (out_o <= o.outage_req)

    def min_other(p_s):
        lo = np.zeros_like(p_s)
        hi = np.full_like(p_s, upper)
        ok = feasible(p_s, hi)
        # steep constraints can push the other power far above the grid range
        for _ in range(64):
            if ok.all():
                break
            hi = np.where(ok, hi, 2.0 * hi)
            ok = feasible(p_s, hi)
        for _ in range(200):
            if ((hi - lo) <= resolution * hi).all():
                break
            mid = 0.5 * (lo + hi)
            f = feasible(p_s, mid)
            hi = np.where(f, mid, hi)
            lo = np.where(f, lo, mid)
        return np.where(ok, hi, np.inf)

    resolution = 1e-2 * tolerance
    lo_s, hi_s = 0.0, upper
    best = None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(rounds):
            p_s = np.linspace(lo_s, hi_s, grid)
            totals = p_s + min_other(p_s)
            k = int(np.argmin(totals))
            if not np.isfinite(totals[k]):
                if best is None:
                    raise InfeasibleError("no feasible power pair in the search region")
                break
            if best is None or totals[k] <= sum(best):
                best = (float(p_s[k]), float(totals[k] - p_s[k]))
            step = (hi_s - lo_s) / (grid - 1)
            # the other power moves ~g_o times faster than p_s, so the grid
            # must resolve p_s itself rather than the total
            if step <= resolution * best[0]:
                break
            lo_s, hi_s = max(0.0, p_s[k] - step), min(upper, p_s[k] + step)

    p_s, p_o = best
    if sic_performer == "a":
        return PairSolution(p_s, p_o, "a")
    return PairSolution(p_o, p_s, "b")


def oracle_pair(a: VirtualUser, b: VirtualUser, tolerance: float = 1e-4) -> PairSolution:
    """Oracle minimum over both SIC choices."""
    ra = oracle_min_power(a, b, "a", tolerance)
    rb = oracle_min_power(a, b, "b", tolerance)
    return ra if ra.total <= rb.total else rb
