"""Power-efficient resource allocation for multicarrier NOMA with statistical CSIT."""

from .channel import SystemParams, UserProfile, compute_beta
from .power import PairSolution, VirtualUser, solve_pair, virtual_users
from .scheduling import Schedule, schedule_exhaustive, schedule_proposed, schedule_random

__version__ = "0.1.0"

__all__ = [
    "PairSolution",
    "Schedule",
    "SystemParams",
    "UserProfile",
    "VirtualUser",
    "compute_beta",
    "schedule_exhaustive",
    "schedule_proposed",
    "schedule_random",
    "solve_pair",
    "virtual_users",
]
