"""Max-min fair curriculum-based course timetabling.

Exact per-period room assignment under a leximax objective, a simulated
annealing master solver and exact rank statistics for leximax allocations.
"""

from mmfctt._backend import BACKEND
from mmfctt.fairness import (
    WeightMultiset,
    average_allocation,
    format_compressed,
    leximax_compare,
    parse_compressed,
    rank,
    rank_recursive,
    rho_max,
    rho_min,
    unrank,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "WeightMultiset",
    "average_allocation",
    "format_compressed",
    "leximax_compare",
    "parse_compressed",
    "rank",
    "rank_recursive",
    "rho_max",
    "rho_min",
    "unrank",
]
