"""Exhaustive tour enumeration for small traveling-salesman instances."""

from __future__ import annotations

from itertools import permutations
from typing import Sequence

from ..errors import BenchError

MAX_CITIES = 10


def tsp_tour_oracle(cost: Sequence[Sequence[float]]) -> tuple[float, tuple[int, ...]]:
    """Cheapest directed tour starting and ending at city 0 (0-based).

    Permutations are scanned in lexicographic order and only a strictly
    cheaper tour replaces the incumbent, so ties go to the smallest tour.
    """
    n = len(cost)
    if any(len(row) != n for row in cost):
        raise BenchError("cost matrix must be square", "NOT_SQUARE")
    if n > MAX_CITIES:
        raise BenchError(f"{n} cities exceed the enumeration limit of {MAX_CITIES}", "TOO_LARGE")
    if n == 0:
        raise BenchError("empty cost matrix", "NOT_SQUARE")
    if n == 1:
        return 0.0, (0, 0)
    best, best_tour = float("inf"), ()
    for perm in permutations(range(1, n)):
        tour = (0, *perm, 0)
        c = sum(cost[a][b] for a, b in zip(tour, tour[1:]))
        if c < best:
            best, best_tour = c, tour
    return float(best), best_tour
