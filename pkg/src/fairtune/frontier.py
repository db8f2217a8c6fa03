"""Non-dominated set of visited models in (utility, fairness) space."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_CROSS_TOL = 1e-12


@dataclass(frozen=True)
class FrontierEntry:
    theta: np.ndarray = field(repr=False, compare=False)
    f_bar: float
    u_bar: float
    tag: str = ""

    @property
    def point(self) -> tuple[float, float]:
        return (self.u_bar, self.f_bar)


def dominates(p, q) -> bool:
    """``p`` strictly dominates ``q``: no worse on both axes, better on one."""
    return p[0] >= q[0] and p[1] >= q[1] and (p[0] > q[0] or p[1] > q[1])


class Frontier:
    """Streaming Pareto filter. Entries with coordinates identical to an
    incumbent are rejected, so the first model to reach a point keeps it."""

    def __init__(self, entries=()):
        self.entries: list[FrontierEntry] = []
        for e in entries:
            self.add(e)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def add(self, candidate: FrontierEntry) -> bool:
        if not (np.isfinite(candidate.f_bar) and np.isfinite(candidate.u_bar)):
            raise ValueError("frontier scores must be finite")
        cp = candidate.point
        for e in self.entries:
            if e.point == cp or dominates(e.point, cp):
                return False
        self.entries = [e for e in self.entries if not dominates(cp, e.point)]
        self.entries.append(candidate)
        return True

    def points(self) -> list[tuple[float, float]]:
        return [e.point for e in self.entries]

    def hull(self) -> list[FrontierEntry]:
        """Vertices of the upper-right convex hull, ordered by utility."""
        return upper_right_hull(self.entries, key=lambda e: e.point)


def update_frontier(frontier: Frontier, candidate: FrontierEntry) -> Frontier:
    """Offer ``candidate`` to ``frontier`` (in place) and return it."""
    frontier.add(candidate)
    return frontier


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_right_hull(items, key=lambda p: p):
    """Monotone-chain upper hull over mutually non-dominated points.

    Points lying on a hull edge (collinear within tolerance) are not vertices.
    """
    ordered = sorted(items, key=lambda it: (key(it)[0], -key(it)[1]))
    chain = []
    for it in ordered:
        p = key(it)
        while len(chain) >= 2 and _cross(key(chain[-2]), key(chain[-1]), p) >= -_CROSS_TOL:
            chain.pop()
        chain.append(it)
    return chain
