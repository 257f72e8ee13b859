"""Piecewise-linear lookup tables realizing variable dependency relations.

A table maps a source variable's value to a target setpoint; outside the
knot range the value clamps to the end knots. PID or other control laws
could slot in beside this, but only interpolation ships.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field


@dataclass(frozen=True)
class InterpolationTable:
    """Knots strictly increasing in x, at least two of them, all finite."""

    points: tuple[tuple[float, float], ...]

    def __init__(self, points):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in points))
        self.validate()

    def validate(self) -> None:
        if len(self.points) < 2:
            raise ValueError("interpolation table needs at least 2 points")
        for x, y in self.points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("interpolation table values must be finite")
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("interpolation table x values must be strictly increasing")

    @property
    def xs(self) -> list[float]:
        return [x for x, _ in self.points]


def interpolate(table: InterpolationTable, x: float) -> float:
    """Piecewise-linear value of the table at x, clamped at the end knots."""
    pts = table.points
    if x <= pts[0][0]:
        return pts[0][1]
    if x >= pts[-1][0]:
        return pts[-1][1]
    i = bisect_right(table.xs, x) - 1
    x1, y1 = pts[i]
    x2, y2 = pts[i + 1]
    return y1 + (x - x1) * (y2 - y1) / (x2 - x1)
