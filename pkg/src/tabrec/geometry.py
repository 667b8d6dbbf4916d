"""Axis-aligned box arithmetic shared by every other module.

Coordinates are continuous floats (pixels). Boxes are closed rectangles
``(x1, y1, x2, y2)`` with strictly positive width and height; degenerate
boxes are rejected at construction so that upstream bugs surface early
instead of being clamped away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """A valid axis-aligned rectangle: x1 < x2, y1 < y2, all finite."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v!r}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "requires x1 < x2 and y1 < y2"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def union(self, other: "BoundingBox") -> "BoundingBox":
        """Smallest box containing both."""
        return BoundingBox(
            min(self.x1, other.x1),
            min(self.y1, other.y1),
            max(self.x2, other.x2),
            max(self.y2, other.y2),
        )


def extent_overlap_x(a: BoundingBox, b: BoundingBox) -> float:
    """Signed overlap of the x-extents; negative values measure the gap."""
    return min(a.x2, b.x2) - max(a.x1, b.x1)


def extent_overlap_y(a: BoundingBox, b: BoundingBox) -> float:
    """Signed overlap of the y-extents; negative values measure the gap."""
    return min(a.y2, b.y2) - max(a.y1, b.y1)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    return max(0.0, extent_overlap_x(a, b)) * max(0.0, extent_overlap_y(a, b))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes, 1 for identical ones."""
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)
