"""Geometric primitives for raster math.

Provides immutable types for addressing pixels of a raster:
- Point: a pixel coordinate, x along columns and y along rows
- Size: width and height of a raster, convertible to a numpy shape

Rasters are stored row-major, so numpy indexing is always [y, x].
"""

from typing import NamedTuple


class Point(NamedTuple):
    """Represents a pixel coordinate. Origin is the top-left pixel."""

    x: int = 0
    y: int = 0

    def __str__(self) -> str:
        return f"({self.x}, {self.y})"

    def __add__(self, other: Point) -> Point:  # type: ignore[override]
        return Point(self.x + other.x, self.y + other.y)

    @property
    def manhattan(self) -> int:
        """Number of horizontal and vertical moves from the origin."""
        return abs(self.x) + abs(self.y)


class Size(NamedTuple):
    """Represents the pixel size of a raster."""

    w: int = 0
    h: int = 0

    def __str__(self) -> str:
        return f"{self.w}x{self.h}"

    def __bool__(self) -> bool:
        """Non-empty size."""
        return self.w != 0 and self.h != 0

    @classmethod
    def from_shape(cls, shape: tuple[int, ...]) -> Size:
        """Create a Size from a numpy (rows, cols, ...) shape."""
        return cls(shape[1], shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        """Numpy shape (rows, cols) of a raster of this size."""
        return self.h, self.w

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, point: Point) -> bool:
        return 0 <= point.x < self.w and 0 <= point.y < self.h
