"""Hilbert curves on ``2^k x 2^k`` grids.

Cells are indexed row-major, ``v = y * side + x``, with ``y`` growing upward.
The base shape is the U visiting (0,0), (0,1), (1,1), (1,0). Level ``k`` is
four copies of level ``k - 1``: the lower-left copy is transposed, the two
upper copies are translated, and the lower-right copy is transposed across
the anti-diagonal so that its exit lands in the corner.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .sfc import SfcOrdering

MAX_LEVEL = 15


def hilbert_points(level: int) -> np.ndarray:
    """``(4**level, 2)`` array of ``(x, y)`` cells in curve order."""
    if level < 0:
        raise InvalidArgument("level must be non-negative")
    if level > MAX_LEVEL:
        raise InvalidArgument(f"level {level} exceeds the supported maximum {MAX_LEVEL}")
    pts = np.zeros((1, 2), dtype=np.int64)
    for k in range(level):
        n = 1 << k
        x, y = pts[:, 0], pts[:, 1]
        pts = np.concatenate([
            np.stack([y, x], axis=1),
            np.stack([x, y + n], axis=1),
            np.stack([x + n, y + n], axis=1),
            np.stack([2 * n - 1 - y, n - 1 - x], axis=1),
        ])
    return pts


def hilbert_ordering(level: int) -> SfcOrdering:
    if level < 1:
        raise InvalidArgument("level must be at least 1")
    pts = hilbert_points(level)
    side = 1 << level
    return SfcOrdering(pts[:, 1] * side + pts[:, 0])


def rotate_ordering(ordering: SfcOrdering, n: int, quarter_turns: int) -> SfcOrdering:
    """The same curve drawn on the grid turned ``quarter_turns`` times clockwise."""
    if n * n != ordering.n:
        raise InvalidArgument(f"ordering has {ordering.n} cells, not {n}x{n}")
    v = ordering.to_vertex
    x, y = v % n, v // n
    for _ in range(quarter_turns % 4):
        x, y = y, n - 1 - x
    return SfcOrdering(y * n + x)
