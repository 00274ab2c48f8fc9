"""Relaxation length of two points sampled on a regular grid over (0, 1)^2."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _kernels
from .core import BULK_MAX_SWEEPS, DEFAULT_DENOM_LOG2


@dataclass
class RasterGrid:
    """``values[i, j]`` is L at ``p = (i + 1/2)/R`` (applied first), ``q = (j + 1/2)/R``.

    Cells on the diagonal carry a single repeated point, so L = 1 there.
    Guard-tripped cells hold 0.
    """

    resolution: int
    values: np.ndarray
    tripped: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            for row in self.values:
                fh.write(",".join(map(str, row.tolist())) + "\n")

    def to_pgm(self, path) -> None:
        img = np.minimum(self.values, 255).astype(np.uint8)
        R = self.resolution
        Path(path).write_bytes(f"P5\n{R} {R}\n255\n".encode("ascii") + img.tobytes())


def scan(
    R: int,
    max_sweeps: int = BULK_MAX_SWEEPS,
    denom_log2: int = DEFAULT_DENOM_LOG2,
) -> RasterGrid:
    if R < 2 or R & (R - 1):
        raise ValueError(f"resolution must be a power of two >= 2, got {R}")
    if (2 * R) > (1 << denom_log2):
        raise ValueError("grid too fine for the denominator")
    vals = _kernels.raster_lengths(R, 1 << denom_log2, max_sweeps)
    bad = vals < 1
    vals[bad] = 0
    return RasterGrid(R, vals, int(bad.sum()))


def area_estimate(g: RasterGrid, N: int) -> Fraction:
    if N < 1:
        raise ValueError("N must be >= 1")
    return Fraction(int(np.count_nonzero(g.values == N)), g.resolution**2)


def read_pgm(path) -> np.ndarray:
    magic, size, _maxval, rest = Path(path).read_bytes().split(b"\n", 3)
    if magic != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = map(int, size.split())
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)
