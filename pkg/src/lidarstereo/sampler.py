"""Simulated LiDAR guidance drawn from a ground-truth disparity map."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .grids import is_valid
from .guidance import SparseDisparitySet


@dataclass(frozen=True)
class SampleSpec:
    """How many ground-truth pixels to keep as guidance.

    ``ratio=n`` keeps one pixel in ``n x n``; ``percentage=p`` keeps a
    fraction ``p`` in ``(0, 1]``. Exactly one of the two must be given.
    ``pattern="grid"`` (ratio only) keeps the centre of every ``n x n`` cell
    instead of drawing at random.
    """

    ratio: int | None = None
    percentage: float | None = None
    seed: int = 0
    pattern: str = "random"

    def __post_init__(self):
        if (self.ratio is None) == (self.percentage is None):
            raise InvalidParameterError("give exactly one of ratio or percentage")
        if self.ratio is not None and self.ratio < 1:
            raise InvalidParameterError(f"ratio must be >= 1, got {self.ratio}")
        if self.percentage is not None and not 0.0 < self.percentage <= 1.0:
            raise InvalidParameterError(f"percentage must lie in (0, 1], got {self.percentage}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        if self.pattern not in ("random", "grid"):
            raise InvalidParameterError(f"unknown pattern {self.pattern!r}")
        if self.pattern == "grid" and self.ratio is None:
            raise InvalidParameterError("grid sampling needs a ratio")

    @property
    def density(self) -> float:
        return 1.0 / self.ratio**2 if self.ratio is not None else self.percentage

    @classmethod
    def parse(cls, text: str, seed: int = 0, pattern: str = "random") -> "SampleSpec":
        """Parse ``"1:3x3"`` (or ``1:3×3``), ``"5%"`` or a bare fraction ``"0.05"``."""
        s = text.strip().lower().replace("×", "x")
        m = re.fullmatch(r"1\s*:\s*(\d+)\s*x\s*(\d+)", s)
        if m:
            if m.group(1) != m.group(2):
                raise InvalidParameterError(f"ratio must be square, got {text!r}")
            return cls(ratio=int(m.group(1)), seed=seed, pattern=pattern)
        try:
            if s.endswith("%"):
                return cls(percentage=float(s[:-1]) / 100.0, seed=seed, pattern=pattern)
            return cls(percentage=float(s), seed=seed, pattern=pattern)
        except ValueError:
            raise InvalidParameterError(f"cannot parse sampling spec {text!r}") from None


def _points(gt: np.ndarray, flat: np.ndarray) -> SparseDisparitySet:
    ys, xs = np.unravel_index(flat, gt.shape)
    return SparseDisparitySet(xs, ys, gt[ys, xs])


def sample_sparse(gt: np.ndarray, spec: SampleSpec) -> tuple[SparseDisparitySet, SparseDisparitySet]:
    """Split the valid pixels of ``gt`` into guidance and holdout sets.

    Both sets come out in raster order. The random pattern draws
    ``round(|valid| * density)`` pixels (round half to even) uniformly
    without replacement; the result depends only on ``gt`` and ``spec``.
    """
    gt = np.asarray(gt, dtype=np.float64)
    valid = is_valid(gt)
    flat_valid = np.flatnonzero(valid)
    if not len(flat_valid):
        raise InvalidInputError("ground truth holds no valid disparity")

    if spec.pattern == "grid":
        n = spec.ratio
        ys, xs = np.mgrid[0:gt.shape[0], 0:gt.shape[1]]
        cell = (ys % n == n // 2) & (xs % n == n // 2)
        chosen = np.flatnonzero(cell & valid)
    else:
        count = round(len(flat_valid) * spec.density)
        rng = np.random.default_rng(spec.seed)
        chosen = np.sort(rng.choice(flat_valid, size=count, replace=False))
    holdout = np.setdiff1d(flat_valid, chosen, assume_unique=True)
    return _points(gt, chosen), _points(gt, holdout)
