"""
Raster containers and the disparity-selection steps shared by both matchers.

Images and disparity maps are plain ``(H, W)`` float64 arrays. Invalid
disparities hold ``INVALID`` (positive infinity, the Middlebury convention),
so they survive a PFM round trip untouched. Cost volumes carry their
disparity offset and are wrapped in :class:`CostVolume`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

INVALID = np.inf


def as_image(data) -> np.ndarray:
    """Validate an intensity raster and return it as a float64 ``(H, W)`` array.

    Raises:
        InvalidInputError: if the array is not 2-D, is empty, or holds values
            that are non-finite or outside ``[0, 255]``.
    """
    image = np.asarray(data, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise InvalidInputError(f"image must be a non-empty 2-D array, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise InvalidInputError("image contains non-finite intensities")
    if image.min() < 0.0 or image.max() > 255.0:
        raise InvalidInputError("image intensities must lie in [0, 255]")
    return image


def is_valid(disparity: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels carrying a usable disparity."""
    return np.isfinite(disparity)


@dataclass(frozen=True)
class CostVolume:
    """Matching costs of shape ``(H, W, D)`` over levels ``d_min .. d_max``.

    Level ``d`` lives at index ``d - d_min`` of the last axis.
    """

    cost: np.ndarray
    d_min: int = 0

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=np.float64)
        if cost.ndim != 3 or 0 in cost.shape:
            raise InvalidInputError(f"cost volume must be a non-empty (H, W, D) array, got {cost.shape}")
        if not np.all(np.isfinite(cost)) or cost.min() < 0.0:
            raise InvalidInputError("costs must be finite and nonnegative")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "d_min", int(self.d_min))

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def levels(self) -> int:
        return self.cost.shape[2]

    @property
    def d_max(self) -> int:
        return self.d_min + self.levels - 1

    @property
    def disparities(self) -> np.ndarray:
        return np.arange(self.d_min, self.d_max + 1, dtype=np.float64)

    def with_cost(self, cost: np.ndarray) -> "CostVolume":
        return CostVolume(cost, self.d_min)


def winner_take_all(volume: CostVolume) -> np.ndarray:
    """Pick, per pixel, the disparity level of minimal cost.

    ``np.argmin`` returns the first minimum, so ties resolve to the smaller level.
    """
    return volume.d_min + np.argmin(volume.cost, axis=2).astype(np.float64)


def subpixel_refine(volume: CostVolume, winners: np.ndarray) -> np.ndarray:
    """Refine integer winners with a parabola through the neighbouring costs.

    Winners at the ends of the range, invalid winners and winners that are not a
    strict local minimum of their cost slice pass through unchanged.
    """
    winners = np.asarray(winners, dtype=np.float64)
    out = winners.copy()
    valid = is_valid(winners)
    idx = np.where(valid, winners - volume.d_min, 0).astype(np.intp)
    interior = valid & (idx > 0) & (idx < volume.levels - 1)

    rows, cols = np.nonzero(interior)
    k = idx[rows, cols]
    c_lo = volume.cost[rows, cols, k - 1]
    c_mid = volume.cost[rows, cols, k]
    c_hi = volume.cost[rows, cols, k + 1]
    strict = (c_lo > c_mid) & (c_hi > c_mid)
    denom = c_lo - 2.0 * c_mid + c_hi
    offset = np.zeros_like(c_mid)
    offset[strict] = (c_lo[strict] - c_hi[strict]) / (2.0 * denom[strict])
    out[rows, cols] = winners[rows, cols] + offset
    return out


def median_filter_3x3(disparity: np.ndarray) -> np.ndarray:
    """3x3 median over valid neighbours, with edge-replicated borders.

    An even count of valid neighbours takes the lower middle element, so the
    output is always a member of the neighbourhood. Pixels whose whole
    neighbourhood is invalid stay invalid.
    """
    disparity = np.asarray(disparity, dtype=np.float64)
    h, w = disparity.shape
    padded = np.pad(np.where(is_valid(disparity), disparity, np.nan), 1, mode="edge")
    stack = np.stack(
        [padded[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)], axis=2
    )
    stack.sort(axis=2)  # NaN sorts last
    count = np.sum(~np.isnan(stack), axis=2)
    pick = np.maximum(count - 1, 0) // 2
    med = np.take_along_axis(stack, pick[..., None], axis=2)[..., 0]
    return np.where(count > 0, med, INVALID)
