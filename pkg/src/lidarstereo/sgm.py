"""
Census / Hamming semi-global matching with an optional guidance step.

Matching is left-referenced: pixel ``(x, y)`` of the left image is compared
with ``(x - d, y)`` of the right image, so disparities are nonnegative.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .grids import CostVolume, as_image, median_filter_3x3, subpixel_refine, winner_take_all
from .guidance import (
    GuidanceParams,
    SparseDisparitySet,
    build_guidance_field,
    gauss_modulate,
    riverbed_modulate,
)

CENSUS_BITS = 24

# (dx, dy) of the predecessor step along each path
PATHS_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
PATHS_8 = PATHS_4 + ((1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True)
class SgmParams:
    d_min: int = 0
    d_max: int = 63
    p1: float = 10.0
    p2: float = 150.0
    paths: int = 8

    def __post_init__(self):
        if not 0 <= self.d_min <= self.d_max:
            raise InvalidParameterError(f"need 0 <= d_min <= d_max, got [{self.d_min}, {self.d_max}]")
        # zero penalties are allowed: they reduce aggregation to a plain sum
        if not 0 <= self.p1 <= self.p2:
            raise InvalidParameterError(f"need 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.paths not in (4, 8):
            raise InvalidParameterError(f"paths must be 4 or 8, got {self.paths}")


@dataclass(frozen=True)
class Guidance:
    """Sparse guidance handed to a matcher.

    Attributes:
        mode: ``"gauss"`` modulates only the point pixels, ``"riverbed"``
            also their homogeneous neighbours.
    """

    mode: Literal["gauss", "riverbed"]
    points: SparseDisparitySet
    params: GuidanceParams = GuidanceParams()
    density: float | None = None

    def __post_init__(self):
        if self.mode not in ("gauss", "riverbed"):
            raise InvalidParameterError(f"unknown guidance mode {self.mode!r}")


def apply_guidance(volume: CostVolume, left: np.ndarray, guidance: Guidance | None) -> CostVolume:
    """Modulate ``volume`` per ``guidance``; the identity when there is nothing to apply."""
    if guidance is None or len(guidance.points) == 0:
        return volume
    if guidance.mode == "gauss":
        return gauss_modulate(volume, guidance.points, guidance.params)
    field = build_guidance_field(guidance.points, left, guidance.params, density=guidance.density)
    return riverbed_modulate(volume, field, guidance.points, guidance.params)


def census_offsets(width: int, height: int):
    """Row-major window offsets ``(dy, dx)``, centre excluded."""
    return [
        (dy, dx)
        for dy in range(-(height // 2), height // 2 + 1)
        for dx in range(-(width // 2), width // 2 + 1)
        if dy or dx
    ]


def census(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Census descriptors over a ``width x height`` window with clamped borders.

    Bit ``b`` (counted from the least significant bit) is set when the ``b``-th
    neighbour in row-major order is strictly darker than the centre.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    ry, rx = height // 2, width // 2
    padded = np.pad(image, ((ry, ry), (rx, rx)), mode="edge")
    out = np.zeros((h, w), dtype=np.uint64)
    for bit, (dy, dx) in enumerate(census_offsets(width, height)):
        neighbour = padded[ry + dy:ry + dy + h, rx + dx:rx + dx + w]
        out |= (neighbour < image).astype(np.uint64) << np.uint64(bit)
    return out


def census_transform(image) -> np.ndarray:
    """24-bit descriptors from a 5x5 census window."""
    return census(as_image(image), 5, 5)


def hamming_volume(left: np.ndarray, right: np.ndarray, d_min: int, d_max: int, worst: int) -> np.ndarray:
    """Raw Hamming distances, ``worst`` where ``x - d`` leaves the image."""
    if left.shape != right.shape:
        raise InvalidInputError(f"descriptor grids differ in shape: {left.shape} vs {right.shape}")
    h, w = left.shape
    cost = np.full((h, w, d_max - d_min + 1), float(worst))
    for i, d in enumerate(range(d_min, d_max + 1)):
        if d >= w:
            break
        lo = max(d, 0)
        cost[:, lo:, i] = np.bitwise_count(left[:, lo:] ^ right[:, lo - d:w - d])
    return cost


def hamming_cost_volume(left: np.ndarray, right: np.ndarray, d_min: int, d_max: int) -> CostVolume:
    """Census matching cost in ``[0, 24]`` over levels ``d_min .. d_max``."""
    return CostVolume(hamming_volume(left, right, d_min, d_max, CENSUS_BITS), d_min)


def _step(prev: np.ndarray, p1, p2) -> np.ndarray:
    """``min(L(d), L(d -+ 1) + p1, min L + p2) - min L`` for a batch of predecessors.

    ``p1``/``p2`` are scalars or arrays broadcasting against ``prev``.
    """
    m = prev.min(axis=-1, keepdims=True)
    best = np.minimum(prev, m + p2)
    best[..., 1:] = np.minimum(best[..., 1:], prev[..., :-1] + _tail(p1))
    best[..., :-1] = np.minimum(best[..., :-1], prev[..., 1:] + _head(p1))
    return best - m


def _tail(p):
    return p[..., 1:] if np.ndim(p) else p


def _head(p):
    return p[..., :-1] if np.ndim(p) else p


def path_cost(cost: np.ndarray, dx: int, dy: int, p1, p2) -> np.ndarray:
    """Cost aggregated along one path direction.

    ``(dx, dy)`` is the step from a pixel's predecessor to the pixel. The
    wavefront advances one column (or row, for vertical paths) at a time.
    """
    if dx == 0:
        # vertical paths are horizontal paths on the transposed grid
        t = path_cost(cost.transpose(1, 0, 2), dy, 0, _transpose(p1), _transpose(p2))
        return t.transpose(1, 0, 2)
    h, w, _ = cost.shape
    out = np.empty_like(cost)
    cols = range(w) if dx > 0 else range(w - 1, -1, -1)
    prev = None
    for x in cols:
        cur = cost[:, x, :].copy()
        if prev is not None:
            if dy == 0:
                rows, src = slice(None), slice(None)
            elif dy > 0:
                rows, src = slice(1, None), slice(None, -1)
            else:
                rows, src = slice(None, -1), slice(1, None)
            cur[rows] = cost[rows, x, :] + _step(prev[src], _at(p1, rows, x), _at(p2, rows, x))
        out[:, x, :] = cur
        prev = cur
    return out


def _transpose(p):
    return p.transpose(1, 0, 2) if np.ndim(p) else p


def _at(p, rows, x):
    return p[rows, x, :] if np.ndim(p) else p


def aggregate_paths(volume: CostVolume, params: SgmParams) -> CostVolume:
    """Sum of the per-path SGM recurrences over 4 or 8 directions."""
    directions = PATHS_8 if params.paths == 8 else PATHS_4
    total = np.zeros_like(volume.cost)
    for dx, dy in directions:
        total += path_cost(volume.cost, dx, dy, params.p1, params.p2)
    return volume.with_cost(total)


def run_sgm(
    left,
    right,
    params: SgmParams = SgmParams(),
    guidance: Guidance | None = None,
    stages: dict | None = None,
) -> np.ndarray:
    """Dense disparity of ``left`` against ``right``.

    Pipeline: census, Hamming cost, optional guidance modulation, path
    aggregation, winner-take-all, parabola refinement, 3x3 median.

    Args:
        stages: if given, receives the intermediate cost volumes under the keys
            ``"cost"``, ``"guided"`` and ``"aggregated"``.
    """
    left = as_image(left)
    right = as_image(right)
    if left.shape != right.shape:
        raise InvalidInputError(f"left {left.shape} and right {right.shape} images differ in size")
    raw = hamming_cost_volume(census_transform(left), census_transform(right), params.d_min, params.d_max)
    guided = apply_guidance(raw, left, guidance)
    aggregated = aggregate_paths(guided, params)
    if stages is not None:
        stages.update(cost=raw, guided=guided, aggregated=aggregated)
    disparity = subpixel_refine(aggregated, winner_take_all(aggregated))
    return median_filter_3x3(disparity)
