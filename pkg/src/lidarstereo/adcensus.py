"""
AD-Census matcher: absolute-difference plus census cost, cross-based
aggregation and four-direction scanline optimisation.

Guidance is injected between cross aggregation and scanline optimisation.
Grayscale intensities stand in for colour distances throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .grids import CostVolume, as_image, median_filter_3x3, subpixel_refine, winner_take_all
from .sgm import PATHS_4, Guidance, apply_guidance, census, hamming_volume, path_cost

CENSUS_WIDTH = 9
CENSUS_HEIGHT = 7
CENSUS_BITS = CENSUS_WIDTH * CENSUS_HEIGHT - 1
AD_WORST = 255.0


@dataclass(frozen=True)
class AdCensusParams:
    d_min: int = 0
    d_max: int = 63
    lambda_ad: float = 10.0
    lambda_census: float = 30.0
    cross_l1: int = 34
    cross_l2: int = 17
    tau1: float = 20.0
    tau2: float = 6.0
    pi1: float = 1.0
    pi2: float = 3.0
    tau_so: float = 15.0
    iterations: int = 2

    def __post_init__(self):
        if not 0 <= self.d_min <= self.d_max:
            raise InvalidParameterError(f"need 0 <= d_min <= d_max, got [{self.d_min}, {self.d_max}]")
        if not (self.lambda_ad > 0 and self.lambda_census > 0):
            raise InvalidParameterError("lambda_ad and lambda_census must be positive")
        if not 0 < self.cross_l2 < self.cross_l1:
            raise InvalidParameterError("need 0 < cross_l2 < cross_l1")
        if not 0 < self.tau2 < self.tau1:
            raise InvalidParameterError("need 0 < tau2 < tau1")
        if not 0 <= self.pi1 <= self.pi2:
            raise InvalidParameterError("need 0 <= pi1 <= pi2")
        if self.tau_so <= 0 or self.iterations < 0:
            raise InvalidParameterError("tau_so must be positive and iterations nonnegative")


@dataclass(frozen=True)
class CrossArms:
    """Arm lengths per pixel, each an ``(H, W)`` integer array."""

    left: np.ndarray
    right: np.ndarray
    up: np.ndarray
    down: np.ndarray

    @property
    def shape(self):
        return self.left.shape


def robust(cost, lam):
    """Exponential normalisation ``1 - exp(-cost / lam)``."""
    return -np.expm1(-np.asarray(cost, dtype=np.float64) / lam)


def ad_volume(left: np.ndarray, right: np.ndarray, d_min: int, d_max: int) -> np.ndarray:
    h, w = left.shape
    cost = np.full((h, w, d_max - d_min + 1), AD_WORST)
    for i, d in enumerate(range(d_min, d_max + 1)):
        if d >= w:
            break
        cost[:, d:, i] = np.abs(left[:, d:] - right[:, :w - d])
    return cost


def ad_census_cost(left, right, params: AdCensusParams = AdCensusParams()) -> CostVolume:
    """Combined cost ``rho(C_AD, lambda_AD) + rho(C_census, lambda_census)`` in ``[0, 2)``."""
    left = as_image(left)
    right = as_image(right)
    if left.shape != right.shape:
        raise InvalidInputError(f"left {left.shape} and right {right.shape} images differ in size")
    c_ad = ad_volume(left, right, params.d_min, params.d_max)
    c_census = hamming_volume(
        census(left, CENSUS_WIDTH, CENSUS_HEIGHT),
        census(right, CENSUS_WIDTH, CENSUS_HEIGHT),
        params.d_min,
        params.d_max,
        CENSUS_BITS,
    )
    return CostVolume(robust(c_ad, params.lambda_ad) + robust(c_census, params.lambda_census), params.d_min)


def _shift(image: np.ndarray, n: int, dx: int, dy: int) -> np.ndarray:
    """``out[y, x] = image[y + n*dy, x + n*dx]``, NaN outside the image."""
    h, w = image.shape
    out = np.full_like(image, np.nan)
    sx, sy = n * dx, n * dy
    if abs(sx) >= w or abs(sy) >= h:
        return out
    out[max(-sy, 0):h - max(sy, 0), max(-sx, 0):w - max(sx, 0)] = \
        image[max(sy, 0):h - max(-sy, 0), max(sx, 0):w - max(-sx, 0)]
    return out


def _arm(image: np.ndarray, dx: int, dy: int, params: AdCensusParams) -> np.ndarray:
    h, w = image.shape
    arm = np.zeros((h, w), dtype=np.intp)
    alive = np.ones((h, w), dtype=bool)
    prev = image
    for n in range(1, params.cross_l1 + 1):
        q = _shift(image, n, dx, dy)
        to_anchor = np.abs(q - image)
        ok = alive & (to_anchor <= params.tau1) & (np.abs(q - prev) <= params.tau1)
        if n > params.cross_l2:
            ok &= to_anchor <= params.tau2
        arm[ok] = n
        alive = ok
        if not alive.any():
            break
        prev = q
    ys, xs = np.mgrid[0:h, 0:w]
    room = {(1, 0): w - 1 - xs, (-1, 0): xs, (0, 1): h - 1 - ys, (0, -1): ys}[(dx, dy)]
    return np.maximum(arm, np.minimum(room, 1))


def build_cross_arms(image, params: AdCensusParams = AdCensusParams()) -> CrossArms:
    """Cross-shaped support arms of every pixel.

    An arm grows while the next pixel stays within ``tau1`` of both the
    anchor and the previous arm pixel, up to ``cross_l1`` pixels; past
    ``cross_l2`` pixels it additionally needs to stay within ``tau2`` of the
    anchor. Each arm spans at least one pixel unless it sits on the border.
    """
    image = as_image(image)
    return CrossArms(
        left=_arm(image, -1, 0, params),
        right=_arm(image, 1, 0, params),
        up=_arm(image, 0, -1, params),
        down=_arm(image, 0, 1, params),
    )


def _segment_sum(values: np.ndarray, back: np.ndarray, fwd: np.ndarray, axis: int) -> np.ndarray:
    """Sum of ``values`` over ``[i - back, i + fwd]`` along ``axis`` (0 or 1)."""
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 0)
    prefix = np.pad(np.cumsum(values, axis=axis), pad)
    n = values.shape[axis]
    pos = np.arange(n).reshape((-1, 1) if axis == 0 else (1, -1))
    hi = pos + fwd + 1
    lo = pos - back
    if values.ndim == 3:
        hi, lo = hi[..., None], lo[..., None]
    return np.take_along_axis(prefix, hi, axis) - np.take_along_axis(prefix, lo, axis)


def cross_aggregate(volume: CostVolume, arms: CrossArms, iterations: int = 2) -> CostVolume:
    """Average costs over each pixel's cross support region.

    Odd iterations (counting from 1) gather the horizontal segments of the
    pixels on the vertical arm; even iterations use the transposed region.
    """
    if arms.shape != (volume.height, volume.width):
        raise InvalidInputError(f"arms {arms.shape} do not match volume {volume.cost.shape[:2]}")
    cost = volume.cost
    ones = np.ones(arms.shape)
    for it in range(1, iterations + 1):
        if it % 2:
            first = (arms.left, arms.right, 1)
            second = (arms.up, arms.down, 0)
        else:
            first = (arms.up, arms.down, 0)
            second = (arms.left, arms.right, 1)
        inner = _segment_sum(cost, first[0], first[1], first[2])
        total = _segment_sum(inner, second[0], second[1], second[2])
        count = _segment_sum(_segment_sum(ones, *first), *second)
        cost = total / count[..., None]
    return volume.with_cost(cost)


def scanline_penalties(left: np.ndarray, right: np.ndarray, dx: int, dy: int, volume: CostVolume, params: AdCensusParams):
    """Per-cell ``(P1, P2)`` for the path whose predecessor step is ``(dx, dy)``.

    Both penalties shrink by 4 when one of the left or right intensity jumps
    along the path reaches ``tau_so`` and by 10 when both do. A right-image
    jump is taken as zero when either end falls outside the image.
    """
    h, w = left.shape
    d1 = np.abs(left - _shift(left, 1, -dx, -dy))
    d1 = np.nan_to_num(d1, nan=0.0)
    d2 = np.zeros((h, w, volume.levels))
    jump = np.nan_to_num(np.abs(right - _shift(right, 1, -dx, -dy)), nan=0.0)
    for i, d in enumerate(range(volume.d_min, volume.d_max + 1)):
        if d >= w:
            break
        d2[:, d:, i] = jump[:, :w - d]
    big1 = (d1 >= params.tau_so)[..., None]
    big2 = d2 >= params.tau_so
    # divide rather than multiply by 0.1 so integer penalties stay exact
    divisor = np.where(big1 & big2, 10.0, np.where(big1 | big2, 4.0, 1.0))
    return params.pi1 / divisor, params.pi2 / divisor


def scanline_optimize(volume: CostVolume, left, right, params: AdCensusParams = AdCensusParams()) -> CostVolume:
    """Four-direction scanline optimisation, averaged over the directions."""
    left = as_image(left)
    right = as_image(right)
    total = np.zeros_like(volume.cost)
    for dx, dy in PATHS_4:
        p1, p2 = scanline_penalties(left, right, dx, dy, volume, params)
        total += path_cost(volume.cost, dx, dy, p1, p2)
    return volume.with_cost(total / len(PATHS_4))


def run_adcensus(
    left,
    right,
    params: AdCensusParams = AdCensusParams(),
    guidance: Guidance | None = None,
    stages: dict | None = None,
) -> np.ndarray:
    """Dense disparity with the AD-Census pipeline.

    Pipeline: AD-Census cost, cross aggregation, optional guidance
    modulation, scanline optimisation, winner-take-all, parabola refinement,
    3x3 median.

    Args:
        stages: if given, receives the intermediate volumes under ``"cost"``,
            ``"aggregated"``, ``"guided"`` and ``"optimized"``.
    """
    left = as_image(left)
    right = as_image(right)
    raw = ad_census_cost(left, right, params)
    arms = build_cross_arms(left, params)
    aggregated = cross_aggregate(raw, arms, params.iterations)
    guided = apply_guidance(aggregated, left, guidance)
    optimized = scanline_optimize(guided, left, right, params)
    if stages is not None:
        stages.update(cost=raw, aggregated=aggregated, guided=guided, optimized=optimized)
    disparity = subpixel_refine(optimized, winner_take_all(optimized))
    return median_filter_3x3(disparity)
