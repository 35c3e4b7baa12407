"""
Sparse disparity guidance: homogeneous-pixel expansion and cost modulation.

A sparse point ``(x, y, d)`` is a LiDAR return already projected onto the
left rectified image, with ``d`` its trusted disparity. Around each point the
pixels whose bilateral dissimilarity ``W`` stays below ``gamma`` are claimed
as *homogeneous* pixels; every pixel belongs to at most one point. Cost
slices are then rescaled:

* at the point itself by a Gaussian notch of height ``k`` and width ``c``
  centred on ``d`` (:func:`gauss_modulate`);
* at every claimed pixel by the riverbed profile: a flat floor of value
  ``W`` over ``(d - w, d + w)`` with Gaussian banks outside, ``w`` being the
  pixel's Euclidean distance to its owner (:func:`riverbed_modulate`).

The riverbed profile collapses to the Gaussian notch when ``W = w = 0``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError, InvalidInputError, InvalidParameterError
from .grids import CostVolume

# largest double below 1.0; keeps W in [0, 1) once exp() underflows
_W_MAX = np.nextafter(1.0, 0.0)

# s * s * density within this relative margin of 1 counts as exactly 1
_DENSITY_RTOL = 1e-12


class SparsePoint(NamedTuple):
    x: int
    y: int
    d: float


@dataclass(frozen=True, eq=False)
class SparseDisparitySet:
    """An ordered set of sparse points stored column-wise.

    Order matters: it breaks ownership ties in :func:`build_guidance_field`.
    """

    x: np.ndarray
    y: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x).astype(np.intp).reshape(-1)
        y = np.asarray(self.y).astype(np.intp).reshape(-1)
        d = np.asarray(self.d, dtype=np.float64).reshape(-1)
        if not (len(x) == len(y) == len(d)):
            raise InvalidInputError("x, y and d must have the same length")
        if not np.all(np.isfinite(d)):
            bad = int(np.flatnonzero(~np.isfinite(d))[0])
            raise InvalidInputError(f"point {bad} at ({x[bad]}, {y[bad]}) has a non-finite disparity")
        if len(x):
            keys = np.stack([x, y], axis=1)
            if len(np.unique(keys, axis=0)) != len(keys):
                raise InvalidInputError("sparse points must not share pixel coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_points(cls, points: Iterable) -> "SparseDisparitySet":
        rows = [tuple(p) for p in points]
        if not rows:
            return cls.empty()
        x, y, d = zip(*rows)
        return cls(np.array(x), np.array(y), np.array(d, dtype=np.float64))

    @classmethod
    def empty(cls) -> "SparseDisparitySet":
        return cls(np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros(0))

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> SparsePoint:
        return SparsePoint(int(self.x[i]), int(self.y[i]), float(self.d[i]))

    def __iter__(self) -> Iterator[SparsePoint]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, SparseDisparitySet):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.d, other.d)
        )

    def check_inside(self, height: int, width: int) -> None:
        outside = (self.x < 0) | (self.x >= width) | (self.y < 0) | (self.y >= height)
        if np.any(outside):
            i = int(np.flatnonzero(outside)[0])
            raise InvalidInputError(
                f"point {i} at ({self.x[i]}, {self.y[i]}) lies outside the {width}x{height} image"
            )

    def check_range(self, d_min: float, d_max: float) -> None:
        out = (self.d < d_min) | (self.d > d_max)
        if np.any(out):
            i = int(np.flatnonzero(out)[0])
            raise InvalidInputError(
                f"point {i} at ({self.x[i]}, {self.y[i]}) has disparity {self.d[i]} "
                f"outside the search range [{d_min}, {d_max}]"
            )


@dataclass(frozen=True)
class GuidanceParams:
    """Tuning of the homogeneous-pixel search and the modulation profile.

    Attributes:
        sigma_xy: spatial bandwidth of the dissimilarity weight, in pixels.
        sigma_i: intensity bandwidth of the dissimilarity weight.
        gamma: a pixel is homogeneous with a point when ``W < gamma``.
        k: height of the Gaussian banks.
        c: width of the Gaussian banks, in disparity levels.
        window: ``"auto"`` to derive the window from the point density, or an
            explicit odd window size >= 3.
    """

    sigma_xy: float = 8.0
    sigma_i: float = 8.0
    gamma: float = 0.3
    k: float = 10.0
    c: float = 1.0
    window: int | str = "auto"

    def __post_init__(self):
        for name in ("sigma_xy", "sigma_i", "k", "c"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameterError("gamma must lie in (0, 1)")
        if self.window != "auto":
            if isinstance(self.window, bool) or not isinstance(self.window, (int, np.integer)):
                raise InvalidParameterError(f"window must be 'auto' or an odd integer, got {self.window!r}")
            if self.window < 3 or self.window % 2 == 0:
                raise InvalidParameterError(f"window must be odd and >= 3, got {self.window}")


@dataclass(frozen=True)
class GuidanceField:
    """Per-pixel ownership produced by :func:`build_guidance_field`.

    ``owner`` holds the index of the claiming point, or -1 when unclaimed.
    ``weight`` (the dissimilarity ``W``) and ``distance`` (``w``) are NaN on
    unclaimed pixels. ``windows`` stores the effective window of each point.
    """

    owner: np.ndarray
    weight: np.ndarray
    distance: np.ndarray
    windows: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.owner.shape

    @property
    def claimed(self) -> np.ndarray:
        return self.owner >= 0

    def claim_counts(self) -> np.ndarray:
        """Number of pixels owned by each point."""
        return np.bincount(self.owner[self.claimed], minlength=len(self.windows))

    @classmethod
    def unclaimed(cls, height: int, width: int) -> "GuidanceField":
        return cls(
            owner=np.full((height, width), -1, dtype=np.intp),
            weight=np.full((height, width), np.nan),
            distance=np.full((height, width), np.nan),
            windows=np.zeros(0, dtype=np.intp),
        )


def _weight(dist2, intensity_diff, sigma_xy, sigma_i):
    exponent = dist2 / (2.0 * sigma_xy**2) + np.square(intensity_diff) / (2.0 * sigma_i**2)
    return np.minimum(-np.expm1(-exponent), _W_MAX)


def dissimilarity_weight(center, pixel, image, params: GuidanceParams = GuidanceParams()) -> float:
    """Bilateral dissimilarity ``W`` in ``[0, 1)`` between a point and a pixel.

    Args:
        center: the sparse point, anything with ``x`` and ``y`` or an ``(x, y)`` pair.
        pixel: ``(x, y)`` of the pixel being tested.
        image: the left intensity image, indexed ``[y, x]``.
    """
    cx, cy = (center.x, center.y) if hasattr(center, "x") else center[:2]
    px, py = pixel
    image = np.asarray(image)
    dist2 = float((px - cx) ** 2 + (py - cy) ** 2)
    diff = float(image[py, px]) - float(image[cy, cx])
    return float(_weight(dist2, diff, params.sigma_xy, params.sigma_i))


def auto_window_size(density: float) -> int:
    """Smallest odd window ``s >= 3`` whose pixel count times ``density`` exceeds 1."""
    if not density > 0:
        raise InvalidParameterError(f"density must be positive, got {density}")
    s = 3
    while s * s * density <= 1.0 + _DENSITY_RTOL:
        s += 2
    return s


def lidar_density(points: SparseDisparitySet, image, region: str = "bbox") -> float:
    """Fraction of pixels carrying a sparse point.

    Args:
        region: ``"bbox"`` divides by the inclusive bounding box of the points,
            ``"full"`` by the whole image.
    """
    if len(points) == 0:
        raise InvalidInputError("density is undefined for an empty point set")
    if region == "full":
        h, w = np.shape(image)[:2]
        area = h * w
    elif region == "bbox":
        area = (np.ptp(points.x) + 1) * (np.ptp(points.y) + 1)
    else:
        raise InvalidParameterError(f"unknown density region {region!r}")
    return len(points) / float(area)


def _base_window(params: GuidanceParams, density: float | None) -> int:
    if params.window == "auto":
        if density is None:
            raise InvalidParameterError("an automatic window needs the point density")
        return auto_window_size(density)
    return int(params.window)


def _shrink(base: int, chebyshev: np.ndarray) -> np.ndarray:
    # largest odd s whose half-width (s - 1) / 2 stays below the distance
    limit = np.where(np.isfinite(chebyshev), 2 * np.minimum(chebyshev, base) - 1, base)
    return np.maximum(np.minimum(base, limit), 1).astype(np.intp)


def effective_window(point, all_points: SparseDisparitySet, params: GuidanceParams, density: float | None = None) -> int:
    """Window size of ``point`` after shrinking it to exclude every other point."""
    base = _base_window(params, density)
    others = (all_points.x != point.x) | (all_points.y != point.y)
    if not np.any(others):
        return base
    cheb = np.maximum(np.abs(all_points.x[others] - point.x), np.abs(all_points.y[others] - point.y))
    return int(_shrink(base, np.array([cheb.min()], dtype=float))[0])


def effective_windows(points: SparseDisparitySet, params: GuidanceParams, density: float | None = None) -> np.ndarray:
    """Vectorised :func:`effective_window` for every point of the set."""
    base = _base_window(params, density)
    if len(points) < 2:
        return np.full(len(points), base, dtype=np.intp)
    coords = np.stack([points.x, points.y], axis=1).astype(float)
    dist, _ = cKDTree(coords).query(coords, k=2, p=np.inf)
    return _shrink(base, dist[:, 1])


def build_guidance_field(
    points: SparseDisparitySet,
    image,
    params: GuidanceParams = GuidanceParams(),
    *,
    density: float | None = None,
    region: str = "bbox",
) -> GuidanceField:
    """Assign homogeneous pixels to the sparse points that claim them.

    Every point owns its own pixel with ``W = w = 0``. A neighbouring pixel
    inside a point's effective window is a candidate when its dissimilarity is
    below ``gamma``; a pixel wanted by several points goes to the smallest
    ``W``, then to the earliest point.

    Args:
        density: point density used by an automatic window. Computed from the
            points over ``region`` when omitted.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    if len(points) == 0:
        return GuidanceField.unclaimed(h, w)
    points.check_inside(h, w)
    if params.window == "auto" and density is None:
        density = lidar_density(points, image, region)
    windows = effective_windows(points, params, density)
    halves = windows // 2

    # offsets whose spatial term alone reaches gamma can never qualify
    max_dist2 = -2.0 * params.sigma_xy**2 * math.log1p(-params.gamma)
    center_i = image[points.y, points.x]
    pix_parts, w_parts, owner_parts, dist_parts = [], [], [], []
    hmax = int(halves.max())
    for dy in range(-hmax, hmax + 1):
        for dx in range(-hmax, hmax + 1):
            dist2 = dx * dx + dy * dy
            if dist2 >= max_dist2:
                continue
            px = points.x + dx
            py = points.y + dy
            keep = (halves >= max(abs(dx), abs(dy))) & (px >= 0) & (px < w) & (py >= 0) & (py < h)
            idx = np.flatnonzero(keep)
            if not len(idx):
                continue
            weight = _weight(float(dist2), image[py[idx], px[idx]] - center_i[idx], params.sigma_xy, params.sigma_i)
            ok = weight < params.gamma
            idx = idx[ok]
            pix_parts.append(py[idx] * w + px[idx])
            w_parts.append(weight[ok])
            owner_parts.append(idx)
            dist_parts.append(np.full(len(idx), math.sqrt(dist2)))

    pix = np.concatenate(pix_parts)
    weight = np.concatenate(w_parts)
    owner = np.concatenate(owner_parts)
    dist = np.concatenate(dist_parts)
    order = np.lexsort((owner, weight, pix))
    _, first = np.unique(pix[order], return_index=True)
    win = order[first]

    field = GuidanceField.unclaimed(h, w)
    flat_owner = field.owner.reshape(-1)
    flat_weight = field.weight.reshape(-1)
    flat_dist = field.distance.reshape(-1)
    flat_owner[pix[win]] = owner[win]
    flat_weight[pix[win]] = weight[win]
    flat_dist[pix[win]] = dist[win]
    # point pixels always belong to themselves
    own = points.y * w + points.x
    flat_owner[own] = np.arange(len(points))
    flat_weight[own] = 0.0
    flat_dist[own] = 0.0
    return GuidanceField(field.owner, field.weight, field.distance, windows)


def gauss_multiplier(d, d_m, k: float = 10.0, c: float = 1.0):
    """Gaussian notch ``k * (1 - exp(-(d - d_m)^2 / (2 c^2)))``."""
    delta = np.asarray(d, dtype=np.float64) - d_m
    return k * -np.expm1(-np.square(delta) / (2.0 * c * c))


def riverbed_multiplier(d, d_m, weight, radius, k: float = 10.0, c: float = 1.0):
    """Riverbed profile: ``weight`` on ``(d_m - radius, d_m + radius)``,
    Gaussian banks lifted by ``weight`` outside. All arguments broadcast."""
    d = np.asarray(d, dtype=np.float64)
    lo = np.asarray(d_m - radius, dtype=np.float64)
    hi = np.asarray(d_m + radius, dtype=np.float64)
    below = gauss_multiplier(d, lo, k, c) + weight
    above = gauss_multiplier(d, hi, k, c) + weight
    return np.where(d <= lo, below, np.where(d >= hi, above, weight))


def gauss_modulate(volume: CostVolume, points: SparseDisparitySet, params: GuidanceParams = GuidanceParams()) -> CostVolume:
    """Apply the Gaussian notch to the cost slice of every sparse point."""
    if len(points) == 0:
        return volume
    points.check_inside(volume.height, volume.width)
    points.check_range(volume.d_min, volume.d_max)
    mult = gauss_multiplier(volume.disparities[None, :], points.d[:, None], params.k, params.c)
    cost = volume.cost.copy()
    cost[points.y, points.x, :] *= mult
    return volume.with_cost(cost)


def riverbed_modulate(
    volume: CostVolume,
    field: GuidanceField,
    points: SparseDisparitySet,
    params: GuidanceParams = GuidanceParams(),
) -> CostVolume:
    """Apply the riverbed profile to every claimed pixel of ``field``."""
    if field.shape != (volume.height, volume.width):
        raise InvalidInputError(f"guidance field {field.shape} does not match volume {volume.cost.shape[:2]}")
    ys, xs = np.nonzero(field.claimed)
    if not len(ys):
        return volume
    owner = field.owner[ys, xs]
    if owner.max() >= len(points):
        raise InvalidInputError("guidance field refers to points missing from the set")
    d_m = points.d[owner]
    bad = (d_m < volume.d_min) | (d_m > volume.d_max)
    if np.any(bad):
        i = int(owner[np.flatnonzero(bad)[0]])
        raise InvalidInputError(
            f"point {i} at ({points.x[i]}, {points.y[i]}) has disparity {points.d[i]} "
            f"outside the search range [{volume.d_min}, {volume.d_max}]"
        )
    mult = riverbed_multiplier(
        volume.disparities[None, :],
        d_m[:, None],
        field.weight[ys, xs][:, None],
        field.distance[ys, xs][:, None],
        params.k,
        params.c,
    )
    cost = volume.cost.copy()
    cost[ys, xs, :] *= mult
    return volume.with_cost(cost)


def read_points_csv(path) -> SparseDisparitySet:
    """Read ``x,y,d`` records; an initial ``x,y,d`` header line is optional."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            if lineno == 1 and [f.strip().lower() for f in record] == ["x", "y", "d"]:
                continue
            if len(record) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 fields, got {len(record)}")
            try:
                rows.append((int(record[0]), int(record[1]), float(record[2])))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    return SparseDisparitySet.from_points(rows)


def write_points_csv(points: SparseDisparitySet, path, header: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write("x,y,d\n")
        for p in points:
            fh.write(f"{p.x},{p.y},{p.d!r}\n")
