"""Random-dot stereo pairs with a planted disparity map."""
from __future__ import annotations

import numpy as np

from .grids import INVALID


def two_level_disparity(height: int, width: int, background: int = 5, foreground: int = 12) -> np.ndarray:
    """Background plane with a centred foreground rectangle."""
    disp = np.full((height, width), float(background))
    disp[height // 4:3 * height // 4, width // 4:3 * width // 4] = float(foreground)
    return disp


def random_dot_pair(disparity: np.ndarray, seed: int = 0, dot_size: int = 1):
    """Render a left/right random-dot pair seen with ``disparity``.

    Left pixel ``(x, y)`` reappears at ``(x - d, y)`` in the right image;
    nearer surfaces (larger ``d``) overwrite farther ones, and right pixels no
    left pixel maps to get fresh dots. ``dot_size`` makes square dots of that
    many pixels.

    Returns:
        ``(left, right, gt)``, where ``gt`` marks left pixels whose match
        falls outside the right image as invalid.
    """
    disparity = np.asarray(disparity)
    h, w = disparity.shape
    rng = np.random.default_rng(seed)

    def dots(rows, cols):
        coarse = rng.integers(0, 256, size=(-(-rows // dot_size), -(-cols // dot_size)))
        return np.kron(coarse, np.ones((dot_size, dot_size)))[:rows, :cols].astype(np.float64)

    left = dots(h, w)
    right = dots(h, w)
    d = np.rint(disparity).astype(np.intp)
    for y in range(h):
        for x in np.argsort(d[y], kind="stable"):
            xr = x - d[y, x]
            if 0 <= xr < w:
                right[y, xr] = left[y, x]
    xs = np.arange(w)[None, :]
    gt = np.where(xs - d >= 0, disparity.astype(np.float64), INVALID)
    return left, right, gt
