"""
Dataset ingestion and export.

Formats: PFM float maps (Middlebury), 16-bit PNG disparities (KITTI, value
over 256 with 0 meaning invalid), 8-bit grayscale or RGB images, Middlebury
``calib.txt`` and false-colour PNG renderings.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidInputError
from .grids import INVALID, is_valid
from .guidance import SparseDisparitySet, read_points_csv, write_points_csv

__all__ = [
    "DatasetPair",
    "load_disparity",
    "load_gray",
    "load_middlebury",
    "normalize_convention",
    "read_calib",
    "read_disparity_png16",
    "read_pfm",
    "read_points_csv",
    "render_falsecolor",
    "save_disparity",
    "write_disparity_png16",
    "write_pfm",
    "write_points_csv",
]

_WS = b" \t\r\n"


def _token(buf: bytes, pos: int, what: str) -> tuple[bytes, int, int]:
    """Skip whitespace (at least one byte) and read the next token.

    Returns the token with its start and end offsets.
    """
    start = pos
    while pos < len(buf) and buf[pos] in _WS:
        pos += 1
    if pos == start:
        raise FormatError(f"expected whitespace before {what}", pos)
    end = pos
    while end < len(buf) and buf[end] not in _WS:
        end += 1
    if end == pos:
        raise FormatError(f"missing {what}", pos)
    return buf[pos:end], pos, end


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM map; non-finite samples become ``INVALID``."""
    buf = Path(path).read_bytes()
    if buf[:2] == b"PF":
        raise FormatError("colour PFM (PF) is not a disparity map", 0)
    if buf[:2] != b"Pf":
        raise FormatError("missing 'Pf' magic", 0)
    pos = 2
    fields = {}
    for name in ("width", "height", "scale"):
        tok, start, next_pos = _token(buf, pos, name)
        try:
            fields[name] = float(tok) if name == "scale" else int(tok)
        except ValueError:
            raise FormatError(f"bad {name} {tok!r}", start) from None
        pos = next_pos
    width, height, scale = fields["width"], fields["height"], fields["scale"]
    if width <= 0 or height <= 0:
        raise FormatError(f"bad dimensions {width}x{height}", 2)
    if scale == 0:
        raise FormatError("scale must be nonzero", pos)
    if pos >= len(buf) or buf[pos] not in _WS:
        raise FormatError("expected a single whitespace byte after the scale", pos)
    pos += 1
    need = width * height * 4
    if len(buf) - pos < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(buf) - pos}", len(buf))
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(buf, dtype=dtype, count=width * height, offset=pos)
    disp = np.flipud(data.reshape(height, width)).astype(np.float64)
    disp[~np.isfinite(disp)] = INVALID
    return disp


def write_pfm(disparity, path) -> None:
    """Write a little-endian PFM (scale -1.0); invalid pixels are stored as +inf."""
    disp = np.asarray(disparity, dtype=np.float64)
    if disp.ndim != 2:
        raise InvalidInputError(f"disparity must be 2-D, got shape {disp.shape}")
    h, w = disp.shape
    payload = np.where(is_valid(disp), disp, np.inf).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.flipud(payload).tobytes())


def read_disparity_png16(path) -> np.ndarray:
    """Read a KITTI-style 16-bit disparity PNG: value / 256, 0 is invalid."""
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise FormatError(f"{path}: expected a 16-bit single-channel PNG, got mode {img.mode}")
        raw = np.array(img, dtype=np.float64)
    return np.where(raw == 0, INVALID, raw / 256.0)


def write_disparity_png16(disparity, path) -> None:
    disp = np.asarray(disparity, dtype=np.float64)
    stored = np.where(is_valid(disp), np.rint(disp * 256.0), 0)
    if stored.min() < 0 or stored.max() > 65535:
        raise InvalidInputError("disparities must lie in [0, 256) for 16-bit PNG storage")
    Image.fromarray(stored.astype(np.uint16)).save(path, format="PNG")


def load_disparity(path) -> np.ndarray:
    """Dispatch on suffix: ``.pfm`` or 16-bit ``.png``."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path)
    if suffix == ".png":
        return read_disparity_png16(path)
    raise FormatError(f"{path}: unsupported disparity container {suffix!r}")


def save_disparity(disparity, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        write_pfm(disparity, path)
    elif suffix == ".png":
        write_disparity_png16(disparity, path)
    else:
        raise FormatError(f"{path}: unsupported disparity container {suffix!r}")


def load_gray(path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB image as float intensities.

    RGB is reduced with luma weights 0.299 / 0.587 / 0.114 and rounded to the
    nearest integer (halves up).
    """
    with Image.open(path) as img:
        mode = img.mode
        if mode == "P":
            img = img.convert("RGBA" if "transparency" in img.info else "RGB")
            mode = img.mode
        if mode == "L":
            return np.array(img, dtype=np.float64)
        if mode in ("RGB", "RGBA"):
            rgb = np.array(img, dtype=np.float64)[..., :3]
        else:
            raise FormatError(f"{path}: unsupported image mode {mode} (need 8-bit gray or RGB)")
    luma = rgb @ np.array([0.299, 0.587, 0.114])
    return np.floor(luma + 0.5)


def read_calib(path) -> tuple[int, int]:
    """Disparity search range ``(0, ndisp - 1)`` from a Middlebury ``calib.txt``."""
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition("=")
        if sep:
            values[key.strip()] = value.strip()
    if "ndisp" not in values:
        raise FormatError(f"{path}: no 'ndisp' entry")
    try:
        ndisp = int(float(values["ndisp"]))
    except ValueError:
        raise FormatError(f"{path}: bad ndisp {values['ndisp']!r}") from None
    if ndisp < 1:
        raise FormatError(f"{path}: ndisp must be >= 1, got {ndisp}")
    return 0, ndisp - 1


def falsecolor_map() -> np.ndarray:
    """Fixed 256-entry blue-to-red (jet) colour table, ``uint8`` of shape ``(256, 3)``."""
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    return np.rint(np.stack([r, g, b], axis=1) * 255).astype(np.uint8)


def falsecolor(disparity, vmin=None, vmax=None) -> np.ndarray:
    """RGB rendering: the valid range maps linearly onto the colour table, invalid is black."""
    disp = np.asarray(disparity, dtype=np.float64)
    valid = is_valid(disp)
    rgb = np.zeros(disp.shape + (3,), dtype=np.uint8)
    if not valid.any():
        return rgb
    lo = disp[valid].min() if vmin is None else vmin
    hi = disp[valid].max() if vmax is None else vmax
    span = hi - lo
    scaled = (disp[valid] - lo) / span if span > 0 else np.zeros(valid.sum())
    idx = np.clip(np.rint(scaled * 255), 0, 255).astype(np.intp)
    rgb[valid] = falsecolor_map()[idx]
    return rgb


def render_falsecolor(disparity, path, vmin=None, vmax=None) -> None:
    Image.fromarray(falsecolor(disparity, vmin, vmax), mode="RGB").save(path, format="PNG")


def normalize_convention(disparity, convention: str = "left_minus"):
    """Map a dataset's disparity sign onto the internal ``x_match = x - d`` form.

    ``"left_minus"`` (Middlebury, KITTI) is already internal. ``"left_plus"``
    sources, where ``x_match = x + d``, are negated. The mapping is its own
    inverse. Works on dense maps and on :class:`SparseDisparitySet`.
    """
    if convention == "left_minus":
        return disparity
    if convention != "left_plus":
        raise InvalidInputError(f"unknown disparity convention {convention!r}")
    if isinstance(disparity, SparseDisparitySet):
        return SparseDisparitySet(disparity.x, disparity.y, -disparity.d)
    disp = np.asarray(disparity, dtype=np.float64)
    return np.where(is_valid(disp), -disp, INVALID)


@dataclass(frozen=True)
class DatasetPair:
    left: np.ndarray
    right: np.ndarray
    gt: np.ndarray | None
    d_min: int
    d_max: int
    convention: str = "left_minus"

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise InvalidInputError(f"left {self.left.shape} and right {self.right.shape} differ in size")
        if self.gt is not None and self.gt.shape != self.left.shape:
            raise InvalidInputError(f"ground truth {self.gt.shape} does not match images {self.left.shape}")


def load_middlebury(folder) -> DatasetPair:
    """Load ``im0.png``, ``im1.png``, ``calib.txt`` and, if present, ``disp0GT.pfm`` (or ``disp0.pfm``)."""
    folder = Path(folder)
    gt = None
    for name in ("disp0GT.pfm", "disp0.pfm"):
        if (folder / name).exists():
            gt = read_pfm(folder / name)
            break
    d_min, d_max = read_calib(folder / "calib.txt")
    return DatasetPair(load_gray(folder / "im0.png"), load_gray(folder / "im1.png"), gt, d_min, d_max)
