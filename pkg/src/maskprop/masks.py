"""Label masks: hard label grids and soft per-object probability planes.

Hard masks hold one uint8 label per pixel (0 = background, 1..objs =
object ids). Soft masks hold objs+1 probability planes (plane 0 =
background) that sum to 1 at every pixel. File formats: MSK1 (binary
label grid) and 8-bit indexed PNG (palette index = label).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError, FormatError, ValidationError

MSK1_MAGIC = b"MSK1"
MSK1_VERSION = 1
_MSK1_HEADER = struct.Struct("<4sHBBII")

SOFT_SUM_TOL = 1e-5


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel object labels, either hard (H,W) or soft (objs+1,H,W)."""

    mode: str  # "hard" | "soft"
    objs: int
    data: np.ndarray

    @classmethod
    def hard(cls, grid: np.ndarray, objs: int | None = None) -> "LabelMask":
        grid = np.asarray(grid)
        if grid.ndim != 2:
            raise ValidationError(f"hard mask must be 2-D, got shape {grid.shape}")
        grid = grid.astype(np.uint8, copy=False)
        present = int(grid.max()) if grid.size else 0
        if objs is None:
            objs = present
        if present > objs:
            raise ValidationError(f"hard mask holds label {present} > objs={objs}")
        return cls(mode="hard", objs=int(objs), data=grid)

    @classmethod
    def soft(cls, planes: np.ndarray) -> "LabelMask":
        planes = np.asarray(planes, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] < 1:
            raise ValidationError(f"soft mask must be (objs+1,H,W), got shape {planes.shape}")
        if planes.min() < -SOFT_SUM_TOL or planes.max() > 1 + SOFT_SUM_TOL:
            raise ValidationError("soft mask values must lie in [0, 1]")
        sums = planes.sum(axis=0)
        if np.abs(sums - 1.0).max() > SOFT_SUM_TOL:
            raise ValidationError("soft mask pixel probabilities must sum to 1")
        return cls(mode="soft", objs=planes.shape[0] - 1, data=planes)

    @property
    def is_hard(self) -> bool:
        return self.mode == "hard"

    @property
    def height(self) -> int:
        return self.data.shape[-2]

    @property
    def width(self) -> int:
        return self.data.shape[-1]

    def foreground(self) -> np.ndarray:
        """Boolean H x W grid, True where any object (label > 0)."""
        if not self.is_hard:
            raise ValidationError("foreground() needs a hard mask; call harden() first")
        return self.data > 0

    def one_hot(self) -> np.ndarray:
        """(objs+1, H, W) float64 indicator planes of a hard mask."""
        if not self.is_hard:
            return self.data
        planes = np.zeros((self.objs + 1, self.height, self.width), dtype=np.float64)
        for label in range(self.objs + 1):
            planes[label] = self.data == label
        return planes


def harden(mask: LabelMask) -> LabelMask:
    """Per-pixel argmax over planes; ties go to the lowest label."""
    if mask.is_hard:
        raise ValidationError("harden() expects a soft mask")
    labels = np.argmax(mask.data, axis=0).astype(np.uint8)
    return LabelMask.hard(labels, objs=mask.objs)


def write_msk1(mask: LabelMask, path: str | Path) -> None:
    if not mask.is_hard:
        raise ValidationError("MSK1 stores hard masks; harden() first")
    header = _MSK1_HEADER.pack(MSK1_MAGIC, MSK1_VERSION, 0, mask.objs, mask.height, mask.width)
    Path(path).write_bytes(header + np.ascontiguousarray(mask.data, dtype=np.uint8).tobytes())


def read_msk1(path: str | Path) -> LabelMask:
    raw = Path(path).read_bytes()
    if len(raw) < _MSK1_HEADER.size:
        raise FormatError(f"{path}: file shorter than MSK1 header")
    magic, version, dtype, objs, h, w = _MSK1_HEADER.unpack_from(raw)
    if magic != MSK1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MSK1_MAGIC!r}")
    if version != MSK1_VERSION:
        raise FormatError(f"{path}: unsupported MSK1 version {version}")
    if dtype != 0:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    expected = h * w
    actual = len(raw) - _MSK1_HEADER.size
    if actual != expected:
        raise FormatError(f"{path}: payload length mismatch, expected {expected} bytes, got {actual}")
    grid = np.frombuffer(raw, dtype=np.uint8, offset=_MSK1_HEADER.size).reshape(h, w)
    if grid.size and int(grid.max()) > objs:
        raise ValidationError(f"{path}: label {int(grid.max())} exceeds header objs={objs}")
    return LabelMask.hard(grid.copy(), objs=objs)


def label_palette() -> list[int]:
    """256-color palette mapping label ids to distinct colors (bit-reversal scheme)."""
    pal = []
    for i in range(256):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        pal.extend([r, g, b])
    return pal


def write_png(mask: LabelMask, path: str | Path) -> None:
    """Write a hard mask as an 8-bit indexed PNG.

    Palette index = label; the palette carries exactly objs+1 entries, so
    the object count survives the round trip even when high labels are
    absent from the pixels.
    """
    if not mask.is_hard:
        raise ValidationError("PNG export stores hard masks; harden() first")
    im = Image.fromarray(mask.data, mode="P")
    im.putpalette(label_palette()[: 3 * (mask.objs + 1)])
    im.save(Path(path), format="PNG")


def read_png(path: str | Path, objs: int | None = None) -> LabelMask:
    """Read an 8-bit indexed PNG mask (palette index = object id, 0 = background).

    Object count: explicit objs argument wins; else a short palette
    declares objs = entries - 1; a full 256-entry palette (the usual
    benchmark export) falls back to the highest label present.
    """
    try:
        im = Image.open(Path(path))
        im.load()
    except Exception as exc:  # Pillow raises several unrelated types
        raise FormatError(f"{path}: not a readable PNG ({exc})") from exc
    if im.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {im.format}")
    if im.mode != "P":
        raise FormatError(f"{path}: mask PNGs must be indexed (mode P), got mode {im.mode}")
    grid = np.asarray(im, dtype=np.uint8)
    if objs is None:
        palette = im.getpalette()
        entries = len(palette) // 3 if palette else 0
        if 0 < entries < 256:
            objs = entries - 1
    return LabelMask.hard(grid, objs=objs)


def read_mask(path: str | Path, objs: int | None = None) -> LabelMask:
    """Load a hard mask from an MSK1 file or an indexed PNG, by magic bytes.

    For PNGs, objs defaults to the highest label present; pass objs to widen
    the label space (e.g. to the count declared by the first frame).
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MSK1_MAGIC:
        return read_msk1(path)
    if head == b"\x89PNG":
        return read_png(path, objs=objs)
    raise FormatError(f"{path}: unrecognized mask file (magic {head!r})")


def _box_integrals(planes: np.ndarray, edges_y: np.ndarray, edges_x: np.ndarray) -> np.ndarray:
    """Integrals of each plane over the grid of boxes given by fractional edges.

    The running integral of a piecewise-constant image is piecewise-bilinear,
    so linear interpolation of the cumulative-sum table is exact.
    """
    p, h, w = planes.shape
    cum = np.zeros((p, h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(planes, axis=1), axis=2, out=cum[:, 1:, 1:])

    def interp(table: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
        n = table.shape[axis] - 1
        lo = np.clip(np.floor(coords).astype(np.int64), 0, n - 1)
        frac = coords - lo
        a = np.take(table, lo, axis=axis)
        b = np.take(table, lo + 1, axis=axis)
        shape = [1] * table.ndim
        shape[axis] = len(coords)
        frac = frac.reshape(shape)
        return a * (1.0 - frac) + b * frac

    at_y = interp(cum, edges_y, axis=1)
    at_yx = interp(at_y, edges_x, axis=2)
    return at_yx[:, 1:, 1:] - at_yx[:, :-1, 1:] - at_yx[:, 1:, :-1] + at_yx[:, :-1, :-1]


def _bilinear_resize(planes: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of each plane (half-pixel center convention)."""
    p, h, w = planes.shape

    def axis_weights(n_in: int, n_out: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.clip(np.floor(src).astype(np.int64), 0, max(n_in - 2, 0))
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    ylo, yhi, fy = axis_weights(h, out_h)
    xlo, xhi, fx = axis_weights(w, out_w)
    rows = planes[:, ylo, :] * (1.0 - fy)[None, :, None] + planes[:, yhi, :] * fy[None, :, None]
    out = rows[:, :, xlo] * (1.0 - fx)[None, None, :] + rows[:, :, xhi] * fx[None, None, :]
    return out


def resample_mask(mask: LabelMask, target_hw: tuple[int, int], direction: str) -> LabelMask:
    """Resample a mask between image and feature resolutions.

    down: hard (or soft) mask -> soft mask via exact area-fraction pooling
    per label plane, renormalized to sum 1. Thin objects keep fractional
    coverage instead of vanishing under large strides.
    up: soft mask -> bilinear interpolation of each plane, renormalized.
    """
    th, tw = target_hw
    if th < 1 or tw < 1:
        raise ValidationError(f"target dims must be >= 1, got {target_hw}")
    if direction == "down":
        planes = mask.one_hot()
        edges_y = np.arange(th + 1, dtype=np.float64) * (mask.height / th)
        edges_x = np.arange(tw + 1, dtype=np.float64) * (mask.width / tw)
        pooled = _box_integrals(planes, edges_y, edges_x)
        pooled /= pooled.sum(axis=0, keepdims=True)
        return LabelMask.soft(pooled)
    if direction == "up":
        if mask.is_hard:
            raise ValidationError("upsampling expects a soft mask")
        planes = _bilinear_resize(mask.data, th, tw)
        planes = np.clip(planes, 0.0, None)
        planes /= planes.sum(axis=0, keepdims=True)
        return LabelMask.soft(planes)
    raise ValidationError(f"direction must be 'down' or 'up', got {direction!r}")
