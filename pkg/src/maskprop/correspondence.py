"""Argmax correspondences over an affinity matrix, and affinity filters.

A correspondence links each query pixel to its strongest memory pixel.
Each link is tagged by the foreground status of its two endpoints:
FG_FG (both on an object), BG_BG (both background), FG_BG (mixed, the
failure mode worth measuring). Two filters knock affinity entries down
to -inf so the readout cannot use them: a displacement-radius filter
(links longer than r in grid units are dropped) and a ground-truth
filter (mixed-endpoint links are dropped wherever true masks are known).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import DimensionError, ValidationError
from .masks import LabelMask
from .propagation import AffinityMatrix, GridShape

DEFAULT_MAG_RADIUS = 35.3553  # ~= 25 * sqrt(2) grid units


class Category(IntEnum):
    UNKNOWN = 0
    FG_FG = 1
    BG_BG = 2
    FG_BG = 3


@dataclass(frozen=True)
class CorrespondenceSet:
    """Per-query-pixel argmax matches over one affinity matrix.

    Arrays are indexed by flat query pixel (row-major). rows holds the
    matched affinity row; categories holds Category values (UNKNOWN until
    categorize() has run).
    """

    grid: GridShape
    rows: np.ndarray  # (pixels,) int64
    scores: np.ndarray  # (pixels,) float64
    categories: np.ndarray  # (pixels,) uint8

    def __post_init__(self) -> None:
        q = self.grid.pixels
        if self.rows.shape != (q,) or self.scores.shape != (q,) or self.categories.shape != (q,):
            raise DimensionError("correspondence arrays must have one entry per query pixel")

    @property
    def slot(self) -> np.ndarray:
        return self.grid.unravel_row(self.rows)[0]

    @property
    def memory_yx(self) -> tuple[np.ndarray, np.ndarray]:
        _, y, x = self.grid.unravel_row(self.rows)
        return y, x

    @property
    def query_yx(self) -> tuple[np.ndarray, np.ndarray]:
        cols = np.arange(self.grid.pixels, dtype=np.int64)
        return self.grid.unravel_col(cols)

    def displacement(self) -> tuple[np.ndarray, np.ndarray]:
        """(dy, dx) from query pixel to matched memory pixel, grid units."""
        my, mx = self.memory_yx
        qy, qx = self.query_yx
        return my - qy, mx - qx

    def magnitude(self) -> np.ndarray:
        dy, dx = self.displacement()
        return np.sqrt((dy * dy + dx * dx).astype(np.float64))

    def category_counts(self) -> dict[str, int]:
        return {c.name: int(np.count_nonzero(self.categories == c)) for c in Category}


def extract_correspondences(affinity: AffinityMatrix) -> CorrespondenceSet:
    """Argmax over memory pixels per query pixel; ties go to the lower row."""
    rows = np.argmax(affinity.scores, axis=0).astype(np.int64)
    scores = affinity.scores[rows, np.arange(affinity.grid.pixels)]
    cats = np.full(affinity.grid.pixels, Category.UNKNOWN, dtype=np.uint8)
    return CorrespondenceSet(grid=affinity.grid, rows=rows, scores=scores, categories=cats)


def _foreground_rows(
    grid: GridShape, mask_mem: LabelMask | list[LabelMask] | tuple[LabelMask, ...]
) -> np.ndarray:
    """Foreground flag for every affinity row (slot-major), from memory GT.

    A single mask is shared by all slots; a sequence supplies one mask
    per slot.
    """
    if isinstance(mask_mem, LabelMask):
        masks = [mask_mem] * grid.slots
    else:
        masks = list(mask_mem)
        if len(masks) != grid.slots:
            raise DimensionError(f"need {grid.slots} memory masks, got {len(masks)}")
    flags = []
    for m in masks:
        if (m.height, m.width) != (grid.height, grid.width):
            raise DimensionError(
                f"memory mask {m.height}x{m.width} does not match grid {grid.height}x{grid.width}"
            )
        flags.append(m.foreground().reshape(-1))
    return np.concatenate(flags)


def _foreground_cols(grid: GridShape, mask_q: LabelMask) -> np.ndarray:
    if (mask_q.height, mask_q.width) != (grid.height, grid.width):
        raise DimensionError(
            f"query mask {mask_q.height}x{mask_q.width} does not match grid {grid.height}x{grid.width}"
        )
    return mask_q.foreground().reshape(-1)


def categorize(
    corrs: CorrespondenceSet,
    mask_mem: LabelMask | list[LabelMask],
    mask_q: LabelMask,
) -> CorrespondenceSet:
    """Tag each correspondence by its endpoints' foreground status.

    Both foreground -> FG_FG; both background -> BG_BG; mixed either way
    -> FG_BG. The three tags partition the query grid.
    """
    fg_rows = _foreground_rows(corrs.grid, mask_mem)
    fg_cols = _foreground_cols(corrs.grid, mask_q)
    src_fg = fg_rows[corrs.rows]
    dst_fg = fg_cols
    cats = np.where(
        src_fg & dst_fg,
        np.uint8(Category.FG_FG),
        np.where(~src_fg & ~dst_fg, np.uint8(Category.BG_BG), np.uint8(Category.FG_BG)),
    ).astype(np.uint8)
    return replace(corrs, categories=cats)


def fg_bg_percentage(
    affinity: AffinityMatrix,
    mask_mem: LabelMask | list[LabelMask],
    mask_q: LabelMask,
    k: int | None = None,
) -> float:
    """Fraction of the k globally strongest affinity entries with mixed endpoints.

    k defaults to one entry per query pixel (H*W). Ties at the cutoff go
    to the lower flat (row-major) index. Lower is better: mixed links are
    the ones that smear labels across object boundaries.
    """
    grid = affinity.grid
    if k is None:
        k = grid.pixels
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    total = affinity.scores.size
    if k > total:
        warnings.warn(f"k={k} exceeds {total} affinity entries; clamping", RuntimeWarning, stacklevel=2)
        k = total
    flat = affinity.scores.reshape(-1)
    order = np.argsort(-flat, kind="stable")[:k]
    r, c = np.divmod(order, grid.pixels)
    fg_rows = _foreground_rows(grid, mask_mem)
    fg_cols = _foreground_cols(grid, mask_q)
    mixed = fg_rows[r] ^ fg_cols[c]
    return float(np.count_nonzero(mixed)) / float(k)


def displacement_keep_mask(grid: GridShape, radius: float) -> np.ndarray:
    """(rows, cols) bool: True where the memory->query displacement is <= radius.

    Geometry only depends on pixel positions, so the per-slot block is
    computed once and tiled.
    """
    ys, xs = np.divmod(np.arange(grid.pixels, dtype=np.int64), grid.width)
    dy = ys[:, None] - ys[None, :]
    dx = xs[:, None] - xs[None, :]
    mag = np.sqrt((dy * dy + dx * dx).astype(np.float64))
    keep = mag <= radius
    return np.tile(keep, (grid.slots, 1))


def mag_filter(affinity: AffinityMatrix, radius: float) -> AffinityMatrix:
    """Exclude entries whose displacement magnitude exceeds radius.

    Boundary inclusive: magnitude == radius survives. Excluded entries
    become -inf so no readout can select them ahead of a surviving one.
    """
    if not radius > 0:
        raise ValidationError(f"radius must be positive, got {radius}")
    keep = displacement_keep_mask(affinity.grid, radius)
    return affinity.with_scores(np.where(keep, affinity.scores, -np.inf))


def oracle_filter(
    affinity: AffinityMatrix,
    gt_mem: LabelMask | list[LabelMask],
    gt_q: LabelMask,
) -> AffinityMatrix:
    """Exclude mixed-endpoint entries using ground-truth masks.

    Same-status entries (both foreground or both background) are kept
    untouched; this is the upper bound a perfect correspondence filter
    could reach.
    """
    fg_rows = _foreground_rows(affinity.grid, gt_mem)
    fg_cols = _foreground_cols(affinity.grid, gt_q)
    mixed = fg_rows[:, None] ^ fg_cols[None, :]
    return affinity.with_scores(np.where(mixed, -np.inf, affinity.scores))


@dataclass(frozen=True)
class CorrespondenceFilter:
    """Configured affinity filter: displacement-radius, ground-truth, or none.

    kind "mag" needs radius > 0; kind "oracle" needs both ground-truth
    masks (memory-side mask may be a per-slot list).
    """

    kind: str = "none"  # "none" | "mag" | "oracle"
    radius: float | None = None
    gt_mem: LabelMask | list[LabelMask] | None = None
    gt_q: LabelMask | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "mag", "oracle"):
            raise ValidationError(f"filter kind must be none|mag|oracle, got {self.kind!r}")
        if self.kind == "mag":
            if self.radius is None or not self.radius > 0:
                raise ValidationError(f"mag filter needs radius > 0, got {self.radius}")
        if self.kind == "oracle":
            if self.gt_mem is None or self.gt_q is None:
                raise ValidationError("oracle filter needs both ground-truth masks")

    def apply(self, affinity: AffinityMatrix) -> AffinityMatrix:
        if self.kind == "none":
            return affinity
        if self.kind == "mag":
            return mag_filter(affinity, self.radius)
        return oracle_filter(affinity, self.gt_mem, self.gt_q)


def survival_counts(filtered: AffinityMatrix) -> dict[str, int]:
    """How many affinity entries survived filtering (finite vs -inf)."""
    finite = int(np.count_nonzero(np.isfinite(filtered.scores)))
    total = int(filtered.scores.size)
    return {"kept": finite, "dropped": total - finite, "total": total}
