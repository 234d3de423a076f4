"""Mask propagation over a feature-similarity memory bank.

Each video frame is a feature grid (C,H,W) plus a soft label mask. A
memory bank keeps recent frames (optionally pinning the first,
ground-truth frame forever). To label a new frame we score every
(memory pixel, query pixel) pair with a similarity kernel, keep the k
strongest memory pixels per query pixel, softmax their scores, and blend
the memory pixels' label probabilities with those weights.

Affinity rows are slot-major: row = slot * H*W + (y * W + x) of the
memory pixel, column = y * W + x of the query pixel. Scores are float64
and the kernels are single-threaded per video so repeated runs agree
bit for bit regardless of --threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionError, ValidationError
from .fmap import FeatureMap
from .masks import LabelMask, harden  # noqa: F401  (harden re-exported: argmax readout lives with masks)

SIMILARITIES = ("cos", "l1", "l2")
DEFAULT_TEMPERATURES = {"cos": 0.07, "l1": 1.0, "l2": 1.0}
DEFAULT_TOPK = 10
DEFAULT_MEMORY_SIZE = 8


@dataclass(frozen=True)
class GridShape:
    """Geometry of one affinity matrix: memory slots over an H x W grid."""

    slots: int
    height: int
    width: int

    @property
    def pixels(self) -> int:
        return self.height * self.width

    @property
    def rows(self) -> int:
        return self.slots * self.pixels

    def unravel_row(self, row: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row index -> (slot, mem_y, mem_x)."""
        slot, flat = np.divmod(row, self.pixels)
        y, x = np.divmod(flat, self.width)
        return slot, y, x

    def unravel_col(self, col: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.divmod(col, self.width)


@dataclass(frozen=True)
class AffinityConfig:
    """Similarity kernel plus readout knobs (top-k count, softmax temperature)."""

    similarity: str = "cos"
    topk: int = DEFAULT_TOPK
    temperature: float | None = None  # None -> kernel default

    def __post_init__(self) -> None:
        if self.similarity not in SIMILARITIES:
            raise ValidationError(f"similarity must be one of {SIMILARITIES}, got {self.similarity!r}")
        if self.topk < 1:
            raise ValidationError(f"topk must be >= 1, got {self.topk}")
        if self.temperature is not None and not self.temperature > 0:
            raise ValidationError(f"temperature must be positive, got {self.temperature}")

    def resolved_temperature(self) -> float:
        if self.temperature is not None:
            return float(self.temperature)
        return DEFAULT_TEMPERATURES[self.similarity]

    def with_overrides(self, **kw) -> "AffinityConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class AffinityMatrix:
    """Dense memory-pixel x query-pixel scores with their grid geometry.

    Fresh matrices from compute_affinity are fully finite; filters may
    knock entries down to -inf to exclude them from the top-k readout.
    NaN and +inf never appear.
    """

    scores: np.ndarray
    grid: GridShape

    def __post_init__(self) -> None:
        if self.scores.shape != (self.grid.rows, self.grid.pixels):
            raise DimensionError(
                f"affinity shape {self.scores.shape} does not match grid "
                f"{(self.grid.rows, self.grid.pixels)}"
            )
        if np.isnan(self.scores).any():
            raise ValidationError("affinity scores contain NaN")
        if np.isposinf(self.scores).any():
            raise ValidationError("affinity scores contain +inf")

    def with_scores(self, scores: np.ndarray) -> "AffinityMatrix":
        return AffinityMatrix(scores=scores, grid=self.grid)


@dataclass
class _Entry:
    frame_index: int
    features: np.ndarray  # (C,H,W) float32
    mask_planes: np.ndarray  # (objs+1,H,W) float64


@dataclass
class MemoryBank:
    """Rolling store of (frame index, features, soft mask), oldest first.

    With pin_first the earliest entry (the ground-truth frame) is never
    evicted; overflow drops the oldest unpinned entry instead.
    """

    capacity: int = DEFAULT_MEMORY_SIZE
    pin_first: bool = True
    _entries: list[_Entry] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValidationError(f"capacity must be >= 1, got {self.capacity}")

    def __len__(self) -> int:
        return len(self._entries)

    def add(
        self,
        frame_index: int,
        features: np.ndarray | FeatureMap,
        mask: LabelMask | np.ndarray,
    ) -> None:
        feats = features.data if isinstance(features, FeatureMap) else np.asarray(features)
        if feats.ndim != 3:
            raise DimensionError(f"features must be (C,H,W), got shape {feats.shape}")
        if isinstance(mask, LabelMask):
            planes = mask.one_hot() if mask.is_hard else mask.data
        else:
            planes = np.asarray(mask, dtype=np.float64)
        if planes.ndim != 3:
            raise DimensionError(f"mask planes must be (objs+1,H,W), got shape {planes.shape}")
        if planes.shape[1:] != feats.shape[1:]:
            raise DimensionError(
                f"mask grid {planes.shape[1:]} does not match feature grid {feats.shape[1:]}"
            )
        if self._entries:
            first = self._entries[0]
            if feats.shape != first.features.shape:
                raise DimensionError(
                    f"feature shape {feats.shape} does not match bank shape {first.features.shape}"
                )
            if planes.shape[0] != first.mask_planes.shape[0]:
                raise DimensionError("object count changed between memory entries")
        if len(self._entries) == self.capacity:
            drop = 1 if self.pin_first else 0
            if drop >= len(self._entries):
                return  # capacity 1 with a pinned entry: nothing evictable
            del self._entries[drop]
        self._entries.append(
            _Entry(
                frame_index=frame_index,
                features=np.ascontiguousarray(feats, dtype=np.float32),
                mask_planes=np.asarray(planes, dtype=np.float64),
            )
        )

    def frame_indices(self) -> list[int]:
        return [e.frame_index for e in self._entries]

    def features_array(self) -> np.ndarray:
        self._require_nonempty()
        return np.stack([e.features for e in self._entries])

    def masks_array(self) -> np.ndarray:
        self._require_nonempty()
        return np.stack([e.mask_planes for e in self._entries])

    def grid_shape(self) -> GridShape:
        self._require_nonempty()
        _, h, w = self._entries[0].features.shape
        return GridShape(slots=len(self._entries), height=h, width=w)

    def next_frame_index(self) -> int:
        return max(self.frame_indices(), default=0) + 1

    def _require_nonempty(self) -> None:
        if not self._entries:
            raise ValidationError("memory bank is empty")


def _as_rows(stack: np.ndarray) -> np.ndarray:
    """(N,C,H,W) -> (N*H*W, C) in slot-major pixel order, float64."""
    n, c, h, w = stack.shape
    return stack.reshape(n, c, h * w).transpose(0, 2, 1).reshape(n * h * w, c).astype(np.float64)


def affinity_scores(
    memory_features: np.ndarray, query_features: np.ndarray, similarity: str
) -> np.ndarray:
    """Raw kernel: (N,C,H,W) x (C,H,W) -> (N*H*W, H*W) float64 scores.

    cos is the dot product of channel-unit vectors (all-zero vectors stay
    zero and score 0 against everything); l1 and l2 are negated Minkowski
    distances so larger always means closer.
    """
    mem = np.asarray(memory_features)
    qry = np.asarray(query_features)
    if mem.ndim != 4 or qry.ndim != 3:
        raise DimensionError(
            f"expected memory (N,C,H,W) and query (C,H,W), got {mem.shape} and {qry.shape}"
        )
    if mem.shape[1:] != qry.shape:
        raise DimensionError(f"memory grid {mem.shape[1:]} does not match query grid {qry.shape}")
    if similarity not in SIMILARITIES:
        raise ValidationError(f"similarity must be one of {SIMILARITIES}, got {similarity!r}")

    mrows = _as_rows(mem)
    qrows = _as_rows(qry[None])
    if similarity == "cos":
        mn = np.linalg.norm(mrows, axis=1, keepdims=True)
        qn = np.linalg.norm(qrows, axis=1, keepdims=True)
        mrows = np.divide(mrows, mn, out=np.zeros_like(mrows), where=mn > 0)
        qrows = np.divide(qrows, qn, out=np.zeros_like(qrows), where=qn > 0)
        return np.einsum("mc,qc->mq", mrows, qrows, optimize=False)
    if similarity == "l1":
        return -cdist(mrows, qrows, metric="cityblock")
    return -cdist(mrows, qrows, metric="euclidean")


def compute_affinity(
    bank: MemoryBank, query: FeatureMap | np.ndarray, cfg: AffinityConfig
) -> AffinityMatrix:
    """Score every memory pixel against every query pixel."""
    qry = query.data if isinstance(query, FeatureMap) else np.asarray(query)
    scores = affinity_scores(bank.features_array(), qry, cfg.similarity)
    return AffinityMatrix(scores=scores, grid=bank.grid_shape())


def top_k_rows(scores: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-column indices and values of the k largest entries.

    Ordered by descending value; equal values break toward the lower row
    index. k must already be clamped to the number of rows.
    """
    # Stable ascending sort of the negated matrix = descending with
    # ties kept in original (increasing row) order.
    order = np.argsort(-scores, axis=0, kind="stable")[:k]
    vals = np.take_along_axis(scores, order, axis=0)
    return order, vals


def propagate_mask(bank: MemoryBank, affinity: AffinityMatrix, cfg: AffinityConfig) -> LabelMask:
    """Blend memory label planes into query label planes.

    Per query pixel: softmax over its top-k memory scores, then a convex
    combination of those memory pixels' label probabilities. Entries at
    -inf get weight exp(-inf) = 0; if every selected entry is -inf the
    weights fall back to uniform over the selection.
    """
    memory_masks = bank.masks_array()  # (N, objs+1, H, W)
    n, planes_per, h, w = memory_masks.shape
    grid = affinity.grid
    if (grid.slots, grid.height, grid.width) != (n, h, w):
        raise DimensionError(
            f"affinity grid {grid} does not match bank ({n} slots, {h}x{w})"
        )
    k = cfg.topk
    if k > grid.rows:
        warnings.warn(
            f"topk={k} exceeds {grid.rows} memory pixels; clamping", RuntimeWarning, stacklevel=2
        )
        k = grid.rows
    temperature = cfg.resolved_temperature()

    idx, vals = top_k_rows(affinity.scores, k)
    peak = vals[0]  # row 0 holds each column's maximum
    finite_peak = np.isfinite(peak)
    with np.errstate(invalid="ignore"):
        shifted = np.where(finite_peak[None, :], (vals - peak[None, :]) / temperature, 0.0)
    weights = np.exp(shifted)
    weights[:, ~finite_peak] = 1.0  # every candidate excluded: uniform blend
    weights /= weights.sum(axis=0, keepdims=True)

    mem_flat = memory_masks.transpose(1, 0, 2, 3).reshape(planes_per, n * h * w)
    gathered = mem_flat[:, idx]  # (objs+1, k, pixels)
    out = np.einsum("lkq,kq->lq", gathered, weights).reshape(planes_per, h, w)
    # Convex combinations of distributions are distributions; renormalize
    # only to shave accumulated rounding before validation.
    out /= out.sum(axis=0, keepdims=True)
    return LabelMask.soft(out)


def step(
    bank: MemoryBank,
    query: FeatureMap | np.ndarray,
    cfg: AffinityConfig,
    corr_filter=None,
    frame_index: int | None = None,
) -> tuple[LabelMask, AffinityMatrix]:
    """One propagation step: score the query, filter, read out, update memory.

    corr_filter, if given, must expose apply(affinity) -> AffinityMatrix
    (e.g. the displacement-radius or ground-truth filters). The query and
    its predicted soft mask are appended to the bank, evicting the oldest
    unpinned entry on overflow. Returns (soft mask, affinity as used).
    """
    affinity = compute_affinity(bank, query, cfg)
    if corr_filter is not None:
        affinity = corr_filter.apply(affinity)
    predicted = propagate_mask(bank, affinity, cfg)
    if frame_index is None:
        frame_index = bank.next_frame_index()
    bank.add(frame_index, query, predicted)
    return predicted, affinity
