"""Segmentation quality metrics: region overlap, boundary accuracy, ranks.

Region score J is intersection-over-union of one object's pixels.
Boundary score F matches the two masks' 1-pixel contours within a disc
whose radius is a fraction of the image diagonal (benchmark-style
bipartite matching via dilation). Videos are scored per object over
frames 2..K (frame 1 is the given mask), then averaged.

spearman_rho is hand-rolled (Pearson over average-tied ranks) so library
implementations stay available as independent cross-checks in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, UndefinedCorrelationError, ValidationError
from .masks import LabelMask

DEFAULT_BOUNDARY_TOLERANCE = 0.008


def _object_region(mask: LabelMask, obj: int) -> np.ndarray:
    if not mask.is_hard:
        raise ValidationError("metrics expect hard masks; harden() first")
    return mask.data == obj


def _check_same_resolution(pred: LabelMask, gt: LabelMask) -> None:
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionError(
            f"resolution mismatch: pred {pred.height}x{pred.width} vs gt {gt.height}x{gt.width}"
        )


def jaccard(pred: LabelMask, gt: LabelMask, obj: int) -> float:
    """Intersection over union of one object's region; both-empty scores 1.0."""
    _check_same_resolution(pred, gt)
    p = _object_region(pred, obj)
    g = _object_region(gt, obj)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(p & g)) / float(union)


_CROSS = ndimage.generate_binary_structure(2, 1)  # 4-neighbor cross


def boundary_pixels(region: np.ndarray) -> np.ndarray:
    """Inner 1-pixel contour: region pixels with a 4-neighbor outside it.

    Pixels on the image border count as boundary (outside the frame is
    background).
    """
    if not region.any():
        return np.zeros_like(region, dtype=bool)
    eroded = ndimage.binary_erosion(region, structure=_CROSS, border_value=0)
    return region & ~eroded


def _match_radius(shape: tuple[int, int], tolerance: float) -> int:
    h, w = shape
    return int(np.ceil(tolerance * np.sqrt(h * h + w * w)))


def _disc(radius: int) -> np.ndarray:
    if radius < 1:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (yy * yy + xx * xx) <= radius * radius


def boundary_f(
    pred: LabelMask, gt: LabelMask, obj: int, tolerance: float = DEFAULT_BOUNDARY_TOLERANCE
) -> float:
    """Contour F-score: dilation-matched boundary precision/recall harmonic mean.

    tolerance is a fraction of the image diagonal; the match disc radius
    is its ceiling in pixels. Both boundaries empty scores 1.0; exactly
    one empty scores 0.0.
    """
    _check_same_resolution(pred, gt)
    if not tolerance > 0:
        raise ValidationError(f"tolerance must be positive, got {tolerance}")
    pb = boundary_pixels(_object_region(pred, obj))
    gb = boundary_pixels(_object_region(gt, obj))
    n_p = int(np.count_nonzero(pb))
    n_g = int(np.count_nonzero(gb))
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    disc = _disc(_match_radius((pred.height, pred.width), tolerance))
    gb_dilated = ndimage.binary_dilation(gb, structure=disc)
    pb_dilated = ndimage.binary_dilation(pb, structure=disc)
    precision = float(np.count_nonzero(pb & gb_dilated)) / float(n_p)
    recall = float(np.count_nonzero(gb & pb_dilated)) / float(n_g)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    positions = np.empty(len(v), dtype=np.float64)
    positions[order] = np.arange(1, len(v) + 1, dtype=np.float64)
    _, inverse = np.unique(v, return_inverse=True)
    sums = np.bincount(inverse, weights=positions)
    counts = np.bincount(inverse)
    return (sums / counts)[inverse]


def spearman_rho(xs, ys) -> float:
    """Rank correlation: Pearson correlation of average-tied ranks."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"inputs must be equal-length 1-D sequences, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise UndefinedCorrelationError(f"need at least 2 points, got {len(x)}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0.0:
        raise UndefinedCorrelationError("rank variance is zero; correlation undefined")
    return float((dx * dy).sum() / denom)


@dataclass(frozen=True)
class ObjectScore:
    j_per_frame: tuple[float, ...]
    f_per_frame: tuple[float, ...]

    @property
    def j_mean(self) -> float:
        return float(np.mean(self.j_per_frame))

    @property
    def f_mean(self) -> float:
        return float(np.mean(self.f_per_frame))

    @property
    def jf(self) -> float:
        return 0.5 * (self.j_mean + self.f_mean)


@dataclass(frozen=True)
class EvalResult:
    """Per-object and aggregate scores for one video, all in [0, 1]."""

    video: str
    per_object: dict[int, ObjectScore]

    @property
    def j_mean(self) -> float:
        return float(np.mean([s.j_mean for s in self.per_object.values()]))

    @property
    def f_mean(self) -> float:
        return float(np.mean([s.f_mean for s in self.per_object.values()]))

    @property
    def jf_mean(self) -> float:
        return 0.5 * (self.j_mean + self.f_mean)

    def as_percent(self) -> dict:
        return {
            "video": self.video,
            "J": 100.0 * self.j_mean,
            "F": 100.0 * self.f_mean,
            "J&F": 100.0 * self.jf_mean,
            "objects": {
                str(obj): {
                    "J": 100.0 * s.j_mean,
                    "F": 100.0 * s.f_mean,
                    "J&F": 100.0 * s.jf,
                }
                for obj, s in sorted(self.per_object.items())
            },
        }


def evaluate_video(
    preds: list[LabelMask],
    gts: list[LabelMask],
    num_objects: int | None = None,
    tolerance: float = DEFAULT_BOUNDARY_TOLERANCE,
    video: str = "",
) -> EvalResult:
    """Score predicted frames 2..K against ground truth, per object then averaged.

    num_objects defaults to the largest declared object count in the
    ground-truth frames. Frame 1 never appears here: it is the given mask.
    """
    if len(preds) != len(gts):
        raise DimensionError(f"got {len(preds)} predictions but {len(gts)} ground-truth frames")
    if not preds:
        raise ValidationError("need at least one (pred, gt) frame pair")
    if num_objects is None:
        num_objects = max(g.objs for g in gts)
    if num_objects < 1:
        raise ValidationError("no objects to evaluate")
    per_object: dict[int, ObjectScore] = {}
    for obj in range(1, num_objects + 1):
        js: list[float] = []
        fs: list[float] = []
        for p, g in zip(preds, gts):
            js.append(jaccard(p, g, obj))
            fs.append(boundary_f(p, g, obj, tolerance))
        per_object[obj] = ObjectScore(j_per_frame=tuple(js), f_per_frame=tuple(fs))
    return EvalResult(video=video, per_object=per_object)


def summarize(results: list[EvalResult]) -> dict:
    """Dataset-level aggregate: mean over videos of per-video means, in percent."""
    if not results:
        raise ValidationError("no results to summarize")
    return {
        "global": {
            "J&F": 100.0 * float(np.mean([r.jf_mean for r in results])),
            "J": 100.0 * float(np.mean([r.j_mean for r in results])),
            "F": 100.0 * float(np.mean([r.f_mean for r in results])),
        },
        "videos": [r.as_percent() for r in sorted(results, key=lambda r: r.video)],
    }


def format_table(results: list[EvalResult]) -> str:
    """Aligned plain-text table: global means first, then per-sequence rows."""
    summary = summarize(results)
    rows = [("sequence", "J&F", "J", "F")]
    g = summary["global"]
    rows.append(("GLOBAL", f"{g['J&F']:.1f}", f"{g['J']:.1f}", f"{g['F']:.1f}"))
    for v in summary["videos"]:
        rows.append((v["video"], f"{v['J&F']:.1f}", f"{v['J']:.1f}", f"{v['F']:.1f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for name, jf, j, f in rows:
        lines.append(
            name.ljust(widths[0]) + "  " + jf.rjust(widths[1]) + "  " + j.rjust(widths[2]) + "  " + f.rjust(widths[3])
        )
    return "\n".join(lines) + "\n"
