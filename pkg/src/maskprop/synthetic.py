"""Synthetic desk-scale videos: moving rectangles with signature features.

Each video is a set of rectangles bouncing inside horizontal bands of a
feature grid. Every label (background included) owns a scaled one-hot
signature vector; a frame's feature map is the per-pixel signature plus
Gaussian noise, so matching difficulty is set directly by the
separation-to-noise ratio. Ground-truth masks are exact at image
resolution (feature grid times an integer stride).

Confuser rectangles ("decoys") carry a real object's signature but stay
background in the ground truth: they create exactly the mixed-endpoint
matches that ground-truth filtering is supposed to remove.

Everything is reproducible from the seed: geometry and noise come from
per-(video, frame, cell) substreams, so outputs do not depend on
generation order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fmap import FeatureMap, write_fmap
from .manifest import DatasetManifest, FrameEntry, VideoManifest, feature_key, save_manifest
from .masks import LabelMask, write_msk1


@dataclass(frozen=True)
class CellSpec:
    """One (layer, timestep) feature variant with its own quality knobs."""

    layer: int
    timestep: int
    noise: float | None = None  # None -> SyntheticSpec.noise
    separation: float | None = None  # None -> SyntheticSpec.separation


@dataclass(frozen=True)
class SyntheticSpec:
    videos: int = 1
    frames: int = 3
    objects: int = 1
    grid_h: int = 16
    grid_w: int = 16
    channels: int = 16
    noise: float = 0.0
    seed: int = 0
    stride: int = 4
    separation: float = 10.0
    decoys: int = 0
    cells: tuple[CellSpec, ...] = field(default_factory=lambda: (CellSpec(layer=3, timestep=50),))

    def __post_init__(self) -> None:
        if self.videos < 1 or self.frames < 1 or self.objects < 1:
            raise ValidationError("need at least 1 video, 1 frame, 1 object")
        if self.decoys < 0:
            raise ValidationError("decoys must be >= 0")
        if self.channels < self.objects + 1:
            raise ValidationError(
                f"channels ({self.channels}) must cover background + {self.objects} signatures"
            )
        if self.stride < 1:
            raise ValidationError("stride must be >= 1")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")
        bands = self.objects + self.decoys
        if self.grid_h < 2 * bands:
            raise ValidationError(
                f"grid height {self.grid_h} too small for {bands} bands (need >= {2 * bands})"
            )
        if self.grid_w < 4:
            raise ValidationError("grid width must be >= 4")
        if not self.cells:
            raise ValidationError("need at least one feature cell")
        keys = [feature_key(c.layer, c.timestep) for c in self.cells]
        if len(set(keys)) != len(keys):
            raise ValidationError(f"duplicate feature cells: {keys}")


@dataclass(frozen=True)
class _Shape:
    """One rectangle: geometry, bounce box, velocity, labels."""

    gt_label: int  # 0 for decoys (background in ground truth)
    signature: int  # signature index actually painted into features
    h: int
    w: int
    y0: int  # bounce-box origin (top of band)
    x0: int
    room_y: int  # movement room inside the bounce box
    room_x: int
    start_y: int  # start offset within the room
    start_x: int
    vy: int
    vx: int

    def position(self, frame: int) -> tuple[int, int]:
        """Top-left grid cell at 1-based frame index, reflecting off walls."""

        def reflect(start: int, v: int, t: int, room: int) -> int:
            if room == 0:
                return 0
            period = 2 * room
            q = (start + v * t) % period
            return q if q <= room else period - q

        t = frame - 1
        return (
            self.y0 + reflect(self.start_y, self.vy, t, self.room_y),
            self.x0 + reflect(self.start_x, self.vx, t, self.room_x),
        )


def _plan_shapes(spec: SyntheticSpec, video: int) -> list[_Shape]:
    """Lay out object and decoy rectangles in disjoint horizontal bands."""
    rng = np.random.default_rng([spec.seed, 1, video])
    bands = spec.objects + spec.decoys
    band_h = spec.grid_h // bands
    shapes: list[_Shape] = []
    for b in range(bands):
        is_decoy = b >= spec.objects
        gt_label = 0 if is_decoy else b + 1
        signature = (b - spec.objects) % spec.objects + 1 if is_decoy else b + 1
        h = int(rng.integers(max(1, band_h // 2), band_h))
        w = int(rng.integers(max(2, spec.grid_w // 4), max(3, spec.grid_w // 2) + 1))
        room_y = band_h - h
        room_x = spec.grid_w - w
        shapes.append(
            _Shape(
                gt_label=gt_label,
                signature=signature,
                h=h,
                w=w,
                y0=b * band_h,
                x0=0,
                room_y=room_y,
                room_x=room_x,
                start_y=int(rng.integers(0, room_y + 1)),
                start_x=int(rng.integers(0, room_x + 1)),
                vy=int(rng.integers(-1, 2)),
                vx=int(rng.integers(-2, 3)),
            )
        )
    return shapes


def _paint(spec: SyntheticSpec, shapes: list[_Shape], frame: int) -> tuple[np.ndarray, np.ndarray]:
    """(gt_grid, signature_grid) for one frame; later shapes draw on top."""
    gt = np.zeros((spec.grid_h, spec.grid_w), dtype=np.uint8)
    sig = np.zeros((spec.grid_h, spec.grid_w), dtype=np.uint8)
    for shape in shapes:
        y, x = shape.position(frame)
        if shape.gt_label:
            gt[y : y + shape.h, x : x + shape.w] = shape.gt_label
        sig[y : y + shape.h, x : x + shape.w] = shape.signature
    return gt, sig


def _signature_table(spec: SyntheticSpec, separation: float) -> np.ndarray:
    """(objects+1, C) scaled one-hot signatures; index 0 is background."""
    table = np.zeros((spec.objects + 1, spec.channels), dtype=np.float64)
    for label in range(spec.objects + 1):
        table[label, label] = separation
    return table


def _cell_features(
    spec: SyntheticSpec, sig_grid: np.ndarray, video: int, frame: int, cell_idx: int
) -> np.ndarray:
    cell = spec.cells[cell_idx]
    noise = spec.noise if cell.noise is None else cell.noise
    separation = spec.separation if cell.separation is None else cell.separation
    table = _signature_table(spec, separation)
    feats = table[sig_grid].transpose(2, 0, 1)  # (C, H, W)
    if noise > 0:
        rng = np.random.default_rng([spec.seed, 2, video, frame, cell_idx])
        feats = feats + noise * rng.standard_normal(feats.shape)
    return feats.astype(np.float32)


def grid_to_image(grid_mask: np.ndarray, stride: int) -> np.ndarray:
    """Blow each grid cell up to a stride x stride block of image pixels."""
    if stride == 1:
        return grid_mask.copy()
    return np.kron(grid_mask, np.ones((stride, stride), dtype=grid_mask.dtype))


def generate(spec: SyntheticSpec, out_dir: str | Path) -> Path:
    """Write FMAP features, MSK1 ground truth, and a manifest; return its path.

    Layout: <out>/feats/<video>/frame_%04d_<cellkey>.fmap and
    <out>/gt/<video>/frame_%04d.msk1, with manifest.json at the root.
    Ground truth is written for every frame (analysis and evaluation both
    want it); propagation itself only reads frame 1.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos = []
    for v in range(spec.videos):
        name = f"video_{v:03d}"
        shapes = _plan_shapes(spec, v)
        feat_dir = out / "feats" / name
        gt_dir = out / "gt" / name
        feat_dir.mkdir(parents=True, exist_ok=True)
        gt_dir.mkdir(parents=True, exist_ok=True)
        frames = []
        for t in range(1, spec.frames + 1):
            gt_grid, sig_grid = _paint(spec, shapes, t)
            gt_image = grid_to_image(gt_grid, spec.stride)
            mask_rel = f"gt/{name}/frame_{t:04d}.msk1"
            write_msk1(LabelMask.hard(gt_image, objs=spec.objects), out / mask_rel)
            features = {}
            for ci, cell in enumerate(spec.cells):
                key = feature_key(cell.layer, cell.timestep)
                rel = f"feats/{name}/frame_{t:04d}_{key}.fmap"
                write_fmap(FeatureMap(data=_cell_features(spec, sig_grid, v, t, ci)), out / rel)
                features[key] = rel
            frames.append(FrameEntry(index=t, features=features, mask=mask_rel))
        meta = {
            "model": "synthetic",
            "total_timesteps": 1000,
            "res480p": False,
            "stride": spec.stride,
            "grid": [spec.grid_h, spec.grid_w],
            "image_size": [spec.grid_h * spec.stride, spec.grid_w * spec.stride],
            "objects": spec.objects,
        }
        videos.append(VideoManifest(name=name, frames=frames, meta=meta))
    manifest = DatasetManifest(root=out, videos=videos)
    path = out / "manifest.json"
    save_manifest(manifest, path)
    return path
