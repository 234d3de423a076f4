"""Dataset manifests: which feature and mask files make up each video.

A manifest is a JSON document listing videos; each video lists frames in
temporal order. Each frame carries one or more feature-map files keyed by
"L{layer}_T{timestep}" plus an optional ground-truth mask path. Frame 1
must carry a ground-truth mask (it seeds propagation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError


def feature_key(layer: int, timestep: int) -> str:
    return f"L{layer}_T{timestep}"


def parse_feature_key(key: str) -> tuple[int, int]:
    try:
        lpart, tpart = key.split("_")
        if not (lpart.startswith("L") and tpart.startswith("T")):
            raise ValueError
        return int(lpart[1:]), int(tpart[1:])
    except ValueError:
        raise ValidationError(f"bad feature key {key!r}, expected 'L<layer>_T<timestep>'") from None


@dataclass
class FrameEntry:
    index: int  # 1-based temporal position
    features: dict[str, str]  # feature key -> FMAP path
    mask: str | None = None  # ground-truth mask path (PNG or MSK1)
    image: str | None = None  # source frame image, when available

    def feature_path(self, key: str) -> str:
        if key not in self.features:
            raise ValidationError(
                f"frame {self.index} has no features under key {key!r}; "
                f"available: {sorted(self.features)}"
            )
        return self.features[key]


@dataclass
class VideoManifest:
    name: str
    frames: list[FrameEntry] = field(default_factory=list)
    # extraction metadata: model id, total timesteps, stride, image size...
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValidationError(f"video {self.name!r} has no frames")
        indices = [f.index for f in self.frames]
        if indices != list(range(1, len(self.frames) + 1)):
            raise ValidationError(
                f"video {self.name!r} frame indices must be 1..{len(self.frames)} in order, got {indices}"
            )
        if self.frames[0].mask is None:
            raise ValidationError(f"video {self.name!r}: frame 1 must carry a ground-truth mask")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def feature_keys(self) -> list[str]:
        keys = set(self.frames[0].features)
        for f in self.frames[1:]:
            keys &= set(f.features)
        return sorted(keys)


@dataclass
class DatasetManifest:
    root: Path
    videos: list[VideoManifest] = field(default_factory=list)

    def __post_init__(self) -> None:
        names = [v.name for v in self.videos]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate video names in manifest: {dupes}")

    def video(self, name: str) -> VideoManifest:
        for v in self.videos:
            if v.name == name:
                return v
        raise ValidationError(f"no video named {name!r} in manifest")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p


def load_manifest(path: str | Path, check_paths: bool = True) -> DatasetManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict) or "videos" not in doc:
        raise ValidationError(f"{path}: manifest must be an object with a 'videos' list")
    videos = []
    for vdoc in doc["videos"]:
        frames = [
            FrameEntry(
                index=int(fdoc["index"]),
                features={str(k): str(v) for k, v in fdoc["features"].items()},
                mask=fdoc.get("mask"),
                image=fdoc.get("image"),
            )
            for fdoc in vdoc["frames"]
        ]
        videos.append(
            VideoManifest(name=str(vdoc["name"]), frames=frames, meta=dict(vdoc.get("meta", {})))
        )
    manifest = DatasetManifest(root=path.parent, videos=videos)
    for v in manifest.videos:
        for f in v.frames:
            for key in f.features:
                parse_feature_key(key)
            if check_paths:
                for rel in f.features.values():
                    fp = manifest.resolve(rel)
                    if not fp.is_file():
                        raise ValidationError(f"{v.name} frame {f.index}: missing feature file {fp}")
                if f.mask is not None and not manifest.resolve(f.mask).is_file():
                    raise ValidationError(f"{v.name} frame {f.index}: missing mask file {manifest.resolve(f.mask)}")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "videos": [
            {
                "name": v.name,
                **({"meta": v.meta} if v.meta else {}),
                "frames": [
                    {
                        "index": f.index,
                        "features": dict(sorted(f.features.items())),
                        **({"mask": f.mask} if f.mask is not None else {}),
                        **({"image": f.image} if f.image is not None else {}),
                    }
                    for f in v.frames
                ],
            }
            for v in manifest.videos
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
