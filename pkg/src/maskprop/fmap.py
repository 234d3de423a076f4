"""FMAP binary tensor files: dense per-frame feature maps.

Layout (little-endian): 4-byte magic "FMAP", u16 version, u8 dtype
(0 = float32), u8 reserved, u32 C, u32 H, u32 W, then C*H*W float32
values, channel-major then row-major. 20-byte header total.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"FMAP"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sHBBIII")


@dataclass(frozen=True)
class FeatureMeta:
    """Provenance of a feature map (carried by manifests, not FMAP files)."""

    model: str = ""
    layer: int = 0
    timestep: int = 0
    source_frame: str = ""
    image_size: tuple[int, int] | None = None


@dataclass(frozen=True)
class FeatureMap:
    """C x H x W float32 feature grid for one frame."""

    data: np.ndarray
    meta: FeatureMeta = field(default_factory=FeatureMeta)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValidationError(f"feature map must be 3-D (C,H,W), got shape {self.data.shape}")
        if any(s < 1 for s in self.data.shape):
            raise ValidationError(f"feature map dims must be >= 1, got {self.data.shape}")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))
        if not np.isfinite(self.data).all():
            raise ValidationError("feature map contains NaN or Inf")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def write_fmap(fmap: FeatureMap, path: str | Path) -> None:
    """Serialize a feature map; read_fmap(path) reproduces it bit-exactly."""
    c, h, w = fmap.data.shape
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, c, h, w)
    payload = np.ascontiguousarray(fmap.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_fmap(path: str | Path) -> FeatureMap:
    """Load an FMAP file, validating magic, version, length, and finiteness."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than FMAP header ({len(raw)} bytes)")
    magic, version, dtype, _, c, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported FMAP version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if c < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: header dims must be >= 1, got C={c} H={h} W={w}")
    expected = c * h * w * 4
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise FormatError(
            f"{path}: payload length mismatch, header says {expected} bytes, file has {actual}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: payload contains NaN or Inf")
    return FeatureMap(data=data.copy())
