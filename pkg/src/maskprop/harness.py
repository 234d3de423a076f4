"""Batch orchestration: propagate videos, evaluate, sweep, analyze.

Runs are deterministic by construction: videos are processed by a worker
pool but each video's loop is sequential and single-threaded, results
are aggregated in sorted order, and every emitted JSON/CSV is written
with sorted keys and fixed float formatting. Wall-clock measurements are
the one exception; they go to a separate timings.json which is exactly
as reproducible as the clock is.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .correspondence import (
    DEFAULT_MAG_RADIUS,
    CorrespondenceFilter,
    fg_bg_percentage,
    survival_counts,
)
from .errors import MaskpropError, ValidationError
from .fmap import read_fmap
from .manifest import DatasetManifest, VideoManifest, feature_key, load_manifest
from .masks import LabelMask, harden, read_mask, resample_mask, write_msk1, write_png
from .metrics import (
    DEFAULT_BOUNDARY_TOLERANCE,
    EvalResult,
    evaluate_video,
    format_table,
    spearman_rho,
    summarize,
)
from .propagation import AffinityConfig, MemoryBank, compute_affinity, step

FRAME_FILE_RE = re.compile(r"^frame_(\d+)\.(msk1|png)$")


@dataclass(frozen=True)
class RunConfig:
    """Everything one propagation run depends on (threads excluded: they
    change scheduling, never results)."""

    manifest: Path
    out: Path
    similarity: str = "cos"
    topk: int = 10
    temperature: float | None = None
    memory_size: int = 8
    pin_first: bool = True
    filter_kind: str = "none"  # none | mag | oracle
    mag_radius: float = DEFAULT_MAG_RADIUS
    mag_units: str = "grid"  # grid | image (radius divided by feature stride)
    layer: int = 3
    timestep: int = 50
    threads: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.filter_kind not in ("none", "mag", "oracle"):
            raise ValidationError(f"filter must be none|mag|oracle, got {self.filter_kind!r}")
        if self.mag_units not in ("grid", "image"):
            raise ValidationError(f"mag units must be grid|image, got {self.mag_units!r}")
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")

    def affinity_config(self) -> AffinityConfig:
        return AffinityConfig(
            similarity=self.similarity, topk=self.topk, temperature=self.temperature
        )

    def feature_key(self) -> str:
        return feature_key(self.layer, self.timestep)

    def semantic_dict(self) -> dict:
        """Fields that determine outputs, for the run echo and cache key."""
        return {
            "manifest": str(self.manifest),
            "similarity": self.similarity,
            "topk": self.topk,
            "temperature": self.temperature,
            "memory_size": self.memory_size,
            "pin_first": self.pin_first,
            "filter": self.filter_kind,
            "mag_radius": self.mag_radius,
            "mag_units": self.mag_units,
            "layer": self.layer,
            "timestep": self.timestep,
            "seed": self.seed,
            "version": __version__,
        }


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def config_digest(cfg: RunConfig) -> str:
    body = json.dumps(cfg.semantic_dict(), sort_keys=True)
    manifest_path = Path(cfg.manifest)
    h = hashlib.sha256(body.encode())
    if manifest_path.is_file():
        h.update(manifest_path.read_bytes())
    return h.hexdigest()


class _VideoRun:
    """Sequential propagation of one video (exclusively owns its bank)."""

    def __init__(self, manifest: DatasetManifest, video: VideoManifest, cfg: RunConfig):
        self.manifest = manifest
        self.video = video
        self.cfg = cfg
        self.key = cfg.feature_key()
        self._gt_grid_cache: dict[int, LabelMask] = {}
        self._image_size: tuple[int, int] | None = None
        self._grid_size: tuple[int, int] | None = None

    def _load_features(self, index: int):
        rel = self.video.frames[index - 1].feature_path(self.key)
        return read_fmap(self.manifest.resolve(rel))

    def _load_gt_image(self, index: int) -> LabelMask:
        entry = self.video.frames[index - 1]
        if entry.mask is None:
            raise ValidationError(
                f"{self.video.name} frame {index}: ground-truth mask required but absent"
            )
        declared = self.video.meta.get("objects")
        return read_mask(self.manifest.resolve(entry.mask), objs=declared)

    def _gt_grid(self, index: int) -> LabelMask:
        """Ground truth pooled down to the feature grid and hardened."""
        if index not in self._gt_grid_cache:
            soft = resample_mask(self._load_gt_image(index), self._grid_size, "down")
            self._gt_grid_cache[index] = harden(soft)
        return self._gt_grid_cache[index]

    def _mag_radius_grid(self) -> float:
        if self.cfg.mag_units == "grid":
            return self.cfg.mag_radius
        stride = self.video.meta.get("stride")
        if not stride:
            raise ValidationError(
                f"{self.video.name}: mag radius given in image units but manifest meta has no stride"
            )
        return self.cfg.mag_radius / float(stride)

    def _build_filter(self, bank: MemoryBank, query_index: int) -> CorrespondenceFilter | None:
        kind = self.cfg.filter_kind
        if kind == "none":
            return None
        if kind == "mag":
            return CorrespondenceFilter(kind="mag", radius=self._mag_radius_grid())
        gt_mem = [self._gt_grid(i) for i in bank.frame_indices()]
        return CorrespondenceFilter(kind="oracle", gt_mem=gt_mem, gt_q=self._gt_grid(query_index))

    def run(self, out_dir: Path) -> tuple[list[dict], list[dict]]:
        """Propagate frames 2..K; write masks; return (diagnostics, timings)."""
        cfg = self.cfg
        acfg = cfg.affinity_config()
        first = self._load_features(1)
        self._grid_size = (first.height, first.width)
        gt1 = self._load_gt_image(1)
        self._image_size = (gt1.height, gt1.width)
        soft1 = resample_mask(gt1, self._grid_size, "down")

        bank = MemoryBank(capacity=cfg.memory_size, pin_first=cfg.pin_first)
        bank.add(1, first, soft1)
        out_dir.mkdir(parents=True, exist_ok=True)
        diagnostics: list[dict] = []
        timings: list[dict] = []
        for t in range(2, self.video.num_frames + 1):
            t0 = time.perf_counter()
            query = self._load_features(t)
            corr_filter = self._build_filter(bank, t)
            soft, affinity = step(bank, query, acfg, corr_filter, frame_index=t)
            up = resample_mask(soft, self._image_size, "up")
            hard = harden(up)
            write_msk1(hard, out_dir / f"frame_{t:04d}.msk1")
            write_png(hard, out_dir / f"frame_{t:04d}.png")
            diagnostics.append({"frame": t, "survival": survival_counts(affinity)})
            timings.append({"frame": t, "seconds": time.perf_counter() - t0})
        return diagnostics, timings


def cmd_propagate(cfg: RunConfig) -> int:
    """Propagate every video in the manifest; isolate per-video failures.

    Paths are checked lazily here (check_paths=False): a file that has
    gone missing or unreadable fails its own video, never the batch.
    """
    manifest = load_manifest(cfg.manifest, check_paths=False)
    key = cfg.feature_key()
    for video in manifest.videos:
        for frame in video.frames:
            if key not in frame.features:
                raise ValidationError(
                    f"{video.name} frame {frame.index}: manifest has no features for {key}"
                )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    def run_one(video: VideoManifest):
        runner = _VideoRun(manifest, video, cfg)
        return runner.run(out / video.name)

    videos = sorted(manifest.videos, key=lambda v: v.name)
    diagnostics: dict[str, list] = {}
    timings: dict[str, list] = {}
    failures: dict[str, str] = {}
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = {v.name: pool.submit(run_one, v) for v in videos}
        for name in sorted(futures):
            try:
                diag, tim = futures[name].result()
                diagnostics[name] = diag
                timings[name] = tim
            except (MaskpropError, OSError) as exc:
                failures[name] = f"{type(exc).__name__}: {exc}"

    write_json(out / "diagnostics.json", {"videos": diagnostics, "failures": failures})
    write_json(out / "run_config.json", {"config": cfg.semantic_dict(), "digest": config_digest(cfg)})
    # Wall-clock data is inherently run-to-run noise; kept out of the
    # deterministic output set on purpose.
    write_json(out / "timings.json", {"threads": cfg.threads, "videos": timings})
    return 1 if failures else 0


def _index_frame_files(video_dir: Path) -> dict[int, Path]:
    """frame index -> mask path; .msk1 preferred over .png for the same frame."""
    found: dict[int, Path] = {}
    for p in sorted(video_dir.iterdir()):
        m = FRAME_FILE_RE.match(p.name)
        if not m:
            continue
        idx = int(m.group(1))
        if idx not in found or p.suffix == ".msk1":
            found[idx] = p
    return found


def _collect_gt_dirs(gt_root: Path) -> dict[str, dict[int, Path]]:
    if not gt_root.is_dir():
        raise ValidationError(f"ground-truth directory {gt_root} does not exist")
    videos = {}
    for d in sorted(gt_root.iterdir()):
        if d.is_dir():
            files = _index_frame_files(d)
            if files:
                videos[d.name] = files
    if not videos:
        raise ValidationError(f"no ground-truth videos under {gt_root}")
    return videos


def evaluate_tree(
    pred_root: Path,
    gt_videos: dict[str, dict[int, Path]],
    tolerance: float = DEFAULT_BOUNDARY_TOLERANCE,
) -> tuple[list[EvalResult], dict[str, list[str]]]:
    """Score prediction files against ground-truth files, video by video.

    Frames 2..K are scored; frame 1 is the given mask (used only for the
    object count). Returns results plus per-video error listings for
    missing or extra predictions.
    """
    results: list[EvalResult] = []
    errors: dict[str, list[str]] = {}
    for name in sorted(gt_videos):
        gt_files = gt_videos[name]
        pred_dir = pred_root / name
        pred_files = _index_frame_files(pred_dir) if pred_dir.is_dir() else {}
        eval_indices = sorted(i for i in gt_files if i >= 2)
        missing = [i for i in eval_indices if i not in pred_files]
        extra = sorted(set(pred_files) - set(eval_indices))
        problems = []
        if not pred_dir.is_dir():
            problems.append("no prediction directory")
        if missing:
            problems.append(f"missing predictions for frames {missing}")
        if extra:
            problems.append(f"unexpected prediction frames {extra}")
        if problems:
            errors[name] = problems
            continue
        first_idx = min(gt_files)
        num_objects = read_mask(gt_files[first_idx]).objs
        gts = [read_mask(gt_files[i], objs=num_objects) for i in eval_indices]
        preds = [read_mask(pred_files[i], objs=num_objects) for i in eval_indices]
        results.append(
            evaluate_video(preds, gts, num_objects=num_objects, tolerance=tolerance, video=name)
        )
    return results, errors


def cmd_evaluate(
    pred_dir: Path,
    gt_dir: Path,
    out: Path | None = None,
    tolerance: float = DEFAULT_BOUNDARY_TOLERANCE,
) -> int:
    gt_videos = _collect_gt_dirs(Path(gt_dir))
    results, errors = evaluate_tree(Path(pred_dir), gt_videos, tolerance)
    if results:
        print(format_table(results), end="")
    for name in sorted(errors):
        for problem in errors[name]:
            print(f"ERROR {name}: {problem}")
    if out is not None:
        out = Path(out)
        report = {
            "errors": errors,
            **({"summary": summarize(results)} if results else {"summary": None}),
        }
        write_json(out / "eval.json", report)
        if results:
            (out / "eval.txt").write_text(format_table(results))
    return 1 if errors or not results else 0


def manifest_gt_videos(manifest: DatasetManifest) -> dict[str, dict[int, Path]]:
    """Ground-truth file map straight from manifest mask entries."""
    videos: dict[str, dict[int, Path]] = {}
    for v in manifest.videos:
        files = {
            f.index: manifest.resolve(f.mask) for f in v.frames if f.mask is not None
        }
        videos[v.name] = files
    return videos


def cmd_sweep(
    cfg: RunConfig,
    layers: list[int],
    timesteps: list[int],
    tolerance: float = DEFAULT_BOUNDARY_TOLERANCE,
) -> int:
    """Propagate + evaluate one cell per (layer, timestep); emit CSV/JSON grid.

    Cells whose features are absent from the manifest are flagged and
    skipped. Finished cells are cached by config digest and reused.
    """
    if not layers or not timesteps:
        raise ValidationError("sweep needs at least one layer and one timestep")
    manifest = load_manifest(cfg.manifest, check_paths=False)
    gt_videos = manifest_gt_videos(manifest)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for layer in layers:
        for timestep in timesteps:
            key = feature_key(layer, timestep)
            present = all(
                key in frame.features for v in manifest.videos for frame in v.frames
            )
            if not present:
                rows.append(
                    {"layer": layer, "timestep": timestep, "status": "absent",
                     "J": None, "F": None, "J&F": None}
                )
                continue
            cell_cfg = replace(cfg, layer=layer, timestep=timestep, out=out / "cells" / key)
            digest = config_digest(cell_cfg)
            marker = Path(cell_cfg.out) / "run_config.json"
            cached = False
            if marker.is_file():
                try:
                    cached = json.loads(marker.read_text()).get("digest") == digest
                except (OSError, json.JSONDecodeError):
                    cached = False
            if not cached:
                code = cmd_propagate(cell_cfg)
                if code != 0:
                    rows.append(
                        {"layer": layer, "timestep": timestep, "status": "failed",
                         "J": None, "F": None, "J&F": None}
                    )
                    continue
            results, errors = evaluate_tree(Path(cell_cfg.out), gt_videos, tolerance)
            if errors or not results:
                rows.append(
                    {"layer": layer, "timestep": timestep, "status": "failed",
                     "J": None, "F": None, "J&F": None}
                )
                continue
            summary = summarize(results)["global"]
            rows.append(
                {"layer": layer, "timestep": timestep, "status": "ok",
                 "J": summary["J"], "F": summary["F"], "J&F": summary["J&F"]}
            )

    csv_lines = ["layer,timestep,status,J,F,J&F"]
    for r in rows:
        j = "" if r["J"] is None else f"{r['J']:.4f}"
        f = "" if r["F"] is None else f"{r['F']:.4f}"
        jf = "" if r["J&F"] is None else f"{r['J&F']:.4f}"
        csv_lines.append(f"{r['layer']},{r['timestep']},{r['status']},{j},{f},{jf}")
    (out / "sweep.csv").write_text("\n".join(csv_lines) + "\n")

    ok = [r for r in rows if r["status"] == "ok"]
    best = max(ok, key=lambda r: r["J&F"]) if ok else None
    write_json(out / "sweep.json", {"cells": rows, "best": best, "config": cfg.semantic_dict()})
    for line in csv_lines:
        print(line)
    if best:
        print(f"best cell: layer {best['layer']} timestep {best['timestep']} J&F {best['J&F']:.4f}")
    # absent cells are expected and flagged; actual failures are not
    failed = any(r["status"] == "failed" for r in rows)
    return 1 if failed or not ok else 0


def _cell_fg_bg(
    manifest: DatasetManifest,
    key: str,
    similarity: str,
    max_pairs: int | None,
    seed: int,
    cell_index: int,
) -> float:
    """Mean mixed-endpoint fraction over (t-1, t) frame pairs, all videos."""
    fractions: list[float] = []
    for vi, video in enumerate(sorted(manifest.videos, key=lambda v: v.name)):
        pairs = [(t - 1, t) for t in range(2, video.num_frames + 1)]
        if max_pairs is not None and len(pairs) > max_pairs:
            rng = np.random.default_rng([seed, 3, cell_index, vi])
            chosen = rng.choice(len(pairs), size=max_pairs, replace=False)
            pairs = [pairs[i] for i in sorted(chosen)]
        gt_cache: dict[int, LabelMask] = {}
        fmap_cache: dict[int, np.ndarray] = {}

        def gt_grid(idx: int, grid_hw) -> LabelMask:
            if idx not in gt_cache:
                entry = video.frames[idx - 1]
                if entry.mask is None:
                    raise ValidationError(f"{video.name} frame {idx}: analysis needs ground truth")
                full = read_mask(manifest.resolve(entry.mask), objs=video.meta.get("objects"))
                gt_cache[idx] = harden(resample_mask(full, grid_hw, "down"))
            return gt_cache[idx]

        def feats(idx: int) -> np.ndarray:
            if idx not in fmap_cache:
                rel = video.frames[idx - 1].feature_path(key)
                fmap_cache[idx] = read_fmap(manifest.resolve(rel)).data
            return fmap_cache[idx]

        for m_idx, q_idx in pairs:
            mem = feats(m_idx)
            qry = feats(q_idx)
            bank = MemoryBank(capacity=1, pin_first=False)
            grid_hw = (mem.shape[1], mem.shape[2])
            gt_m = gt_grid(m_idx, grid_hw)
            bank.add(m_idx, mem, gt_m.one_hot())
            affinity = compute_affinity(bank, qry, AffinityConfig(similarity=similarity))
            fractions.append(
                fg_bg_percentage(affinity, gt_m, gt_grid(q_idx, grid_hw))
            )
    return float(np.mean(fractions))


def cmd_analyze_corrs(
    manifest_path: Path,
    sweep_json: Path,
    out: Path | None = None,
    max_pairs: int | None = None,
    seed: int = 0,
) -> int:
    """Per-cell mixed-endpoint percentage vs quality, plus their rank correlation.

    Reads the sweep grid for per-cell quality, recomputes the diagnostic
    on adjacent frame pairs (optionally a seeded subsample), and reports
    Spearman's rho across cells.
    """
    manifest = load_manifest(manifest_path, check_paths=False)
    sweep = json.loads(Path(sweep_json).read_text())
    cells = [c for c in sweep.get("cells", []) if c.get("status") == "ok"]
    if len(cells) < 2:
        raise ValidationError(f"need at least 2 finished sweep cells, got {len(cells)}")
    similarity = sweep.get("config", {}).get("similarity", "cos")
    records = []
    for ci, cell in enumerate(cells):
        key = feature_key(int(cell["layer"]), int(cell["timestep"]))
        frac = _cell_fg_bg(manifest, key, similarity, max_pairs, seed, ci)
        records.append(
            {"layer": cell["layer"], "timestep": cell["timestep"],
             "fg_bg_pct": 100.0 * frac, "J&F": cell["J&F"]}
        )
    rho = spearman_rho([r["fg_bg_pct"] for r in records], [r["J&F"] for r in records])
    report = {"cells": records, "rho": rho}
    for r in records:
        print(
            f"L{r['layer']}_T{r['timestep']}: FG-BG% {r['fg_bg_pct']:.4f}  J&F {r['J&F']:.4f}"
        )
    print(f"spearman rho (FG-BG% vs J&F): {rho:.4f}")
    if out is not None:
        write_json(Path(out) / "analyze_corrs.json", report)
    return 0
