import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from maskprop import (
    CellSpec,
    SyntheticSpec,
    ValidationError,
    generate,
    harden,
    jaccard,
    load_manifest,
    read_mask,
    resample_mask,
)
from maskprop.harness import (
    RunConfig,
    cmd_analyze_corrs,
    cmd_evaluate,
    cmd_propagate,
    cmd_sweep,
    config_digest,
    evaluate_tree,
    manifest_gt_videos,
)


def make_dataset(tmp_path, **kw) -> Path:
    defaults = dict(videos=2, frames=4, objects=2, noise=0.2, separation=10.0, seed=5)
    defaults.update(kw)
    return generate(SyntheticSpec(**defaults), tmp_path / "data")


def run_propagate(manifest, out, **kw) -> RunConfig:
    cfg = RunConfig(manifest=manifest, out=out, **kw)
    rc = cmd_propagate(cfg)
    assert rc == 0, f"propagate exited {rc}"
    return cfg


def tree_digest(root: Path, skip=("timings.json",)) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name not in skip:
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def copy_gt_as_predictions(manifest_path: Path, pred_root: Path) -> None:
    """Stage ground-truth frames 2..K as if a run had predicted them."""
    ds = load_manifest(manifest_path)
    for video in ds.videos:
        vdir = pred_root / video.name
        vdir.mkdir(parents=True, exist_ok=True)
        for frame in video.frames:
            if frame.index < 2:
                continue
            src = ds.resolve(frame.mask)
            shutil.copyfile(src, vdir / f"frame_{frame.index:04d}.msk1")


class TestPropagate:
    def test_noise_free_run_recovers_ground_truth(self, tmp_path):
        # with zero noise the matching is exact; the only losses are the
        # rounded rectangle corners introduced by the soft upsample
        manifest = make_dataset(tmp_path, videos=1, frames=3, noise=0.0)
        out = tmp_path / "run"
        run_propagate(manifest, out)
        ds = load_manifest(manifest)
        video = ds.videos[0]
        grid_hw = tuple(video.meta["grid"])
        for frame in (2, 3):
            pred = read_mask(out / video.name / f"frame_{frame:04d}.msk1")
            gt = read_mask(ds.resolve(video.frames[frame - 1].mask))
            for obj in (1, 2):
                assert jaccard(pred, gt, obj) >= 0.9
            pred_grid = harden(resample_mask(pred, grid_hw, "down"))
            gt_grid = harden(resample_mask(gt, grid_hw, "down"))
            np.testing.assert_array_equal(pred_grid.data, gt_grid.data)

    def test_outputs_and_echo_files_exist(self, tmp_path):
        manifest = make_dataset(tmp_path)
        out = tmp_path / "run"
        run_propagate(manifest, out)
        assert (out / "run_config.json").is_file()
        assert (out / "diagnostics.json").is_file()
        assert (out / "timings.json").is_file()
        for name in ("video_000", "video_001"):
            for frame in (2, 3, 4):
                assert (out / name / f"frame_{frame:04d}.msk1").is_file()
                assert (out / name / f"frame_{frame:04d}.png").is_file()

    def test_run_config_echo_excludes_threads(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1)
        out = tmp_path / "run"
        run_propagate(manifest, out, threads=3)
        echo = json.loads((out / "run_config.json").read_text())
        assert "threads" not in echo["config"]
        assert echo["config"]["similarity"] == "cos"
        assert "digest" in echo

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=3, frames=4)
        a = tmp_path / "run_a"
        b = tmp_path / "run_b"
        run_propagate(manifest, a, threads=1)
        run_propagate(manifest, b, threads=4)
        assert tree_digest(a) == tree_digest(b)

    def test_repeat_run_is_deterministic(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1, noise=1.0)
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_propagate(manifest, a)
        run_propagate(manifest, b)
        assert tree_digest(a) == tree_digest(b)

    def test_corrupt_video_is_isolated(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=2, frames=3)
        ds = load_manifest(manifest)
        bad = ds.resolve(ds.videos[0].frames[1].features["L3_T50"])
        bad.write_bytes(b"FMAPgarbage")
        out = tmp_path / "run"
        cfg = RunConfig(manifest=manifest, out=out)
        rc = cmd_propagate(cfg)
        assert rc == 1
        diag = json.loads((out / "diagnostics.json").read_text())
        assert "video_000" in diag["failures"]
        # the healthy video still completed
        assert (out / "video_001" / "frame_0003.msk1").is_file()

    def test_missing_feature_key_rejected_upfront(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1)
        cfg = RunConfig(manifest=manifest, out=tmp_path / "run", layer=9, timestep=999)
        with pytest.raises(ValidationError, match="L9_T999"):
            cmd_propagate(cfg)

    def test_oracle_filter_runs(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1, frames=3, noise=0.5)
        out = tmp_path / "run"
        run_propagate(manifest, out, filter_kind="oracle")
        assert (out / "video_000" / "frame_0003.msk1").is_file()

    def test_mag_filter_image_units_scales_radius(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1, frames=3)
        grid_run = tmp_path / "grid"
        image_run = tmp_path / "image"
        run_propagate(manifest, grid_run, filter_kind="mag", mag_radius=2.0, mag_units="grid")
        # stride is 4: radius 8 in image units covers the same grid area
        run_propagate(manifest, image_run, filter_kind="mag", mag_radius=8.0, mag_units="image")
        a = tree_digest(grid_run, skip=("timings.json", "run_config.json"))
        b = tree_digest(image_run, skip=("timings.json", "run_config.json"))
        assert a == b


class TestEvaluate:
    def test_ground_truth_as_prediction_scores_hundred(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=2, frames=3)
        pred = tmp_path / "pred"
        copy_gt_as_predictions(manifest, pred)
        rc = cmd_evaluate(pred, tmp_path / "data" / "gt", out=tmp_path / "eval")
        assert rc == 0
        report = json.loads((tmp_path / "eval" / "eval.json").read_text())
        assert report["summary"]["global"]["J&F"] == 100.0
        assert report["summary"]["global"]["J"] == 100.0
        table = capsys.readouterr().out
        assert "GLOBAL" in table
        assert (tmp_path / "eval" / "eval.txt").is_file()

    def test_real_run_scores_high_but_not_perfect(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=3, noise=0.0)
        out = tmp_path / "run"
        run_propagate(manifest, out)
        rc = cmd_evaluate(out, tmp_path / "data" / "gt", out=tmp_path / "eval")
        assert rc == 0
        report = json.loads((tmp_path / "eval" / "eval.json").read_text())
        assert report["summary"]["global"]["J&F"] >= 95.0
        capsys.readouterr()

    def test_empty_prediction_dir_errors(self, tmp_path, capsys):
        make_dataset(tmp_path, videos=1, frames=3)
        empty = tmp_path / "none"
        empty.mkdir()
        rc = cmd_evaluate(empty, tmp_path / "data" / "gt")
        assert rc == 1
        assert "ERROR" in capsys.readouterr().out

    def test_missing_frame_reported(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=4, noise=0.0)
        out = tmp_path / "run"
        run_propagate(manifest, out)
        (out / "video_000" / "frame_0003.msk1").unlink()
        (out / "video_000" / "frame_0003.png").unlink()
        rc = cmd_evaluate(out, tmp_path / "data" / "gt")
        assert rc == 1
        printed = capsys.readouterr().out
        assert "video_000" in printed
        assert "3" in printed

    def test_evaluate_tree_uses_manifest_gt(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1, frames=3)
        pred = tmp_path / "pred"
        copy_gt_as_predictions(manifest, pred)
        ds = load_manifest(manifest)
        results, errors = evaluate_tree(pred, manifest_gt_videos(ds))
        assert not errors
        assert results[0].jf_mean == 1.0


class TestSweep:
    def _two_cell_dataset(self, tmp_path):
        return make_dataset(
            tmp_path,
            videos=2,
            frames=3,
            objects=1,
            cells=(CellSpec(1, 0, noise=0.1), CellSpec(2, 100, noise=6.0)),
        )

    def test_grid_rows_and_best_cell(self, tmp_path, capsys):
        manifest = self._two_cell_dataset(tmp_path)
        cfg = RunConfig(manifest=manifest, out=tmp_path / "sweep")
        rc = cmd_sweep(cfg, layers=[1, 2], timesteps=[0, 100])
        assert rc == 0
        doc = json.loads((tmp_path / "sweep" / "sweep.json").read_text())
        by_key = {(c["layer"], c["timestep"]): c for c in doc["cells"]}
        assert by_key[(1, 0)]["status"] == "ok"
        assert by_key[(2, 100)]["status"] == "ok"
        assert by_key[(1, 100)]["status"] == "absent"
        assert by_key[(2, 0)]["status"] == "absent"
        # clean features beat heavy noise
        assert by_key[(1, 0)]["J&F"] > by_key[(2, 100)]["J&F"]
        assert doc["best"]["layer"] == 1 and doc["best"]["timestep"] == 0
        csv_text = (tmp_path / "sweep" / "sweep.csv").read_text()
        assert csv_text.splitlines()[0] == "layer,timestep,status,J,F,J&F"
        assert "best cell" in capsys.readouterr().out

    def test_best_matches_csv_maximum(self, tmp_path, capsys):
        manifest = self._two_cell_dataset(tmp_path)
        cfg = RunConfig(manifest=manifest, out=tmp_path / "sweep")
        assert cmd_sweep(cfg, layers=[1, 2], timesteps=[0, 100]) == 0
        doc = json.loads((tmp_path / "sweep" / "sweep.json").read_text())
        ok = [c for c in doc["cells"] if c["status"] == "ok"]
        assert doc["best"]["J&F"] == max(c["J&F"] for c in ok)
        capsys.readouterr()

    def test_single_cell_matches_direct_run(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=3, noise=0.3)
        sweep_out = tmp_path / "sweep"
        cfg = RunConfig(manifest=manifest, out=sweep_out)
        assert cmd_sweep(cfg, layers=[3], timesteps=[50]) == 0
        doc = json.loads((sweep_out / "sweep.json").read_text())
        cell = doc["cells"][0]

        direct_out = tmp_path / "direct"
        run_propagate(manifest, direct_out, layer=3, timestep=50)
        ds = load_manifest(manifest)
        results, errors = evaluate_tree(direct_out, manifest_gt_videos(ds))
        assert not errors
        from maskprop.metrics import summarize

        direct = summarize(results)["global"]
        assert cell["J&F"] == pytest.approx(direct["J&F"], abs=1e-9)
        capsys.readouterr()

    def test_cache_skips_finished_cells(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=3)
        out = tmp_path / "sweep"
        cfg = RunConfig(manifest=manifest, out=out)
        assert cmd_sweep(cfg, layers=[3], timesteps=[50]) == 0
        mask = out / "cells" / "L3_T50" / "video_000" / "frame_0002.msk1"
        before = mask.stat().st_mtime_ns
        assert cmd_sweep(cfg, layers=[3], timesteps=[50]) == 0
        assert mask.stat().st_mtime_ns == before
        capsys.readouterr()

    def test_cache_invalidated_by_config_change(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=3)
        out = tmp_path / "sweep"
        assert cmd_sweep(RunConfig(manifest=manifest, out=out), layers=[3], timesteps=[50]) == 0
        mask = out / "cells" / "L3_T50" / "video_000" / "frame_0002.msk1"
        before = mask.stat().st_mtime_ns
        assert (
            cmd_sweep(RunConfig(manifest=manifest, out=out, topk=5), layers=[3], timesteps=[50])
            == 0
        )
        assert mask.stat().st_mtime_ns != before
        capsys.readouterr()


class TestAnalyzeCorrs:
    def test_rho_reported_for_multi_cell_sweep(self, tmp_path, capsys):
        manifest = make_dataset(
            tmp_path,
            videos=2,
            frames=4,
            objects=1,
            decoys=1,
            grid_h=16,
            cells=(
                CellSpec(1, 0, noise=0.1),
                CellSpec(1, 100, noise=2.0),
                CellSpec(1, 500, noise=6.0),
            ),
        )
        sweep_out = tmp_path / "sweep"
        cfg = RunConfig(manifest=manifest, out=sweep_out)
        assert cmd_sweep(cfg, layers=[1], timesteps=[0, 100, 500]) == 0
        rc = cmd_analyze_corrs(
            manifest, sweep_out / "sweep.json", out=tmp_path / "analysis", seed=3
        )
        assert rc == 0
        doc = json.loads((tmp_path / "analysis" / "analyze_corrs.json").read_text())
        assert len(doc["cells"]) == 3
        assert -1.0 <= doc["rho"] <= 1.0
        for cell in doc["cells"]:
            assert 0.0 <= cell["fg_bg_pct"] <= 100.0
        printed = capsys.readouterr().out
        assert "spearman rho" in printed

    def test_subsampled_pairs_are_deterministic(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=6, objects=1,
                                cells=(CellSpec(1, 0, noise=0.5), CellSpec(2, 0, noise=3.0)))
        sweep_out = tmp_path / "sweep"
        assert cmd_sweep(RunConfig(manifest=manifest, out=sweep_out), layers=[1, 2], timesteps=[0]) == 0
        a = tmp_path / "a"
        b = tmp_path / "b"
        cmd_analyze_corrs(manifest, sweep_out / "sweep.json", out=a, max_pairs=2, seed=7)
        cmd_analyze_corrs(manifest, sweep_out / "sweep.json", out=b, max_pairs=2, seed=7)
        assert (a / "analyze_corrs.json").read_bytes() == (b / "analyze_corrs.json").read_bytes()
        capsys.readouterr()

    def test_requires_two_finished_cells(self, tmp_path, capsys):
        manifest = make_dataset(tmp_path, videos=1, frames=3)
        sweep_out = tmp_path / "sweep"
        assert cmd_sweep(RunConfig(manifest=manifest, out=sweep_out), layers=[3], timesteps=[50]) == 0
        capsys.readouterr()
        with pytest.raises(ValidationError, match="2"):
            cmd_analyze_corrs(manifest, sweep_out / "sweep.json")


class TestConfigDigest:
    def test_digest_changes_with_semantics(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1)
        a = config_digest(RunConfig(manifest=manifest, out=tmp_path / "x"))
        b = config_digest(RunConfig(manifest=manifest, out=tmp_path / "x", topk=7))
        assert a != b

    def test_digest_ignores_threads_and_out(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1)
        a = config_digest(RunConfig(manifest=manifest, out=tmp_path / "x", threads=1))
        b = config_digest(RunConfig(manifest=manifest, out=tmp_path / "y", threads=8))
        assert a == b

    def test_digest_tracks_manifest_bytes(self, tmp_path):
        manifest = make_dataset(tmp_path, videos=1)
        cfg = RunConfig(manifest=manifest, out=tmp_path / "x")
        a = config_digest(cfg)
        text = Path(manifest).read_text()
        Path(manifest).write_text(text.replace("video_000", "video_zzz"))
        b = config_digest(cfg)
        assert a != b
