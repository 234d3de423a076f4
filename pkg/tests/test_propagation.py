import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskprop import (
    AffinityConfig,
    AffinityMatrix,
    DimensionError,
    FeatureMap,
    GridShape,
    LabelMask,
    MemoryBank,
    ValidationError,
    compute_affinity,
    harden,
    propagate_mask,
    step,
)
from maskprop.propagation import affinity_scores, top_k_rows

from oracles import argmax_rows, topk_softmax_readout


def bank_of(feats, planes, capacity=8, pin_first=True, start_index=1):
    bank = MemoryBank(capacity=capacity, pin_first=pin_first)
    for i, (f, m) in enumerate(zip(feats, planes), start=start_index):
        bank.add(i, f, m)
    return bank


def one_hot_planes(grid, objs):
    return LabelMask.hard(np.asarray(grid, dtype=np.uint8), objs=objs).one_hot()


class TestAffinityKernels:
    def test_identical_unit_vectors_cos_is_one(self):
        v = np.zeros((2, 1, 1), dtype=np.float32)
        v[0] = 1.0
        scores = affinity_scores(v[None], v, "cos")
        assert scores[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_identical_vectors_l1_l2_zero(self):
        v = np.array([3.0, -4.0], dtype=np.float32).reshape(2, 1, 1)
        for sim in ("l1", "l2"):
            assert affinity_scores(v[None], v, sim)[0, 0] == 0.0

    def test_orthogonal_pair_arithmetic(self):
        mem = np.array([1.0, 0.0], dtype=np.float32).reshape(2, 1, 1)
        qry = np.array([0.0, 1.0], dtype=np.float32).reshape(2, 1, 1)
        assert affinity_scores(mem[None], qry, "cos")[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert affinity_scores(mem[None], qry, "l2")[0, 0] == pytest.approx(-math.sqrt(2), abs=1e-12)
        assert affinity_scores(mem[None], qry, "l1")[0, 0] == pytest.approx(-2.0, abs=1e-12)

    def test_zero_norm_vector_scores_zero_everywhere(self):
        mem = np.zeros((1, 3, 1, 2), dtype=np.float32)
        mem[0, :, 0, 1] = 1.0
        qry = np.ones((3, 1, 2), dtype=np.float32)
        scores = affinity_scores(mem, qry, "cos")
        assert np.all(scores[0] == 0.0)
        assert np.all(np.isfinite(scores))

    def test_channel_mismatch_raises(self):
        mem = np.zeros((1, 3, 2, 2), dtype=np.float32)
        qry = np.zeros((4, 2, 2), dtype=np.float32)
        with pytest.raises(DimensionError):
            affinity_scores(mem, qry, "cos")

    def test_unknown_similarity(self):
        with pytest.raises(ValidationError):
            AffinityConfig(similarity="dot")


class TestMemoryBank:
    def _add_n(self, bank, n, start=1):
        for i in range(start, start + n):
            bank.add(i, np.full((1, 1, 1), float(i), dtype=np.float32), np.ones((1, 1, 1)))

    def test_pinned_eviction_trace(self):
        bank = MemoryBank(capacity=2, pin_first=True)
        self._add_n(bank, 4)
        assert bank.frame_indices() == [1, 4]

    def test_unpinned_eviction_trace(self):
        bank = MemoryBank(capacity=2, pin_first=False)
        self._add_n(bank, 4)
        assert bank.frame_indices() == [3, 4]

    def test_capacity_one_pinned_keeps_frame_one(self):
        bank = MemoryBank(capacity=1, pin_first=True)
        self._add_n(bank, 5)
        assert bank.frame_indices() == [1]

    def test_size_never_exceeds_capacity(self):
        bank = MemoryBank(capacity=3, pin_first=True)
        for i in range(1, 20):
            self._add_n(bank, 1, start=i)
            assert len(bank) <= 3
        assert bank.frame_indices()[0] == 1

    def test_shape_mismatch_rejected(self):
        bank = MemoryBank(capacity=2)
        bank.add(1, np.zeros((1, 2, 2), dtype=np.float32), np.ones((1, 2, 2)))
        with pytest.raises(DimensionError):
            bank.add(2, np.zeros((1, 3, 3), dtype=np.float32), np.ones((1, 3, 3)))


class TestTopK:
    def test_ties_break_to_lowest_row(self):
        scores = np.array([[1.0], [2.0], [2.0], [0.5]])
        idx, vals = top_k_rows(scores, 2)
        assert idx[:, 0].tolist() == [1, 2]
        assert vals[:, 0].tolist() == [2.0, 2.0]

    def test_all_equal_column_selects_prefix(self):
        scores = np.ones((5, 3))
        idx, _ = top_k_rows(scores, 3)
        for q in range(3):
            assert idx[:, q].tolist() == [0, 1, 2]


class TestPropagateMask:
    def test_identity_propagation_k1(self, rng):
        feats = rng.standard_normal((4, 3, 3)).astype(np.float32)
        planes = one_hot_planes(rng.integers(0, 3, (3, 3)), objs=2)
        bank = bank_of([feats], [planes])
        cfg = AffinityConfig(similarity="cos", topk=1)
        affinity = compute_affinity(bank, feats, cfg)
        out = propagate_mask(bank, affinity, cfg)
        np.testing.assert_array_equal(out.data, planes)

    def test_equal_scores_split_evenly(self):
        # two memory pixels with identical features but different labels:
        # every query pixel blends them with equal weight
        feats = np.ones((1, 1, 2), dtype=np.float32)
        planes = one_hot_planes([[1, 2]], objs=2)
        bank = bank_of([feats], [planes])
        cfg = AffinityConfig(similarity="cos", topk=2)
        affinity = compute_affinity(bank, feats, cfg)
        out = propagate_mask(bank, affinity, cfg)
        np.testing.assert_allclose(out.data[1], 0.5, atol=1e-12)
        np.testing.assert_allclose(out.data[2], 0.5, atol=1e-12)
        np.testing.assert_allclose(out.data[0], 0.0, atol=1e-12)

    def test_toy_bank_matches_bruteforce_readout(self, rng):
        for sim in ("cos", "l1", "l2"):
            feats = [rng.standard_normal((3, 2, 2)).astype(np.float32) for _ in range(2)]
            planes = [one_hot_planes(rng.integers(0, 2, (2, 2)), objs=1) for _ in range(2)]
            bank = bank_of(feats, planes)
            qry = rng.standard_normal((3, 2, 2)).astype(np.float32)
            cfg = AffinityConfig(similarity=sim, topk=2, temperature=1.0)
            affinity = compute_affinity(bank, qry, cfg)
            got = propagate_mask(bank, affinity, cfg)
            mem_labels = np.stack(planes).transpose(1, 0, 2, 3).reshape(2, -1)
            want = topk_softmax_readout(affinity.scores, mem_labels, k=2, temperature=1.0)
            np.testing.assert_allclose(got.data.reshape(2, -1), want, atol=1e-12)

    def test_k_clamped_with_warning(self, rng):
        feats = rng.standard_normal((2, 2, 2)).astype(np.float32)
        planes = one_hot_planes(rng.integers(0, 2, (2, 2)), objs=1)
        bank = bank_of([feats], [planes])
        cfg = AffinityConfig(topk=99)
        affinity = compute_affinity(bank, feats, cfg)
        with pytest.warns(RuntimeWarning, match="clamp"):
            out = propagate_mask(bank, affinity, cfg)
        assert out.data.shape == (2, 2, 2)

    def test_output_is_convex_combination(self, rng):
        feats = [rng.standard_normal((3, 3, 3)).astype(np.float32) for _ in range(3)]
        planes = []
        for _ in range(3):
            p = rng.random((3, 3, 3))
            p /= p.sum(axis=0, keepdims=True)
            planes.append(p)
        bank = bank_of(feats, planes)
        qry = rng.standard_normal((3, 3, 3)).astype(np.float32)
        cfg = AffinityConfig(similarity="l2", topk=5)
        out = propagate_mask(bank, compute_affinity(bank, qry, cfg), cfg)
        stacked = np.stack(planes)
        lo = stacked.min(axis=(0,))
        hi = stacked.max(axis=(0,))
        # each output probability lies within the range spanned by memory
        # probabilities for that label (weights are convex over pixels of
        # all slots, so global per-label min/max bound the result)
        assert np.all(out.data >= stacked.min() - 1e-12)
        assert np.all(out.data <= stacked.max() + 1e-12)
        assert np.all(out.data >= np.min(lo) - 1e-12)
        assert np.all(out.data <= np.max(hi) + 1e-12)


class TestStep:
    def test_step_appends_prediction_to_bank(self, rng):
        feats = rng.standard_normal((2, 2, 2)).astype(np.float32)
        planes = one_hot_planes(rng.integers(0, 2, (2, 2)), objs=1)
        bank = bank_of([feats], [planes], capacity=4)
        out, affinity = step(bank, feats, AffinityConfig(topk=1))
        assert bank.frame_indices() == [1, 2]
        assert affinity.grid == GridShape(1, 2, 2)
        np.testing.assert_array_equal(bank.masks_array()[1], out.data)

    def test_static_video_stays_exact(self, rng):
        # three frames of identical features: predictions must equal frame 1
        sigs = np.zeros((3, 4, 4), dtype=np.float32)
        grid = np.zeros((4, 4), dtype=np.uint8)
        grid[1:3, 1:3] = 1
        sigs[0][grid == 0] = 5.0
        sigs[1][grid == 1] = 5.0
        planes = one_hot_planes(grid, objs=1)
        bank = bank_of([sigs], [planes], capacity=8)
        for sim in ("cos", "l1", "l2"):
            cfg = AffinityConfig(similarity=sim, topk=1)
            soft, _ = step(bank, sigs, cfg)
            np.testing.assert_array_equal(harden(soft).data, grid)

    def test_degenerate_capacity_matches_frame_one_only(self, rng):
        feats1 = rng.standard_normal((2, 2, 2)).astype(np.float32)
        planes1 = one_hot_planes(rng.integers(0, 2, (2, 2)), objs=1)
        bank = MemoryBank(capacity=1, pin_first=True)
        bank.add(1, feats1, planes1)
        for t in range(2, 6):
            qry = rng.standard_normal((2, 2, 2)).astype(np.float32)
            step(bank, qry, AffinityConfig(topk=4), frame_index=t)
            assert bank.frame_indices() == [1]


class TestArgmaxEquivalence:
    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30)
    def test_cos_l2_same_argmax_on_normalized_features(self, seed):
        rng = np.random.default_rng(seed)
        mem = rng.standard_normal((1, 6, 4, 4))
        mem /= np.linalg.norm(mem, axis=1, keepdims=True)
        qry = rng.standard_normal((6, 4, 4))
        qry /= np.linalg.norm(qry, axis=0, keepdims=True)
        cos = affinity_scores(mem.astype(np.float32), qry.astype(np.float32), "cos")
        l2 = affinity_scores(mem.astype(np.float32), qry.astype(np.float32), "l2")
        assert argmax_rows(cos) == argmax_rows(l2)

    def test_affinity_argmax_matches_linear_scan_oracle(self, rng):
        mem = rng.standard_normal((2, 3, 3, 3)).astype(np.float32)
        qry = rng.standard_normal((3, 3, 3)).astype(np.float32)
        for sim in ("cos", "l1", "l2"):
            scores = affinity_scores(mem, qry, sim)
            assert np.argmax(scores, axis=0).tolist() == argmax_rows(scores)
