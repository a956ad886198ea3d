import json

import numpy as np
import pytest

from ctseg.data import Dataset, DatasetItem, FamilySpec, generate_synthetic
from ctseg.errors import MalformedJson, MissingGroundTruth
from ctseg.geometry import Contour
from ctseg.hitl import (CorrectionSet, _arc_indices, canonical_correction_json,
                        correspond_segments, select_worst,
                        simulate_corrections)
from conftest import random_blob


def ring_contour(n=12, r=10.0, center=(0.0, 0.0)):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return Contour(np.stack([center[0] + r * np.cos(t),
                             center[1] + r * np.sin(t)], axis=1))


def brute_force_correspond(c, corrections):
    """Independent re-derivation of the endpoint-arc rule."""
    pred = c.vertices
    n = len(pred)
    assignment = {}
    for seg in corrections.segments:
        a = int(np.linalg.norm(pred - seg[0], axis=1).argmin())
        b = int(np.linalg.norm(pred - seg[-1], axis=1).argmin())
        if a == b:
            arcs = [[a]]
        else:
            fwd = [(a + k) % n for k in range((b - a) % n + 1)]
            bwd = [(b + k) % n for k in range((a - b) % n + 1)]
            arcs = [fwd, bwd]
        best = None
        for arc in arcs:
            d = np.linalg.norm(pred[arc][:, None] - seg[None], axis=2)
            key = (float(d.min(axis=1).mean()), len(arc))
            if best is None or key < best[0]:
                best = (key, arc, d)
        _, arc, d = best
        for idx, j in zip(arc, d.argmin(axis=1)):
            assignment.setdefault(idx, seg[j].copy())
    return assignment


class TestCorrectionSet:
    def test_json_round_trip(self):
        cs = CorrectionSet("img0001", (np.array([[1.0, 2.0], [3.0, 4.0]]),))
        again = CorrectionSet.from_json(cs.to_json())
        assert again.image_id == cs.image_id
        assert np.array_equal(again.segments[0], cs.segments[0])

    def test_from_json_rejects_short_segment(self):
        with pytest.raises(MalformedJson):
            CorrectionSet.from_json(
                {"image_id": "a", "segments": [[[1.0, 2.0]]]})

    def test_rejects_coincident_points(self):
        with pytest.raises(MalformedJson):
            CorrectionSet("a", (np.array([[1.0, 1.0], [1.0, 1.0]]),))

    def test_missing_keys(self):
        with pytest.raises(MalformedJson):
            CorrectionSet.from_json({"segments": []})

    def test_canonical_json_stable(self):
        obj = {"segments": [[[3.0, 4.0], [1.0, 2.0]]], "image_id": "x"}
        s1 = canonical_correction_json(obj)
        s2 = canonical_correction_json(json.loads(s1))
        assert s1 == s2
        assert s1.startswith('{"image_id":"x"')


class TestCorrespondSegments:
    def test_single_segment_near_arc(self):
        c = ring_contour(12, 10.0)
        # redraw the arc near vertices 2..4, pushed outward
        seg = c.vertices[[2, 3, 4]] * 1.3
        assignment = correspond_segments(c, CorrectionSet("", (seg,)))
        assert set(assignment) == {2, 3, 4}
        for idx, pt in assignment.items():
            j = np.linalg.norm(seg - c.vertices[idx], axis=1).argmin()
            assert np.array_equal(pt, seg[j])

    def test_arc_membership(self):
        # every assigned index lies on one of the two endpoint arcs
        rng = np.random.default_rng(0)
        c = random_blob(rng, n=25, center=(0, 0), radius=10)
        seg = c.vertices[[5, 7, 9]] + rng.normal(0, 0.5, size=(3, 2))
        assignment = correspond_segments(c, CorrectionSet("", (seg,)))
        a = int(np.linalg.norm(c.vertices - seg[0], axis=1).argmin())
        b = int(np.linalg.norm(c.vertices - seg[-1], axis=1).argmin())
        arc_f = set(_arc_indices(a, b, 25))
        arc_b = set(_arc_indices(b, a, 25))
        assert set(assignment) <= arc_f or set(assignment) <= arc_b

    def test_earlier_segment_wins_overlap(self):
        c = ring_contour(12, 10.0)
        seg1 = c.vertices[[2, 3, 4]] * 1.2
        seg2 = c.vertices[[3, 4, 5]] * 0.8
        assignment = correspond_segments(c, CorrectionSet("", (seg1, seg2)))
        for idx in (3, 4):
            d1 = np.linalg.norm(seg1 - assignment[idx], axis=1).min()
            assert d1 == 0.0  # came from seg1, not seg2

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(1)
        for trial in range(30):
            n = int(rng.integers(6, 30))
            c = random_blob(rng, n=n, center=(0, 0), radius=8)
            k = int(rng.integers(2, 6))
            idx = np.sort(rng.choice(n, size=min(k, n), replace=False))
            seg = c.vertices[idx] + rng.normal(0, 1.0, size=(len(idx), 2))
            cs = CorrectionSet("", (seg,))
            got = correspond_segments(c, cs)
            want = brute_force_correspond(c, cs)
            assert set(got) == set(want)
            for i in got:
                assert np.array_equal(got[i], want[i])


class TestSimulateCorrections:
    def test_no_error_empty(self):
        c = ring_contour(10)
        assert len(simulate_corrections(c, c)) == 0

    def test_exact_threshold_not_error(self):
        gt = Contour(np.array([[0.0, 0.0], [8.0, 0.0], [8.0, 8.0], [0.0, 8.0]]))
        pred = Contour(gt.vertices + np.array([3.0, 0.0]))
        # displacement exactly 3.0 is tolerated (strict inequality)
        assert len(simulate_corrections(pred, gt, threshold=3.0)) == 0

    def test_single_run(self):
        gt = ring_contour(12)
        v = gt.vertices.copy()
        v[[4, 5, 6]] += 10.0
        cs = simulate_corrections(Contour(v), gt)
        assert len(cs) == 1
        assert np.array_equal(cs.segments[0], gt.vertices[[4, 5, 6]])

    def test_cyclic_run_stays_whole(self):
        gt = ring_contour(12)
        v = gt.vertices.copy()
        v[[11, 0, 1]] += 10.0  # run wraps around index 0
        cs = simulate_corrections(Contour(v), gt)
        assert len(cs) == 1
        assert np.array_equal(cs.segments[0], gt.vertices[[11, 0, 1]])

    def test_all_error_single_full_segment(self):
        gt = ring_contour(12)
        cs = simulate_corrections(Contour(gt.vertices + 10.0), gt)
        assert len(cs) == 1
        assert np.array_equal(cs.segments[0], gt.vertices)

    def test_vertex_count_mismatch(self):
        with pytest.raises(ValueError):
            simulate_corrections(ring_contour(10), ring_contour(12))

    def test_feeds_correspondence(self):
        # simulated segments can be consumed by the matching pipeline
        gt = ring_contour(20, 10.0)
        v = gt.vertices.copy()
        v[[3, 4, 5, 6]] *= 1.6
        pred = Contour(v)
        cs = simulate_corrections(pred, gt)
        assignment = correspond_segments(pred, cs)
        assert assignment  # non-empty
        for idx, pt in assignment.items():
            assert any(np.linalg.norm(seg - pt, axis=1).min() == 0.0
                       for seg in cs.segments)


class TestSelectWorst:
    def make(self, errors):
        ds = generate_synthetic(FamilySpec(), len(errors), seed=20)
        preds = {}
        for it, e in zip(ds.items, errors):
            preds[it.image_id] = Contour(it.contour.vertices + np.array([e, 0.0]))
        return ds, preds

    def test_orders_by_hausdorff(self):
        ds, preds = self.make([1.0, 5.0, 3.0, 9.0])
        assert select_worst(ds, preds, 0.5) == ["img0003", "img0001"]

    def test_ceil_fraction(self):
        ds, preds = self.make([1.0, 2.0, 3.0])
        assert len(select_worst(ds, preds, 0.34)) == 2  # ceil(1.02)
        assert select_worst(ds, preds, 0.0) == []
        assert len(select_worst(ds, preds, 1.0)) == 3

    def test_ties_rank_by_id(self):
        ds, preds = self.make([2.0, 2.0])
        assert select_worst(ds, preds, 1.0) == ["img0000", "img0001"]

    def test_missing_ground_truth(self):
        ds, preds = self.make([1.0, 2.0])
        ds = ds.with_item(DatasetItem("img0000", ds.items[0].image, None))
        with pytest.raises(MissingGroundTruth):
            select_worst(ds, preds, 1.0)

    def test_only_predicted_items_ranked(self):
        ds, preds = self.make([1.0, 2.0, 3.0])
        del preds["img0002"]
        assert select_worst(ds, preds, 1.0) == ["img0001", "img0000"]
