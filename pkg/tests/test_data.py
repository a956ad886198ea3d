import json

import numpy as np
import pytest

from ctseg.data import (Dataset, DatasetItem, FamilySpec, generate_synthetic,
                        load_dataset, save_contours, save_dataset,
                        select_exemplar)
from ctseg.errors import (ImageContourMismatch, InvalidFamilySpec,
                          MalformedJson, MissingExemplar)
from ctseg.geometry import Contour, polygon_iou, rasterize


class TestFamilySpec:
    def test_bad_family(self):
        with pytest.raises(InvalidFamilySpec):
            FamilySpec(family="star").validate()

    def test_empty_range(self):
        with pytest.raises(InvalidFamilySpec):
            FamilySpec(radius=(40.0, 28.0)).validate()

    def test_count_too_small(self):
        with pytest.raises(InvalidFamilySpec):
            generate_synthetic(FamilySpec(), 1, seed=0)


class TestGenerateSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(FamilySpec(), 4, seed=7)
        b = generate_synthetic(FamilySpec(), 4, seed=7)
        for ia, ib in zip(a.items, b.items):
            assert np.array_equal(ia.image.values, ib.image.values)
            assert np.array_equal(ia.contour.vertices, ib.contour.vertices)

    def test_seed_changes_content(self):
        a = generate_synthetic(FamilySpec(), 2, seed=1)
        b = generate_synthetic(FamilySpec(), 2, seed=2)
        assert not np.array_equal(a.items[0].image.values,
                                  b.items[0].image.values)

    def test_prefix_stable(self):
        # item i depends only on (seed, i), not on the requested count
        a = generate_synthetic(FamilySpec(), 3, seed=5)
        b = generate_synthetic(FamilySpec(), 6, seed=5)
        for ia, ib in zip(a.items, b.items):
            assert np.array_equal(ia.image.values, ib.image.values)

    @pytest.mark.parametrize("family", ["ellipse", "superellipse", "bean"])
    def test_families_render(self, family):
        ds = generate_synthetic(FamilySpec(family=family), 2, seed=3)
        assert len(ds) == 2
        assert ds.exemplar_id == "img0000"
        for it in ds.items:
            assert it.image.values.shape == (128, 128)
            assert it.contour.n == 100

    def test_ellipse_boundary_analytic(self):
        # noiseless axis-aligned circle: sampled boundary within 0.5 px of r
        spec = FamilySpec(radius=(30.0, 30.0), aspect=(1.0, 1.0),
                          rotation=(0.0, 0.0), center_jitter=(0.0, 0.0),
                          noise_sigma=(0.0, 0.0))
        ds = generate_synthetic(spec, 2, seed=0)
        c = ds.items[0].contour
        r = np.linalg.norm(c.vertices - [64.0, 64.0], axis=1)
        assert np.abs(r - 30.0).max() < 0.5

    def test_shape_brighter_than_background(self):
        ds = generate_synthetic(FamilySpec(noise_sigma=(0.0, 0.0)), 2, seed=4)
        it = ds.items[0]
        mask = rasterize(it.contour, 128, 128)
        inner = it.image.values[mask].mean()
        outer = it.image.values[~mask].mean()
        assert inner > outer + 0.2


class TestSelectExemplar:
    def brute_force(self, ds):
        from ctseg.imaging import encode_features
        feats = {it.image_id: encode_features(it.image).flat()
                 for it in ds.items}
        best = None
        for i, it in enumerate(ds.items):
            ds_ = [np.linalg.norm(feats[it.image_id] - feats[o.image_id])
                   for o in ds.items if o.image_id != it.image_id]
            key = (float(np.mean(ds_)), it.image_id)
            if best is None or key < best:
                best = key
        return best[1]

    def test_matches_brute_force(self):
        ds = generate_synthetic(FamilySpec(), 6, seed=9)
        assert select_exemplar(ds) == self.brute_force(ds)

    def test_duplicate_images_win(self):
        ds = generate_synthetic(FamilySpec(), 4, seed=10)
        twin = DatasetItem(image_id="img0003", image=ds.items[0].image,
                           contour=ds.items[0].contour)
        ds2 = ds.with_item(twin)
        # a duplicated image is closest on average to the rest
        assert select_exemplar(ds2) in ("img0000", "img0003")

    def test_tie_breaks_by_id(self):
        ds = generate_synthetic(FamilySpec(), 3, seed=11)
        same = Dataset(items=(ds.items[0],
                              DatasetItem("z", ds.items[0].image,
                                          ds.items[0].contour)),
                       exemplar_id="img0000", n_vertices=100)
        assert select_exemplar(same) == "img0000"

    def test_singleton(self):
        ds = generate_synthetic(FamilySpec(), 2, seed=12)
        solo = Dataset(items=(ds.items[0],), exemplar_id="img0000",
                       n_vertices=100)
        assert select_exemplar(solo) == "img0000"


class TestDirectoryIO:
    def test_round_trip(self, tmp_path):
        from ctseg.hitl import CorrectionSet

        ds = generate_synthetic(FamilySpec(), 3, seed=13)
        seg = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 4.0]])
        ds = ds.with_item(
            DatasetItem(ds.items[1].image_id, ds.items[1].image,
                        ds.items[1].contour,
                        CorrectionSet(ds.items[1].image_id, (seg,))))
        save_dataset(ds, tmp_path)
        again = load_dataset(tmp_path)
        assert again.exemplar_id == ds.exemplar_id
        assert again.n_vertices == ds.n_vertices
        assert len(again) == 3
        for a, b in zip(ds.items, again.items):
            assert a.image_id == b.image_id
            assert np.allclose(a.image.values, b.image.values, atol=1.0 / 65535)
            assert np.allclose(a.contour.vertices, b.contour.vertices)
        assert np.array_equal(again.items[1].corrections.segments[0], seg)

    def test_save_contours(self, tmp_path):
        ds = generate_synthetic(FamilySpec(), 2, seed=14)
        save_contours({"a": ds.items[0].contour}, tmp_path / "preds")
        c = Contour.load(tmp_path / "preds" / "a.json")
        assert np.allclose(c.vertices, ds.items[0].contour.vertices)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(MissingExemplar):
            load_dataset(tmp_path)

    def test_missing_exemplar_image(self, tmp_path):
        ds = generate_synthetic(FamilySpec(), 2, seed=15)
        save_dataset(ds, tmp_path)
        (tmp_path / "manifest.json").write_text(
            json.dumps({"exemplar": "nope", "n_vertices": 100}))
        with pytest.raises(MissingExemplar):
            load_dataset(tmp_path)

    def test_malformed_contour_json(self, tmp_path):
        ds = generate_synthetic(FamilySpec(), 2, seed=16)
        save_dataset(ds, tmp_path)
        (tmp_path / "contours" / "img0000.json").write_text("{not json")
        with pytest.raises(MalformedJson):
            load_dataset(tmp_path)

    def test_contour_outside_image(self, tmp_path):
        ds = generate_synthetic(FamilySpec(), 2, seed=17)
        save_dataset(ds, tmp_path)
        bad = Contour(np.array([[0.0, 0.0], [500.0, 0.0], [500.0, 500.0]]))
        bad.save(tmp_path / "contours" / "img0000.json")
        with pytest.raises(ImageContourMismatch):
            load_dataset(tmp_path)

    def test_items_without_ground_truth_load(self, tmp_path):
        ds = generate_synthetic(FamilySpec(), 2, seed=18)
        save_dataset(ds, tmp_path)
        (tmp_path / "contours" / "img0001.json").unlink()
        again = load_dataset(tmp_path)
        assert again.get("img0001").contour is None
        assert again.get("img0000").contour is not None
