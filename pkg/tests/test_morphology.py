import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from angiosim import (
    BatchError,
    ValidationError,
    binarize,
    distance_transform,
    encode_image,
    estimate_batch,
    estimate_center_thickness,
    write_thickness_csv,
)
from angiosim.morphology import ThicknessSamples, read_thickness_csv


def brute_force_edt(mask):
    """O(N^2) nearest-background scan; frame boundary counts as background
    only when the mask has no background at all."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if mask.all():
        rows = np.minimum(np.arange(h) + 1, h - np.arange(h))[:, None]
        cols = np.minimum(np.arange(w) + 1, w - np.arange(w))[None, :]
        return np.minimum(rows, cols) + np.zeros((h, w))
    out = np.zeros((h, w))
    bg = np.argwhere(~mask)
    for j, i in np.argwhere(mask):
        d2 = (bg[:, 0] - j) ** 2 + (bg[:, 1] - i) ** 2
        out[j, i] = np.sqrt(d2.min())
    return out


def brute_force_center_thickness(mask, search_radius=40.0):
    """Try every (pixel, radius) disk that contains the center."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    cx, cy = w // 2, h // 2
    dist = brute_force_edt(mask)
    best = -1.0
    for j, i in np.argwhere(mask):
        d_center = np.hypot(i - cx, j - cy)
        if d_center <= search_radius and d_center <= dist[j, i] + 1e-9:
            best = max(best, dist[j, i])
    if best < 0:
        return 0.0, False
    return 2.0 * best, True


def random_mask(rng, shape=(64, 64)):
    kind = rng.integers(0, 3)
    if kind == 0:
        return rng.random(shape) < rng.uniform(0.2, 0.8)
    if kind == 1:
        # blobby: dilated sparse seeds
        seeds = rng.random(shape) < 0.02
        return ndimage.binary_dilation(seeds, iterations=int(rng.integers(1, 6)))
    mask = np.zeros(shape, dtype=bool)
    w = int(rng.integers(3, 30))
    c = int(rng.integers(0, shape[1]))
    mask[:, max(0, c - w // 2) : c + w // 2 + 1] = True
    return mask


class TestBinarize:
    def test_binary_input_identity(self):
        img = np.where(np.random.default_rng(0).random((32, 32)) < 0.5, 0, 255).astype(np.uint8)
        assert np.array_equal(binarize(img, 0.5), img == 255)

    def test_all_zero(self):
        assert not binarize(np.zeros((16, 16), dtype=np.uint8), 0.5).any()

    def test_gray_levels_against_full_scale(self):
        img = np.array([[0, 100, 200]], dtype=np.uint8)
        mask = binarize(img, 0.5)
        assert mask.tolist() == [[False, False, True]]

    def test_float_input(self):
        img = np.array([[0.1, 0.6]])
        assert binarize(img, 0.5).tolist() == [[False, True]]

    def test_validation(self):
        with pytest.raises(ValidationError):
            binarize(np.zeros((0, 4)), 0.5)
        with pytest.raises(ValidationError):
            binarize(np.zeros((4, 4)), 1.5)


class TestDistanceTransform:
    def test_all_background(self):
        assert not distance_transform(np.zeros((8, 8), dtype=bool)).any()

    def test_single_foreground_pixel(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        assert distance_transform(mask)[4, 4] == 1.0

    def test_vertical_strip_midline(self):
        mask = np.zeros((64, 64), dtype=bool)
        mask[:, 11:32] = True  # 21 columns
        dist = distance_transform(mask)
        assert dist[32, 21] == 11.0
        assert dist.max() == 11.0

    def test_all_foreground_boundary_convention(self):
        dist = distance_transform(np.ones((256, 256), dtype=bool))
        assert dist[128, 128] == 128.0
        assert dist[0, 0] == 1.0

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, seed):
        mask = random_mask(np.random.default_rng(seed))
        assert np.array_equal(distance_transform(mask), brute_force_edt(mask))


class TestEstimateCenterThickness:
    def test_strip_through_center(self):
        mask = np.zeros((256, 256), dtype=bool)
        mask[:, 118:139] = True  # width 21, centered on column 128
        est = estimate_center_thickness(mask)
        assert est.valid
        assert 20.0 <= est.thickness <= 22.0

    def test_all_background_invalid(self):
        est = estimate_center_thickness(np.zeros((64, 64), dtype=bool))
        assert not est.valid and est.thickness == 0.0

    def test_full_foreground_uses_boundary(self):
        est = estimate_center_thickness(np.ones((256, 256), dtype=bool), search_radius=40.0)
        oracle, valid = brute_force_center_thickness(np.ones((64, 64), dtype=bool))
        assert est.valid
        assert est.thickness == 256.0
        small = estimate_center_thickness(np.ones((64, 64), dtype=bool))
        assert valid and small.thickness == oracle

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_brute_force_oracle(self, seed):
        mask = random_mask(np.random.default_rng(seed))
        est = estimate_center_thickness(mask)
        oracle, valid = brute_force_center_thickness(mask)
        assert est.valid == valid
        assert abs(est.thickness - oracle) <= 1.0

    def test_translation_consistency(self):
        rng = np.random.default_rng(3)
        base = np.zeros((96, 96), dtype=bool)
        base[30:70, 34:55] = True
        est1 = estimate_center_thickness(base[8:72, 8:72])  # center (32, 32) of crop
        shifted = np.roll(base, (4, 6), axis=(0, 1))
        est2 = estimate_center_thickness(shifted[12:76, 14:78])
        assert est1.thickness == est2.thickness

    def test_dilation_monotonicity(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            mask = random_mask(rng)
            grown = ndimage.binary_dilation(mask)
            a = estimate_center_thickness(mask)
            b = estimate_center_thickness(grown)
            assert b.thickness >= a.thickness

    def test_estimator_accuracy_on_bars(self):
        # angled bars through (almost) the center; sub-pixel offset avoids
        # the degenerate integer-aligned band
        ys, xs = np.mgrid[0:256, 0:256]
        for width in (10, 17, 24, 33, 40):
            for ang in (0, 30, 45, 60, 90):
                th = np.radians(ang)
                perp = np.abs(-(xs - 128.25) * np.sin(th) + (ys - 128.37) * np.cos(th))
                est = estimate_center_thickness(perp <= width / 2.0)
                assert est.valid
                assert abs(est.thickness - width) <= 1.5


class TestEstimateBatch:
    def _write_images(self, directory, n=4, seed=0):
        rng = np.random.default_rng(seed)
        for i in range(n):
            mask = np.zeros((64, 64), dtype=np.uint8)
            w = int(rng.integers(5, 15))
            mask[:, 32 - w : 32 + w + 1] = 255
            encode_image(mask, directory / f"img_{i:06d}.pgm")

    def test_batch_order_and_values(self, tmp_path):
        self._write_images(tmp_path)
        result = estimate_batch(tmp_path)
        assert [r.filename for r in result.records] == sorted(r.filename for r in result.records)
        assert result.samples.count == 4
        assert not result.errors

    def test_corrupt_file_recorded(self, tmp_path):
        self._write_images(tmp_path, n=1)
        (tmp_path / "img_999999.pgm").write_bytes(b"P5\n64")
        result = estimate_batch(tmp_path)
        assert result.samples.count == 1
        assert len(result.errors) == 1
        assert result.errors[0][0] == "img_999999.pgm"

    def test_invalid_estimates_reported_not_sampled(self, tmp_path):
        encode_image(np.zeros((64, 64), dtype=np.uint8), tmp_path / "zz_empty.pgm")
        self._write_images(tmp_path, n=1, seed=3)
        result = estimate_batch(tmp_path)
        assert result.invalid_count == 1
        assert result.samples.count == len(result.records) - 1

    def test_empty_directory(self, tmp_path):
        with pytest.raises(BatchError):
            estimate_batch(tmp_path)

    def test_all_unreadable(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"nonsense")
        (tmp_path / "b.pgm").write_bytes(b"junk")
        with pytest.raises(BatchError):
            estimate_batch(tmp_path)

    def test_bimodal_clusters_on_rendered_batch(self, tmp_path):
        # 100 noiseless sim33 renders split into two well-separated clusters,
        # one at the nominal thickness and one at the aneurysm mean
        import dataclasses

        from angiosim import preset, render
        from angiosim.dataset import derive_seed

        cfg = dataclasses.replace(preset("sim33"), edge_noise_sigma=0.0)
        for i in range(100):
            encode_image(render(cfg, derive_seed(0, i)).pixels, tmp_path / f"img_{i:06d}.pgm")
        result = estimate_batch(tmp_path)
        values = result.samples.values
        assert result.samples.count == 100
        low = values[values < 25.0]
        high = values[values >= 25.0]
        assert low.size and high.size
        assert np.all((low >= 19.0) & (low <= 22.5))
        assert np.all((high >= 29.5) & (high <= 37.0))

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        self._write_images(tmp_path, n=6)
        monkeypatch.setenv("ANGIOSIM_THREADS", "1")
        serial = estimate_batch(tmp_path)
        monkeypatch.setenv("ANGIOSIM_THREADS", "2")
        pooled = estimate_batch(tmp_path)
        assert serial.records == pooled.records
        assert np.array_equal(serial.samples.values, pooled.samples.values)

    def test_csv_round_trip(self, tmp_path):
        self._write_images(tmp_path)
        result = estimate_batch(tmp_path)
        csv_path = tmp_path / "thickness.csv"
        write_thickness_csv(result, csv_path)
        text = csv_path.read_text()
        assert text.startswith("filename,thickness_px,valid\n")
        assert "\r" not in text
        records = read_thickness_csv(csv_path)
        assert records == result.records


class TestThicknessSamples:
    def test_count_matches(self):
        s = ThicknessSamples([1.0, 2.0, 3.0], source_tag="x")
        assert s.count == 3

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            ThicknessSamples([1.0, -2.0])


@settings(deadline=None, max_examples=20)
@given(
    mask=arrays(np.bool_, (32, 32), elements=st.booleans()),
    dj=st.integers(-5, 5),
    di=st.integers(-5, 5),
)
def test_shift_invariance_property(mask, dj, di):
    # shifting mask and evaluation window together leaves the estimate alone
    big = np.zeros((64, 64), dtype=bool)
    big[16:48, 16:48] = mask
    a = estimate_center_thickness(big[8:56, 8:56], search_radius=10.0)
    shifted = np.roll(big, (dj, di), axis=(0, 1))
    b = estimate_center_thickness(shifted[8 + dj : 56 + dj, 8 + di : 56 + di], search_radius=10.0)
    assert a.thickness == b.thickness and a.valid == b.valid
