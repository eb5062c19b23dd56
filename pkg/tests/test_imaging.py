from __future__ import annotations

import math
from collections import deque

import numpy as np
import pytest
from PIL import Image
import io

from conftest import random_mask
from segqc.errors import (
    DimensionMismatchError,
    EmptyMaskError,
    EmptyReferenceError,
    EmptyTopologyError,
)
from segqc.imaging import (
    BinaryMask,
    OverlayStyle,
    RasterImage,
    RegionTopology,
    boundary_edge_strength,
    extract_features,
    interior_homogeneity,
    overlap_stats,
    region_topology,
    render_overlay,
)

# ---------------------------------------------------------------------------
# Independent oracles


def oracle_overlap(cand: np.ndarray, ref: np.ndarray) -> tuple[float, float, float]:
    """Per-pixel counting, no vector ops."""
    inter = c_area = r_area = 0
    h, w = cand.shape
    for y in range(h):
        for x in range(w):
            c, r = bool(cand[y, x]), bool(ref[y, x])
            c_area += c
            r_area += r
            inter += c and r
    dice = 2 * inter / (c_area + r_area)
    under = (r_area - inter) / r_area
    spill = (c_area - inter) / c_area if c_area else 0.0
    return dice, under, spill


def oracle_component_count(bits: np.ndarray) -> int:
    """Queue-based flood fill with 8-connectivity."""
    h, w = bits.shape
    seen = np.zeros_like(bits, dtype=bool)
    count = 0
    for sy in range(h):
        for sx in range(w):
            if not bits[sy, sx] or seen[sy, sx]:
                continue
            count += 1
            queue = deque([(sy, sx)])
            seen[sy, sx] = True
            while queue:
                y, x = queue.popleft()
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
    return count


def oracle_sobel_at(img: np.ndarray, points: list[tuple[int, int]]) -> float:
    """Direct convolution with explicit loops and replicate padding."""
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    h, w = img.shape

    def sample(y: int, x: int) -> float:
        return img[min(max(y, 0), h - 1), min(max(x, 0), w - 1)]

    total = 0.0
    for (py, px) in points:
        gx = gy = 0.0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                value = sample(py + dy, px + dx)
                gx += kx[dy + 1][dx + 1] * value
                gy += ky[dy + 1][dx + 1] * value
        total += math.sqrt(gx * gx + gy * gy)
    return min(1.0, max(0.0, (total / len(points)) / 4.0))


def oracle_cv(values: list[float]) -> float:
    """Two-pass mean then variance."""
    mean = sum(values) / len(values)
    if mean == 0:
        return float("inf")
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return math.sqrt(var) / mean


def disk_mask(shape=(32, 32), center=(16, 16), r=10) -> np.ndarray:
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= r * r


# ---------------------------------------------------------------------------


class TestTopology:
    def test_empty_mask(self):
        topo = region_topology(BinaryMask.from_array(np.zeros((8, 8), bool)))
        assert topo.component_count == 0
        assert topo.total_area_px == 0
        assert topo.contours == [] and topo.holes_per_component == []

    def test_solid_disk(self):
        topo = region_topology(BinaryMask.from_array(disk_mask()))
        assert topo.component_count == 1
        assert topo.holes_per_component == [0]
        assert len(topo.contours) == 1

    def test_annulus_has_one_hole(self):
        yy, xx = np.mgrid[0:32, 0:32]
        d2 = (yy - 16) ** 2 + (xx - 16) ** 2
        topo = region_topology(BinaryMask.from_array((d2 <= 100) & (d2 >= 25)))
        assert topo.component_count == 1
        assert topo.holes_per_component == [1]

    def test_diagonal_pixels_are_one_component(self):
        bits = np.zeros((8, 8), bool)
        bits[2, 2] = bits[3, 3] = True
        assert region_topology(BinaryMask.from_array(bits)).component_count == 1

    def test_component_count_matches_flood_fill_oracle(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            bits = random_mask(rng, density=rng.uniform(0.2, 0.7))
            topo = region_topology(BinaryMask.from_array(bits))
            assert topo.component_count == oracle_component_count(bits), f"seed {seed}"

    def test_contours_closed_on_boundary_and_inside_component(self):
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            bits = random_mask(rng, density=rng.uniform(0.2, 0.7))
            topo = region_topology(BinaryMask.from_array(bits))
            h, w = bits.shape
            for contour in topo.contours:
                first, last = contour[0], contour[-1]
                assert max(abs(first[0] - last[0]), abs(first[1] - last[1])) <= 1
                for (y, x) in contour:
                    assert bits[y, x], "contour pixel must be foreground"
                    on_border = y in (0, h - 1) or x in (0, w - 1)
                    has_bg_n4 = any(
                        0 <= y + dy < h and 0 <= x + dx < w and not bits[y + dy, x + dx]
                        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1))
                    )
                    assert on_border or has_bg_n4, "contour pixel must be on the boundary"

    def test_contour_count_matches_components(self):
        for seed in range(30):
            rng = np.random.default_rng(2000 + seed)
            bits = random_mask(rng, density=0.35)
            topo = region_topology(BinaryMask.from_array(bits))
            assert len(topo.contours) == topo.component_count
            assert len(topo.holes_per_component) == topo.component_count


class TestOverlap:
    def test_identity(self):
        m = BinaryMask.from_array(disk_mask())
        stats = overlap_stats(m, m)
        assert stats.dice == 1.0 and stats.under_seg_fraction == 0.0 and stats.spill_fraction == 0.0

    def test_shifted_square_exact(self):
        sq = np.zeros((32, 64), bool)
        sq[8:24, 8:24] = True
        sh = np.zeros((32, 64), bool)
        sh[8:24, 16:32] = True
        stats = overlap_stats(BinaryMask.from_array(sh), BinaryMask.from_array(sq))
        assert stats.dice == 0.5
        assert stats.under_seg_fraction == 0.5
        assert stats.spill_fraction == 0.5

    def test_disjoint_masks(self):
        a = np.zeros((16, 16), bool)
        b = np.zeros((16, 16), bool)
        a[:4, :4] = True
        b[8:, 8:] = True
        assert overlap_stats(BinaryMask.from_array(a), BinaryMask.from_array(b)).dice == 0.0

    def test_matches_pixel_counting_oracle_on_100_seeds(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            cand = random_mask(rng)
            ref = random_mask(rng)
            if not ref.any():
                continue
            stats = overlap_stats(BinaryMask.from_array(cand), BinaryMask.from_array(ref))
            dice, under, spill = oracle_overlap(cand, ref)
            assert stats.dice == dice
            assert stats.under_seg_fraction == under
            assert stats.spill_fraction == spill

    def test_dice_symmetric(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = random_mask(rng), random_mask(rng)
            if not (a.any() and b.any()):
                continue
            ma, mb = BinaryMask.from_array(a), BinaryMask.from_array(b)
            assert overlap_stats(ma, mb).dice == overlap_stats(mb, ma).dice

    def test_zero_fraction_iff_subset(self):
        for seed in range(50):
            rng = np.random.default_rng(3000 + seed)
            cand, ref = random_mask(rng), random_mask(rng)
            if not (cand.any() and ref.any()):
                continue
            stats = overlap_stats(BinaryMask.from_array(cand), BinaryMask.from_array(ref))
            assert (stats.under_seg_fraction == 0.0) == bool(((ref & ~cand).sum() == 0))
            assert (stats.spill_fraction == 0.0) == bool(((cand & ~ref).sum() == 0))

    def test_dice_one_iff_identical(self):
        for seed in range(50):
            rng = np.random.default_rng(4000 + seed)
            cand, ref = random_mask(rng), random_mask(rng)
            if not (cand.any() and ref.any()):
                continue
            stats = overlap_stats(BinaryMask.from_array(cand), BinaryMask.from_array(ref))
            assert (stats.dice == 1.0) == bool(np.array_equal(cand, ref))
        same = random_mask(np.random.default_rng(1))
        same[0, 0] = True
        assert overlap_stats(BinaryMask.from_array(same), BinaryMask.from_array(same)).dice == 1.0

    def test_empty_reference_rejected(self):
        m = BinaryMask.from_array(disk_mask())
        with pytest.raises(EmptyReferenceError):
            overlap_stats(m, BinaryMask.from_array(np.zeros((32, 32), bool)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            overlap_stats(
                BinaryMask.from_array(np.ones((8, 8), bool)),
                BinaryMask.from_array(np.ones((8, 9), bool)),
            )


class TestEdgeStrength:
    def test_constant_image_is_zero(self):
        topo = region_topology(BinaryMask.from_array(disk_mask()))
        image = RasterImage(np.full((32, 32), 0.5))
        assert boundary_edge_strength(image, topo) == 0.0

    def test_ideal_step_on_column_is_one(self):
        img = np.zeros((16, 16))
        img[:, 8:] = 1.0
        topo = RegionTopology(1, [0], [[(y, 8) for y in range(16)]], 128)
        assert boundary_edge_strength(RasterImage(img), topo) == 1.0

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(99)
        img = np.clip(0.2 + 0.55 * disk_mask() + rng.normal(0, 0.05, (32, 32)), 0, 1)
        topo = region_topology(BinaryMask.from_array(disk_mask()))
        pts = sorted({p for c in topo.contours for p in c})
        ours = boundary_edge_strength(RasterImage(img), topo)
        assert ours == pytest.approx(oracle_sobel_at(img, pts), abs=1e-9)

    def test_clamped_to_unit_interval(self):
        img = np.zeros((8, 8))
        img[4:, 4:] = 1.0  # corner: diagonal step exceeds the unit-step response
        bits = np.zeros((8, 8), bool)
        bits[4:, 4:] = True
        topo = region_topology(BinaryMask.from_array(bits))
        value = boundary_edge_strength(RasterImage(img), topo)
        assert 0.0 <= value <= 1.0

    def test_empty_topology_rejected(self):
        with pytest.raises(EmptyTopologyError):
            boundary_edge_strength(RasterImage(np.zeros((8, 8))), RegionTopology(0, [], [], 0))


class TestHomogeneity:
    def test_constant_region(self):
        image = RasterImage(np.full((8, 8), 0.4))
        assert interior_homogeneity(image, BinaryMask.from_array(np.ones((8, 8), bool))) == 0.0

    def test_half_and_half_exact(self):
        img = np.zeros((4, 4))
        img[:2, :] = 0.2
        img[2:, :] = 0.6
        cv = interior_homogeneity(RasterImage(img), BinaryMask.from_array(np.ones((4, 4), bool)))
        assert cv == pytest.approx(0.5, abs=1e-12)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(5)
        img = rng.random((32, 32))
        bits = random_mask(rng)
        if not bits.any():
            bits[0, 0] = True
        cv = interior_homogeneity(RasterImage(img), BinaryMask.from_array(bits))
        assert cv == pytest.approx(oracle_cv(list(img[bits])), abs=1e-12)

    def test_zero_mean_returns_infinity(self):
        image = RasterImage(np.zeros((8, 8)))
        assert interior_homogeneity(image, BinaryMask.from_array(np.ones((8, 8), bool))) == float("inf")

    def test_empty_mask_rejected(self):
        with pytest.raises(EmptyMaskError):
            interior_homogeneity(RasterImage(np.zeros((8, 8))), BinaryMask.from_array(np.zeros((8, 8), bool)))


class TestOverlay:
    def test_single_pixel_mask_colors_exactly_that_pixel(self):
        img = RasterImage(np.full((5, 5), 0.5))
        bits = np.zeros((5, 5), bool)
        bits[2, 2] = True
        png = render_overlay(img, BinaryMask.from_array(bits), OverlayStyle(contour_width=1, fill_alpha=0.0))
        arr = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
        colored = (arr != arr[0, 0]).any(axis=-1)
        assert colored.sum() == 1 and colored[2, 2]
        assert tuple(arr[2, 2]) == OverlayStyle().contour_color

    def test_empty_mask_is_grayscale_promotion(self):
        rng = np.random.default_rng(0)
        image = RasterImage(rng.random((16, 16)))
        png = render_overlay(image, BinaryMask.from_array(np.zeros((16, 16), bool)))
        arr = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
        gray = image.to_u8()
        assert np.array_equal(arr[:, :, 0], gray)
        assert np.array_equal(arr[:, :, 1], gray)
        assert np.array_equal(arr[:, :, 2], gray)

    def test_deterministic_bytes(self):
        rng = np.random.default_rng(1)
        image = RasterImage(rng.random((24, 24)))
        mask = BinaryMask.from_array(disk_mask((24, 24), (12, 12), 7))
        assert render_overlay(image, mask) == render_overlay(image, mask)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            render_overlay(RasterImage(np.zeros((8, 8))), BinaryMask.from_array(np.zeros((9, 8), bool)))


class TestExtractFeatures:
    def test_composition_equals_parts(self):
        rng = np.random.default_rng(11)
        img = RasterImage(rng.random((32, 32)))
        cand = BinaryMask.from_array(disk_mask(r=9))
        ref = BinaryMask.from_array(disk_mask(r=10))
        features = extract_features(img, cand, ref)
        topo = region_topology(cand)
        assert features.topology == topo
        assert features.boundary_edge_strength == boundary_edge_strength(img, topo)
        assert features.interior_cv == interior_homogeneity(img, cand)
        assert features.overlap == overlap_stats(cand, ref)

    def test_empty_candidate(self):
        img = RasterImage(np.full((16, 16), 0.3))
        cand = BinaryMask.from_array(np.zeros((16, 16), bool))
        ref = BinaryMask.from_array(disk_mask((16, 16), (8, 8), 5))
        features = extract_features(img, cand, ref)
        assert features.topology.component_count == 0
        assert features.boundary_edge_strength == 0.0
        assert features.interior_cv is None
        assert features.overlap is not None
        assert features.overlap.dice == 0.0
        assert features.overlap.under_seg_fraction == 1.0
        assert features.overlap.spill_fraction == 0.0

    def test_without_reference(self):
        img = RasterImage(np.full((16, 16), 0.3))
        features = extract_features(img, BinaryMask.from_array(disk_mask((16, 16), (8, 8), 5)))
        assert features.overlap is None


class TestPngRoundTrip:
    def test_image_round_trip(self):
        rng = np.random.default_rng(2)
        arr = (rng.random((20, 20)) * 255).astype(np.uint8)
        image = RasterImage.from_u8(arr)
        again = RasterImage.from_png_bytes(image.to_png_bytes())
        assert np.array_equal(again.to_u8(), arr)

    def test_mask_round_trip_any_nonzero_is_foreground(self):
        arr = np.zeros((10, 10), np.uint8)
        arr[3, 3] = 1
        arr[4, 4] = 255
        buf = io.BytesIO()
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        mask = BinaryMask.from_png_bytes(buf.getvalue())
        assert mask.bits[3, 3] and mask.bits[4, 4] and mask.area == 2
