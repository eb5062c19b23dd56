from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest

from segqc.dataset import QualityLabel, load_manifest, score_to_label
from segqc.imaging import BinaryMask, overlap_stats, region_topology
from segqc.phantoms import (
    ALL_DEFECTS,
    PhantomSpec,
    erode_mask,
    generate_phantom_suite,
    truth_path,
)


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestSpecValidation:
    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            PhantomSpec(count_per_defect=0)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            PhantomSpec(count_per_defect=1, image_size=(8, 128))


class TestSuite:
    def test_layout_and_counts(self, phantom_suite):
        root, manifest = phantom_suite
        assert len(manifest) == 3 * len(ALL_DEFECTS)
        for case in manifest:
            assert (root / case.image_ref).is_file()
            assert (root / case.mask_ref).is_file()
            assert truth_path(root, case.id).is_file()
        assert load_manifest(root / "manifest.jsonl") == manifest

    def test_label_matches_score_for_every_case(self, phantom_suite):
        _, manifest = phantom_suite
        for case in manifest:
            assert case.expert_score is not None
            assert case.gt_label == score_to_label(case.expert_score)

    def test_none_defect_mask_equals_truth(self, phantom_suite):
        root, manifest = phantom_suite
        for case in manifest:
            if not case.id.startswith("none-"):
                continue
            cand = BinaryMask.load(root / case.mask_ref)
            truth = BinaryMask.load(truth_path(root, case.id))
            assert np.array_equal(cand.bits, truth.bits)
            assert case.expert_score == 5 and case.gt_label is QualityLabel.ACCEPT

    def test_fragment_splits_with_material_loss(self, phantom_suite):
        root, manifest = phantom_suite
        for case in manifest:
            if not case.id.startswith("fragment-"):
                continue
            cand = BinaryMask.load(root / case.mask_ref)
            truth = BinaryMask.load(truth_path(root, case.id))
            assert region_topology(cand).component_count >= 2
            assert cand.area < truth.area
            assert case.expert_score == 2 and case.gt_label is QualityLabel.REJECT

    def test_jitter_stays_within_one_pixel(self, phantom_suite):
        root, manifest = phantom_suite
        for case in manifest:
            if not case.id.startswith("jitter-"):
                continue
            cand = BinaryMask.load(root / case.mask_ref)
            truth = BinaryMask.load(truth_path(root, case.id))
            stats = overlap_stats(cand, truth)
            assert stats.dice > 0.9
            assert region_topology(cand).component_count == 1

    def test_erode_alternates_moderate_and_severe(self, phantom_suite):
        _, manifest = phantom_suite
        scores = {c.id: c.expert_score for c in manifest if c.id.startswith("erode-")}
        assert scores["erode-000"] == 3
        assert scores["erode-001"] == 1
        assert scores["erode-002"] == 3

    def test_deterministic_regeneration(self, tmp_path):
        spec = PhantomSpec(count_per_defect=2, image_size=(64, 64), seed=7)
        a, b = tmp_path / "a", tmp_path / "b"
        generate_phantom_suite(spec, a)
        generate_phantom_suite(spec, b)
        assert tree_digest(a) == tree_digest(b)

    def test_seed_changes_pixels(self, tmp_path):
        pixels = []
        for seed in (1, 2):
            out = tmp_path / f"s{seed}"
            generate_phantom_suite(
                PhantomSpec(count_per_defect=1, image_size=(64, 64), seed=seed), out
            )
            pixels.append((out / "images" / "none-000.png").read_bytes())
        assert pixels[0] != pixels[1]


class TestErosion:
    def test_erosion_is_nested(self):
        yy, xx = np.mgrid[0:48, 0:48]
        mask = BinaryMask.from_array((yy - 24) ** 2 / 400 + (xx - 24) ** 2 / 250 <= 1)
        previous = mask
        for radius in (1, 2, 3, 4, 5):
            eroded = erode_mask(mask, radius)
            assert not (eroded.bits & ~previous.bits).any()
            previous = eroded

    def test_dice_monotone_under_erosion(self, phantom_suite):
        root, manifest = phantom_suite
        truth = BinaryMask.load(truth_path(root, "none-000"))
        last = 1.1
        for radius in (1, 2, 3, 4, 5):
            dice = overlap_stats(erode_mask(truth, radius), truth).dice
            assert dice <= last
            last = dice
