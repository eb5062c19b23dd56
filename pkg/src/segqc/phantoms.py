"""Synthetic phantom suite: bright elliptical "organ" slices with candidate
masks damaged by a known defect, giving by-construction usability scores.

Layout written under the output directory:

    images/<id>.png   noisy grayscale slice
    masks/<id>.png    candidate mask (the segmentation under review)
    truths/<id>.png   the true ellipse, used as overlap reference
    manifest.jsonl    case records

Severity drives the score: an untouched mask is clinically ready (5),
sub-pixel boundary jitter is acceptable (4), moderate erosion needs work
(3), large dilation / fragmentation / gross shift are major failures (2),
and severe erosion leaves the mask unusable (1). Erode repetitions
alternate moderate (even index) and severe (odd index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dataset import CaseRecord, Manifest, Modality, save_manifest, score_to_label
from .imaging import BinaryMask, RasterImage


class DefectClass(str, Enum):
    NONE = "none"
    ERODE = "erode"
    DILATE = "dilate"
    JITTER = "jitter"
    FRAGMENT = "fragment"
    SHIFT = "shift"


ALL_DEFECTS = tuple(DefectClass)

#: px of erosion applied by the moderate erode variant.
MODERATE_ERODE_PX = 2
#: px of dilation applied by the dilate defect.
DILATE_PX = 4

DEFECT_SCORES = {
    DefectClass.NONE: 5,
    DefectClass.JITTER: 4,
    DefectClass.DILATE: 2,
    DefectClass.FRAGMENT: 2,
    DefectClass.SHIFT: 2,
}
ERODE_MODERATE_SCORE = 3
ERODE_SEVERE_SCORE = 1


@dataclass(frozen=True)
class PhantomSpec:
    count_per_defect: int
    image_size: tuple[int, int] = (128, 128)
    defect_classes: tuple[DefectClass, ...] = ALL_DEFECTS
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.count_per_defect < 1:
            raise ValueError("count_per_defect must be >= 1")
        if self.image_size[0] < 16 or self.image_size[1] < 16:
            raise ValueError("image_size must be at least 16x16")


@dataclass(frozen=True)
class _Ellipse:
    cy: float
    cx: float
    a: float  # semi-axis along x
    b: float  # semi-axis along y


def _ellipse_mask(size: tuple[int, int], ell: _Ellipse) -> np.ndarray:
    w, h = size
    ys, xs = np.mgrid[0:h, 0:w]
    return ((xs - ell.cx) / ell.a) ** 2 + ((ys - ell.cy) / ell.b) ** 2 <= 1.0


def erode_mask(mask: BinaryMask, radius: float) -> BinaryMask:
    """Euclidean erosion: keep pixels whose distance to background >= radius.
    Nested across radii, so overlap with any fixed superset is monotone."""
    if radius <= 0:
        return mask
    dist = ndimage.distance_transform_edt(mask.bits)
    return BinaryMask.from_array(dist > radius)


def dilate_mask(mask: BinaryMask, radius: float) -> BinaryMask:
    if radius <= 0:
        return mask
    dist = ndimage.distance_transform_edt(~mask.bits)
    return BinaryMask.from_array(mask.bits | (dist <= radius))


def _shift_mask(bits: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(bits)
    h, w = bits.shape
    ys, xs = np.nonzero(bits)
    ny, nx = ys + dy, xs + dx
    keep = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    out[ny[keep], nx[keep]] = True
    return out


def _jittered_ellipse(size: tuple[int, int], ell: _Ellipse, rng: np.random.Generator) -> np.ndarray:
    """Radially wobbled ellipse; boundary displacement capped at 1 px."""
    w, h = size
    ys, xs = np.mgrid[0:h, 0:w]
    dx = (xs - ell.cx) / ell.a
    dy = (ys - ell.cy) / ell.b
    theta = np.arctan2(dy, dx)
    lobes = int(rng.integers(3, 6))
    phase = rng.uniform(0.0, 2.0 * math.pi)
    amp_px = rng.uniform(0.5, 1.0)
    scale = 1.0 + (amp_px / max(ell.a, ell.b)) * np.sin(lobes * theta + phase)
    return dx**2 + dy**2 <= scale**2


def _apply_defect(
    truth: np.ndarray,
    defect: DefectClass,
    rep: int,
    size: tuple[int, int],
    ell: _Ellipse,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """Candidate mask plus the by-construction usability score."""
    truth_mask = BinaryMask.from_array(truth)
    if defect is DefectClass.NONE:
        return truth.copy(), DEFECT_SCORES[defect]
    if defect is DefectClass.ERODE:
        if rep % 2 == 0:
            return erode_mask(truth_mask, MODERATE_ERODE_PX).bits, ERODE_MODERATE_SCORE
        return erode_mask(truth_mask, math.ceil(ell.b)).bits, ERODE_SEVERE_SCORE
    if defect is DefectClass.DILATE:
        return dilate_mask(truth_mask, DILATE_PX).bits, DEFECT_SCORES[defect]
    if defect is DefectClass.JITTER:
        return _jittered_ellipse(size, ell, rng), DEFECT_SCORES[defect]
    if defect is DefectClass.FRAGMENT:
        # Central vertical cut removing ~20% of the area: splits the organ
        # in two and drops dice safely below the 0.9 usability tier.
        half_gap = max(2, int(round(0.16 * ell.a)))
        out = truth.copy()
        xs = np.arange(truth.shape[1])
        band = np.abs(xs - round(ell.cx)) <= half_gap
        out[:, band] = False
        return out, DEFECT_SCORES[defect]
    if defect is DefectClass.SHIFT:
        dy = max(2, int(math.ceil(0.5 * ell.b)))
        return _shift_mask(truth, dy, 0), DEFECT_SCORES[defect]
    raise ValueError(f"unhandled defect {defect}")  # pragma: no cover


_GROUP_CYCLE = (
    ("phantom-ct", Modality.CT, "Synthetic Lesion"),
    ("phantom-mr", Modality.MR, "Synthetic Lesion"),
)

_BACKGROUND = 0.2
_ORGAN = 0.75


@dataclass(frozen=True)
class PhantomCase:
    record: CaseRecord
    image: RasterImage
    candidate: BinaryMask
    truth: BinaryMask


def _synthesize_case(spec: PhantomSpec, defect: DefectClass, rep: int, index: int) -> PhantomCase:
    rng = np.random.default_rng([spec.seed, index])
    w, h = spec.image_size
    ell = _Ellipse(
        cy=h / 2 + rng.uniform(-0.04, 0.04) * h,
        cx=w / 2 + rng.uniform(-0.04, 0.04) * w,
        a=rng.uniform(0.24, 0.30) * w,
        b=rng.uniform(0.17, 0.22) * h,
    )
    truth = _ellipse_mask(spec.image_size, ell)
    candidate, score = _apply_defect(truth, defect, rep, spec.image_size, ell, rng)

    base = np.full((h, w), _BACKGROUND)
    base[truth] = _ORGAN
    noisy = np.clip(base + rng.normal(0.0, spec.noise_sigma, size=(h, w)), 0.0, 1.0)
    image = RasterImage.from_u8(np.rint(noisy * 255.0).astype(np.uint8))

    group, modality, target = _GROUP_CYCLE[rep % len(_GROUP_CYCLE)]
    cid = f"{defect.value}-{rep:03d}"
    record = CaseRecord(
        id=cid,
        group=group,
        modality=modality,
        target=target,
        image_ref=f"images/{cid}.png",
        mask_ref=f"masks/{cid}.png",
        expert_score=score,
        gt_label=score_to_label(score),
    )
    return PhantomCase(
        record=record,
        image=image,
        candidate=BinaryMask.from_array(candidate),
        truth=BinaryMask.from_array(truth),
    )


def truth_path(out_dir: str | Path, case_id: str) -> Path:
    return Path(out_dir) / "truths" / f"{case_id}.png"


def generate_phantom_suite(spec: PhantomSpec, out_dir: str | Path) -> Manifest:
    """Write the suite to disk and return its manifest. Deterministic:
    identical specs produce byte-identical files."""
    out = Path(out_dir)
    for sub in ("images", "masks", "truths"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    cases: list[CaseRecord] = []
    index = 0
    for defect in spec.defect_classes:
        for rep in range(spec.count_per_defect):
            case = _synthesize_case(spec, defect, rep, index)
            index += 1
            (out / case.record.image_ref).write_bytes(case.image.to_png_bytes())
            (out / case.record.mask_ref).write_bytes(case.candidate.to_png_bytes())
            truth_path(out, case.record.id).write_bytes(case.truth.to_png_bytes())
            cases.append(case.record)

    manifest = Manifest(cases=cases)
    save_manifest(manifest, out / "manifest.jsonl")
    return manifest
