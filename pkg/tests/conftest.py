from __future__ import annotations

import numpy as np
import pytest

from segqc.judge import MockProvider, run_batch
from segqc.phantoms import PhantomSpec, generate_phantom_suite


@pytest.fixture(scope="session")
def phantom_suite(tmp_path_factory) -> tuple:
    """Small deterministic suite shared by service/CLI-level tests."""
    root = tmp_path_factory.mktemp("suite")
    spec = PhantomSpec(count_per_defect=3, image_size=(96, 96), seed=13)
    manifest = generate_phantom_suite(spec, root)
    return root, manifest


@pytest.fixture(scope="session")
def judged_suite(phantom_suite, tmp_path_factory) -> tuple:
    """Phantom suite plus mock transcripts in a session cache dir."""
    root, manifest = phantom_suite
    cache = tmp_path_factory.mktemp("cache")
    transcripts = run_batch(list(manifest), MockProvider(), cache, root)
    return root, manifest, cache, transcripts


def random_mask(rng: np.random.Generator, shape=(32, 32), density=0.4) -> np.ndarray:
    return rng.random(shape) < density


def assessment_dict(score: int = 4, category: str | None = None) -> dict:
    from segqc.prompts import default_rubric

    return {
        "knowledge_recall": "typical appearance recalled",
        "visual_features": {
            "contour_continuity": "single closed region",
            "edge_clarity": "clear transition",
            "texture_homogeneity": "homogeneous",
        },
        "anatomical_inference": {
            "plausibility": "plausible",
            "under_segmentation": "none seen",
            "spillage": "none seen",
        },
        "clinical_synthesis": {
            "summary": "solid contour",
            "score": score,
            "category": category if category is not None else default_rubric().category(score),
        },
    }
