"""Deterministic pixel-level analysis of a segmentation mask.

Covers region topology (8-connected components, 4-connected holes,
Moore-neighbor contours), boundary edge strength under a 3x3 Sobel
operator, interior homogeneity, overlap statistics against a reference
mask, and overlay rendering.

Conventions: foreground uses 8-connectivity, holes (background)
4-connectivity. Intensities are normalized linearly 0-255 -> 0.0-1.0
with no window/level, which under-resolves wide-dynamic-range CT; the
edge-strength score divides by the Sobel response to a unit step (4.0)
so results are unit-free in [0, 1].
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatchError,
    EmptyMaskError,
    EmptyReferenceError,
    EmptyTopologyError,
    EncodeError,
)

#: Response of the 3x3 Sobel magnitude to an ideal unit step.
SOBEL_STEP_RESPONSE = 4.0

# Clockwise Moore neighborhood starting north, as (drow, dcol).
_MOORE = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_WEST = 6
_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class RasterImage:
    """Grayscale slice; pixels are float64 in [0, 1], row-major."""

    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_u8(cls, arr: np.ndarray) -> "RasterImage":
        return cls(pixels=arr.astype(np.float64) / 255.0)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        with Image.open(io.BytesIO(data)) as im:
            return cls.from_u8(np.asarray(im.convert("L")))

    @classmethod
    def load(cls, path: str | Path) -> "RasterImage":
        return cls.from_png_bytes(Path(path).read_bytes())

    def to_u8(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels * 255.0), 0, 255).astype(np.uint8)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.to_u8(), mode="L").save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class BinaryMask:
    """Boolean foreground mask; any nonzero source pixel is foreground."""

    bits: np.ndarray

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    @property
    def is_empty(self) -> bool:
        return not self.bits.any()

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        return cls(bits=np.asarray(arr).astype(bool))

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "BinaryMask":
        with Image.open(io.BytesIO(data)) as im:
            return cls.from_array(np.asarray(im.convert("L")) > 0)

    @classmethod
    def load(cls, path: str | Path) -> "BinaryMask":
        return cls.from_png_bytes(Path(path).read_bytes())

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.bits.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class RegionTopology:
    component_count: int
    holes_per_component: list[int]
    contours: list[list[tuple[int, int]]]
    total_area_px: int


@dataclass(frozen=True)
class OverlapStats:
    dice: float
    under_seg_fraction: float
    spill_fraction: float


@dataclass(frozen=True)
class VisualFeatures:
    topology: RegionTopology
    boundary_edge_strength: float
    interior_cv: float | None
    overlap: OverlapStats | None


@dataclass(frozen=True)
class OverlayStyle:
    contour_color: tuple[int, int, int] = (255, 64, 0)
    contour_width: int = 1
    fill_alpha: float = 0.25

    def __post_init__(self):
        if self.contour_width < 1:
            raise ValueError("contour_width must be >= 1")
        if not 0.0 <= self.fill_alpha <= 1.0:
            raise ValueError("fill_alpha must be in [0, 1]")


def _require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape {a.shape} vs {b.shape}")


def label_components(bits: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected regions of True pixels; labels start at 1 in
    row-major discovery order. Stack-based flood fill, no recursion."""
    if connectivity == 8:
        offsets = _MOORE
    elif connectivity == 4:
        offsets = _N4
    else:
        raise ValueError("connectivity must be 4 or 8")
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    current = 0
    for sy in range(h):
        for sx in range(w):
            if not bits[sy, sx] or labels[sy, sx]:
                continue
            current += 1
            stack = [(sy, sx)]
            labels[sy, sx] = current
            while stack:
                y, x = stack.pop()
                for dy, dx in offsets:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = current
                        stack.append((ny, nx))
    return labels, current


def trace_contour(bits: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor boundary trace from `start` (must be the component's
    topmost-leftmost pixel). The path is closed by adjacency: the last
    pixel is 8-adjacent to (or equal to) the first. Pixels on one-pixel
    bridges may legitimately appear more than once."""
    h, w = bits.shape

    def fg(y: int, x: int) -> bool:
        return 0 <= y < h and 0 <= x < w and bits[y, x]

    contour: list[tuple[int, int]] = []
    state = (start, _WEST)
    seen: set[tuple[tuple[int, int], int]] = set()
    while state not in seen:
        seen.add(state)
        (y, x), back = state
        contour.append((y, x))
        nxt = None
        for k in range(1, 9):
            d = (back + k) % 8
            ny, nx = y + _MOORE[d][0], x + _MOORE[d][1]
            if fg(ny, nx):
                prev = (back + k - 1) % 8
                by, bx = y + _MOORE[prev][0], x + _MOORE[prev][1]
                nxt = ((ny, nx), _MOORE.index((by - ny, bx - nx)))
                break
        if nxt is None:
            break  # isolated single pixel
        state = nxt
    return contour


def region_topology(mask: BinaryMask) -> RegionTopology:
    """Component count, holes per component, and closed outer contours."""
    bits = mask.bits
    total_area = int(bits.sum())
    if total_area == 0:
        return RegionTopology(0, [], [], 0)

    labels, count = label_components(bits, connectivity=8)

    contours: list[list[tuple[int, int]]] = []
    starts: dict[int, tuple[int, int]] = {}
    h, w = bits.shape
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab and lab not in starts:
                starts[lab] = (y, x)
    for lab in range(1, count + 1):
        contours.append(trace_contour(labels == lab, starts[lab]))

    # Holes: 4-connected background regions that never touch the border,
    # attributed to the enclosing (first adjacent) foreground component.
    bg_labels, bg_count = label_components(~bits, connectivity=4)
    border = set(np.unique(np.concatenate([
        bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1]
    ])))
    border.discard(0)
    holes = [0] * count
    for bg_lab in range(1, bg_count + 1):
        if bg_lab in border:
            continue
        owner = 0
        ys, xs = np.nonzero(bg_labels == bg_lab)
        for y, x in zip(ys.tolist(), xs.tolist()):
            for dy, dx in _N4:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and labels[ny, nx]:
                    owner = labels[ny, nx]
                    break
            if owner:
                break
        if owner:
            holes[owner - 1] += 1
    return RegionTopology(count, holes, contours, total_area)


def overlap_stats(candidate: BinaryMask, reference: BinaryMask) -> OverlapStats:
    """Dice plus the two directional error fractions.

    under_seg_fraction is the share of the reference missed by the
    candidate; spill_fraction the share of the candidate outside the
    reference (0 for an empty candidate, so pure over-segmentation
    saturates toward 1 rather than vanishing)."""
    _require_same_shape(candidate.bits, reference.bits)
    ref_area = reference.area
    if ref_area == 0:
        raise EmptyReferenceError("reference mask has no foreground")
    cand_area = candidate.area
    inter = int((candidate.bits & reference.bits).sum())
    dice = 2.0 * inter / (cand_area + ref_area)
    under = (ref_area - inter) / ref_area
    spill = (cand_area - inter) / cand_area if cand_area else 0.0
    return OverlapStats(dice=dice, under_seg_fraction=under, spill_fraction=spill)


def _unique_contour_pixels(topology: RegionTopology) -> np.ndarray:
    pts = sorted({p for contour in topology.contours for p in contour})
    return np.asarray(pts, dtype=np.intp)


def boundary_edge_strength(image: RasterImage, topology: RegionTopology) -> float:
    """Mean 3x3 Sobel gradient magnitude over the distinct contour pixels,
    normalized by the unit-step response and clamped to [0, 1]. Border
    pixels see edge-replicated padding."""
    if not topology.contours:
        raise EmptyTopologyError("no contours to sample")
    pts = _unique_contour_pixels(topology)
    padded = np.pad(image.pixels, 1, mode="edge")
    ys, xs = pts[:, 0] + 1, pts[:, 1] + 1

    def at(dy: int, dx: int) -> np.ndarray:
        return padded[ys + dy, xs + dx]

    gx = (at(-1, 1) + 2 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2 * at(0, -1) + at(1, -1))
    gy = (at(1, -1) + 2 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2 * at(-1, 0) + at(-1, 1))
    mean_mag = float(np.mean(np.hypot(gx, gy)))
    return min(1.0, max(0.0, mean_mag / SOBEL_STEP_RESPONSE))


def interior_homogeneity(image: RasterImage, mask: BinaryMask) -> float:
    """Coefficient of variation (population std / mean) of the masked
    intensities; +inf when the mean is zero."""
    _require_same_shape(image.pixels, mask.bits)
    if mask.is_empty:
        raise EmptyMaskError("mask has no foreground")
    values = image.pixels[mask.bits]
    mean = float(values.mean())
    if mean == 0.0:
        return float("inf")
    if float(values.min()) == float(values.max()):
        return 0.0
    return float(values.std()) / mean


def render_overlay(image: RasterImage, mask: BinaryMask, style: OverlayStyle = OverlayStyle()) -> bytes:
    """RGB PNG with contour pixels painted solid and the mask interior
    alpha-blended. Widths > 1 round up to the next odd pixel count."""
    _require_same_shape(image.pixels, mask.bits)
    gray = image.to_u8().astype(np.float64)
    rgb = np.stack([gray, gray, gray], axis=-1)
    color = np.asarray(style.contour_color, dtype=np.float64)

    if not mask.is_empty:
        if style.fill_alpha > 0:
            fill = mask.bits
            rgb[fill] = (1.0 - style.fill_alpha) * rgb[fill] + style.fill_alpha * color

        topo = region_topology(mask)
        pts = _unique_contour_pixels(topo)
        pen = np.zeros(mask.bits.shape, dtype=bool)
        pen[pts[:, 0], pts[:, 1]] = True
        radius = style.contour_width // 2
        if radius:
            h, w = pen.shape
            fat = np.zeros_like(pen)
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    ys, xs = np.nonzero(pen)
                    ny, nx = ys + dy, xs + dx
                    keep = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                    fat[ny[keep], nx[keep]] = True
            pen = fat
        rgb[pen] = color

    try:
        buf = io.BytesIO()
        Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), mode="RGB").save(
            buf, format="PNG"
        )
        return buf.getvalue()
    except Exception as exc:  # pragma: no cover - PIL encode failures are exotic
        raise EncodeError(str(exc)) from exc


def extract_features(
    image: RasterImage,
    candidate: BinaryMask,
    reference: BinaryMask | None = None,
) -> VisualFeatures:
    """Compose the four analyses into one descriptor. An empty candidate
    yields topology-only features: edge strength 0 and no CV."""
    _require_same_shape(image.pixels, candidate.bits)
    topo = region_topology(candidate)
    if candidate.is_empty:
        edge = 0.0
        cv: float | None = None
    else:
        edge = boundary_edge_strength(image, topo)
        cv = interior_homogeneity(image, candidate)
    overlap = overlap_stats(candidate, reference) if reference is not None else None
    return VisualFeatures(
        topology=topo, boundary_edge_strength=edge, interior_cv=cv, overlap=overlap
    )
