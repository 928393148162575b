"""Minutiae extraction: orientation estimation, binarization, thinning, scan.

The pipeline is deterministic end to end; the same image bytes always yield
the same template.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from fingerid.core.image import GrayImage, normalize_image
from fingerid.core.types import Minutia, MinutiaKind, MinutiaeTemplate, wrap_direction

_N8 = np.ones((3, 3), dtype=int)  # 8-connectivity structuring element


@dataclass(frozen=True)
class ExtractionConfig:
    target_mean: float = 100.0
    target_var: float = 100.0
    block_size: int = 16
    segmentation_threshold: float = 100.0  # min block pixel variance for foreground
    border_margin: int = 10
    merge_radius: float = 8.0
    trace_steps: int = 5


DEFAULT_CONFIG = ExtractionConfig()


@dataclass(frozen=True)
class OrientationField:
    """Per-block ridge orientation in [0, pi) and a foreground mask."""

    block_size: int
    angles: np.ndarray  # (grid_h, grid_w) float64
    mask: np.ndarray  # (grid_h, grid_w) bool

    def angle_at(self, x: int, y: int) -> float:
        return float(self.angles[y // self.block_size, x // self.block_size])

    def foreground_at(self, x: int, y: int) -> bool:
        return bool(self.mask[y // self.block_size, x // self.block_size])


def estimate_orientation(
    img: GrayImage,
    block_size: int = DEFAULT_CONFIG.block_size,
    segmentation_threshold: float = DEFAULT_CONFIG.segmentation_threshold,
) -> OrientationField:
    """Dominant ridge orientation per block from averaged squared gradients.

    The per-block angle is 0.5*atan2(2*sum(GxGy), sum(Gx^2 - Gy^2)) + pi/2,
    folded into [0, pi), which points along the ridges rather than across
    them.  Blocks with no gradient energy get angle 0 and are masked out.
    """
    if block_size < 4:
        raise ValueError("block_size must be >= 4")
    pix = img.pixels.astype(np.float64)
    gy, gx = np.gradient(pix)
    gxx_m_gyy = gx * gx - gy * gy
    gxy2 = 2.0 * gx * gy
    energy = gx * gx + gy * gy

    grid_h = -(-img.height // block_size)
    grid_w = -(-img.width // block_size)
    angles = np.zeros((grid_h, grid_w), dtype=np.float64)
    mask = np.zeros((grid_h, grid_w), dtype=bool)
    for by in range(grid_h):
        ys = slice(by * block_size, min((by + 1) * block_size, img.height))
        for bx in range(grid_w):
            xs = slice(bx * block_size, min((bx + 1) * block_size, img.width))
            if energy[ys, xs].sum() == 0.0:
                continue  # angle stays 0, mask stays cleared
            theta = 0.5 * math.atan2(gxy2[ys, xs].sum(), gxx_m_gyy[ys, xs].sum()) + math.pi / 2
            angles[by, bx] = theta % math.pi
            mask[by, bx] = pix[ys, xs].var() >= segmentation_threshold
    return OrientationField(block_size=block_size, angles=angles, mask=mask)


def binarize(img: GrayImage, field: OrientationField) -> GrayImage:
    """Threshold each foreground block at its mean; background becomes white."""
    bs = field.block_size
    expected = (-(-img.height // bs), -(-img.width // bs))
    if field.angles.shape != expected:
        raise ValueError(f"orientation grid {field.angles.shape} does not fit image (want {expected})")
    pix = img.pixels.astype(np.float64)
    out = np.full(pix.shape, 255, dtype=np.uint8)
    for by, bx in zip(*np.nonzero(field.mask)):
        ys = slice(by * bs, min((by + 1) * bs, img.height))
        xs = slice(bx * bs, min((bx + 1) * bs, img.width))
        block = pix[ys, xs]
        out[ys, xs] = np.where(block < block.mean(), 0, 255)
    return GrayImage(out)


def _neighbor_rings(ridge: np.ndarray) -> list[np.ndarray]:
    """The 8 neighbors of every pixel in cyclic order N, NE, E, SE, S, SW, W, NW."""
    p = np.pad(ridge, 1, constant_values=False)
    return [
        p[0:-2, 1:-1],  # N
        p[0:-2, 2:],    # NE
        p[1:-1, 2:],    # E
        p[2:, 2:],      # SE
        p[2:, 1:-1],    # S
        p[2:, 0:-2],    # SW
        p[1:-1, 0:-2],  # W
        p[0:-2, 0:-2],  # NW
    ]


def _zs_removable(ridge: np.ndarray, second_pass: bool) -> np.ndarray:
    """Zhang-Suen deletion mask for one sub-iteration."""
    n, ne, e, se, s, sw, w, nw = _neighbor_rings(ridge)
    ring = [n, ne, e, se, s, sw, w, nw]
    b = sum(x.astype(np.uint8) for x in ring)
    a = sum((~ring[i] & ring[(i + 1) % 8]).astype(np.uint8) for i in range(8))
    if not second_pass:
        cond = (~(n & e & s)) & (~(e & s & w))
    else:
        cond = (~(n & e & w)) & (~(n & s & w))
    return ridge & (b >= 2) & (b <= 6) & (a == 1) & cond


def _keep_component_seeds(ridge: np.ndarray, removable: np.ndarray) -> np.ndarray:
    """Clear the removal flag on one pixel of any component that would vanish.

    Plain Zhang-Suen annihilates tiny blobs (a lone 2x2 square is deleted in
    one sub-iteration), which would break the component-count contract.
    """
    if not removable.any():
        return removable
    labels, count = ndimage.label(ridge, structure=_N8)
    if count == 0:
        return removable
    survivors = np.unique(labels[ridge & ~removable])
    doomed = [lab for lab in range(1, count + 1) if lab not in survivors]
    if doomed:
        removable = removable.copy()
        for lab in doomed:
            ys, xs = np.nonzero(labels == lab)
            removable[ys[0], xs[0]] = False  # first in scan order survives
    return removable


def _dissolve_squares(ridge: np.ndarray) -> np.ndarray:
    """Remove leftover 2x2 ridge squares by deleting locally simple pixels."""
    for _ in range(ridge.size):
        sq = ridge[:-1, :-1] & ridge[:-1, 1:] & ridge[1:, :-1] & ridge[1:, 1:]
        if not sq.any():
            return ridge
        n, ne, e, se, s, sw, w, nw = _neighbor_rings(ridge)
        ring = [n, ne, e, se, s, sw, w, nw]
        a = sum((~ring[i] & ring[(i + 1) % 8]).astype(np.uint8) for i in range(8))
        y, x = np.argwhere(sq)[0]
        for py, px in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
            if a[py, px] == 1:
                ridge = ridge.copy()
                ridge[py, px] = False
                break
        else:  # no simple pixel in this square; should not happen
            ridge = ridge.copy()
            ridge[y, x] = False
    return ridge


def thin(binary: GrayImage) -> GrayImage:
    """Zhang-Suen thinning of a two-valued image (ridge = 0) to width-1 curves."""
    values = np.unique(binary.pixels)
    if not np.all(np.isin(values, (0, 255))):
        raise ValueError("thin() expects a two-valued {0, 255} image")
    ridge = binary.pixels == 0
    while True:
        changed = False
        for second_pass in (False, True):
            removable = _zs_removable(ridge, second_pass)
            removable = _keep_component_seeds(ridge, removable)
            if removable.any():
                ridge = ridge & ~removable
                changed = True
        if not changed:
            break
    ridge = _dissolve_squares(ridge)
    return GrayImage(np.where(ridge, 0, 255).astype(np.uint8))


def crossing_number(skel: GrayImage, x: int, y: int) -> int:
    """Half the sum of absolute differences around the 8-neighborhood cycle.

    1 marks a ridge ending and 3 a bifurcation.  The pixel must not sit on
    the image border: the caller is expected to exclude a 1-px margin.
    """
    if not (1 <= x <= skel.width - 2 and 1 <= y <= skel.height - 2):
        raise ValueError(f"({x}, {y}) is on the border; exclude a 1-px margin")
    if skel.pixels[y, x] != 0:
        raise ValueError(f"({x}, {y}) is not a ridge pixel")
    ring = [
        skel.pixels[y - 1, x], skel.pixels[y - 1, x + 1], skel.pixels[y, x + 1],
        skel.pixels[y + 1, x + 1], skel.pixels[y + 1, x], skel.pixels[y + 1, x - 1],
        skel.pixels[y, x - 1], skel.pixels[y - 1, x - 1],
    ]
    bits = [1 if v == 0 else 0 for v in ring]
    total = sum(abs(bits[i] - bits[(i + 1) % 8]) for i in range(8))
    return total // 2


_TRACE_ORDER = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _trace_direction(ridge: np.ndarray, x: int, y: int, steps: int) -> float | None:
    """Angle of the vector from an ending toward the ridge, `steps` pixels in."""
    h, w = ridge.shape
    visited = {(x, y)}
    cx, cy = x, y
    for _ in range(steps):
        nxt = None
        for dy, dx in _TRACE_ORDER:
            ny, nx_ = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx_ < w and ridge[ny, nx_] and (nx_, ny) not in visited:
                nxt = (nx_, ny)
                break
        if nxt is None:
            break
        cx, cy = nxt
        visited.add(nxt)
    if (cx, cy) == (x, y):
        return None
    return math.atan2(cy - y, cx - x)


def _angular_gap(a: float, b: float) -> float:
    """Absolute angular difference wrapped into [0, pi]."""
    d = abs(a - b) % (2.0 * math.pi)
    return d if d <= math.pi else 2.0 * math.pi - d


def extract_minutiae(img: GrayImage, config: ExtractionConfig = DEFAULT_CONFIG) -> MinutiaeTemplate:
    """Run the full pipeline and return the template for one fingerprint.

    normalize -> orientation -> binarize -> thin, then a crossing-number scan
    over the skeleton.  Endings take their direction from the block
    orientation, disambiguated by tracing the ridge a few pixels inward;
    bifurcations use the block orientation as-is.  Minutiae near the border
    or near background blocks are dropped, then close pairs are merged
    keeping the first in scan order.
    """
    norm = normalize_image(img, config.target_mean, config.target_var)
    field = estimate_orientation(norm, config.block_size, config.segmentation_threshold)
    if not field.mask.any():
        return MinutiaeTemplate(width=img.width, height=img.height)
    binary = binarize(norm, field)
    skel = thin(binary)
    ridge = skel.pixels == 0

    # Crossing numbers for all interior ridge pixels at once.
    ring = _neighbor_rings(ridge)
    transitions = sum((ring[i] != ring[(i + 1) % 8]).astype(np.uint8) for i in range(8))
    cn = transitions // 2
    interior = np.zeros_like(ridge)
    interior[1:-1, 1:-1] = True
    candidate = ridge & interior & ((cn == 1) | (cn == 3))

    # Pixel distance to the nearest background-block pixel.
    fg_pixels = np.zeros(ridge.shape, dtype=bool)
    bs = config.block_size
    for by, bx in zip(*np.nonzero(field.mask)):
        fg_pixels[by * bs : (by + 1) * bs, bx * bs : (bx + 1) * bs] = True
    if fg_pixels.all():
        bg_dist = None
    else:
        bg_dist = ndimage.distance_transform_edt(fg_pixels)

    margin = config.border_margin
    found: list[Minutia] = []
    for y, x in np.argwhere(candidate):
        if min(x, y, img.width - 1 - x, img.height - 1 - y) < margin:
            continue
        if bg_dist is not None and bg_dist[y, x] < margin:
            continue
        theta = field.angle_at(x, y)
        if cn[y, x] == 1:
            kind = MinutiaKind.ENDING
            traced = _trace_direction(ridge, int(x), int(y), config.trace_steps)
            direction = theta
            if traced is not None and _angular_gap(theta, traced) > math.pi / 2:
                direction = theta + math.pi
        else:
            kind = MinutiaKind.BIFURCATION
            direction = theta
        found.append(Minutia(x=float(x), y=float(y), direction=wrap_direction(direction), kind=kind))

    kept: list[Minutia] = []
    for m in found:
        if all(math.hypot(m.x - k.x, m.y - k.y) >= config.merge_radius for k in kept):
            kept.append(m)
    return MinutiaeTemplate(width=img.width, height=img.height, minutiae=tuple(kept))
