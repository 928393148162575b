"""Synthetic image builders shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from fingerid.core import GrayImage


def stripes(width=96, height=96, period=8, angle=0.0, lo=40, hi=220) -> GrayImage:
    """Square-wave stripe pattern; ridges run along `angle` (radians)."""
    yy, xx = np.mgrid[0:height, 0:width]
    # Phase varies across the stripes, i.e. along the normal of `angle`.
    phase = -xx * math.sin(angle) + yy * math.cos(angle)
    dark = (np.floor(phase / (period / 2)).astype(int) % 2) == 0
    return GrayImage(np.where(dark, lo, hi).astype(np.uint8))


def sinusoid(width=96, height=96, period=8, angle=0.0, mean=128.0, amp=100.0) -> GrayImage:
    yy, xx = np.mgrid[0:height, 0:width]
    phase = -xx * math.sin(angle) + yy * math.cos(angle)
    vals = mean + amp * np.sin(2.0 * math.pi * phase / period)
    return GrayImage(np.clip(np.rint(vals), 0, 255).astype(np.uint8))


def blank(width=96, height=96, value=128) -> GrayImage:
    return GrayImage(np.full((height, width), value, dtype=np.uint8))


def draw_segment(canvas: np.ndarray, x0, y0, x1, y1, value=0, thickness=1):
    """Rasterize a straight segment onto `canvas` in place."""
    steps = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    r = thickness // 2
    for t in np.linspace(0.0, 1.0, steps * 2):
        x = int(round(x0 + (x1 - x0) * t))
        y = int(round(y0 + (y1 - y0) * t))
        canvas[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1] = value


def textured_scene(width=128, height=128, background=160, dot_value=60, shapes=(), region=(32, 96)) -> GrayImage:
    """Dark shapes inside a textured foreground patch on a plain background.

    Isolated speckle dots give the patch enough block variance to pass
    segmentation after normalization; being single pixels they thin to
    themselves and never produce minutiae (crossing number 0).  Blocks
    outside the patch stay flat and are segmented away.
    """
    canvas = np.full((height, width), background, dtype=np.uint8)
    for shape in shapes:
        shape(canvas)
    drawn = canvas != background
    lo, hi = region
    for y in range(lo + 1, hi, 3):
        for x in range(lo + 1, hi, 3):
            y0, y1 = max(0, y - 4), y + 5
            x0, x1 = max(0, x - 4), x + 5
            if not drawn[y0:y1, x0:x1].any():
                canvas[y, x] = dot_value
    return GrayImage(canvas)
