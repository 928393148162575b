"""Seeded synthetic fingerprint generator.

A record is a set of anchor minutiae on a common ridge flow: the rendered
image is ``cos`` of a plane-wave phase plus one ±1 phase spiral per
anchor, so each anchor becomes a ridge ending or bifurcation exactly at
its position.  A probe is rendered from the analytically transformed
phase (rotated flow, moved spirals, matching phase constant), which makes
it the exact rigid transform of the record image — the same finger
recaptured under a new placement.

Dropped minutiae are occluded rather than removed from the phase field:
deleting a spiral would shift the ridge pattern around every remaining
anchor, whereas fading the image to the background level around the
dropped point erases just that minutia.  The flow angle is drawn away
from the half-turn orientation fold so probe rotations cannot wrap the
field angle that minutia directions are read from.

A radial amplitude taper keeps the frame border flat so segmentation has
a genuine background to discard.  Everything derives from
``numpy.random.default_rng`` seeded per record: a spec produces
byte-identical datasets on every run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import GrayImage, Minutia, MinutiaKind, MinutiaeTemplate, template_to_dict, write_pgm

RIDGE_PERIOD = 8.0  # px between ridge centers
AMPLITUDE = 100.0
BASE_LEVEL = 128.0
ANCHOR_RADIUS = 70.0  # anchors stay this close to the image center
ANCHOR_SPACING = 12.0  # above the extractor's 8 px merge radius
TAPER_FULL = 100.0  # full ridge amplitude inside this radius
TAPER_ZERO = 120.0  # flat background beyond this radius
FLOW_FOLD_MARGIN = 0.35  # rad kept clear of the 0/pi orientation fold
OCCLUSION_CLEAR = 6.0  # fully flat inside this radius around a dropped minutia
OCCLUSION_FADE = 14.0  # fully textured again beyond this radius


@dataclass(frozen=True)
class SynthSpec:
    count: int
    minutiae_min: int = 20
    minutiae_max: int = 40
    image_size: tuple = (256, 256)
    seed: int = 0
    max_rotation: float = math.radians(15.0)
    max_translation: float = 10.0
    drop_fraction: float = 0.1


@dataclass(frozen=True)
class ProbeScene:
    """Recipe for one probe image.

    ``rendered`` drives the ridge field and holds every transformed
    anchor; ``visible`` is the subset a matcher should recover after the
    occlusions erase the dropped ones.
    """

    visible: MinutiaeTemplate
    rendered: MinutiaeTemplate
    phase_offset: float
    occlusions: tuple


def _rng(spec: SynthSpec, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, index, stream])


def _spiral_sign(kind: MinutiaKind) -> int:
    return 1 if kind is MinutiaKind.ENDING else -1


def sample_anchors(spec: SynthSpec, index: int) -> MinutiaeTemplate:
    """Poisson-disk-style anchor set sharing one ridge-flow direction."""
    rng = _rng(spec, index, 0)
    width, height = spec.image_size
    cx, cy = width / 2.0, height / 2.0
    fold = FLOW_FOLD_MARGIN
    flow = float(rng.uniform(fold, math.pi - fold))
    if rng.uniform() < 0.5:
        flow += math.pi
    count = int(rng.integers(spec.minutiae_min, spec.minutiae_max + 1))
    points: list = []
    attempts = 0
    while len(points) < count and attempts < 4000:
        attempts += 1
        x, y = rng.uniform(-ANCHOR_RADIUS, ANCHOR_RADIUS, size=2)
        if x * x + y * y > ANCHOR_RADIUS**2:
            continue
        if any((x - px) ** 2 + (y - py) ** 2 < ANCHOR_SPACING**2 for px, py in points):
            continue
        points.append((x, y))
    minutiae = []
    for x, y in points:
        kind = MinutiaKind.ENDING if rng.uniform() < 0.5 else MinutiaKind.BIFURCATION
        minutiae.append(Minutia(cx + x, cy + y, flow, kind))
    return MinutiaeTemplate(width, height, tuple(minutiae))


def rasterize(
    template: MinutiaeTemplate, phase_offset: float = 0.0, occlusions: tuple = ()
) -> GrayImage:
    """Render the anchors as a spiral-phase ridge field.

    The plane-wave direction is the anchors' shared flow angle; each
    ending/bifurcation contributes a +1/−1 phase winding centered on it.
    Occlusions fade the texture back to the background level.
    """
    width, height = template.width, template.height
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    if template.minutiae:
        flow = template.minutiae[0].direction
        k = 2.0 * math.pi / RIDGE_PERIOD
        psi = k * (xx * math.cos(flow) + yy * math.sin(flow)) + phase_offset
        for m in template.minutiae:
            psi = psi + _spiral_sign(m.kind) * np.arctan2(yy - m.y, xx - m.x)
        field = np.cos(psi)
    else:
        field = np.zeros((height, width))

    cx, cy = width / 2.0, height / 2.0
    radius = np.hypot(xx - cx, yy - cy)
    taper = _smoothstep((TAPER_ZERO - radius) / (TAPER_ZERO - TAPER_FULL))
    for ox, oy in occlusions:
        r = np.hypot(xx - ox, yy - oy)
        taper = taper * _smoothstep((r - OCCLUSION_CLEAR) / (OCCLUSION_FADE - OCCLUSION_CLEAR))

    values = BASE_LEVEL + AMPLITUDE * taper * field
    return GrayImage(np.clip(np.rint(values), 0, 255).astype(np.uint8))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def perturb(template: MinutiaeTemplate, spec: SynthSpec, index: int) -> ProbeScene:
    """Rigid transform (about the image center) plus a minutiae drop.

    The phase constant makes ``rasterize(rendered, offset)`` the exact
    rigid transform of the record field; dropped anchors become
    occlusion centers.
    """
    rng = _rng(spec, index, 1)
    angle = float(rng.uniform(-spec.max_rotation, spec.max_rotation))
    tx, ty = (float(v) for v in rng.uniform(-spec.max_translation, spec.max_translation, size=2))
    total = len(template.minutiae)
    drop = int(round(spec.drop_fraction * total)) if total else 0
    dropped = set(rng.choice(total, size=drop, replace=False)) if drop else set()
    cx, cy = template.width / 2.0, template.height / 2.0
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    moved = []
    for m in template.minutiae:
        dx, dy = m.x - cx, m.y - cy
        moved.append(
            Minutia(
                cx + cos_a * dx - sin_a * dy + tx,
                cy + sin_a * dx + cos_a * dy + ty,
                m.direction + angle,
                m.kind,
            )
        )
    rendered = MinutiaeTemplate(template.width, template.height, tuple(moved))
    visible = MinutiaeTemplate(
        template.width,
        template.height,
        tuple(m for i, m in enumerate(moved) if i not in dropped),
    )
    occlusions = tuple((moved[i].x, moved[i].y) for i in sorted(dropped))

    # Phase constant: evaluate the record phase at T^-1(p) exactly.
    # Plane wave: k*(T^-1 p)*u = k*p*u' + k*(c*u - (c+t)*u'); each spiral
    # picks up -angle from rotating its argument.
    flow = template.minutiae[0].direction if template.minutiae else 0.0
    k = 2.0 * math.pi / RIDGE_PERIOD
    u = (math.cos(flow), math.sin(flow))
    u2 = (math.cos(flow + angle), math.sin(flow + angle))
    plane_const = k * ((cx * u[0] + cy * u[1]) - ((cx + tx) * u2[0] + (cy + ty) * u2[1]))
    spiral_const = -angle * sum(_spiral_sign(m.kind) for m in template.minutiae)
    return ProbeScene(visible, rendered, plane_const + spiral_const, occlusions)


def synth_generate(spec: SynthSpec, out_dir) -> dict:
    """Write the dataset (images, anchor templates, probes) plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for index in range(spec.count):
        record_id = f"s{index + 1:06d}"
        anchors = sample_anchors(spec, index)
        probe = perturb(anchors, spec, index)
        (out / f"{record_id}.pgm").write_bytes(write_pgm(rasterize(anchors)))
        (out / f"{record_id}.json").write_text(json.dumps(template_to_dict(anchors)))
        probe_img = rasterize(probe.rendered, probe.phase_offset, probe.occlusions)
        (out / f"{record_id}_probe.pgm").write_bytes(write_pgm(probe_img))
        entries.append(
            {
                "recordId": record_id,
                "name": f"person-{index + 1:03d}",
                "image": f"{record_id}.pgm",
                "template": f"{record_id}.json",
                "probe": f"{record_id}_probe.pgm",
            }
        )
    manifest = {
        "spec": {**asdict(spec), "image_size": list(spec.image_size)},
        "records": entries,
    }
    (out / "dataset.json").write_text(json.dumps(manifest, indent=2))
    return manifest
