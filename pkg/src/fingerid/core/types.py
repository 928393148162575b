"""Minutiae templates: the extracted feature set one fingerprint reduces to."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi


class MinutiaKind(enum.Enum):
    ENDING = "ending"
    BIFURCATION = "bifurcation"


def wrap_direction(angle: float) -> float:
    """Normalize an angle into [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0:
        a += TWO_PI
    return a if a < TWO_PI else 0.0


@dataclass(frozen=True)
class Minutia:
    """A ridge ending or bifurcation at (x, y) with a direction in [0, 2*pi)."""

    x: float
    y: float
    direction: float
    kind: MinutiaKind

    def __post_init__(self):
        if not (0.0 <= self.direction < TWO_PI):
            object.__setattr__(self, "direction", wrap_direction(self.direction))


@dataclass(frozen=True)
class MinutiaeTemplate:
    """All minutiae extracted from one image, plus the source dimensions."""

    width: int
    height: int
    minutiae: tuple[Minutia, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid template dimensions {self.width}x{self.height}")
        object.__setattr__(self, "minutiae", tuple(self.minutiae))
        for m in self.minutiae:
            if not (0 <= m.x < self.width and 0 <= m.y < self.height):
                raise ValueError(f"minutia ({m.x}, {m.y}) outside {self.width}x{self.height}")

    def __len__(self) -> int:
        return len(self.minutiae)


def template_to_dict(t: MinutiaeTemplate) -> dict:
    """JSON-ready form: {width, height, minutiae:[{x, y, direction, kind}]}."""
    return {
        "width": t.width,
        "height": t.height,
        "minutiae": [
            {"x": m.x, "y": m.y, "direction": m.direction, "kind": m.kind.value}
            for m in t.minutiae
        ],
    }


def template_from_dict(d: dict) -> MinutiaeTemplate:
    try:
        minutiae = tuple(
            Minutia(
                x=float(m["x"]),
                y=float(m["y"]),
                direction=float(m["direction"]),
                kind=MinutiaKind(m["kind"]),
            )
            for m in d["minutiae"]
        )
        return MinutiaeTemplate(width=int(d["width"]), height=int(d["height"]), minutiae=minutiae)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed template object: {exc}") from exc
