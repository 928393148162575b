import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerid.core import (
    Minutia,
    MinutiaKind,
    MinutiaeTemplate,
    build_descriptor,
    match_templates,
)

SIZE = 256


def random_template(rng, n, size=SIZE, margin=40, min_sep=8.0):
    """Random template with integer positions at least min_sep apart."""
    pts = []
    while len(pts) < n:
        x = int(rng.integers(margin, size - margin))
        y = int(rng.integers(margin, size - margin))
        if all(math.hypot(x - px, y - py) >= min_sep for px, py in pts):
            pts.append((x, y))
    minutiae = tuple(
        Minutia(
            x=float(x),
            y=float(y),
            direction=float(rng.uniform(0, 2 * math.pi)),
            kind=MinutiaKind.ENDING if rng.random() < 0.5 else MinutiaKind.BIFURCATION,
        )
        for x, y in pts
    )
    return MinutiaeTemplate(width=size, height=size, minutiae=minutiae)


def rigid_transform(t, angle, dx, dy):
    """Rotate about the centroid, translate, and round coordinates to ints."""
    cx = sum(m.x for m in t.minutiae) / len(t)
    cy = sum(m.y for m in t.minutiae) / len(t)
    c, s = math.cos(angle), math.sin(angle)
    moved = []
    for m in t.minutiae:
        x = c * (m.x - cx) - s * (m.y - cy) + cx + dx
        y = s * (m.x - cx) + c * (m.y - cy) + cy + dy
        moved.append(Minutia(x=round(x), y=round(y), direction=m.direction + angle, kind=m.kind))
    return MinutiaeTemplate(width=t.width, height=t.height, minutiae=tuple(moved))


def pair(x, y, d=0.0, d2=0.0):
    return MinutiaeTemplate(
        width=64,
        height=64,
        minutiae=(
            Minutia(x=20.0, y=20.0, direction=d, kind=MinutiaKind.ENDING),
            Minutia(x=20.0 + x, y=20.0 + y, direction=d2, kind=MinutiaKind.ENDING),
        ),
    )


class TestDescriptor:
    def test_neighbor_due_east(self):
        t = pair(10.0, 0.0)
        d = build_descriptor(t, 0)
        assert d.entries == ((10.0, 0.0, 0.0),)

    def test_radial_angle_subtracts_own_direction(self):
        t = pair(10.0, 0.0, d=math.pi / 2)
        d = build_descriptor(t, 0)
        dist, radial, delta = d.entries[0]
        assert dist == 10.0
        assert radial == pytest.approx(3 * math.pi / 2, abs=1e-9)
        assert delta == pytest.approx(3 * math.pi / 2, abs=1e-9)

    def test_brute_force_distances_20_minutiae(self):
        # Oracle: K smallest pairwise distances by full enumeration.
        rng = np.random.default_rng(2)
        t = random_template(rng, 20)
        for i in range(len(t)):
            got = [e[0] for e in build_descriptor(t, i)]
            all_d = sorted(
                math.hypot(t.minutiae[j].x - t.minutiae[i].x, t.minutiae[j].y - t.minutiae[i].y)
                for j in range(len(t))
                if j != i
            )
            assert got == pytest.approx(all_d[:5], abs=1e-9)
            assert got == sorted(got)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2, 50), seed=st.integers(0, 10_000), k=st.integers(1, 8))
    def test_brute_force_distances_property(self, n, seed, k):
        rng = np.random.default_rng(seed)
        t = random_template(rng, n)
        i = int(rng.integers(0, n))
        got = [e[0] for e in build_descriptor(t, i, k=k)]
        all_d = sorted(
            math.hypot(t.minutiae[j].x - t.minutiae[i].x, t.minutiae[j].y - t.minutiae[i].y)
            for j in range(n)
            if j != i
        )
        assert len(got) == min(k, n - 1)
        assert got == pytest.approx(all_d[: len(got)], abs=1e-9)

    def test_too_few_minutiae_rejected(self):
        t = MinutiaeTemplate(width=32, height=32, minutiae=(Minutia(1.0, 1.0, 0.0, MinutiaKind.ENDING),))
        with pytest.raises(ValueError):
            build_descriptor(t, 0)


class TestMatch:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(3)
        for n in (2, 5, 30):
            t = random_template(rng, n)
            assert match_templates(t, t) == 1.0

    def test_empty_or_single_gives_zero(self):
        rng = np.random.default_rng(4)
        t = random_template(rng, 10)
        empty = MinutiaeTemplate(width=SIZE, height=SIZE)
        single = MinutiaeTemplate(
            width=SIZE, height=SIZE, minutiae=(Minutia(5.0, 5.0, 0.0, MinutiaKind.ENDING),)
        )
        assert match_templates(t, empty) == 0.0
        assert match_templates(empty, t) == 0.0
        assert match_templates(t, single) == 0.0
        assert match_templates(empty, empty) == 0.0

    def test_rotated_translated_copy_scores_high(self):
        # Oracle: the known transform keeps every pair within the tolerances,
        # so a full pairing is feasible and the score should stay near 1.
        rng = np.random.default_rng(5)
        t = random_template(rng, 25)
        moved = rigid_transform(t, math.radians(15), 5, -3)
        assert match_templates(t, moved) >= 0.9

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), angle=st.floats(0.0, 2 * math.pi), dx=st.integers(-5, 5), dy=st.integers(-5, 5))
    def test_rigid_invariance_property(self, seed, angle, dx, dy):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        t = random_template(rng, n, margin=80)
        moved = rigid_transform(t, angle, dx, dy)
        floor = math.floor(0.9 * n) ** 2 / n**2
        assert match_templates(t, moved) >= floor

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_similarity_bounds(self, seed):
        rng = np.random.default_rng(seed)
        q = random_template(rng, int(rng.integers(2, 30)))
        r = random_template(rng, int(rng.integers(2, 30)))
        s = match_templates(q, r)
        assert 0.0 <= s <= 1.0
        if len(q) != len(r):
            assert s < 1.0  # 1.0 requires a full pairing of equal-sized templates

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 10))
    def test_monotone_degradation_bound(self, seed, k):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(12, 30))
        q = random_template(rng, n)
        kept = q.minutiae[: n - k]
        r = MinutiaeTemplate(width=q.width, height=q.height, minutiae=kept)
        s = match_templates(q, r)
        cap = min(len(q), len(r)) ** 2 / (len(q) * len(r))
        assert s <= cap + 1e-9

    def test_deterministic_across_calls(self):
        rng = np.random.default_rng(6)
        q = random_template(rng, 20)
        r = rigid_transform(q, 0.3, 4, 2)
        first = match_templates(q, r)
        assert all(match_templates(q, r) == first for _ in range(3))
