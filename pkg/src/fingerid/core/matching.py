"""Template similarity via local descriptors and rigid alignment.

Each minutia gets a descriptor of its nearest neighbors (distance, radial
angle, direction delta).  The lowest-cost descriptor pairs seed rigid
alignment hypotheses; each hypothesis is scored by greedily pairing
transformed minutiae one-to-one, and the best hypothesis wins.  With m
paired minutiae the similarity is m^2 / (|q| * |r|), so it lives in [0, 1]
and hits 1 only for a complete pairing of equal-sized templates.

All tie-breaks are by index order, which makes scores bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fingerid.core.types import MinutiaeTemplate

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MatchConfig:
    neighbor_count: int = 5  # descriptor size K
    hypothesis_count: int = 5  # alignment seeds C
    distance_tolerance: float = 12.0  # px, both pairing gate and cost scale
    angle_tolerance: float = math.pi / 9  # rad, both pairing gate and cost scale


DEFAULT_CONFIG = MatchConfig()


@dataclass(frozen=True)
class LocalDescriptor:
    """Neighbor tuples (distance, radial_angle, direction_delta), nearest first."""

    entries: tuple[tuple[float, float, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _arrays(t: MinutiaeTemplate) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.array([m.x for m in t.minutiae], dtype=np.float64)
    ys = np.array([m.y for m in t.minutiae], dtype=np.float64)
    ds = np.array([m.direction for m in t.minutiae], dtype=np.float64)
    return xs, ys, ds


def _wrap_2pi(a: np.ndarray) -> np.ndarray:
    return np.mod(a, TWO_PI)


def _gap_pi(a: np.ndarray) -> np.ndarray:
    """Fold an angle difference into [0, pi]."""
    w = np.mod(np.abs(a), TWO_PI)
    return np.minimum(w, TWO_PI - w)


def _descriptor_table(xs, ys, dirs, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-minutia neighbor tables (n, L): distances, radial angles, deltas."""
    n = len(xs)
    dx = xs[None, :] - xs[:, None]
    dy = ys[None, :] - ys[:, None]
    dist = np.hypot(dx, dy)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, : min(k, n - 1)]
    rows = np.arange(n)[:, None]
    nd = dist[rows, order]
    radial = _wrap_2pi(np.arctan2(dy, dx)[rows, order] - dirs[:, None])
    delta = _wrap_2pi(dirs[order] - dirs[:, None])
    return nd, radial, delta


def build_descriptor(t: MinutiaeTemplate, i: int, k: int = DEFAULT_CONFIG.neighbor_count) -> LocalDescriptor:
    """Descriptor of minutia i: its min(k, n-1) nearest neighbors."""
    n = len(t)
    if n < 2:
        raise ValueError("descriptor needs at least 2 minutiae")
    if not 0 <= i < n:
        raise IndexError(f"minutia index {i} out of range for template of {n}")
    nd, radial, delta = _descriptor_table(*_arrays(t), k)
    entries = tuple(
        (float(nd[i, j]), float(radial[i, j]), float(delta[i, j])) for j in range(nd.shape[1])
    )
    return LocalDescriptor(entries=entries)


def _descriptor_costs(q_tab, r_tab, config: MatchConfig) -> np.ndarray:
    """(nq, nr) mean per-tuple cost over the common descriptor prefix."""
    qd, qr, qdd = q_tab
    rd, rr, rdd = r_tab
    depth = min(qd.shape[1], rd.shape[1])
    qd, qr, qdd = qd[:, None, :depth], qr[:, None, :depth], qdd[:, None, :depth]
    rd, rr, rdd = rd[None, :, :depth], rr[None, :, :depth], rdd[None, :, :depth]
    per_tuple = (
        np.abs(qd - rd) / config.distance_tolerance
        + _gap_pi(qr - rr) / config.angle_tolerance
        + _gap_pi(qdd - rdd) / config.angle_tolerance
    ) / 3.0
    return per_tuple.mean(axis=2)


def _greedy_pairs(dist: np.ndarray, angle_gap: np.ndarray, config: MatchConfig) -> int:
    """One-to-one nearest-first pairing under the distance and angle gates."""
    ok = (dist <= config.distance_tolerance) & (angle_gap <= config.angle_tolerance)
    qi, ri = np.nonzero(ok)
    if len(qi) == 0:
        return 0
    order = np.argsort(dist[qi, ri], kind="stable")  # flat index order breaks ties
    q_used = np.zeros(dist.shape[0], dtype=bool)
    r_used = np.zeros(dist.shape[1], dtype=bool)
    matched = 0
    for idx in order:
        a, b = qi[idx], ri[idx]
        if not q_used[a] and not r_used[b]:
            q_used[a] = True
            r_used[b] = True
            matched += 1
    return matched


def match_templates(
    q: MinutiaeTemplate, r: MinutiaeTemplate, config: MatchConfig = DEFAULT_CONFIG
) -> float:
    """Similarity index in [0, 1] between two templates."""
    nq, nr = len(q), len(r)
    if nq < 2 or nr < 2:
        return 0.0
    qx, qy, qdir = _arrays(q)
    rx, ry, rdir = _arrays(r)
    q_tab = _descriptor_table(qx, qy, qdir, config.neighbor_count)
    r_tab = _descriptor_table(rx, ry, rdir, config.neighbor_count)
    costs = _descriptor_costs(q_tab, r_tab, config)
    # Stable sort of the flattened costs: ties fall back to (i, j) order.
    seeds = np.argsort(costs.ravel(), kind="stable")[: config.hypothesis_count]

    best = 0.0
    for flat in seeds:
        i, j = divmod(int(flat), nr)
        phi = rdir[j] - qdir[i]
        c, s = math.cos(phi), math.sin(phi)
        tx = c * (qx - qx[i]) - s * (qy - qy[i]) + rx[j]
        ty = s * (qx - qx[i]) + c * (qy - qy[i]) + ry[j]
        dist = np.hypot(tx[:, None] - rx[None, :], ty[:, None] - ry[None, :])
        angle_gap = _gap_pi((qdir + phi)[:, None] - rdir[None, :])
        m = _greedy_pairs(dist, angle_gap, config)
        best = max(best, (m * m) / (nq * nr))
        if best == 1.0:
            break
    return best
