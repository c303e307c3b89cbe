"""Brute-force oracles and cached planner runs shared by the test modules.

The oracles deliberately avoid the package's own geometry kernels so that a
bug there cannot hide itself.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from lanegrid.config import PlannerConfig
from lanegrid.corpus import default_corpus, generate
from lanegrid.freeform import fit_freeform
from lanegrid.geometry import Ring
from lanegrid.headland import FieldGeometry, build_headlands
from lanegrid.straights import fit_straights


def rect_field(width: float = 200.0, height: float = 150.0, obstacles=(), name: str = "rect") -> FieldGeometry:
    pts = np.array([(0, 0), (width, 0), (width, height), (0, height)], dtype=float)
    return FieldGeometry(Ring(pts), tuple(obstacles), name)


def circle_pts(cx: float, cy: float, r: float, n: int = 64) -> np.ndarray:
    t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])


# --------------------------------------------------------------------------
# Oracles
# --------------------------------------------------------------------------


def brute_point_polyline(points: np.ndarray, line: np.ndarray, closed: bool = False) -> np.ndarray:
    """Distance from each point to a polyline by projecting onto every segment."""
    line = np.asarray(line, dtype=float)
    if closed:
        line = np.vstack([line, line[:1]])
    a, b = line[:-1], line[1:]
    out = np.empty(len(points))
    for i, p in enumerate(np.asarray(points, dtype=float)):
        ab = b - a
        t = np.clip(((p - a) * ab).sum(1) / np.maximum((ab * ab).sum(1), 1e-300), 0.0, 1.0)
        q = a + t[:, None] * ab
        out[i] = np.sqrt(((p - q) ** 2).sum(1)).min()
    return out


def _orient(p, q, r):
    return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])


def count_segment_crossings(lines: list[np.ndarray]) -> int:
    """Exhaustive segment-pair intersection count between distinct polylines.

    Touching counts as a crossing; collinear overlaps are caught through the
    zero-orientation bounding-box test.
    """
    segs = []
    owner = []
    for k, line in enumerate(lines):
        line = np.asarray(line, dtype=float)
        segs.append(np.stack([line[:-1], line[1:]], axis=1))
        owner.append(np.full(len(line) - 1, k))
    S = np.concatenate(segs)
    O = np.concatenate(owner)
    hits = 0
    for i in range(len(S)):
        other = O > O[i]
        if not other.any():
            continue
        T = S[other]
        p1, p2 = S[i, 0], S[i, 1]
        q1, q2 = T[:, 0], T[:, 1]
        d1 = _orient(q1, q2, p1[None, :].repeat(len(T), 0))
        d2 = _orient(q1, q2, p2[None, :].repeat(len(T), 0))
        d3 = _orient(p1[None, :].repeat(len(T), 0), p2[None, :].repeat(len(T), 0), q1)
        d4 = _orient(p1[None, :].repeat(len(T), 0), p2[None, :].repeat(len(T), 0), q2)
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        lo = np.minimum(q1, q2)
        hi = np.maximum(q1, q2)
        touch = ((np.abs(d1) < 1e-12) & np.all((p1 >= lo - 1e-12) & (p1 <= hi + 1e-12), axis=1)) | (
            (np.abs(d2) < 1e-12) & np.all((p2 >= lo - 1e-12) & (p2 <= hi + 1e-12), axis=1)
        )
        hits += int(np.count_nonzero(proper | touch))
    return hits


def max_turn(points: np.ndarray) -> float:
    seg = np.diff(np.asarray(points, dtype=float), axis=0)
    theta = np.arctan2(seg[:, 1], seg[:, 0])
    d = np.abs(np.diff(theta))
    d = np.minimum(d, 2 * math.pi - d)
    return float(d.max()) if len(d) else 0.0


def even_odd_inside(p: np.ndarray, ring: np.ndarray) -> bool:
    """Ray-casting point-in-polygon without tolerance handling."""
    x, y = p
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def min_interlane_distance(lanes) -> float:
    """Smallest distance from any lane's grid point to any other lane."""
    best = math.inf
    for i, a in enumerate(lanes):
        for j, b in enumerate(lanes):
            if i == j:
                continue
            best = min(best, float(brute_point_polyline(a.points, b.points).min()))
    return best


# --------------------------------------------------------------------------
# Cached planner runs
# --------------------------------------------------------------------------


DEFAULT = PlannerConfig()


@lru_cache(maxsize=None)
def corpus_fields() -> dict[str, FieldGeometry]:
    return {spec.name: generate(spec) for spec in default_corpus()}


@lru_cache(maxsize=None)
def corpus_headlands(name: str):
    return build_headlands(corpus_fields()[name], DEFAULT)


@lru_cache(maxsize=None)
def timed_freeform(name: str, delta_theta_deg: float = 135.0, workers: int = 1):
    """(plan, seconds) for a corpus field; cached across test modules."""
    import time

    cfg = PlannerConfig(delta_theta_max=math.radians(delta_theta_deg))
    t0 = time.perf_counter()
    plan = fit_freeform(corpus_fields()[name], cfg, workers=workers)
    return plan, time.perf_counter() - t0


@lru_cache(maxsize=None)
def straights(name: str, delta_theta_deg: float = 135.0):
    cfg = PlannerConfig(delta_theta_max=math.radians(delta_theta_deg))
    return fit_straights(corpus_fields()[name], cfg)


CORPUS_NAMES = tuple(spec.name for spec in default_corpus())
