"""Planar geometry primitives in metric (UTM) coordinates.

Points are handled as ``(N, 2)`` float arrays throughout. ``Ring`` is the
canonical closed contour: simple, counterclockwise, without a repeated
closing vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon

COORD_TOL = 1e-9

# Maximum radial error of arc discretization in offset rings (m).
ARC_SAGITTA = 0.02


class GeometryError(ValueError):
    """Raised for degenerate or invalid geometric input."""


def as_points(points: Iterable[Sequence[float]] | np.ndarray) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected an (N, 2) coordinate array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("coordinates must be finite")
    return arr


def dedupe_consecutive(pts: np.ndarray, closed: bool = False, tol: float = COORD_TOL) -> np.ndarray:
    """Drop points coincident (within ``tol``) with their predecessor."""
    if len(pts) == 0:
        return pts
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > tol:
            keep.append(i)
    out = pts[keep]
    if closed:
        while len(out) > 1 and np.hypot(*(out[-1] - out[0])) <= tol:
            out = out[:-1]
    return out


def signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polyline_length(pts: np.ndarray, closed: bool = False) -> float:
    seg = np.diff(pts, axis=0)
    total = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    if closed and len(pts) > 1:
        total += float(np.hypot(*(pts[0] - pts[-1])))
    return total


@dataclass(frozen=True)
class Polyline:
    """Ordered vertex sequence, open or closed."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self) -> None:
        pts = as_points(self.points)
        if self.closed and len(pts) > 1 and np.hypot(*(pts[-1] - pts[0])) <= COORD_TOL:
            pts = pts[:-1]
        need = 3 if self.closed else 2
        if len(pts) < need:
            raise GeometryError(f"polyline needs at least {need} points")
        seg = np.diff(pts if not self.closed else np.vstack([pts, pts[:1]]), axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) <= COORD_TOL):
            raise GeometryError("consecutive points coincide")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def length(self) -> float:
        return polyline_length(self.points, self.closed)


@dataclass(frozen=True, eq=False)
class Ring:
    """Simple counterclockwise closed contour with positive area."""

    points: np.ndarray
    _area: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pts = dedupe_consecutive(as_points(self.points), closed=True)
        if len(pts) < 3:
            raise GeometryError("ring needs at least 3 distinct points")
        if not LinearRing(pts).is_simple:
            raise GeometryError("ring is self-intersecting")
        area = signed_area(pts)
        if abs(area) <= COORD_TOL:
            raise GeometryError("ring has zero area")
        if area < 0:
            pts = pts[::-1]
            area = -area
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_area", area)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def area(self) -> float:
        return self._area

    @property
    def length(self) -> float:
        return polyline_length(self.points, closed=True)

    @property
    def closed_points(self) -> np.ndarray:
        return np.vstack([self.points, self.points[:1]])

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.points)

    @classmethod
    def from_polygon(cls, poly: Polygon) -> "Ring":
        return cls(np.asarray(poly.exterior.coords)[:-1])


def max_spacing(w: float, epsilon: float) -> float:
    """Largest grid spacing for which the circle inclusion check is sound.

    A point at distance >= ``w`` from two grid points spaced ``d`` apart is at
    distance >= ``epsilon * w`` from the segment joining them as long as
    ``d <= 2 w sqrt(1 - epsilon**2)``.
    """
    if not (math.isfinite(w) and math.isfinite(epsilon)):
        raise GeometryError("w and epsilon must be finite")
    if w <= 0:
        raise GeometryError("w must be positive")
    if not 0.0 <= epsilon <= 1.0:
        raise GeometryError("epsilon must lie in [0, 1]")
    return 2.0 * w * math.sqrt(1.0 - epsilon * epsilon)


def interpolate_polyline(line: Polyline | np.ndarray, d: float, closed: bool | None = None) -> np.ndarray:
    """Subdivide every segment uniformly so consecutive spacing is <= ``d``.

    Original vertices are kept in order. For closed input the closing segment
    is subdivided as well and the result is returned without a repeated
    first vertex.
    """
    if not d > 0:
        raise GeometryError("spacing must be positive")
    if isinstance(line, Polyline):
        pts, is_closed = line.points, line.closed
    else:
        pts, is_closed = as_points(line), bool(closed)
    if len(pts) < 2:
        raise GeometryError("degenerate polyline")
    src = np.vstack([pts, pts[:1]]) if is_closed else pts
    seg = np.diff(src, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seg_len <= COORD_TOL):
        raise GeometryError("degenerate polyline")
    pieces = np.maximum(1, np.ceil(seg_len / d - 1e-12).astype(int))
    owner = np.repeat(np.arange(len(seg)), pieces)
    first = np.cumsum(pieces) - pieces
    t = (np.arange(len(owner)) - first[owner]) / pieces[owner]
    out = src[:-1][owner] + t[:, None] * seg[owner]
    if not is_closed:
        out = np.vstack([out, src[-1:]])
    return out


def offset_step(p_k: Sequence[float], p_k1: Sequence[float], w: float) -> tuple[float, np.ndarray]:
    """Offset the midpoint of ``p_k -> p_k1`` by ``w`` to its left.

    Returns the segment heading (full-quadrant) and the offset point.
    """
    a = np.asarray(p_k, dtype=float)
    b = np.asarray(p_k1, dtype=float)
    dx, dy = b - a
    if math.hypot(dx, dy) <= COORD_TOL:
        raise GeometryError("coincident points")
    theta = math.atan2(dy, dx)
    mid = 0.5 * (a + b)
    return theta, mid + w * np.array([math.cos(theta + math.pi / 2), math.sin(theta + math.pi / 2)])


def offset_points(pts: np.ndarray, w: float, side: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`offset_step` over all consecutive pairs.

    ``side=+1`` offsets to the left of travel, ``-1`` to the right.
    """
    seg = np.diff(pts, axis=0)
    theta = np.arctan2(seg[:, 1], seg[:, 0])
    mid = 0.5 * (pts[:-1] + pts[1:])
    normal = np.column_stack([np.cos(theta + side * np.pi / 2), np.sin(theta + side * np.pi / 2)])
    return theta, mid + w * normal


def arc_quad_segs(radius: float, spacing: float | None = None, sagitta: float = ARC_SAGITTA) -> int:
    """Segments per quarter circle so chords respect both spacing and sagitta."""
    step = 2.0 * math.acos(max(-1.0, 1.0 - sagitta / radius)) if radius > sagitta else math.pi / 2
    if spacing is not None and spacing < 2 * radius:
        step = min(step, 2.0 * math.asin(spacing / (2.0 * radius)))
    return max(1, math.ceil((math.pi / 2) / step))


def _polygons_of(geom) -> list[Polygon]:
    if geom.is_empty:
        return []
    if geom.geom_type == "Polygon":
        return [geom]
    return [g for g in getattr(geom, "geoms", []) if g.geom_type == "Polygon" and not g.is_empty]


def offset_ring(ring: Ring, distance: float, direction: str = "inward", spacing: float | None = None) -> list[Ring]:
    """Minkowski erosion (``inward``) or dilation (``outward``) of a ring.

    Convex corners of dilations and reflex corners of erosions become
    circular arcs. Erosion may return several rings (region split) or none
    (region vanished); holes created by a dilation are dropped.
    """
    if not distance > 0:
        raise GeometryError("offset distance must be positive")
    if direction not in ("inward", "outward"):
        raise GeometryError(f"unknown offset direction {direction!r}")
    signed = -distance if direction == "inward" else distance
    poly = ring.polygon.buffer(signed, quad_segs=arc_quad_segs(distance, spacing), join_style="round")
    out = []
    for part in _polygons_of(poly):
        if part.area <= 1e-6:
            continue
        out.append(Ring.from_polygon(part))
    out.sort(key=lambda r: -r.area)
    return out


def point_in_ring(p: Sequence[float], ring: Ring | np.ndarray) -> bool:
    """Even-odd containment test; points on the boundary count as inside."""
    return bool(points_in_ring(np.asarray([p], dtype=float), ring)[0])


def points_in_ring(pts: np.ndarray, ring: Ring | np.ndarray, tol: float = COORD_TOL) -> np.ndarray:
    verts = ring.points if isinstance(ring, Ring) else as_points(ring)
    pts = np.asarray(pts, dtype=float)
    a = verts
    b = np.roll(verts, -1, axis=0)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = np.count_nonzero(straddle & (px < x_cross), axis=1) % 2 == 1
    on_edge = segment_distances(pts, a, b).min(axis=1) <= tol
    return inside | on_edge


def segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance matrix (points x segments) from points to segments ``a[j]-b[j]``."""
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, np.einsum("nij,ij->ni", ap, ab) / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    diff = pts[:, None, :] - closest
    return np.hypot(diff[..., 0], diff[..., 1])


def point_polyline_distance(pts: np.ndarray, line: np.ndarray, closed: bool = False) -> np.ndarray:
    """Brute-force distance from each point to a polyline (all segments)."""
    line = as_points(line)
    src = np.vstack([line, line[:1]]) if closed else line
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(src) == 1:
        return np.hypot(*(pts - src[0]).T)
    return segment_distances(pts, src[:-1], src[1:]).min(axis=1)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p, tol: float) -> bool:
    return (
        min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol
        and min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol
    )


def segment_intersects(a1, a2, b1, b2, tol: float = COORD_TOL) -> bool:
    """True if closed segments ``a1-a2`` and ``b1-b2`` share any point."""
    d1 = _orient(b1, b2, a1)
    d2 = _orient(b1, b2, a2)
    d3 = _orient(a1, a2, b1)
    d4 = _orient(a1, a2, b2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    if abs(d1) <= tol and _on_segment(b1, b2, a1, tol):
        return True
    if abs(d2) <= tol and _on_segment(b1, b2, a2, tol):
        return True
    if abs(d3) <= tol and _on_segment(a1, a2, b1, tol):
        return True
    if abs(d4) <= tol and _on_segment(a1, a2, b2, tol):
        return True
    return False


def min_point_distance(p: Sequence[float], pts: np.ndarray) -> float:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) == 0:
        return math.inf
    return float(np.min(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])))


def ring_area_ha(ring: Ring) -> float:
    return ring.area / 10_000.0


def heading_changes(pts: np.ndarray) -> np.ndarray:
    """Absolute heading change between consecutive segments, wrapped to [0, pi]."""
    seg = np.diff(pts, axis=0)
    theta = np.arctan2(seg[:, 1], seg[:, 0])
    dtheta = np.diff(theta)
    return np.abs((dtheta + np.pi) % (2 * np.pi) - np.pi)


def thin_points(pts: np.ndarray, min_gap: float) -> np.ndarray:
    """Drop interior points closer than ``min_gap`` to the last kept point.

    Both endpoints are kept; if the final kept interior point crowds the last
    endpoint it is removed instead.
    """
    if len(pts) <= 2:
        return pts
    xy = pts.tolist()
    keep = [0]
    lx, ly = xy[0]
    for i in range(1, len(xy) - 1):
        x, y = xy[i]
        if math.hypot(x - lx, y - ly) >= min_gap:
            keep.append(i)
            lx, ly = x, y
    ex, ey = xy[-1]
    while len(keep) > 1 and math.hypot(ex - xy[keep[-1]][0], ey - xy[keep[-1]][1]) < min_gap:
        keep.pop()
    keep.append(len(pts) - 1)
    return pts[keep]

