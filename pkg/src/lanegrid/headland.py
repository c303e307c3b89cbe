"""Headland and obstacle-headland construction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from shapely.geometry import MultiLineString, Polygon
from shapely.ops import unary_union
from shapely.prepared import prep

from .config import PlannerConfig
from .geometry import GeometryError, Ring, interpolate_polyline, offset_ring

log = logging.getLogger(__name__)

# Offset points closer than this to a headland path coincide with it.
CORE_MARGIN = 0.1


class FieldError(ValueError):
    """Invalid field geometry or a field the operating width cannot fit."""


@dataclass(frozen=True, eq=False)
class FieldGeometry:
    contour: Ring
    obstacles: tuple[Ring, ...] = ()
    name: str = "field"

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        outer = self.contour.polygon
        for i, ob in enumerate(self.obstacles):
            if not outer.contains(ob.polygon) or ob.polygon.intersects(outer.exterior):
                raise FieldError(f"obstacle {i} is not strictly inside the field contour")
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                if self.obstacles[i].polygon.intersects(self.obstacles[j].polygon):
                    raise FieldError(f"obstacles {i} and {j} overlap")

    @property
    def area_ha(self) -> float:
        return (self.contour.area - sum(o.area for o in self.obstacles)) / 10_000.0


def _resampled(ring: Ring, spacing: float) -> Ring:
    return Ring(interpolate_polyline(ring.points, spacing, closed=True))


@dataclass(frozen=True, eq=False)
class HeadlandSet:
    """Resampled headland ring, obstacle headland rings and the lane region.

    ``region`` is the headland-enclosed area minus the union of obstacle
    headland areas; interior lanes must stay inside it.
    """

    headland: Ring
    obstacle_headlands: tuple[Ring, ...]
    grid_spacing: float
    warnings: tuple[str, ...] = ()
    obstacles_merged: bool = False
    region: Polygon | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.region is None:
            excl = unary_union([r.polygon for r in self.obstacle_headlands]) if self.obstacle_headlands else None
            region = self.headland.polygon if excl is None else self.headland.polygon.difference(excl)
            object.__setattr__(self, "region", region)

    @cached_property
    def prepared_region(self):
        return prep(self.region)

    @cached_property
    def boundary(self) -> MultiLineString:
        """Headland ring plus obstacle headland rings, as line work."""
        rings = [self.headland.closed_points] + [r.closed_points for r in self.obstacle_headlands]
        return MultiLineString([np.asarray(r) for r in rings])

    @cached_property
    def exclusion(self):
        if not self.obstacle_headlands:
            return Polygon()
        return unary_union([r.polygon for r in self.obstacle_headlands])

    @cached_property
    def core(self):
        """Lane region shrunk by a small margin, for strict interior tests."""
        core = self.region.buffer(-CORE_MARGIN)
        shapely.prepare(core)
        return core

    def strictly_inside(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized test: farther than ``CORE_MARGIN`` inside the lane region."""
        pts = np.atleast_2d(pts)
        if len(pts) == 0:
            return np.zeros(0, dtype=bool)
        return shapely.contains_xy(self.core, pts[:, 0], pts[:, 1])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized test: inside the headland and outside every obstacle headland."""
        pts = np.atleast_2d(pts)
        if len(pts) == 0:
            return np.zeros(0, dtype=bool)
        outer = self.headland.polygon
        shapely.prepare(outer)
        inside = shapely.intersects_xy(outer, pts[:, 0], pts[:, 1])
        for ring in self.obstacle_headlands:
            shapely.prepare(ring.polygon)
            inside &= ~shapely.contains_xy(ring.polygon, pts[:, 0], pts[:, 1])
        return inside


def build_headlands(field_geom: FieldGeometry, cfg: PlannerConfig) -> HeadlandSet:
    """Erode the contour and dilate obstacles by w/2, then resample both.

    A field that erodes into several pieces is planned on its largest piece
    and a warning is recorded; a field that erodes away raises
    :class:`FieldError`.
    """
    half = cfg.w / 2.0
    spacing = cfg.headland_spacing
    warnings: list[str] = []

    parts = offset_ring(field_geom.contour, half, "inward", spacing)
    if not parts:
        raise FieldError("field narrower than operating width: headland erosion is empty")
    if len(parts) > 1:
        msg = (
            f"headland erosion split field {field_geom.name!r} into {len(parts)} components; "
            f"planning on the largest ({parts[0].area / 1e4:.2f} ha)"
        )
        log.warning(msg)
        warnings.append(msg)
    headland = _resampled(parts[0], spacing)

    obstacle_headlands = []
    for ob in field_geom.obstacles:
        dilated = offset_ring(ob, half, "outward", spacing)
        if not dilated:
            raise GeometryError("obstacle dilation produced no ring")
        obstacle_headlands.append(_resampled(dilated[0], spacing))

    merged = False
    polys = [r.polygon for r in obstacle_headlands]
    for i in range(len(polys)):
        if polys[i].intersects(headland.polygon.exterior):
            merged = True
        for j in range(i + 1, len(polys)):
            if polys[i].intersects(polys[j]):
                merged = True
    if merged:
        warnings.append("obstacle headlands overlap each other or the field headland; exclusion region unioned")

    return HeadlandSet(
        headland=headland,
        obstacle_headlands=tuple(obstacle_headlands),
        grid_spacing=spacing,
        warnings=tuple(warnings),
        obstacles_merged=merged,
    )
