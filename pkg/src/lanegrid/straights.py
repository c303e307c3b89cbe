"""Parallel straight lanes with a rotation-angle grid search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LineString

from .config import PlannerConfig
from .geometry import interpolate_polyline, thin_points
from .headland import FieldGeometry, HeadlandSet, build_headlands
from .plan import COUNT_POLICY, Lane, LanePlan, ReferenceCandidate

MIN_SEGMENT = 1.0


@dataclass(frozen=True)
class AngleSweep:
    entries: list[tuple[float, int]]

    @property
    def angles(self) -> list[float]:
        return [a for a, _ in self.entries]

    @property
    def counts(self) -> list[int]:
        return [n for _, n in self.entries]

    def best(self) -> tuple[float, int]:
        return min(self.entries, key=lambda e: (e[1], e[0]))


def lane_frame(angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit lane direction and the perpendicular offset direction."""
    u = np.array([-math.sin(angle), math.cos(angle)])
    n = np.array([math.cos(angle), math.sin(angle)])
    return u, n


def _line_parts(geom) -> list[np.ndarray]:
    if geom.is_empty:
        return []
    if geom.geom_type == "LineString":
        return [np.asarray(geom.coords)]
    out = []
    for g in getattr(geom, "geoms", []):
        out.extend(_line_parts(g))
    return out


def clipped_segments(hs: HeadlandSet, cfg: PlannerConfig, angle: float) -> list[tuple[int, np.ndarray]]:
    """Clip the offset lines for ``angle`` against the lane region.

    Lines sit at w, 2w, ... from the headland's minimal support line in the
    rotated frame. Returns ``(offset_index, segment)`` pairs ordered by
    offset, then along the lane direction; pieces shorter than
    ``MIN_SEGMENT`` are dropped.
    """
    u, n = lane_frame(angle)
    pts = hs.headland.points
    s = pts @ n
    t = pts @ u
    s_min, s_max = float(s.min()), float(s.max())
    t_lo, t_hi = float(t.min()) - 1.0, float(t.max()) + 1.0
    k_max = math.ceil((s_max - s_min) / cfg.w)
    offsets = [s_min + k * cfg.w for k in range(1, k_max + 1) if s_min + k * cfg.w < s_max]
    if not offsets:
        return []
    lines = [LineString([o * n + t_lo * u, o * n + t_hi * u]) for o in offsets]
    clipped = shapely.intersection(hs.region, np.array(lines, dtype=object))
    out = []
    for k, geom in enumerate(clipped, start=1):
        parts = []
        for seg in _line_parts(geom):
            length = float(np.hypot(*(seg[-1] - seg[0])))
            if length <= MIN_SEGMENT:
                continue
            a, b = seg[0], seg[-1]
            if (b - a) @ u < 0:
                a, b = b, a
            parts.append(np.array([a, b]))
        parts.sort(key=lambda p: float(p[0] @ u))
        out.extend((k, p) for p in parts)
    return out


def lanes_at_angle(hs: HeadlandSet, cfg: PlannerConfig, angle: float) -> list[Lane]:
    d = cfg.lane_spacing
    lanes = []
    for i, (k, seg) in enumerate(clipped_segments(hs, cfg, angle)):
        pts = thin_points(interpolate_polyline(seg, d), d / 4.0)
        lanes.append(Lane(points=pts, index=i, generation=k))
    return lanes


def count_at_angle(hs: HeadlandSet, cfg: PlannerConfig, angle: float) -> int:
    return len(clipped_segments(hs, cfg, angle))


def sweep_headlands(hs: HeadlandSet, cfg: PlannerConfig) -> AngleSweep:
    return AngleSweep([(a, count_at_angle(hs, cfg, math.radians(a))) for a in cfg.angles_deg()])


def sweep_angles(field: FieldGeometry, cfg: PlannerConfig) -> AngleSweep:
    """Lane count for every rotation angle on the configured grid."""
    return sweep_headlands(build_headlands(field, cfg), cfg)


def straights_plan(hs: HeadlandSet, cfg: PlannerConfig, angle: float) -> LanePlan:
    ref = ReferenceCandidate("straight_line", angle=angle % (2 * math.pi))
    plan = LanePlan(
        lanes=lanes_at_angle(hs, cfg, angle),
        reference=ref,
        planner="straights",
        warnings=list(hs.warnings),
        metadata={"count_policy": COUNT_POLICY, "obstacles_merged": hs.obstacles_merged},
    )
    return plan


def fit_straights(field: FieldGeometry, cfg: PlannerConfig, hs: HeadlandSet | None = None) -> LanePlan:
    """Best straight-lane plan over the angle grid (ties go to the smaller angle)."""
    hs = hs or build_headlands(field, cfg)
    sweep = sweep_headlands(hs, cfg)
    best_deg, _ = sweep.best()
    plan = straights_plan(hs, cfg, math.radians(best_deg))
    plan.metadata["angle_deg"] = best_deg
    plan.metadata["config"] = cfg.to_dict()
    return plan
