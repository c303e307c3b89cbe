import math

import numpy as np
import pytest

from helpers import circle_pts, rect_field
from lanegrid.config import PlannerConfig
from lanegrid.geometry import Ring
from lanegrid.headland import build_headlands
from lanegrid.plan import count_lanes
from lanegrid.straights import (
    clipped_segments,
    count_at_angle,
    fit_straights,
    lane_frame,
    sweep_angles,
)

CFG = PlannerConfig()


def support_count(width: float, height: float, angle_deg: float, w: float = 36.0) -> int:
    """Offset lines w, 2w, ... strictly inside the rotated support width."""
    a = math.radians(angle_deg)
    span = abs(width * math.cos(a)) + abs(height * math.sin(a))
    return math.ceil(span / w) - 1


def test_lane_frame_convention():
    u, n = lane_frame(0.0)
    np.testing.assert_allclose(u, (0, 1), atol=1e-12)
    np.testing.assert_allclose(n, (1, 0), atol=1e-12)
    u, _ = lane_frame(math.pi / 2)
    np.testing.assert_allclose(u, (-1, 0), atol=1e-12)


def test_rectangle_long_edge_and_perpendicular():
    hs = build_headlands(rect_field(200, 150), CFG)
    assert count_at_angle(hs, CFG, math.radians(90)) == 3
    assert count_at_angle(hs, CFG, 0.0) == 4
    plan = fit_straights(rect_field(200, 150), CFG)
    assert plan.n_lanes == 3 == count_lanes(plan)


def test_rectangle_lane_offsets():
    hs = build_headlands(rect_field(200, 150), CFG)
    segs = clipped_segments(hs, CFG, math.radians(90))
    ys = sorted(float(s[0, 1]) for _, s in segs)
    assert ys == pytest.approx([54, 90, 126])
    for _, s in segs:
        assert abs(s[0, 0] - s[1, 0]) == pytest.approx(164)


@pytest.mark.parametrize("angle", [0, 7, 30, 45, 63, 90, 120, 179])
def test_rectangle_counts_match_support_width(angle):
    hs = build_headlands(rect_field(200, 150), CFG)
    assert count_at_angle(hs, CFG, math.radians(angle)) == support_count(164, 114, angle)


def test_sweep_has_full_grid_and_symmetry():
    sweep = sweep_angles(rect_field(200, 150), CFG)
    assert sweep.angles == [float(k) for k in range(360)]
    counts = sweep.counts
    assert all(counts[k] == counts[k + 180] for k in range(180))
    assert min(counts) == 3
    # the rotated support width peaks at sqrt(164^2 + 114^2) > 5 w
    assert max(counts) == support_count(164, 114, math.degrees(math.atan2(114, 164))) == 5


def test_sweep_coarse_grid():
    sweep = sweep_angles(rect_field(200, 150), PlannerConfig(angle_grid_deg=15))
    assert len(sweep.entries) == 24


def test_ties_go_to_smaller_angle():
    plan = fit_straights(rect_field(200, 150), CFG)
    sweep = sweep_angles(rect_field(200, 150), CFG)
    best = [a for a, n in sweep.entries if n == 3]
    assert plan.metadata["angle_deg"] == min(best)


def test_obstacle_splits_lane_into_two_segments():
    # lanes at y = 54, 90, 126; the obstacle headland (radius 28) cuts y = 90
    field = rect_field(200, 150 + 36, obstacles=[Ring(circle_pts(100, 90, 10))])
    hs = build_headlands(field, CFG)
    segs = clipped_segments(hs, CFG, math.radians(90))
    per_line = {}
    for k, s in segs:
        per_line[k] = per_line.get(k, 0) + 1
    assert per_line[2] == 2
    assert count_at_angle(hs, CFG, math.radians(90)) == sum(per_line.values()) == len(per_line) + 1


def test_lanes_respect_grid_spacing():
    plan = fit_straights(rect_field(200, 150), CFG)
    for lane in plan.lanes:
        assert np.hypot(*np.diff(lane.points, axis=0).T).max() <= CFG.lane_spacing + 1e-9
