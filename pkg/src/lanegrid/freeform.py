"""Freeform lane fitting by repeated offsetting of a headland reference path.

Each interior lane generation is produced from the previous one: every
segment midpoint is pushed one operating width to the inward side, convex
turns are filled with arcs so the new lane keeps its distance, and candidate
points are pruned when they leave the lane region or come closer than ``w``
to a grid point of the previous generation. Surviving points are chained
into runs, extended to the headland along their end direction and
resampled. The search iterates over reference candidates and keeps the
feasible plan with the fewest lanes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import LineString, MultiLineString
from shapely.strtree import STRtree

from .config import PlannerConfig
from .geometry import heading_changes, interpolate_polyline, polyline_length, thin_points
from .headland import FieldGeometry, HeadlandSet, build_headlands
from .plan import (
    COUNT_POLICY,
    InfeasibleError,
    Lane,
    LanePlan,
    ReferenceCandidate,
    Violation,
)
from .straights import count_at_angle, lanes_at_angle, straights_plan

log = logging.getLogger(__name__)

# Convex turns sharper than this get an arc fill between offset points.
ARC_MIN_TURN = 0.05
# A lane end this close to the headland counts as terminated.
END_TOL = 0.1
CLEAR_TOL = 1e-6
LENGTH_DECIMALS = 6


# --------------------------------------------------------------------------
# Candidates
# --------------------------------------------------------------------------


def _arc_positions(ring_pts: np.ndarray) -> tuple[np.ndarray, float]:
    seg = np.diff(np.vstack([ring_pts, ring_pts[:1]]), axis=0)
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
    return cum[:-1], float(cum[-1])


def enumerate_candidates(hs: HeadlandSet, cfg: PlannerConfig) -> list[ReferenceCandidate]:
    """Headland segments for every start, length and direction, then straight lines."""
    pts = hs.headland.points
    n = len(pts)
    if n < 3:
        raise ValueError("headland needs at least 3 grid points")
    pos, circumference = _arc_positions(pts)
    if cfg.candidate_lengths is not None:
        lengths = list(cfg.candidate_lengths)
    else:
        lengths = [f * circumference for f in cfg.candidate_length_fractions]
    lengths = [min(l, circumference) for l in lengths]

    out: list[ReferenceCandidate] = []
    seen = set()
    n_starts = math.ceil(circumference / cfg.candidate_start_stride - 1e-9)
    for s_idx in range(n_starts):
        s = s_idx * cfg.candidate_start_stride
        start = int(np.argmin(np.abs(pos - s)))
        for direction in (1, -1):
            for length in lengths:
                steps = _steps_for_length(pos, circumference, start, direction, length)
                end = (start + direction * steps) % n
                key = (start, end, direction, steps)
                if key in seen:
                    continue
                seen.add(key)
                out.append(ReferenceCandidate("headland_segment", start, end, direction))
    for deg in cfg.angles_deg():
        out.append(ReferenceCandidate("straight_line", angle=math.radians(deg)))
    if not out:
        raise ValueError("empty candidate set")
    return out


def _steps_for_length(pos: np.ndarray, circumference: float, start: int, direction: int, length: float) -> int:
    n = len(pos)
    if length >= circumference - 1e-9:
        return n
    # arc length travelled after k steps
    if direction > 0:
        travelled = (pos - pos[start]) % circumference
    else:
        travelled = (pos[start] - pos) % circumference
    order = (np.arange(n) - start) * direction % n
    along = np.empty(n)
    along[order] = travelled
    k = int(np.argmin(np.abs(along - length)))
    return max(1, min(k, n - 1))


def reference_points(hs: HeadlandSet, cand: ReferenceCandidate) -> np.ndarray:
    pts = hs.headland.points
    n = len(pts)
    steps = cand.steps(n)
    idx = (cand.start_index + cand.direction * np.arange(steps + 1)) % n
    return pts[idx]


def _inward_side(ref: np.ndarray, hs: HeadlandSet, w: float) -> int | None:
    k = (len(ref) - 1) // 2
    a, b = ref[k], ref[k + 1]
    t = (b - a) / np.hypot(*(b - a))
    normal = np.array([-t[1], t[0]])
    mid = 0.5 * (a + b)
    left, right = hs.contains(np.array([mid + w * normal, mid - w * normal]))
    if left == right:
        return None
    return 1 if left else -1


# --------------------------------------------------------------------------
# Propagation
# --------------------------------------------------------------------------


def _offset_with_arcs(pts: np.ndarray, w: float, max_step: float) -> np.ndarray:
    seg = np.diff(pts, axis=0)
    theta = np.arctan2(seg[:, 1], seg[:, 0])
    mid = 0.5 * (pts[:-1] + pts[1:])
    normal_ang = theta + np.pi / 2
    q = mid + w * np.column_stack([np.cos(normal_ang), np.sin(normal_ang)])
    turn = (np.diff(theta) + np.pi) % (2 * np.pi) - np.pi
    convex = np.nonzero(turn < -ARC_MIN_TURN)[0]
    if len(convex) == 0:
        return q
    out = []
    prev = 0
    for k in convex:
        out.append(q[prev : k + 1])
        n_arc = max(1, math.ceil(-turn[k] / max_step))
        ang = normal_ang[k] + np.linspace(0.0, turn[k], n_arc + 1)
        out.append(pts[k + 1] + w * np.column_stack([np.cos(ang), np.sin(ang)]))
        prev = k + 1
    out.append(q[prev:])
    return np.vstack(out)


def _dedupe(pts: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    if len(pts) < 2:
        return pts
    step = np.hypot(*np.diff(pts, axis=0).T)
    keep = np.concatenate([[True], step > tol])
    return pts[keep]


def _on_boundary(p: np.ndarray, hs: HeadlandSet) -> bool:
    return shapely.distance(shapely.points(p), hs.boundary) <= END_TOL


def extrapolate(lane_points: np.ndarray, hs: HeadlandSet, max_extension: float) -> Lane:
    """Extend both ends along their last segment to the first headland hit.

    The boundary used is the headland ring together with the obstacle
    headland rings. An end with no hit within ``max_extension`` is left in
    place and the lane is flagged unterminated.
    """
    pts = np.asarray(lane_points, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    unterminated = False
    ends = []
    for tip, before in ((pts[-1], pts[-2]), (pts[0], pts[1])):
        if _on_boundary(tip, hs):
            ends.append(None)
            continue
        direction = tip - before
        direction = direction / np.hypot(*direction)
        ray = LineString([tip, tip + max_extension * direction])
        hit = ray.intersection(hs.boundary)
        best = None
        for g in _points_of(hit):
            t = float((g - tip) @ direction)
            if t > 1e-9 and (best is None or t < best[0]):
                best = (t, g)
        if best is None:
            unterminated = True
            ends.append(None)
        else:
            ends.append(best[1])
    tail, head = ends
    parts = [pts]
    if head is not None:
        parts.insert(0, head[None, :])
    if tail is not None:
        parts.append(tail[None, :])
    return Lane(points=_dedupe(np.vstack(parts)), unterminated=unterminated)


def _points_of(geom) -> list[np.ndarray]:
    if geom.is_empty:
        return []
    if geom.geom_type == "Point":
        return [np.asarray(geom.coords[0])]
    if geom.geom_type == "LineString":
        return [np.asarray(c) for c in geom.coords]
    out = []
    for g in geom.geoms:
        out.extend(_points_of(g))
    return out


class _SegmentIndex:
    """Clearance tests against a set of polylines via an R-tree of their segments."""

    def __init__(self, lines: list[np.ndarray]):
        segs = np.concatenate([np.stack([p[:-1], p[1:]], axis=1) for p in lines])
        self.tree = STRtree(shapely.linestrings(segs))

    def clear(self, geoms, min_dist: float) -> np.ndarray:
        """True where a geometry keeps at least ``min_dist`` from every segment."""
        geoms = np.asarray(geoms, dtype=object)
        out = np.ones(len(geoms), dtype=bool)
        if len(geoms):
            hits = self.tree.query(geoms, predicate="dwithin", distance=min_dist - CLEAR_TOL)
            out[hits[0]] = False
        return out

    def clear_points(self, pts: np.ndarray, min_dist: float) -> np.ndarray:
        return self.clear(shapely.points(np.atleast_2d(pts)), min_dist)


def _split_runs(pts: np.ndarray, ok_link: np.ndarray) -> list[np.ndarray]:
    """Split ``pts`` wherever ``ok_link[i]`` (link i -> i+1) is False."""
    runs = []
    start = 0
    for i, ok in enumerate(ok_link):
        if not ok:
            runs.append(pts[start : i + 1])
            start = i + 1
    runs.append(pts[start:])
    return [r for r in runs if len(r) >= 2]


def _finish(run: np.ndarray, hs: HeadlandSet, cfg: PlannerConfig) -> Lane:
    d = cfg.lane_spacing
    ext = extrapolate(run, hs, 2 * cfg.w)
    pts = thin_points(interpolate_polyline(ext.points, d), d / 4.0)
    return Lane(points=pts, unterminated=ext.unterminated)


def propagate_lane(prev: Lane | list[Lane], hs: HeadlandSet, cfg: PlannerConfig) -> list[Lane]:
    """Offset one lane generation by ``w`` toward the inward (left) side.

    Returns the lanes of the next generation; an empty list ends the
    propagation.
    """
    prev_lanes = [prev] if isinstance(prev, Lane) else list(prev)
    if not prev_lanes:
        return []
    w, eps, d = cfg.w, cfg.epsilon, cfg.lane_spacing
    max_step = 2.0 * math.asin(min(1.0, d / (2.0 * w)))

    chunks = [_offset_with_arcs(l.points, w, max_step) for l in prev_lanes]
    cand = np.vstack(chunks)
    prev_pts = np.vstack([l.points for l in prev_lanes])
    tree = cKDTree(prev_pts)
    dist, _ = tree.query(cand)
    keep = (dist >= w - CLEAR_TOL) & hs.strictly_inside(cand)
    if np.count_nonzero(keep) < 2:
        return []
    prev_geom = _SegmentIndex([l.points for l in prev_lanes])
    survivors = _dedupe(_restore_corners(cand, keep, prev_geom, hs, cfg))
    if len(survivors) < 2:
        return []

    chords = shapely.linestrings(np.stack([survivors[:-1], survivors[1:]], axis=1))
    shapely.prepare(hs.region)
    link_ok = shapely.covers(hs.region, chords)
    link_ok &= prev_geom.clear(chords, eps * w)

    lanes = []
    for run in _split_runs(survivors, link_ok):
        lane = _finish(run, hs, cfg)
        lanes.extend(_trim_clearance(lane, prev_geom, hs, cfg))
    return lanes


def _restore_corners(cand: np.ndarray, keep: np.ndarray, prev_geom: _SegmentIndex, hs: HeadlandSet, cfg: PlannerConfig) -> np.ndarray:
    """Survivors in order, with the offset corner re-inserted at pruned gaps.

    Where points were pruned between two survivors, the lines through the
    neighbouring survivors on each side are intersected; the intersection is
    the corner of the exact offset and is kept if it is clear of the previous
    generation and inside the lane region.
    """
    idx = np.nonzero(keep)[0]
    pts = cand[idx]
    gaps = np.nonzero(np.diff(idx) > 1)[0]
    if len(gaps) == 0:
        return pts
    reach = 2.0 * cfg.lane_spacing
    inserts = {}
    for j in gaps:
        if j < 1 or j + 2 >= len(pts):
            continue
        a0, a1, b0, b1 = pts[j - 1], pts[j], pts[j + 1], pts[j + 2]
        ua, ub = a1 - a0, b0 - b1
        na, nb = np.hypot(*ua), np.hypot(*ub)
        if na <= 1e-9 or nb <= 1e-9:
            continue
        ua, ub = ua / na, ub / nb
        det = ua[0] * (-ub[1]) + ub[0] * ua[1]
        if abs(det) < 1e-6:
            continue
        rhs = b0 - a1
        s = (rhs[0] * (-ub[1]) + ub[0] * rhs[1]) / det
        t = (ua[0] * rhs[1] - ua[1] * rhs[0]) / det
        limit = reach + float(np.hypot(*rhs))
        if not (0.0 < s <= limit and 0.0 < t <= limit):
            continue
        inserts[j] = a1 + s * ua
    if not inserts:
        return pts
    corners = np.array(list(inserts.values()))
    ok = hs.contains(corners)
    ok &= prev_geom.clear_points(corners, cfg.epsilon * cfg.w)
    out = []
    good = {j for j, flag in zip(inserts, ok) if flag}
    for j in range(len(pts)):
        out.append(pts[j])
        if j in good:
            out.append(inserts[j])
    return np.array(out)


def _trim_clearance(lane: Lane, prev_geom: _SegmentIndex, hs: HeadlandSet, cfg: PlannerConfig) -> list[Lane]:
    pts = lane.points
    clear = prev_geom.clear_points(pts, cfg.epsilon * cfg.w)
    clear &= hs.contains(pts)
    if clear.all():
        return [lane]
    out = []
    start = None
    for i, ok in enumerate(np.append(clear, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start >= 2:
                piece = pts[start:i]
                open_end = not (_on_boundary(piece[0], hs) and _on_boundary(piece[-1], hs))
                out.append(Lane(points=piece, unterminated=lane.unterminated or open_end))
            start = None
    return out


# --------------------------------------------------------------------------
# Constraints
# --------------------------------------------------------------------------


def lane_violation(lane: Lane, cfg: PlannerConfig) -> Violation | None:
    """Turn limit and self-proximity for a single lane."""
    pts = lane.points
    if len(pts) >= 3:
        turns = heading_changes(pts)
        worst = float(turns.max())
        if worst > cfg.delta_theta_max + cfg.turn_tolerance:
            return Violation("turn", f"lane {lane.index}: heading change {math.degrees(worst):.2f} deg")
    if len(pts) > cfg.delta_k:
        pairs = cKDTree(pts).query_pairs(cfg.w - 1e-9, output_type="ndarray")
        if len(pairs) and np.any(np.abs(pairs[:, 1] - pairs[:, 0]) >= cfg.delta_k):
            return Violation("self_proximity", f"lane {lane.index}: points closer than w at index gap >= {cfg.delta_k}")
    return None


def _crossing(new: list[Lane], old: list[Lane]) -> Violation | None:
    new_geoms = [LineString(l.points) for l in new]
    if old:
        tree = STRtree([LineString(l.points) for l in old])
        for lane, g in zip(new, new_geoms):
            hit = tree.query(g, predicate="intersects")
            if len(hit):
                return Violation("crossing", f"lane {lane.index} crosses lane {old[int(hit[0])].index}")
    for i in range(len(new_geoms)):
        for j in range(i + 1, len(new_geoms)):
            if new_geoms[i].intersects(new_geoms[j]):
                return Violation("crossing", f"lanes {new[i].index} and {new[j].index} cross")
    return None


def check_constraints(plan: LanePlan, cfg: PlannerConfig) -> Violation | None:
    """Crossings, turn limit and self-proximity over a complete plan."""
    for lane in plan.lanes:
        v = lane_violation(lane, cfg)
        if v:
            return v
    return _crossing(plan.lanes, [])


def uncovered_patches(lanes: list[Lane], hs: HeadlandSet, cfg: PlannerConfig) -> list:
    """Parts of the lane region left outside every working swath.

    Swaths are the lanes and headland paths widened by ``w/2`` plus the
    coverage tolerance; the leftover is eroded by the tolerance so that
    discretization slivers vanish.
    """
    tol = cfg.coverage_tolerance
    paths = [hs.headland.closed_points] + [r.closed_points for r in hs.obstacle_headlands]
    paths += [l.points for l in lanes]
    swath = MultiLineString([np.asarray(p) for p in paths]).buffer(cfg.w / 2 + tol, quad_segs=8)
    rest = hs.region.difference(swath)
    if rest.is_empty:
        return []
    rest = rest.buffer(-tol)
    return [g for g in getattr(rest, "geoms", [rest]) if not g.is_empty]


def patch_extent(patch) -> float:
    env = np.asarray(shapely.oriented_envelope(patch).exterior.coords) if patch.area > 0 else None
    if env is None:
        return 0.0
    sides = np.hypot(*np.diff(env, axis=0).T)
    return float(sides.max())


def coverage_violation(lanes: list[Lane], hs: HeadlandSet, cfg: PlannerConfig) -> Violation | None:
    worst = max((patch_extent(p) for p in uncovered_patches(lanes, hs, cfg)), default=0.0)
    if worst > cfg.max_gap_extent * cfg.w:
        return Violation("coverage", f"uncovered patch {worst:.1f} m long")
    return None


# --------------------------------------------------------------------------
# Candidate evaluation and search
# --------------------------------------------------------------------------


@dataclass
class CandidateResult:
    order: int
    candidate: ReferenceCandidate
    plan: LanePlan | None
    reason: str = ""

    @property
    def key(self) -> tuple:
        assert self.plan is not None
        return (self.plan.n_lanes, round(self.plan.total_length, LENGTH_DECIMALS), self.order)


def _renumber(lanes: list[Lane], start: int, generation: int) -> list[Lane]:
    return [
        Lane(points=l.points, index=start + i, generation=generation, unterminated=l.unterminated)
        for i, l in enumerate(lanes)
    ]


def grow_lanes(
    ref: np.ndarray, hs: HeadlandSet, cfg: PlannerConfig, bound: int | None = None
) -> tuple[list[Lane], Violation | None, bool]:
    """Propagate from an inward-left oriented reference until exhausted.

    Returns ``(lanes, violation, aborted)``; ``aborted`` is set once the lane
    count exceeds ``bound``.
    """
    minx, miny, maxx, maxy = hs.headland.polygon.bounds
    max_gen = int(math.hypot(maxx - minx, maxy - miny) / (cfg.epsilon * cfg.w)) + 2
    gen = [Lane(points=ref, index=-1, generation=0)]
    lanes: list[Lane] = []
    for g in range(1, max_gen + 1):
        nxt = propagate_lane(gen, hs, cfg)
        if not nxt:
            return lanes, None, False
        nxt = _renumber(nxt, len(lanes), g)
        for lane in nxt:
            v = lane_violation(lane, cfg)
            if v:
                return lanes + nxt, v, False
        v = _crossing(nxt, lanes)
        if v:
            return lanes + nxt, v, False
        lanes.extend(nxt)
        if bound is not None and len(lanes) > bound:
            return lanes, None, True
        gen = nxt
    return lanes, Violation("generation_limit", f"still growing after {max_gen} generations"), False


def _make_plan(lanes: list[Lane], cand: ReferenceCandidate, hs: HeadlandSet, cfg: PlannerConfig, ref: np.ndarray | None) -> LanePlan:
    warnings = list(hs.warnings)
    warnings += [f"lane {l.index} unterminated: no headland hit within 2w" for l in lanes if l.unterminated]
    return LanePlan(
        lanes=lanes,
        reference=cand,
        planner="freeform",
        warnings=warnings,
        reference_points=ref,
        metadata={"count_policy": COUNT_POLICY, "obstacles_merged": hs.obstacles_merged},
    )


def evaluate_candidate(
    cand: ReferenceCandidate, hs: HeadlandSet, cfg: PlannerConfig, bound: int | None = None
) -> tuple[LanePlan | None, str]:
    """Build and vet the lane plan for one reference candidate.

    Returns ``(plan, "")`` when feasible, otherwise ``(None, reason)``.
    """
    if cand.kind == "straight_line":
        plan = straights_plan(hs, cfg, cand.angle)
        plan.planner = "freeform"
        v = check_constraints(plan, cfg)
        if v:
            return None, str(v)
    else:
        ref = reference_points(hs, cand)
        side = _inward_side(ref, hs, cfg.w)
        if side is None:
            return None, str(Violation("orientation", "inward side ambiguous"))
        if side < 0:
            ref = ref[::-1]
        lanes, v, aborted = grow_lanes(ref, hs, cfg, bound)
        if aborted:
            return None, f"bounded: more than {bound} lanes"
        if v:
            return None, str(v)
        open_ends = [l.index for l in lanes if l.unterminated]
        if open_ends and not cfg.allow_unterminated:
            return None, str(Violation("unterminated", f"lanes {open_ends} do not reach a headland"))
        plan = _make_plan(lanes, cand, hs, cfg, ref)
    v = coverage_violation(plan.lanes, hs, cfg)
    if v:
        return None, str(v)
    return plan, ""


def _canonical(cand: ReferenceCandidate, n: int) -> tuple:
    if cand.kind == "straight_line":
        return ("s", cand.angle)
    steps = cand.steps(n)
    lo = cand.start_index if cand.direction > 0 else (cand.start_index - steps) % n
    if steps == n:
        return ("ring",)
    return ("h", lo, steps)


def _evaluate_chunk(args) -> list[CandidateResult]:
    items, hs, cfg, bound = args
    out = []
    best = bound
    cache: dict = {}
    n = len(hs.headland.points)
    for order, cand in items:
        key = _canonical(cand, n)
        if key in cache:
            plan, reason = cache[key]
            if plan is not None:
                plan = LanePlan(
                    lanes=plan.lanes,
                    reference=cand,
                    planner=plan.planner,
                    warnings=plan.warnings,
                    reference_points=plan.reference_points,
                    metadata=plan.metadata,
                )
        else:
            plan, reason = evaluate_candidate(cand, hs, cfg, best)
            cache[key] = (plan, reason)
        out.append(CandidateResult(order, cand, plan, reason))
        if plan is not None and (best is None or plan.n_lanes < best):
            best = plan.n_lanes
    return out


def fit_freeform(
    field: FieldGeometry,
    cfg: PlannerConfig,
    workers: int = 1,
    hs: HeadlandSet | None = None,
    candidates: list[ReferenceCandidate] | None = None,
) -> LanePlan:
    """Search reference candidates for the plan with the fewest interior lanes.

    Ties go to the shorter total lane length, then to the earlier candidate.
    The result does not depend on ``workers``. Raises
    :class:`InfeasibleError` with the per-candidate log when nothing is
    feasible.
    """
    hs = hs or build_headlands(field, cfg)
    cands = candidates if candidates is not None else enumerate_candidates(hs, cfg)
    indexed = list(enumerate(cands))
    straight = [(i, c) for i, c in indexed if c.kind == "straight_line"]
    segments = [(i, c) for i, c in indexed if c.kind == "headland_segment"]

    results: list[CandidateResult] = []
    best: CandidateResult | None = None

    # Straight candidates: counts are cheap, so vet them in rank order and
    # stop at the first feasible one. Everything ranked below it cannot win.
    counted = []
    for i, c in straight:
        counted.append((count_at_angle(hs, cfg, c.angle), i, c))
    ranked = sorted(
        counted,
        key=lambda t: (t[0], round(sum(l.length for l in lanes_at_angle(hs, cfg, t[2].angle)), LENGTH_DECIMALS), t[1]),
    )
    for _, i, c in ranked:
        plan, reason = evaluate_candidate(c, hs, cfg)
        res = CandidateResult(i, c, plan, reason)
        results.append(res)
        if plan is not None:
            best = res
            break

    bound = best.plan.n_lanes if best else None
    if segments:
        if workers > 1:
            size = math.ceil(len(segments) / workers)
            chunks = [segments[k : k + size] for k in range(0, len(segments), size)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for part in pool.map(_evaluate_chunk, [(ch, hs, cfg, bound) for ch in chunks]):
                    results.extend(part)
        else:
            results.extend(_evaluate_chunk((segments, hs, cfg, bound)))

    feasible = [r for r in results if r.plan is not None]
    if not feasible:
        log_entries = sorted(((r.order, r.candidate, r.reason) for r in results), key=lambda t: t[0])
        raise InfeasibleError(
            f"no feasible reference among {len(cands)} candidates",
            [(c, reason) for _, c, reason in log_entries],
        )
    winner = min(feasible, key=lambda r: r.key)
    plan = winner.plan
    # the feasible count depends on how chunks bound each other, so it is
    # deliberately left out to keep plans independent of the worker count
    plan.metadata = dict(plan.metadata, candidates=len(cands), config=cfg.to_dict())
    return plan

