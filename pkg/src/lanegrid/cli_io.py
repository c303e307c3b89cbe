"""Field ingestion, plan and report emission, and the comparison pipeline.

Input coordinates are planar metres (for example UTM eastings and
northings); no reprojection is performed. Every file is written whole and
atomically: the content goes to a temporary file in the target directory
which is then renamed over the destination.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .config import PlannerConfig
from .freeform import fit_freeform
from .geometry import GeometryError, Ring
from .headland import FieldError, FieldGeometry, HeadlandSet, build_headlands
from .plan import Lane, LanePlan, ReferenceCandidate
from .straights import AngleSweep, fit_straights

PLAN_SCHEMA = "lanegrid-plan/1"
REPORT_COLUMNS = ("field", "size_ha", "n_straights", "n_freeform", "delta_abs", "delta_pct")


class InputError(ValueError):
    """Unusable input file; ``code`` names the failure class."""

    CODES = (
        "file_not_found",
        "malformed_json",
        "invalid_geojson",
        "unclosed_ring",
        "self_intersecting_ring",
        "obstacle_not_interior",
        "obstacles_overlap",
    )

    def __init__(self, code: str, message: str):
        if code not in self.CODES:
            raise ValueError(f"unknown input error code {code!r}")
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# Atomic writes
# --------------------------------------------------------------------------


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# --------------------------------------------------------------------------
# GeoJSON input
# --------------------------------------------------------------------------


def _ring(coords, what: str) -> Ring:
    try:
        pts = np.asarray(coords, dtype=float)
    except (TypeError, ValueError):
        raise InputError("invalid_geojson", f"{what}: coordinates are not numeric pairs") from None
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise InputError("invalid_geojson", f"{what}: expected a list of [x, y] positions")
    pts = pts[:, :2]
    if len(pts) < 4:
        raise InputError("invalid_geojson", f"{what}: a linear ring needs at least 4 positions")
    if not np.array_equal(pts[0], pts[-1]):
        raise InputError("unclosed_ring", f"{what}: unclosed ring (last position differs from the first)")
    try:
        return Ring(pts[:-1])
    except GeometryError as exc:
        if "simple" in str(exc) or "intersect" in str(exc):
            raise InputError("self_intersecting_ring", f"{what}: self-intersecting ring") from None
        raise InputError("invalid_geojson", f"{what}: {exc}") from None


def _polygons(doc: dict) -> list[tuple[list, dict]]:
    kind = doc.get("type")
    if kind == "Polygon":
        return [(doc.get("coordinates"), {})]
    if kind == "Feature":
        geom = doc.get("geometry") or {}
        return [(c, dict(doc.get("properties") or {})) for c, _ in _polygons(geom)]
    if kind == "FeatureCollection":
        out = []
        for feat in doc.get("features") or []:
            out.extend(_polygons(feat))
        return out
    if kind == "MultiPolygon":
        raise InputError("invalid_geojson", "MultiPolygon input is ambiguous; supply one contour polygon")
    raise InputError("invalid_geojson", f"unsupported GeoJSON type {kind!r}")


def parse_field(doc: dict, name: str = "field") -> FieldGeometry:
    """Build a field from a decoded GeoJSON object.

    A Polygon's exterior ring is the contour and its interior rings are
    obstacles. In a FeatureCollection the first polygon is the contour and
    every further polygon (and every interior ring) is an obstacle.
    """
    if not isinstance(doc, dict):
        raise InputError("invalid_geojson", "top-level JSON value must be an object")
    polys = _polygons(doc)
    if not polys:
        raise InputError("invalid_geojson", "no polygon found")
    for coords, _ in polys:
        if not isinstance(coords, list) or not coords:
            raise InputError("invalid_geojson", "polygon without rings")
    (outer, props), rest = polys[0], polys[1:]
    contour = _ring(outer[0], "contour")
    obstacles = [_ring(r, f"contour hole {i}") for i, r in enumerate(outer[1:])]
    for k, (coords, _) in enumerate(rest):
        obstacles.append(_ring(coords[0], f"obstacle feature {k}"))
        if len(coords) > 1:
            raise InputError("invalid_geojson", f"obstacle feature {k} has holes")
    name = str(props.get("name", name))
    try:
        return FieldGeometry(contour, tuple(obstacles), name)
    except FieldError as exc:
        code = "obstacles_overlap" if "overlap" in str(exc) else "obstacle_not_interior"
        message = "obstacle not interior" if code == "obstacle_not_interior" else str(exc)
        raise InputError(code, f"{message} ({exc})") from None


def load_field(path: str | os.PathLike) -> FieldGeometry:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError("file_not_found", f"{path}: no such file") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError("malformed_json", f"{path}: {exc}") from None
    return parse_field(doc, name=path.stem)


def field_to_geojson(field: FieldGeometry) -> dict:
    def closed(ring: Ring) -> list:
        return ring.closed_points.tolist()

    return {
        "type": "Feature",
        "properties": {"name": field.name, "area_ha": round(field.area_ha, 4)},
        "geometry": {
            "type": "Polygon",
            "coordinates": [closed(field.contour)] + [closed(o) for o in field.obstacles],
        },
    }


def write_field(field: FieldGeometry, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, json.dumps(field_to_geojson(field), indent=1) + "\n")


# --------------------------------------------------------------------------
# Comparison report
# --------------------------------------------------------------------------


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class ComparisonRow:
    field_name: str
    size_ha: float
    n_straights: int
    n_freeform: int

    @property
    def delta_abs(self) -> int:
        return self.n_freeform - self.n_straights

    @property
    def delta_pct(self) -> int:
        if self.n_straights == 0:
            if self.n_freeform:
                raise ValueError("percent change undefined with zero straight lanes")
            return 0
        return round_half_away(100.0 * self.delta_abs / self.n_straights)

    def as_record(self) -> dict:
        return {
            "field": self.field_name,
            "size_ha": f"{self.size_ha:.2f}",
            "n_straights": self.n_straights,
            "n_freeform": self.n_freeform,
            "delta_abs": self.delta_abs,
            "delta_pct": self.delta_pct,
        }


def compare_plans(
    field: FieldGeometry, cfg: PlannerConfig, workers: int = 1
) -> tuple[ComparisonRow, LanePlan, LanePlan]:
    """Run both planners on shared headlands; returns the row and both plans."""
    hs = build_headlands(field, cfg)
    straight = fit_straights(field, cfg, hs=hs)
    free = fit_freeform(field, cfg, workers=workers, hs=hs)
    row = ComparisonRow(field.name, field.area_ha, straight.n_lanes, free.n_lanes)
    return row, straight, free


def run_compare(field: FieldGeometry, cfg: PlannerConfig, workers: int = 1) -> ComparisonRow:
    return compare_plans(field, cfg, workers)[0]


def report_csv(rows: list[ComparisonRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_record())
    return buf.getvalue()


def emit_report_csv(rows: list[ComparisonRow], path: str | os.PathLike) -> Path:
    return atomic_write_text(path, report_csv(rows))


def sweep_csv(sweep: AngleSweep) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["angle_deg", "n_lanes"])
    for angle, n in sweep.entries:
        writer.writerow([f"{angle:g}", n])
    return buf.getvalue()


def emit_sweep_csv(sweep: AngleSweep, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, sweep_csv(sweep))


# --------------------------------------------------------------------------
# Plan JSON
# --------------------------------------------------------------------------


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def plan_document(plan: LanePlan) -> dict:
    meta = dict(plan.metadata)
    config = meta.pop("config", None)
    ref_pts = None if plan.reference_points is None else np.asarray(plan.reference_points).tolist()
    return {
        "schema": PLAN_SCHEMA,
        "planner": plan.planner,
        "config": _jsonable(config),
        "reference": plan.reference.to_dict(),
        "reference_points": ref_pts,
        "n_lanes": plan.n_lanes,
        "total_length": plan.total_length,
        "lanes": [
            {
                "index": lane.index,
                "generation": lane.generation,
                "unterminated": lane.unterminated,
                "points": np.asarray(lane.points).tolist(),
            }
            for lane in plan.lanes
        ],
        "warnings": list(plan.warnings),
        "metadata": _jsonable(meta),
    }


def plan_json(plan: LanePlan) -> str:
    return json.dumps(plan_document(plan), sort_keys=True, indent=1) + "\n"


def emit_plan(plan: LanePlan, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, plan_json(plan))


def read_plan(path: str | os.PathLike) -> LanePlan:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError("malformed_json", f"{path}: {exc}") from None
    if doc.get("schema") != PLAN_SCHEMA:
        raise InputError("invalid_geojson", f"{path}: not a {PLAN_SCHEMA} document")
    ref = doc["reference"]
    if ref["kind"] == "straight_line":
        cand = ReferenceCandidate("straight_line", angle=float(ref["angle_rad"]))
    else:
        cand = ReferenceCandidate(
            "headland_segment", int(ref["start_index"]), int(ref["end_index"]), int(ref["direction"])
        )
    lanes = [
        Lane(
            points=np.asarray(l["points"], dtype=float).reshape(-1, 2),
            index=int(l["index"]),
            generation=int(l["generation"]),
            unterminated=bool(l["unterminated"]),
        )
        for l in doc["lanes"]
    ]
    meta = dict(doc.get("metadata") or {})
    if doc.get("config") is not None:
        meta["config"] = doc["config"]
    ref_pts = doc.get("reference_points")
    return LanePlan(
        lanes=lanes,
        reference=cand,
        planner=doc.get("planner", "freeform"),
        warnings=list(doc.get("warnings", [])),
        reference_points=None if ref_pts is None else np.asarray(ref_pts, dtype=float).reshape(-1, 2),
        metadata=meta,
    )


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------


def _nice_step(span: float) -> float:
    raw = span / 8.0
    mag = 10 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return m * mag
    return 10 * mag


def svg_document(field: FieldGeometry, headlands: HeadlandSet | None, plan: LanePlan | None) -> str:
    """Plan drawing in metres, y pointing north; one user unit is one metre."""
    minx, miny, maxx, maxy = field.contour.polygon.bounds
    margin = max(20.0, 0.06 * max(maxx - minx, maxy - miny))
    x0, y0 = minx - margin, miny - margin
    width, height = maxx - minx + 2 * margin, maxy - miny + 2 * margin
    font = margin / 3.0

    def fx(x: float) -> float:
        return x - x0

    def fy(y: float) -> float:
        return height - (y - y0)

    def path(pts: np.ndarray, closed: bool) -> str:
        pts = np.asarray(pts)
        body = " L ".join(f"{fx(x):.3f},{fy(y):.3f}" for x, y in pts)
        return f"M {body}{' Z' if closed else ''}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3f}" height="{height:.3f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">',
        f"<title>{escape(field.name)}</title>",
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
    ]

    # axes along the bottom and left margins, annotated in metres
    step = _nice_step(max(maxx - minx, maxy - miny))
    ax, ay = fx(minx) - margin / 2, fy(miny) + margin / 2
    out.append(f'<g id="axes" stroke="#555" stroke-width="{font / 12:.3f}" font-size="{font:.3f}" fill="#555">')
    out.append(f'<line x1="{ax:.3f}" y1="{ay:.3f}" x2="{fx(maxx):.3f}" y2="{ay:.3f}"/>')
    out.append(f'<line x1="{ax:.3f}" y1="{ay:.3f}" x2="{ax:.3f}" y2="{fy(maxy):.3f}"/>')
    tx = math.ceil(minx / step) * step
    while tx <= maxx + 1e-9:
        out.append(f'<line x1="{fx(tx):.3f}" y1="{ay:.3f}" x2="{fx(tx):.3f}" y2="{ay + font / 3:.3f}"/>')
        out.append(
            f'<text x="{fx(tx):.3f}" y="{ay + 1.3 * font:.3f}" stroke="none" text-anchor="middle">{tx:g}</text>'
        )
        tx += step
    ty = math.ceil(miny / step) * step
    while ty <= maxy + 1e-9:
        out.append(f'<line x1="{ax - font / 3:.3f}" y1="{fy(ty):.3f}" x2="{ax:.3f}" y2="{fy(ty):.3f}"/>')
        out.append(
            f'<text x="{ax - font / 2:.3f}" y="{fy(ty) + font / 3:.3f}" stroke="none" text-anchor="end">{ty:g}</text>'
        )
        ty += step
    out.append(f'<text x="{fx(maxx):.3f}" y="{ay - font / 2:.3f}" stroke="none" text-anchor="end">x [m]</text>')
    out.append(f'<text x="{ax + font / 2:.3f}" y="{fy(maxy):.3f}" stroke="none">y [m]</text>')
    out.append("</g>")

    sw = max(0.5, margin / 25.0)
    out.append(f'<g id="field" fill="none" stroke="black" stroke-width="{sw:.3f}">')
    out.append(f'<path d="{path(field.contour.points, True)}"/>')
    for ob in field.obstacles:
        out.append(f'<path d="{path(ob.points, True)}"/>')
    out.append("</g>")
    if headlands is not None:
        out.append(
            f'<g id="headlands" fill="none" stroke="#2a9d2a" stroke-width="{sw:.3f}" stroke-dasharray="{4 * sw:.3f} {2 * sw:.3f}">'
        )
        out.append(f'<path d="{path(headlands.headland.points, True)}"/>')
        for ring in headlands.obstacle_headlands:
            out.append(f'<path d="{path(ring.points, True)}"/>')
        out.append("</g>")
    if plan is not None:
        out.append(f'<g id="lanes" fill="none" stroke="#1f5fbf" stroke-width="{sw:.3f}">')
        for lane in plan.lanes:
            out.append(f'<path d="{path(lane.points, False)}"><title>lane {lane.index}</title></path>')
        out.append("</g>")
        if plan.reference_points is not None and len(plan.reference_points) >= 2:
            out.append(
                f'<g id="reference" fill="none" stroke="#d62728" stroke-width="{2.5 * sw:.3f}">'
                f'<path d="{path(plan.reference_points, False)}"/></g>'
            )
        caption = f"{plan.planner}: {plan.n_lanes} interior lanes, reference {plan.reference.describe()}"
        out.append(
            f'<text x="{fx(minx):.3f}" y="{font * 1.3:.3f}" font-size="{font:.3f}">{escape(caption)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(
    field: FieldGeometry, headlands: HeadlandSet | None, plan: LanePlan | None, path: str | os.PathLike
) -> Path:
    return atomic_write_text(path, svg_document(field, headlands, plan))
