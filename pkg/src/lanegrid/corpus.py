"""Synthetic field shapes for desk-scale validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .geometry import GeometryError, Ring
from .headland import FieldError, FieldGeometry

# Chord spacing for curved boundaries (m); finer than any working grid.
CHORD = 2.0

FAMILIES = ("rectangle", "l_shape", "annulus_sector", "wavy_band")


@dataclass(frozen=True)
class ShapeSpec:
    family: str
    params: dict[str, float]
    obstacles: tuple[dict[str, Any], ...] = ()
    seed: int = 0
    jitter: float = 0.0
    name: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ShapeSpec":
        return cls(
            family=data["family"],
            params=dict(data.get("params", {})),
            obstacles=tuple(dict(o) for o in data.get("obstacles", ())),
            seed=int(data.get("seed", 0)),
            jitter=float(data.get("jitter", 0.0)),
            name=data.get("name", ""),
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "obstacles": [dict(o) for o in self.obstacles],
            "seed": self.seed,
            "jitter": self.jitter,
            "name": self.name,
        }


def _arc(cx: float, cy: float, r: float, a0: float, a1: float) -> np.ndarray:
    n = max(1, math.ceil(abs(a1 - a0) * r / CHORD))
    t = np.linspace(a0, a1, n + 1)
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])


def rectangle(width: float, height: float) -> np.ndarray:
    return np.array([(0, 0), (width, 0), (width, height), (0, height)], dtype=float)


def l_shape(width: float, height: float, cut_width: float, cut_height: float) -> np.ndarray:
    """Rectangle with its top-right ``cut_width x cut_height`` corner removed."""
    if not (0 < cut_width < width and 0 < cut_height < height):
        raise GeometryError("L-shape cut must lie strictly inside the rectangle")
    return np.array(
        [
            (0, 0),
            (width, 0),
            (width, height - cut_height),
            (width - cut_width, height - cut_height),
            (width - cut_width, height),
            (0, height),
        ],
        dtype=float,
    )


def annulus_sector(outer_radius: float, inner_radius: float, sweep_deg: float) -> np.ndarray:
    if not 0 < inner_radius < outer_radius:
        raise GeometryError("need 0 < inner_radius < outer_radius")
    if not 0 < sweep_deg < 360:
        raise GeometryError("sweep must lie in (0, 360) degrees")
    sweep = math.radians(sweep_deg)
    outer = _arc(0.0, 0.0, outer_radius, 0.0, sweep)
    inner = _arc(0.0, 0.0, inner_radius, sweep, 0.0)
    return np.vstack([outer, inner])


def wavy_band(length: float, width: float, amplitude: float, period: float) -> np.ndarray:
    """Band between ``y = A sin(2 pi x / P)`` and the same curve shifted up by ``width``."""
    if width <= 0 or length <= 0 or period <= 0:
        raise GeometryError("wavy band dimensions must be positive")
    # 2 m chord bound on the steepest part of the sinusoid
    slope = 2 * math.pi * amplitude / period
    n = max(2, math.ceil(length * math.sqrt(1 + slope * slope) / CHORD))
    x = np.linspace(0.0, length, n + 1)
    y = amplitude * np.sin(2 * math.pi * x / period)
    lower = np.column_stack([x, y])
    upper = np.column_stack([x[::-1], y[::-1] + width])
    return np.vstack([lower, upper])


def _obstacle(spec: dict[str, Any]) -> np.ndarray:
    cx, cy = spec["center"]
    if "radius" in spec:
        return _arc(cx, cy, float(spec["radius"]), 0.0, 2 * math.pi)[:-1]
    if "side" in spec:
        h = float(spec["side"]) / 2
        return np.array([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)], dtype=float)
    raise GeometryError("obstacle needs a radius or a side")


_BUILDERS = {
    "rectangle": rectangle,
    "l_shape": l_shape,
    "annulus_sector": annulus_sector,
    "wavy_band": wavy_band,
}


def generate(spec: ShapeSpec) -> FieldGeometry:
    """Polygonize ``spec`` into a field; identical specs give identical output."""
    try:
        builder = _BUILDERS[spec.family]
    except KeyError:
        raise GeometryError(f"unknown shape family {spec.family!r}") from None
    pts = builder(**spec.params)
    if spec.jitter > 0:
        rng = np.random.default_rng(spec.seed)
        pts = pts + rng.uniform(-spec.jitter, spec.jitter, size=pts.shape)
    contour = Ring(pts)
    obstacles = [Ring(_obstacle(o)) for o in spec.obstacles]
    try:
        return FieldGeometry(contour, tuple(obstacles), spec.name or spec.family)
    except FieldError:
        raise
    except GeometryError as exc:
        raise GeometryError(f"{spec.family}: {exc}") from exc


def default_corpus() -> list[ShapeSpec]:
    """One field per family, 10 to 65 ha, plus an obstacle field."""
    return [
        ShapeSpec("rectangle", {"width": 500.0, "height": 300.0}, name="rectangle"),
        ShapeSpec(
            "l_shape",
            {"width": 500.0, "height": 400.0, "cut_width": 250.0, "cut_height": 200.0},
            name="l_shape",
        ),
        ShapeSpec(
            "annulus_sector",
            {"outer_radius": 300.0, "inner_radius": 80.0, "sweep_deg": 180.0},
            name="annulus_sector",
        ),
        ShapeSpec(
            "wavy_band",
            {"length": 900.0, "width": 180.0, "amplitude": 40.0, "period": 300.0},
            name="wavy_band",
        ),
        ShapeSpec(
            "rectangle",
            {"width": 450.0, "height": 300.0},
            obstacles=({"center": (225.0, 150.0), "radius": 15.0},),
            name="rectangle_obstacle",
        ),
    ]
