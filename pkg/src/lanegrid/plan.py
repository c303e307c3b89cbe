"""Lane and plan containers shared by both planners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .geometry import polyline_length

COUNT_POLICY = "each contiguous lane run counts as one interior lane"


@dataclass(frozen=True)
class ReferenceCandidate:
    """Seed for a lane grid.

    ``headland_segment`` references walk the resampled headland ring from
    ``start_index`` to ``end_index`` in ``direction`` (+1 increasing index,
    -1 decreasing); equal indices mean the full ring. ``straight_line``
    references carry the lane rotation ``angle`` in radians, 0 meaning lanes
    parallel to the y-axis, increasing counterclockwise.
    """

    kind: Literal["headland_segment", "straight_line"]
    start_index: int = 0
    end_index: int = 0
    direction: int = 1
    angle: float = 0.0

    def steps(self, n: int) -> int:
        k = ((self.end_index - self.start_index) * self.direction) % n
        return n if k == 0 else k

    def to_dict(self) -> dict:
        if self.kind == "straight_line":
            return {"kind": self.kind, "angle_rad": self.angle, "angle_deg": math.degrees(self.angle)}
        return {
            "kind": self.kind,
            "start_index": self.start_index,
            "end_index": self.end_index,
            "direction": self.direction,
        }

    def describe(self) -> str:
        if self.kind == "straight_line":
            return f"straight {math.degrees(self.angle):.2f} deg"
        arrow = "+" if self.direction > 0 else "-"
        return f"headland {self.start_index}{arrow}>{self.end_index}"


@dataclass(frozen=True, eq=False)
class Lane:
    points: np.ndarray
    index: int = 0
    generation: int = 0
    unterminated: bool = False

    @property
    def length(self) -> float:
        return polyline_length(self.points)


@dataclass(eq=False)
class LanePlan:
    lanes: list[Lane]
    reference: ReferenceCandidate
    planner: str = "freeform"
    warnings: list[str] = field(default_factory=list)
    reference_points: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_lanes(self) -> int:
        return len(self.lanes)

    @property
    def total_length(self) -> float:
        return float(sum(l.length for l in self.lanes))


def count_lanes(plan: LanePlan) -> int:
    return len(plan.lanes)


@dataclass(frozen=True)
class Violation:
    code: Literal["crossing", "turn", "self_proximity", "coverage", "orientation", "generation_limit", "unterminated"]
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


class InfeasibleError(RuntimeError):
    """No reference candidate produced a plan satisfying the constraints."""

    def __init__(self, message: str, log: list[tuple[ReferenceCandidate, str]]):
        super().__init__(message)
        self.log = log
