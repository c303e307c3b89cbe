from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .geometry import max_spacing


class ConfigError(ValueError):
    pass


def _default_lengths() -> tuple[float, ...]:
    return tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class PlannerConfig:
    """Planner hyperparameters.

    Defaults are the field-trial settings: 36 m operating width, 99 %
    interpolation confidence, 135 degree turn limit and a blocking interval
    of 20 grid indices.

    ``candidate_length_fractions`` are fractions of the headland
    circumference; ``candidate_lengths`` (absolute metres) override them
    when given.
    """

    w: float = 36.0
    epsilon: float = 0.99
    delta_theta_max: float = math.radians(135.0)
    delta_k: int = 20
    candidate_start_stride: float = 25.0
    candidate_length_fractions: tuple[float, ...] = field(default_factory=_default_lengths)
    candidate_lengths: tuple[float, ...] | None = None
    angle_grid_deg: float = 1.0
    # Every point of the lane region must lie within w/2 (+ tolerance) of a
    # lane or headland path. Uncovered patches are tolerated while their
    # longest extent stays below max_gap_extent * w; offsets around tight
    # concave bends leave such pockets by construction.
    coverage_tolerance: float = 0.5
    max_gap_extent: float = 1.0
    turn_tolerance: float = 1e-9
    # Lanes whose ends do not reach a headland have no entrance or exit
    # transition; by default such references are dismissed.
    allow_unterminated: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.w) and self.w > 0):
            raise ConfigError("w must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not 0.0 <= self.delta_theta_max <= math.pi:
            raise ConfigError("delta_theta_max must lie in [0, pi]")
        if int(self.delta_k) != self.delta_k or self.delta_k <= self.w / self.lane_spacing:
            raise ConfigError(
                f"delta_k must be an integer > w/d = {self.w / self.lane_spacing:.3f}"
            )
        if not self.candidate_start_stride > 0:
            raise ConfigError("candidate_start_stride must be positive")
        if not self.angle_grid_deg > 0 or 360.0 / self.angle_grid_deg != round(360.0 / self.angle_grid_deg):
            raise ConfigError("angle_grid_deg must divide 360")
        lengths = self.candidate_lengths or self.candidate_length_fractions
        if not lengths or any(not x > 0 for x in lengths):
            raise ConfigError("candidate lengths must be positive and non-empty")
        object.__setattr__(self, "candidate_length_fractions", tuple(self.candidate_length_fractions))
        if self.candidate_lengths is not None:
            object.__setattr__(self, "candidate_lengths", tuple(self.candidate_lengths))

    @property
    def lane_spacing(self) -> float:
        """Interpolation grid along interior lanes."""
        return max_spacing(self.w, self.epsilon)

    @property
    def headland_spacing(self) -> float:
        """Interpolation grid along headland paths (target distance w/2)."""
        return max_spacing(self.w / 2.0, self.epsilon)

    @property
    def n_angles(self) -> int:
        return int(round(360.0 / self.angle_grid_deg))

    def angles_deg(self) -> list[float]:
        return [k * self.angle_grid_deg for k in range(self.n_angles)]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta_theta_max_deg"] = math.degrees(self.delta_theta_max)
        out["candidate_length_fractions"] = list(self.candidate_length_fractions)
        if self.candidate_lengths is not None:
            out["candidate_lengths"] = list(self.candidate_lengths)
        return out

    @classmethod
    def heuristic_delta_k(cls, w: float, epsilon: float) -> int:
        """Blocking interval spanning roughly two operating widths."""
        return math.ceil(2 * w / max_spacing(w, epsilon))
