"""Quadrant-based rearrangement of neutral-atom arrays.

Random loads are split into four quadrants, compressed toward the array
center by a shift kernel and merged into global moves. The moves are then
lowered to lockstep multi-tweezer moves and replayed with validity checks.
"""

from .aod import SimulationReport, TweezerMove, lower, simulate
from .errors import QRMError
from .grid import Direction, LoadConfig, OccupancyGrid, QuadrantId, SiteCoord, TargetRegion, random_load
from .latency import LatencyModel, estimate
from .scheduler import SchedulerConfig, ScheduleResult, baseline_schedule, qrm_schedule
from .shift_kernel import Axis, SenPolicy

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "Direction",
    "LatencyModel",
    "LoadConfig",
    "OccupancyGrid",
    "QRMError",
    "QuadrantId",
    "ScheduleResult",
    "SchedulerConfig",
    "SenPolicy",
    "SimulationReport",
    "SiteCoord",
    "TargetRegion",
    "TweezerMove",
    "baseline_schedule",
    "estimate",
    "lower",
    "qrm_schedule",
    "random_load",
    "simulate",
]
