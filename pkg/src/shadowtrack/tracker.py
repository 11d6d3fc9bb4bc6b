"""Sequential state estimation over a sliding window of observations.

Each step appends one timestamped fix (or a gap marker), applies the
configured missing-data policy, re-solves the smoothing problem over the
window with the time-reversed matrices so the newest times carry the
least approximation error, and emits the newest trajectory point as the
state estimate. Windows re-solve from scratch; sizes are small enough
that correctness is worth more than an incremental factorization.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Optional

import numpy as np

from .errors import (
    DataError,
    NonPositiveEta,
    NoTrajectoryYet,
    OutOfOrderTimestamp,
    ShapeMismatch,
    UsageError,
    WindowTooSparse,
)
from .geometry import (
    DROP_WEIGHT,
    PROVENANCE_DROPPED,
    PROVENANCE_FORECAST,
    PROVENANCE_OBSERVED,
    RawPositionEstimate,
)
from .matrices import _frozen, build_time_grid
from .solver import (
    ScalarObservationSeries,
    ShadowingTrajectory,
    VectorObservationSeries,
    evaluate_spline,
    solve_scalar,
    solve_vector,
)

POLICY_COALESCE = "coalesce-gaps"
POLICY_ZERO_WEIGHT = "zero-weight-placeholder"
POLICY_FORECAST = "forecast-insert"
POLICIES = (POLICY_COALESCE, POLICY_ZERO_WEIGHT, POLICY_FORECAST)

MIN_USABLE = 3


@dataclass(frozen=True)
class TrackerConfig:
    """Tuning for a sequential tracker.

    ``window`` is the number of most recent steps retained (None keeps
    the full history). ``policy`` chooses how unusable steps enter the
    solve: removed entirely, kept as zero-information placeholders, or
    replaced by forecasts whose information is the window mean scaled by
    ``forecast_info_scale``. Fixes whose condition weight falls below
    ``drop_weight`` are treated as unusable.
    """

    eta: float = 1000.0
    window: Optional[int] = None
    policy: str = POLICY_COALESCE
    forecast_info_scale: float = 0.25
    drop_weight: float = DROP_WEIGHT

    def __post_init__(self) -> None:
        eta = float(self.eta)
        if not math.isfinite(eta) or eta <= 0.0:
            raise NonPositiveEta(f"eta must be finite and positive, got {eta}")
        if self.window is not None:
            window = int(self.window)
            if window < MIN_USABLE:
                raise UsageError(f"window must be at least {MIN_USABLE}, got {window}")
            object.__setattr__(self, "window", window)
        if self.policy not in POLICIES:
            raise UsageError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        gamma = float(self.forecast_info_scale)
        if not (0.0 < gamma <= 1.0):
            raise UsageError(
                f"forecast information scale must lie in (0, 1], got {gamma}"
            )
        drop = float(self.drop_weight)
        if not (0.0 <= drop < 1.0):
            raise UsageError(f"drop weight must lie in [0, 1), got {drop}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "forecast_info_scale", gamma)
        object.__setattr__(self, "drop_weight", drop)


@dataclass(frozen=True)
class TrackPoint:
    """One emitted state estimate.

    ``weight`` echoes the condition weight of the raw fix that arrived
    at this step (0 for a gap). ``provenance`` records what fed the
    window here: ``"observed"``, ``"forecast-inserted"`` when the policy
    substituted a forecast, or ``"dropped"`` when the step contributed
    nothing.
    """

    time: float
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    weight: float
    provenance: str
    usable_points: int


@dataclass
class _Slot:
    time: float
    value: Optional[np.ndarray]        # None when coalesced out of the grid
    information: Optional[np.ndarray]  # zero matrix for placeholders
    raw_weight: float
    emitted: str


class SequentialTracker:
    """Streaming tracker: ingest fixes in time order, emit state estimates.

    One instance is single-writer; steps mutate the window. The latest
    full-window solution stays available as ``trajectory`` for
    retrospective smoothing.
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config if config is not None else TrackerConfig()
        self.dim: Optional[int] = None
        self.trajectory: Optional[ShadowingTrajectory] = None
        self.last_point: Optional[TrackPoint] = None
        self._window: Deque[_Slot] = deque()
        self._last_time: Optional[float] = None

    @property
    def window_size(self) -> int:
        return len(self._window)

    @property
    def usable_count(self) -> int:
        return len(self._usable_slots())

    def _usable_slots(self) -> list[_Slot]:
        return [
            slot
            for slot in self._window
            if slot.information is not None and float(np.trace(slot.information)) > 0.0
        ]

    def insert_forecast(self, time: float) -> RawPositionEstimate:
        """Forecast a fix at ``time`` from the current trajectory.

        The position extrapolates the fitted spline (constant velocity
        past the window end); the information matrix is the mean over
        the window's contributing fixes scaled down by the configured
        forecast factor.
        """
        if self.trajectory is None:
            raise NoTrajectoryYet("no trajectory solved yet; cannot forecast")
        position = np.atleast_1d(np.asarray(evaluate_spline(self.trajectory, time)))
        usable = self._usable_slots()
        if not usable:
            raise WindowTooSparse(
                "no contributing fixes left in the window to scale a forecast from"
            )
        mean_info = np.mean([slot.information for slot in usable], axis=0)
        info = self.config.forecast_info_scale * mean_info
        return RawPositionEstimate(
            position=position,
            information=info,
            weight=1.0,
            provenance=PROVENANCE_FORECAST,
        )

    def step_scalar(
        self, time: float, value: Optional[float], info: float = 1.0
    ) -> TrackPoint:
        """Ingest one scalar observation (``value`` None marks a gap).

        ``info`` is the inverse variance attached to the reading.
        """
        if value is None:
            return self.step(time, None)
        value = float(value)
        info = float(info)
        if not math.isfinite(value):
            raise ShapeMismatch("scalar observation must be finite")
        if not math.isfinite(info) or info <= 0.0:
            raise UsageError(f"scalar information must be positive, got {info}")
        estimate = RawPositionEstimate(
            position=np.array([value]),
            information=np.array([[info]]),
            weight=1.0,
            provenance=PROVENANCE_OBSERVED,
        )
        return self.step(time, estimate)

    def step(
        self, time: float, estimate: Optional[RawPositionEstimate]
    ) -> TrackPoint:
        """Advance the tracker by one timestamped fix or gap marker."""
        time = float(time)
        if not math.isfinite(time):
            raise DataError(f"timestamp must be finite, got {time}")
        if self._last_time is not None and time <= self._last_time:
            raise OutOfOrderTimestamp(
                f"timestamp {time!r} does not advance past {self._last_time!r}"
            )

        usable = (
            estimate is not None
            and estimate.usable
            and estimate.weight >= self.config.drop_weight
        )
        if estimate is not None:
            if self.dim is None:
                self.dim = estimate.dim
            elif estimate.dim != self.dim:
                raise ShapeMismatch(
                    f"estimate dimension {estimate.dim} does not match "
                    f"tracker dimension {self.dim}"
                )
        raw_weight = float(estimate.weight) if estimate is not None else 0.0

        if usable:
            slot = _Slot(
                time=time,
                value=np.asarray(estimate.position, dtype=float),
                information=np.asarray(estimate.information, dtype=float),
                raw_weight=raw_weight,
                emitted=estimate.provenance,
            )
        else:
            slot = self._missing_slot(time, raw_weight)

        self._last_time = time
        self._window.append(slot)
        if self.config.window is not None:
            while len(self._window) > self.config.window:
                self._window.popleft()

        point = self._emit(slot)
        self.last_point = point
        return point

    def _missing_slot(self, time: float, raw_weight: float) -> _Slot:
        policy = self.config.policy
        if (
            policy == POLICY_FORECAST
            and self.trajectory is not None
            and self._usable_slots()
        ):
            forecast = self.insert_forecast(time)
            return _Slot(
                time=time,
                value=np.asarray(forecast.position, dtype=float),
                information=np.asarray(forecast.information, dtype=float),
                raw_weight=raw_weight,
                emitted=PROVENANCE_FORECAST,
            )
        if policy == POLICY_ZERO_WEIGHT and self.dim is not None:
            reference = self._reference_value(time)
            if reference is not None:
                return _Slot(
                    time=time,
                    value=reference,
                    information=np.zeros((self.dim, self.dim)),
                    raw_weight=raw_weight,
                    emitted=PROVENANCE_DROPPED,
                )
        return _Slot(
            time=time,
            value=None,
            information=None,
            raw_weight=raw_weight,
            emitted=PROVENANCE_DROPPED,
        )

    def _reference_value(self, time: float) -> Optional[np.ndarray]:
        # Zero-information placeholders never influence the solution, but
        # their stored value must be finite; prefer a spline forecast.
        if self.trajectory is not None:
            return np.atleast_1d(np.asarray(evaluate_spline(self.trajectory, time)))
        usable = self._usable_slots()
        if usable:
            return np.asarray(usable[-1].value, dtype=float)
        return None

    def _emit(self, newest: _Slot) -> TrackPoint:
        gridded = [slot for slot in self._window if slot.information is not None]
        usable_count = sum(
            1 for slot in gridded if float(np.trace(slot.information)) > 0.0
        )

        if usable_count < MIN_USABLE:
            newest_contributes = (
                newest.information is not None
                and float(np.trace(newest.information)) > 0.0
            )
            if newest_contributes:
                dim = newest.value.size
                return TrackPoint(
                    time=newest.time,
                    position=_frozen(np.asarray(newest.value, dtype=float)),
                    velocity=_frozen(np.zeros(dim)),
                    acceleration=_frozen(np.zeros(dim)),
                    weight=newest.raw_weight,
                    provenance=newest.emitted,
                    usable_points=usable_count,
                )
            raise WindowTooSparse(
                f"window holds {usable_count} usable of {len(self._window)} "
                f"steps; need {MIN_USABLE}"
            )

        grid = build_time_grid(np.array([slot.time for slot in gridded]))
        values = np.stack([slot.value for slot in gridded])
        infos = np.stack([slot.information for slot in gridded])
        if self.dim == 1:
            series = ScalarObservationSeries(
                grid=grid, values=values[:, 0], weights=infos[:, 0, 0]
            )
            trajectory = solve_scalar(series, self.config.eta, time_reversed=True)
            positions = trajectory.positions[:, None]
            velocities = trajectory.velocities[:, None]
            accelerations = trajectory.accelerations[:, None]
        else:
            series = VectorObservationSeries(
                grid=grid, values=values, informations=infos
            )
            trajectory = solve_vector(series, self.config.eta, time_reversed=True)
            positions = trajectory.positions
            velocities = trajectory.velocities
            accelerations = trajectory.accelerations
        self.trajectory = trajectory

        if gridded[-1].time == newest.time:
            position = positions[-1]
            velocity = velocities[-1]
            acceleration = accelerations[-1]
        else:
            # Newest step was coalesced out: extrapolate to its time.
            position = np.atleast_1d(
                np.asarray(evaluate_spline(trajectory, newest.time))
            )
            velocity = velocities[-1]
            acceleration = np.zeros_like(position)
        return TrackPoint(
            time=newest.time,
            position=_frozen(np.asarray(position, dtype=float)),
            velocity=_frozen(np.asarray(velocity, dtype=float)),
            acceleration=_frozen(np.asarray(acceleration, dtype=float)),
            weight=newest.raw_weight,
            provenance=newest.emitted,
            usable_points=usable_count,
        )
