"""Geodesic and kinematic math over timestamped GPS fixes.

Distances are great-circle distances on a sphere of radius 6 371 000 m
(haversine form, which stays numerically stable at the short ranges of
urban trips). Speeds are per-interval distance over elapsed time, and
accelerations are finite differences of consecutive speeds. All functions
here are pure; nonpositive time deltas are surfaced as errors so callers
can drop the offending trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0


class TooFewPoints(ValueError):
    """Input sequence is too short for the requested computation."""


class DuplicateTimestamp(ValueError):
    """Consecutive samples have a nonpositive time delta."""


@dataclass(frozen=True, slots=True)
class GpsPoint:
    """One GPS fix: epoch seconds (UTC) plus coordinates in degrees."""

    timestamp: float
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise ValueError(f"timestamp must be finite, got {self.timestamp!r}")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range [-90, 90]: {self.latitude!r}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range [-180, 180]: {self.longitude!r}")


@dataclass(frozen=True, slots=True)
class SpeedSample:
    """Speed in m/s over one inter-fix interval, stamped with the interval end."""

    interval_end_time: float
    speed: float


@dataclass(frozen=True, slots=True)
class AccelerationSample:
    """Acceleration in m/s^2 over one inter-speed interval, stamped with its end."""

    interval_end_time: float
    acceleration: float


def haversine_distance(a: GpsPoint, b: GpsPoint) -> float:
    """Great-circle distance between two fixes, in meters.

    Symmetric by construction (every term is even in the coordinate
    differences) and zero exactly when the coordinates are identical.
    """
    phi_a = math.radians(a.latitude)
    phi_b = math.radians(b.latitude)
    dphi = math.radians(b.latitude - a.latitude)
    dlam = math.radians(b.longitude - a.longitude)
    h = (
        math.sin(dphi / 2.0) ** 2
        + math.cos(phi_a) * math.cos(phi_b) * math.sin(dlam / 2.0) ** 2
    )
    # Guard against h creeping past 1.0 through rounding near antipodes.
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def speed_sequence(points: list[GpsPoint]) -> list[SpeedSample]:
    """Per-interval speeds between consecutive fixes.

    Returns exactly ``len(points) - 1`` samples; sample ``i`` covers the
    interval from ``points[i]`` to ``points[i+1]``.

    Raises:
        TooFewPoints: fewer than 2 points.
        DuplicateTimestamp: some consecutive pair has a nonpositive time
            delta; the caller decides whether to drop the trip.
    """
    if len(points) < 2:
        raise TooFewPoints(f"need at least 2 points, got {len(points)}")
    samples = []
    for prev, cur in zip(points, points[1:]):
        dt = cur.timestamp - prev.timestamp
        if dt <= 0:
            raise DuplicateTimestamp(
                f"nonpositive time delta {dt!r} ending at t={cur.timestamp!r}"
            )
        samples.append(SpeedSample(cur.timestamp, haversine_distance(prev, cur) / dt))
    return samples


def acceleration_sequence(speeds: list[SpeedSample]) -> list[AccelerationSample]:
    """Finite-difference accelerations between consecutive speed samples.

    Divides each speed delta by the elapsed time between the interval end
    times so the result carries m/s^2 units.

    Raises:
        TooFewPoints: fewer than 2 speed samples.
        DuplicateTimestamp: nonpositive time delta between samples.
    """
    if len(speeds) < 2:
        raise TooFewPoints(f"need at least 2 speed samples, got {len(speeds)}")
    samples = []
    for prev, cur in zip(speeds, speeds[1:]):
        dt = cur.interval_end_time - prev.interval_end_time
        if dt <= 0:
            raise DuplicateTimestamp(
                f"nonpositive time delta {dt!r} ending at t={cur.interval_end_time!r}"
            )
        samples.append(
            AccelerationSample(cur.interval_end_time, (cur.speed - prev.speed) / dt)
        )
    return samples
