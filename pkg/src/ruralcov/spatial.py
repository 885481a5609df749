"""Point and line process samplers plus the planar geometry helpers.

All samplers take an explicit ``numpy.random.Generator`` and hold no state,
so one independent stream per Monte Carlo trial is enough for parallel use.
Point sets are returned as ``(n, 2)`` float arrays; single locations are
``GroundPoint`` tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class NoRoadError(ValueError):
    """Raised when a nearest-road query is made against an empty road set."""


class GroundPoint(NamedTuple):
    x: float
    y: float

    def distance_to(self, other: Sequence[float]) -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


@dataclass(frozen=True)
class SimWindow:
    """Square observation window ``[-half_width, half_width]^2`` centred at the origin."""

    half_width: float = 5000.0

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"window half_width must be positive, got {self.half_width}")

    @property
    def area(self) -> float:
        return (2.0 * self.half_width) ** 2

    @property
    def circumradius(self) -> float:
        return math.sqrt(2.0) * self.half_width


@dataclass(frozen=True)
class ClusterSpec:
    center: GroundPoint
    user_stddev: float

    def __post_init__(self):
        if not self.user_stddev > 0:
            raise ValueError(f"user_stddev must be positive, got {self.user_stddev}")
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("cluster center must be finite")


@dataclass(frozen=True)
class RoadLine:
    """Infinite line ``x cos(angle) + y sin(angle) = offset``."""

    angle: float
    offset: float

    def __post_init__(self):
        if not 0.0 <= self.angle < math.pi:
            raise ValueError(f"road angle must lie in [0, pi), got {self.angle}")
        if not math.isfinite(self.offset):
            raise ValueError("road offset must be finite")


@dataclass(frozen=True)
class ProcessDensities:
    """Intensities of the cluster, user and road processes.

    ``lambda_l`` is not a published value; only the working/living ratio is.
    """

    lambda_m: float = 1e-6
    lambda_l: float = 1e-3
    working_ratio: float = 10.0
    lambda_roads: float = 1e-3

    def __post_init__(self):
        for name in ("lambda_m", "lambda_l", "working_ratio", "lambda_roads"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def lambda_w(self) -> float:
        return self.working_ratio * self.lambda_l

    @property
    def working_weight(self) -> float:
        """Probability that a user of a living/working pair sits in the working cluster."""
        return self.lambda_w / (self.lambda_l + self.lambda_w)


def sample_ppp(density: float, window: SimWindow, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson point process of the given density in ``window``."""
    if not density > 0:
        raise ValueError(f"PPP density must be positive, got {density}")
    n = rng.poisson(density * window.area)
    return rng.uniform(-window.half_width, window.half_width, size=(n, 2))


def sample_cluster_user(spec: ClusterSpec, rng: np.random.Generator, size: int | None = None):
    """Draw user location(s) with isotropic Gaussian offsets around the cluster center.

    Returns a ``GroundPoint`` when ``size`` is None, otherwise a ``(size, 2)`` array.
    """
    if size is None:
        dx, dy = rng.normal(0.0, spec.user_stddev, size=2)
        return GroundPoint(spec.center.x + dx, spec.center.y + dy)
    return np.asarray(spec.center, dtype=float) + rng.normal(0.0, spec.user_stddev, size=(size, 2))


def sample_plp(line_density: float, window: SimWindow | float, rng: np.random.Generator) -> list[RoadLine]:
    """Poisson line process hitting the disk that circumscribes ``window``.

    ``window`` may also be a plain radius. Offsets are a 1-D Poisson process of
    intensity ``line_density`` on ``[-R, R]``, angles uniform on ``[0, pi)``.
    """
    if not line_density > 0:
        raise ValueError(f"line density must be positive, got {line_density}")
    radius = window.circumradius if isinstance(window, SimWindow) else float(window)
    n = rng.poisson(line_density * 2.0 * radius)
    offsets = rng.uniform(-radius, radius, size=n)
    angles = rng.uniform(0.0, math.pi, size=n)
    return [RoadLine(float(a), float(o)) for a, o in zip(angles, offsets)]


def roads_to_arrays(roads: Sequence[RoadLine]) -> tuple[np.ndarray, np.ndarray]:
    angles = np.array([r.angle for r in roads], dtype=float)
    offsets = np.array([r.offset for r in roads], dtype=float)
    return angles, offsets


def nearest_points_on_lines(points: np.ndarray, angles: np.ndarray, offsets: np.ndarray):
    """Vectorised nearest-road projection for an ``(n, 2)`` array of points.

    Returns ``(projections, distances)``.
    """
    if angles.size == 0:
        raise NoRoadError("no road available")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c, s = np.cos(angles), np.sin(angles)
    signed = points[:, 0:1] * c + points[:, 1:2] * s - offsets  # (n, lines)
    best = np.argmin(np.abs(signed), axis=1)
    rows = np.arange(points.shape[0])
    k = signed[rows, best]
    proj = np.column_stack((points[:, 0] - k * c[best], points[:, 1] - k * s[best]))
    return proj, np.abs(k)


def nearest_point_on_roads(p: Sequence[float], roads: Sequence[RoadLine]) -> tuple[GroundPoint, float]:
    """Orthogonal projection of ``p`` onto the closest road, with its distance."""
    if len(roads) == 0:
        raise NoRoadError("no road available")
    proj, dist = nearest_points_on_lines(np.asarray([p], dtype=float), *roads_to_arrays(roads))
    return GroundPoint(float(proj[0, 0]), float(proj[0, 1])), float(dist[0])


def elevation_angle_deg(horizontal_dist, altitude):
    """Elevation of a transmitter at ``altitude`` seen from ``horizontal_dist`` away, in degrees."""
    horizontal_dist = np.asarray(horizontal_dist, dtype=float)
    altitude = np.asarray(altitude, dtype=float)
    if np.any(horizontal_dist < 0) or np.any(altitude <= 0):
        raise ValueError("horizontal distance must be >= 0 and altitude > 0")
    out = np.degrees(np.arctan2(altitude, horizontal_dist))
    return float(out) if out.ndim == 0 else out
