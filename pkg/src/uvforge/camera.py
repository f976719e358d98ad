"""Viewpoints, projection math and the coarse-stage viewpoint schedule.

Pixel coordinates are continuous with (0, 0) at the top-left image corner and
pixel centers at half-integer offsets; depth is the distance along the camera
forward axis. Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedCount

DEFAULT_DISTANCE = 2.2
DEFAULT_FOV_DEG = 50.0
DEFAULT_NEAR = 0.1
DEFAULT_FAR = 10.0


@dataclass(frozen=True)
class Perspective:
    """Pinhole projection with a vertical field of view in degrees."""

    fov_deg: float = DEFAULT_FOV_DEG

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError("fov_deg must be in (0, 180)")


@dataclass(frozen=True)
class Orthographic:
    """Parallel projection; half_extent is half the vertical view size."""

    half_extent: float = 1.0

    def __post_init__(self):
        if self.half_extent <= 0.0:
            raise ValueError("half_extent must be positive")


@dataclass(frozen=True, eq=False)
class Viewpoint:
    eye: np.ndarray
    target: np.ndarray
    up: np.ndarray
    projection: Perspective | Orthographic = field(default_factory=Perspective)
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR
    label: str = "custom"

    def __post_init__(self):
        for name in ("eye", "target", "up"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(3)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (0.0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        forward = self.target - self.eye
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("eye and target coincide")
        if np.linalg.norm(np.cross(forward / norm, self.up)) < 1e-9:
            raise ValueError("up is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, up, forward) world-space camera axes."""
        forward = self.target - self.eye
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return right, true_up, forward


@dataclass(frozen=True)
class ViewSchedule:
    """Ordered viewpoint groups; each group is rendered in one iteration."""

    iterations: tuple[tuple[Viewpoint, ...], ...]

    def viewpoints(self) -> list[Viewpoint]:
        return [view for group in self.iterations for view in group]

    @property
    def total(self) -> int:
        return sum(len(group) for group in self.iterations)


def project_points(
    view: Viewpoint, points: np.ndarray, resolution: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project (N, 3) world points into an image of the given (width, height).

    Returns (pixels (N, 2), depth (N,), inside (N,) bool). Points behind the
    camera get zeroed pixels and inside=False rather than an error.
    """
    width, height = int(resolution[0]), int(resolution[1])
    if width <= 0 or height <= 0:
        raise ValueError("resolution must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    right, true_up, forward = view.basis()
    rel = pts - view.eye
    x_c = rel @ right
    y_c = rel @ true_up
    depth = rel @ forward
    aspect = width / height

    if isinstance(view.projection, Perspective):
        tan_half = math.tan(math.radians(view.projection.fov_deg) / 2.0)
        safe = np.where(depth > 1e-12, depth, 1.0)
        ndc_x = x_c / (safe * tan_half * aspect)
        ndc_y = y_c / (safe * tan_half)
        front = depth > 1e-12
    else:
        half = view.projection.half_extent
        ndc_x = x_c / (half * aspect)
        ndc_y = y_c / half
        front = np.ones_like(depth, dtype=bool)

    px = (ndc_x * 0.5 + 0.5) * width
    py = (0.5 - ndc_y * 0.5) * height
    pixels = np.stack([np.where(front, px, 0.0), np.where(front, py, 0.0)], axis=1)
    inside = (
        front
        & (depth >= view.near)
        & (depth <= view.far)
        & (np.abs(ndc_x) <= 1.0)
        & (np.abs(ndc_y) <= 1.0)
    )
    return pixels, depth, inside


def view_project(
    view: Viewpoint, point, resolution: tuple[int, int]
) -> tuple[np.ndarray, float, bool]:
    """Single-point convenience wrapper around project_points."""
    pixels, depth, inside = project_points(view, np.asarray(point), resolution)
    return pixels[0], float(depth[0]), bool(inside[0])


_AXES = [
    ("front", np.array([0.0, 0.0, 1.0])),
    ("back", np.array([0.0, 0.0, -1.0])),
    ("right", np.array([1.0, 0.0, 0.0])),
    ("left", np.array([-1.0, 0.0, 0.0])),
    ("top", np.array([0.0, 1.0, 0.0])),
    ("bottom", np.array([0.0, -1.0, 0.0])),
]
_DIAG = math.sqrt(0.5)
_EXTRAS = [
    ("front_right", np.array([_DIAG, 0.0, _DIAG])),
    ("back_left", np.array([-_DIAG, 0.0, -_DIAG])),
]


def viewpoint_for_direction(
    direction: np.ndarray,
    label: str,
    distance: float = DEFAULT_DISTANCE,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> Viewpoint:
    """Viewpoint looking at the origin from distance along a unit direction."""
    direction = np.asarray(direction, dtype=np.float64)
    # +Y is the natural up; poles need a different one to stay non-degenerate
    up = np.array([0.0, 0.0, 1.0]) if abs(direction[1]) > 0.9 else np.array([0.0, 1.0, 0.0])
    return Viewpoint(
        eye=direction * distance,
        target=np.zeros(3),
        up=up,
        projection=Perspective(fov_deg),
        label=label,
    )


def named_viewpoint(
    label: str,
    distance: float = DEFAULT_DISTANCE,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> Viewpoint:
    """Look up one of the scheduled viewpoints by its label."""
    for name, direction in _AXES + _EXTRAS:
        if name == label:
            return viewpoint_for_direction(direction, name, distance, fov_deg)
    known = ", ".join(name for name, _ in _AXES + _EXTRAS)
    raise ValueError(f"unknown viewpoint {label!r} (known: {known})")


def orbit_viewpoint(
    azimuth_deg: float,
    elevation_deg: float,
    distance: float = DEFAULT_DISTANCE,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> Viewpoint:
    """Viewpoint on an orbit around +Y, azimuth 0 meaning the front view."""
    azimuth = math.radians(azimuth_deg)
    elevation = math.radians(elevation_deg)
    direction = np.array([
        math.cos(elevation) * math.sin(azimuth),
        math.sin(elevation),
        math.cos(elevation) * math.cos(azimuth),
    ])
    return viewpoint_for_direction(
        direction, f"orbit_{azimuth_deg:g}", distance, fov_deg
    )


def schedule_viewpoints(
    total: int,
    per_iteration: int,
    distance: float = DEFAULT_DISTANCE,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> ViewSchedule:
    """Build the axis-aligned schedule: +-Z, +-X, +-Y, then XZ diagonals.

    per_iteration=2 groups mirror-image pairs so each iteration samples a
    symmetric pair; per_iteration=1 emits singleton groups in the same order.
    """
    if total not in (2, 4, 6, 8):
        raise UnsupportedCount(f"total viewpoints must be one of 2,4,6,8, got {total}")
    if per_iteration not in (1, 2):
        raise ValueError("per_iteration must be 1 or 2")
    ordered = _AXES + _EXTRAS
    views = [
        viewpoint_for_direction(direction, label, distance, fov_deg)
        for label, direction in ordered[:total]
    ]
    if per_iteration == 1:
        groups = tuple((view,) for view in views)
    else:
        groups = tuple(
            (views[i], views[i + 1]) for i in range(0, total, 2)
        )
    return ViewSchedule(iterations=groups)
