"""Shared scene geometry: world-frame points, camera pose, room and fixture types.

World frame: origin at a floor corner, z up, lengths in centimeters. Ceiling
fixtures sit at z = ceiling height. Camera/fixture internals (focal length,
pixel pitch, emitter dimensions) are in millimeters; conversions happen
explicitly at call sites, never implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Point3:
    """A world-frame point, components in centimeters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite point ({self.x}, {self.y}, {self.z})")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def distance(a: Point3, b: Point3) -> float:
    """Euclidean distance between two world points, in cm."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


UP = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Pose:
    """Camera position plus optical-axis direction (unit vector, default straight up)."""

    position: Point3
    optical_axis: tuple[float, float, float] = UP

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.optical_axis))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"optical_axis must be unit length, |v| = {norm}")


@dataclass(frozen=True)
class RoomConfig:
    """Rectangular room, floor at z = 0, ceiling at z = ceiling_height_cm."""

    width_cm: float
    depth_cm: float
    ceiling_height_cm: float

    def __post_init__(self):
        for name in ("width_cm", "depth_cm", "ceiling_height_cm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Circular:
    radius_mm: float

    @property
    def area_mm2(self) -> float:
        return math.pi * self.radius_mm**2


@dataclass(frozen=True)
class Rectangular:
    width_mm: float
    height_mm: float

    @property
    def area_mm2(self) -> float:
        return self.width_mm * self.height_mm


Shape = Circular | Rectangular


@dataclass(frozen=True)
class Luminaire:
    """A ceiling LED fixture: identity, placement, emitter geometry and emission.

    area_mm2 may be given explicitly (e.g. a datasheet value); it must then agree
    with the shape-derived area within 0.1%. Left as None it is derived exactly.
    """

    led_id: int
    anchor: Point3
    shape: Shape
    half_power_semi_angle_deg: float
    center_intensity_cd: float = 300.0
    emitted_power_mw: float = 1500.0
    area_mm2: float | None = None

    def __post_init__(self):
        if not (0 <= self.led_id < 2**32):
            raise ValueError(f"led_id {self.led_id} does not fit 32 bits")
        if not (0.0 < self.half_power_semi_angle_deg < 90.0):
            raise ValueError("half_power_semi_angle_deg must lie strictly in (0, 90)")
        derived = self.shape.area_mm2
        if self.area_mm2 is None:
            object.__setattr__(self, "area_mm2", derived)
        elif abs(self.area_mm2 - derived) > 1e-3 * derived:
            raise ValueError(
                f"area_mm2 {self.area_mm2} disagrees with shape area {derived:.2f} by more than 0.1%"
            )


@dataclass(frozen=True)
class CameraModel:
    """Smartphone camera intrinsics and sensor response.

    pixel_edge_mm is the pixel edge length used by the projection math;
    pixel_size_um is kept alongside as datasheet metadata only.
    """

    focal_length_mm: float
    pixel_edge_mm: float
    sensor_cols: int
    sensor_rows: int
    fov_full_angle_deg: float
    frame_rate_fps: float
    responsivity_a_per_w: float = 0.5
    optical_filter_gain: float = 1.0
    aperture_area_mm2: float = 1.0
    pixel_size_um: float | None = None

    def __post_init__(self):
        if self.focal_length_mm <= 0:
            raise ValueError("focal_length_mm must be positive")
        if self.pixel_edge_mm <= 0:
            raise ValueError("pixel_edge_mm must be positive")
        if not (0.0 < self.fov_full_angle_deg < 180.0):
            raise ValueError("fov_full_angle_deg must lie in (0, 180)")
        if self.frame_rate_fps <= 0:
            raise ValueError("frame_rate_fps must be positive")

    @property
    def fov_semi_angle_deg(self) -> float:
        """Visibility semi-angle: half the full cone angle."""
        return self.fov_full_angle_deg / 2.0


def incidence_angle(luminaire: Luminaire, camera: Pose) -> float:
    """Angle in degrees between the camera optical axis and the camera-to-fixture ray.

    Lies in [0, 180]. Raises if the camera sits exactly at the fixture anchor.
    """
    vx = luminaire.anchor.x - camera.position.x
    vy = luminaire.anchor.y - camera.position.y
    vz = luminaire.anchor.z - camera.position.z
    norm = math.sqrt(vx * vx + vy * vy + vz * vz)
    if norm == 0.0:
        raise ValueError("camera coincides with the luminaire anchor")
    ax, ay, az = camera.optical_axis
    cosang = (vx * ax + vy * ay + vz * az) / norm
    cosang = min(1.0, max(-1.0, cosang))
    return math.degrees(math.acos(cosang))
