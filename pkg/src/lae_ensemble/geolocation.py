"""Pixel to geodetic localization with a pinhole camera on WGS84.

Frames used here:

* camera: x right, y down, z along the optical axis;
* ENU: East-North-Up tangent frame anchored at the camera;
* ECEF: WGS84 earth-centred, earth-fixed.

Orientation is yaw/pitch/roll in degrees, applied Z-Y-X.  Yaw 0 looks
North, positive yaw turns toward East, pitch -90 looks straight down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoundingBox, GeoCoordinate
from .errors import BehindCamera, NoIntersection, OutOfRange, ValidationError

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

ENU_LIMIT_M = 50_000.0

# camera (right, down, forward) -> body (forward, right, down)
_CAMERA_TO_BODY = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
# NED -> ENU
_NED_TO_ENU = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])


def _cos_sin(degrees: float) -> tuple[float, float]:
    # exact values at quarter turns keep nadir / level cameras free of 6e-17 residue
    quarter = degrees / 90.0
    if quarter == int(quarter):
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(quarter) % 4]
    r = math.radians(degrees)
    return math.cos(r), math.sin(r)


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    latitude: float
    longitude: float
    altitude: float
    yaw: float = 0.0
    pitch: float = -90.0
    roll: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValidationError("principal point outside the image")
        if abs(self.latitude) > 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.pitch <= 180.0:
            raise ValidationError(f"pitch {self.pitch} outside [-180, 180]")

    @property
    def position(self) -> GeoCoordinate:
        return GeoCoordinate(self.latitude, self.longitude, self.altitude)

    def rotation(self) -> np.ndarray:
        """Matrix taking camera-frame vectors to the camera's ENU frame."""
        cy_, sy_ = _cos_sin(self.yaw)
        cp, sp = _cos_sin(self.pitch)
        cr, sr = _cos_sin(self.roll)
        rz = np.array([[cy_, -sy_, 0.0], [sy_, cy_, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
        return _NED_TO_ENU @ rz @ ry @ rx @ _CAMERA_TO_BODY

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in CAMERA_FIELDS}


CAMERA_FIELDS = ("fx", "fy", "cx", "cy", "width", "height", "latitude", "longitude", "altitude", "yaw", "pitch", "roll")


def geodetic_to_ecef(lat: float, lon: float, h: float) -> np.ndarray:
    cl, sl = _cos_sin(lat)
    co, so = _cos_sin(lon)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.array([(n + h) * cl * co, (n + h) * cl * so, (n * (1.0 - WGS84_E2) + h) * sl])


def ecef_to_geodetic(x: float, y: float, z: float) -> tuple[float, float, float]:
    """Fixed-point iteration on geodetic latitude; converges to machine precision near the surface."""
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    lat = math.atan2(z, p * (1.0 - WGS84_E2))
    for _ in range(20):
        n, h = _height_above(lat, p, z)
        new_lat = math.atan2(z, p * (1.0 - WGS84_E2 * n / (n + h)))
        if new_lat == lat:
            break
        lat = new_lat
    _, h = _height_above(lat, p, z)
    return math.degrees(lat), math.degrees(lon), h


def _height_above(lat: float, p: float, z: float) -> tuple[float, float]:
    """Prime-vertical radius and height of (p, z) over the foot point at ``lat``."""
    s, c = math.sin(lat), math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * s * s)
    # differences against the foot point are exact (Sterbenz), which halves the rounding in h
    return n, (p - n * c) * c + (z - n * (1.0 - WGS84_E2) * s) * s


def _enu_basis(lat: float, lon: float) -> np.ndarray:
    """Rows are the East, North and Up unit vectors in ECEF."""
    cl, sl = _cos_sin(lat)
    co, so = _cos_sin(lon)
    return np.array(
        [
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ]
    )


def _check_range(e: float, n: float, u: float) -> None:
    if max(abs(e), abs(n), abs(u)) > ENU_LIMIT_M:
        raise OutOfRange(f"ENU offset ({e:.1f}, {n:.1f}, {u:.1f}) m exceeds {ENU_LIMIT_M:.0f} m")


def geodetic_to_enu(origin: GeoCoordinate, point: GeoCoordinate) -> tuple[float, float, float]:
    delta = geodetic_to_ecef(point.latitude, point.longitude, point.altitude) - geodetic_to_ecef(
        origin.latitude, origin.longitude, origin.altitude
    )
    e, n, u = (float(v) for v in _enu_basis(origin.latitude, origin.longitude) @ delta)
    _check_range(e, n, u)
    return e, n, u


def enu_to_geodetic(origin: GeoCoordinate, e: float, n: float, u: float) -> GeoCoordinate:
    _check_range(e, n, u)
    if e == 0.0 and n == 0.0 and u == 0.0:
        return origin
    ecef = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude) + _enu_basis(
        origin.latitude, origin.longitude
    ).T @ np.array([e, n, u])
    return GeoCoordinate(*ecef_to_geodetic(*ecef))


def pixel_ray(cam: CameraModel, px: float, py: float) -> np.ndarray:
    """Unit viewing direction of a pixel, expressed in the camera's ENU frame."""
    if not (0.0 <= px <= cam.width and 0.0 <= py <= cam.height):
        raise ValidationError(f"pixel ({px}, {py}) outside the {cam.width}x{cam.height} image")
    v = np.array([(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0])
    d = cam.rotation() @ v
    return d / np.linalg.norm(d)


def localize(cam: CameraModel, box: BoundingBox, target_altitude: float = 0.0) -> GeoCoordinate:
    """Geodetic position of a box centre seen at a known altitude.

    The centre ray is intersected with the surface of constant ellipsoidal
    height ``target_altitude``.  The tangent-plane solution seeds a Newton
    iteration along the ray, so the returned point lies on the viewing ray
    and its altitude is exactly ``target_altitude``.
    """
    return _ray_intersection(cam, box, target_altitude)[0]


def _ray_intersection(cam: CameraModel, box: BoundingBox, target_altitude: float) -> tuple[GeoCoordinate, np.ndarray]:
    """``localize`` result plus its ENU offset from the camera, t * d."""
    d_enu = pixel_ray(cam, *box.center)
    drop = target_altitude - cam.altitude
    if abs(d_enu[2]) < 1e-12:
        raise NoIntersection("viewing ray is parallel to the target altitude plane")
    t = drop / d_enu[2]
    if t <= 0.0:
        raise BehindCamera(f"target altitude {target_altitude} m is not in front of the camera")

    origin = geodetic_to_ecef(cam.latitude, cam.longitude, cam.altitude)
    direction = _enu_basis(cam.latitude, cam.longitude).T @ d_enu
    for _ in range(50):
        _check_range(*(t * d_enu))
        lat, lon, h = ecef_to_geodetic(*(origin + t * direction))
        residual = h - target_altitude
        slope = float(_enu_basis(lat, lon)[2] @ direction)
        if slope == 0.0:
            raise NoIntersection("viewing ray grazes the target altitude surface")
        step = residual / slope
        t -= step
        if t <= 0.0:
            raise BehindCamera("target altitude surface lies behind the camera")
        # ECEF float spacing is ~1e-9 m; iterates can oscillate at that scale
        if abs(step) <= 1e-8:
            lat, lon, h = ecef_to_geodetic(*(origin + t * direction))
            break
    else:
        raise NoIntersection("ray/altitude intersection did not converge")
    if abs(h - target_altitude) > 1e-6:
        raise NoIntersection("ray/altitude intersection did not converge")
    return GeoCoordinate(lat, lon, target_altitude), t * d_enu


def project(cam: CameraModel, point: GeoCoordinate) -> tuple[float, float]:
    """Pixel at which a geodetic point appears; inverse of ``localize``."""
    enu = np.array(geodetic_to_enu(cam.position, point))
    x, y, z = cam.rotation().T @ enu
    if z <= 0.0:
        raise BehindCamera("point lies behind the image plane")
    return float(cam.cx + cam.fx * x / z), float(cam.cy + cam.fy * y / z)
