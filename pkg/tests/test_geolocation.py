import math

import numpy as np
import pytest

from lae_ensemble.core import BoundingBox, GeoCoordinate
from lae_ensemble.errors import BehindCamera, NoIntersection, OutOfRange, ValidationError
from lae_ensemble.geolocation import (
    _ray_intersection,
    CameraModel,
    ecef_to_geodetic,
    enu_to_geodetic,
    geodetic_to_ecef,
    geodetic_to_enu,
    localize,
    pixel_ray,
    project,
)

import oracles
from randomframes import random_camera_case


def camera(**kw):
    base = dict(fx=1000.0, fy=1000.0, cx=640.0, cy=480.0, width=1280, height=960,
                latitude=40.0, longitude=116.0, altitude=100.0, yaw=0.0, pitch=-90.0, roll=0.0)
    base.update(kw)
    return CameraModel(**base)


def box_at(px, py, half=5.0):
    return BoundingBox(px - half, py - half, px + half, py + half)


def test_pixel_ray_nadir_principal_point():
    assert np.allclose(pixel_ray(camera(), 640, 480), (0, 0, -1), atol=1e-15)


def test_pixel_ray_level_camera_looks_north():
    assert np.allclose(pixel_ray(camera(pitch=0.0), 640, 480), (0, 1, 0), atol=1e-15)


def test_pixel_ray_nadir_offset_east():
    d = pixel_ray(camera(), 740, 480)
    expected = np.array([0.1, 0.0, -1.0]) / math.sqrt(1.01)
    assert np.allclose(d, expected, atol=1e-15)
    assert abs(np.linalg.norm(d) - 1.0) <= 1e-12


def test_pixel_ray_yaw_east():
    assert np.allclose(pixel_ray(camera(pitch=0.0, yaw=90.0), 640, 480), (1, 0, 0), atol=1e-15)


def test_pixel_ray_image_down_is_south_for_nadir():
    d = pixel_ray(camera(), 640, 580)
    assert d[1] < 0 and abs(d[0]) < 1e-15


def test_pixel_ray_outside_image():
    with pytest.raises(ValidationError):
        pixel_ray(camera(), -1, 10)


def test_localize_sub_camera_point():
    g = localize(camera(), box_at(640, 480), 0.0)
    assert abs(g.latitude - 40.0) <= 1e-9 and abs(g.longitude - 116.0) <= 1e-9
    assert g.altitude == 0.0


def test_localize_ten_metres_east():
    cam = camera()
    g = localize(cam, box_at(740, 480), 0.0)
    e, n, u = geodetic_to_enu(cam.position, g)
    assert abs(e - 10.0) <= 1e-6
    assert abs(n) <= 1e-6
    assert u == pytest.approx(-100.0, abs=1e-4)


def test_localize_parallel_ray():
    with pytest.raises(NoIntersection):
        localize(camera(pitch=0.0), box_at(640, 480), 100.0)


def test_localize_behind_camera():
    with pytest.raises(BehindCamera):
        localize(camera(), box_at(640, 480), 200.0)
    with pytest.raises(NoIntersection):
        localize(camera(pitch=0.0), box_at(640, 100), 50.0)


def test_localize_out_of_range():
    # almost horizontal ray reaches the ground ~95 km away
    cam = camera(pitch=-0.06, altitude=100.0)
    with pytest.raises(OutOfRange):
        localize(cam, box_at(640, 480), 0.0)


def test_camera_validation():
    with pytest.raises(ValidationError):
        camera(fx=0.0)
    with pytest.raises(ValidationError):
        camera(cx=2000.0)
    with pytest.raises(ValidationError):
        camera(latitude=91.0)


def _ecef_round_trip_error(point):
    xyz = geodetic_to_ecef(*point)
    return float(np.linalg.norm(geodetic_to_ecef(*ecef_to_geodetic(*xyz)) - xyz))


def test_ecef_round_trip_reference_point():
    assert _ecef_round_trip_error((40.0, 116.0, 50.0)) < 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_ecef_round_trip_sweep(seed):
    # float64 spacing of ECEF coordinates is ~9.3e-10 m and both conversions round, so allow a few ulps
    rng = np.random.default_rng(seed)
    for _ in range(50):
        point = (float(rng.uniform(-89.9, 89.9)), float(rng.uniform(-180, 180)), float(rng.uniform(-100, 5000)))
        assert _ecef_round_trip_error(point) < 5e-9


@pytest.mark.parametrize("point", [(40.0, 116.0, 50.0), (-33.9, 151.2, 1200.0), (60.0, 10.0, 3000.0)])
def test_ecef_against_closed_form_oracle(point):
    xyz = geodetic_to_ecef(*point)
    assert np.allclose(xyz, oracles.geodetic_to_ecef(*point), rtol=0, atol=1e-8)
    lat, lon, h = ecef_to_geodetic(*xyz)
    olat, olon, oh = oracles.heikkinen_ecef_to_geodetic(*xyz)
    assert abs(lat - olat) < 1e-12 and abs(lon - olon) < 1e-12 and abs(h - oh) < 1e-6


def test_enu_identity():
    origin = GeoCoordinate(40.0, 116.0, 50.0)
    assert enu_to_geodetic(origin, 0.0, 0.0, 0.0) == origin


@pytest.mark.parametrize("seed", range(50))
def test_enu_round_trip(seed):
    rng = np.random.default_rng(seed)
    origin = GeoCoordinate(float(rng.uniform(-85, 85)), float(rng.uniform(-180, 180)), float(rng.uniform(-100, 3000)))
    enu = rng.uniform(-10_000, 10_000, size=3)
    g = enu_to_geodetic(origin, *enu)
    assert np.linalg.norm(np.array(geodetic_to_enu(origin, g)) - enu) < 1e-6
    # geodetic -> enu -> geodetic, measured in metres through ECEF
    back = enu_to_geodetic(origin, *geodetic_to_enu(origin, g))
    assert np.linalg.norm(geodetic_to_ecef(back.latitude, back.longitude, back.altitude)
                          - geodetic_to_ecef(g.latitude, g.longitude, g.altitude)) < 1e-6


def test_enu_out_of_range():
    origin = GeoCoordinate(40.0, 116.0, 0.0)
    with pytest.raises(OutOfRange):
        enu_to_geodetic(origin, 60_000.0, 0.0, 0.0)
    with pytest.raises(OutOfRange):
        geodetic_to_enu(origin, GeoCoordinate(41.0, 116.0, 0.0))


@pytest.mark.parametrize("seed", range(100))
def test_reprojection_and_altitude_exactness(seed):
    rng = np.random.default_rng(seed)
    cam, box, target = random_camera_case(rng)
    g = localize(cam, box, target)
    assert g.altitude == target
    px, py = project(cam, g)
    cx, cy = box.center
    assert abs(px - cx) <= 1e-6 and abs(py - cy) <= 1e-6


@pytest.mark.parametrize("offset", [(100, 0), (0, 50), (-230, 170), (600, 470)])
def test_nadir_symmetry(offset):
    cam = camera()
    dx, dy = offset
    (pa, a), (pb, b) = (_ray_intersection(cam, box_at(640 + s * dx, 480 + s * dy, 1.0), 0.0) for s in (1, -1))
    assert abs(a[0] + b[0]) <= 1e-9 and abs(a[1] + b[1]) <= 1e-9
    # degree-valued outputs are quantized: one ulp of latitude is ~0.8 nm on the ground
    ea, eb = geodetic_to_enu(cam.position, pa), geodetic_to_enu(cam.position, pb)
    quantum = 111_320.0 * max(math.ulp(pa.latitude), math.ulp(pa.longitude))
    assert abs(ea[0] + eb[0]) <= 1e-9 + 2 * quantum and abs(ea[1] + eb[1]) <= 1e-9 + 2 * quantum
