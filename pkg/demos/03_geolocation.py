"""
From pixels to latitude and longitude
=====================================

A nadir camera 100 m above ground with a 1000 px focal length.  A box
100 px right of the principal point lies 10 m East on the ground.  The
same camera tilted forward sees farther, and ``project`` inverts
``localize`` to the pixel.
"""

from lae_ensemble import BoundingBox, CameraModel, geodetic_to_enu, localize, project

cam = CameraModel(fx=1000, fy=1000, cx=640, cy=480, width=1280, height=960,
                  latitude=40.0, longitude=116.0, altitude=100.0, yaw=0.0, pitch=-90.0, roll=0.0)

for px, py in [(640, 480), (740, 480), (640, 380), (1040, 780)]:
    box = BoundingBox(px - 8, py - 8, px + 8, py + 8)
    g = localize(cam, box, target_altitude=0.0)
    e, n, u = geodetic_to_enu(cam.position, g)
    print(f"pixel ({px}, {py}) -> lat {g.latitude:.7f} lon {g.longitude:.7f}  E {e:7.3f} m  N {n:7.3f} m")

# an aircraft flying at 60 m is closer to the camera than the ground
g = localize(cam, BoundingBox(732, 472, 748, 488), target_altitude=60.0)
print("at 60 m:", round(geodetic_to_enu(cam.position, g)[0], 3), "m East")

# 30 degrees below the horizon, looking north-east
tilted = CameraModel(fx=1000, fy=1000, cx=640, cy=480, width=1280, height=960,
                     latitude=40.0, longitude=116.0, altitude=300.0, yaw=45.0, pitch=-30.0, roll=0.0)
g = localize(tilted, BoundingBox(600, 500, 640, 540), 0.0)
print("tilted camera ->", g, "reprojects to", project(tilted, g))
