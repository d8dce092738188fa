import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zcollide.detector import DetectionVolume
from zcollide.shapes import box, quad

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

Z = np.array([0.0, 0.0, 1.0])
Y = np.array([0.0, 1.0, 0.0])


def unit_volume(res: int = 128) -> DetectionVolume:
    """Volume around the origin looking along +z; rear plane at z=-1, L=2."""
    return DetectionVolume.from_center((0, 0, 0), Z, Y, 1.0, 1.0, 2.0, res, res)


def unit_cube(object_id: int = 1):
    return box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), object_id)


def wall_at_depth(volume: DetectionVolume, d: float, object_id: int = 2, facing_camera: bool = True,
                  margin: float = 1.0):
    """Plane perpendicular to view at normalized depth ``d``, spanning the viewport."""
    cam = volume.camera
    hw, hh = cam.half_width + margin, cam.half_height + margin
    center = cam.origin + d * cam.depth_length * cam.view
    corner = center - hw * cam.right - hh * cam.up
    u, v = 2 * hw * cam.right, 2 * hh * cam.up
    # right x up = -view, which faces the camera
    if facing_camera:
        return quad(corner, u, v, object_id)
    return quad(corner, v, u, object_id)


@pytest.fixture
def volume():
    return unit_volume()


@pytest.fixture
def cube():
    return unit_cube()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
