import numpy as np
import pytest

from uvbake.geometry import Mesh


def tri_mesh(positions, uvs=None, faces=None):
    positions = np.asarray(positions, dtype=float)
    if faces is None:
        faces = np.arange(len(positions)).reshape(-1, 3)
    if uvs is None:
        uvs = np.tile([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], (len(faces), 1))
        uv_faces = np.arange(len(uvs)).reshape(-1, 3)
    else:
        uv_faces = faces
    return Mesh(positions, uvs, faces, uv_faces)


def random_mesh(rng, n_faces, spread=1.0, depth=(1.0, 3.0)):
    """Random triangle soup in front of the camera with random non-overlapping UV cells."""
    centres = np.column_stack([rng.uniform(-spread, spread, (n_faces, 2)), rng.uniform(*depth, n_faces)])
    pos = (centres[:, None, :] + rng.normal(scale=0.4, size=(n_faces, 3, 3))).reshape(-1, 3)
    side = int(np.ceil(np.sqrt(n_faces)))
    cell = 1.0 / side
    uvs = []
    for f in range(n_faces):
        u0, v0 = (f % side) * cell, (f // side) * cell
        uvs += [[u0 + 0.05 * cell, v0 + 0.05 * cell], [u0 + 0.95 * cell, v0 + 0.05 * cell],
                [u0 + 0.05 * cell, v0 + 0.95 * cell]]
    faces = np.arange(3 * n_faces).reshape(-1, 3)
    return Mesh(pos, np.array(uvs), faces, faces.copy())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def two_plane_scene(directory, resolution=32, **kw):
    """Front plane facing +z, back plane facing -z, each seen head-on by one camera.

    UV regions are disjoint halves of the atlas; images are solid red / solid blue.
    """
    from uvbake.synthetic import camera_pair, merge, plane_mesh, rot_y, write_scene

    front = plane_mesh(2, 2, (1.0, 1.0), (0.0, 0.0, 0.5, 1.0)).transformed(np.eye(3), (0, 0, 0.5))
    back = plane_mesh(2, 2, (1.0, 1.0), (0.5, 0.0, 1.0, 1.0)).transformed(rot_y(np.pi), (0, 0, -0.5))
    mesh = merge(front, back)
    cams = camera_pair("weak", 64, 64, extent=2.0)
    red = np.zeros((64, 64, 3))
    red[..., 0] = 1.0
    blue = np.zeros((64, 64, 3))
    blue[..., 2] = 1.0
    return write_scene(directory, mesh, cams, (red, blue), resolution=resolution, **kw), mesh


def sphere_scene(directory, resolution=64, size=128, elevation=0.25, **kw):
    """Checkered sphere rendered from two tilted opposing weak-perspective cameras."""
    from uvbake.synthetic import camera_pair, checker, render, uv_sphere, write_scene

    mesh = uv_sphere(15, 24)
    cams = camera_pair("weak", size, size, extent=2.4, elevation=elevation)
    images = [render(mesh, c, checker)[0] for c in cams]
    return write_scene(directory, mesh, cams, images, resolution=resolution, **kw), mesh


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
