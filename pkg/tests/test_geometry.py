import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvbake.errors import BehindCameraError, DegenerateError, MeshFormatError, ValidationError
from uvbake.geometry import (
    Mesh, PerspectiveCamera, WeakPerspectiveCamera, barycentric, camera_from_dict, load_fit, load_mesh,
    project, rotation_about, save_fit, save_obj, view_vector,
)
from uvbake.synthetic import body_fixture

from oracles import area_barycentrics, brute_normals

TRI_OBJ = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n"
QUAD_OBJ = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\n"


def write(tmp_path, text, name="m.obj"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_smallest_mesh(tmp_path):
    m = load_mesh(write(tmp_path, TRI_OBJ))
    assert m.faces.tolist() == [[0, 1, 2]]
    assert m.uv_faces.tolist() == [[0, 1, 2]]


def test_quad_fan(tmp_path):
    m = load_mesh(write(tmp_path, QUAD_OBJ))
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert m.uv_faces.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_negative_indices(tmp_path):
    m = load_mesh(write(tmp_path, TRI_OBJ.replace("f 1/1 2/2 3/3", "f -3/-3 -2/-2 -1/-1")))
    assert m.faces.tolist() == [[0, 1, 2]]


@pytest.mark.parametrize("text, needle", [
    (TRI_OBJ.replace("f 1/1 2/2 3/3", "f 1/1 2/2 9/3"), ":7:"),
    (TRI_OBJ.replace("f 1/1 2/2 3/3", "f 1 2 3"), ":7:"),
    (TRI_OBJ.replace("vt 0 1", "vt 0 1.5"), "uv"),
    (TRI_OBJ.replace("f 1/1 2/2 3/3", "f 1/1 2/2"), ":7:"),
])
def test_malformed_obj(tmp_path, text, needle):
    with pytest.raises(MeshFormatError) as exc:
        load_mesh(write(tmp_path, text))
    assert needle in str(exc.value)


def test_obj_round_trip(tmp_path):
    m = body_fixture()
    save_obj(tmp_path / "b.obj", m)
    m2 = load_mesh(tmp_path / "b.obj")
    assert m2.same_atlas(m)
    assert np.array_equal(m2.positions, m.positions)


def test_body_fixture_topology():
    m = body_fixture()
    assert (len(m.positions), len(m.faces)) == (6890, 13776)
    # closed genus-0 surface: V - E + F = 2
    edges = {tuple(sorted(e)) for f in m.faces for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))}
    assert len(m.positions) - len(edges) + len(m.faces) == 2


def test_planar_normals():
    m = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], [[0, 0]] * 4, [[0, 1, 2], [1, 3, 2]], [[0, 1, 2], [1, 3, 2]])
    np.testing.assert_allclose(m.vertex_normals, np.tile([0, 0, 1.0], (4, 1)))


def test_normals_match_oracle():
    m = body_fixture()
    np.testing.assert_allclose(m.vertex_normals, brute_normals(m), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(m.vertex_normals, axis=1), 1.0, atol=1e-12)


def test_isolated_vertex_warns():
    m = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 0]] * 4, [[0, 1, 2]], [[0, 1, 2]])
    np.testing.assert_allclose(m.vertex_normals[3], [0, 0, 1])
    assert m.warnings


def persp(**kw):
    base = dict(fx=100.0, fy=100.0, cx=50.0, cy=50.0, rotation=np.eye(3), translation=np.zeros(3), width=100, height=100)
    base.update(kw)
    return PerspectiveCamera(**base)


def test_project_examples():
    assert project(persp(), (0, 0, 1)) == ((50.0, 50.0), 1.0)
    assert project(persp(), (1, 0, 2)) == ((100.0, 50.0), 2.0)
    weak = WeakPerspectiveCamera(2.0, 10.0, 20.0, 64, 64)
    assert project(weak, (3, 4, 7)) == ((16.0, 28.0), 7.0)


def test_project_behind():
    with pytest.raises(BehindCameraError):
        project(persp(), (0, 0, -1))


def test_view_vector_examples():
    np.testing.assert_allclose(view_vector(persp(), (0, 0, 5)), (0, 0, 1))
    np.testing.assert_allclose(view_vector(persp(), (3, 0, 4)), (0.6, 0, 0.8))
    weak = WeakPerspectiveCamera(1.0, 0, 0, 8, 8)
    assert view_vector(weak, (9, -2, 3)) == (0.0, 0.0, 1.0)


def test_camera_validation():
    with pytest.raises(ValidationError):
        persp(fx=0.0)
    with pytest.raises(ValidationError):
        persp(rotation=np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValidationError):
        WeakPerspectiveCamera(-1.0, 0, 0, 8, 8)
    with pytest.raises(ValidationError):
        camera_from_dict({"type": "fisheye"})


def test_fit_round_trip(tmp_path):
    for cam in (persp(rotation=rotation_about((1, 2, 3), 0.7), translation=(0.1, 0.2, 3.0)),
                WeakPerspectiveCamera(3.0, 1.0, 2.0, 32, 16, rotation_about((0, 1, 0), math.pi))):
        save_fit(tmp_path / "f.json", "back", cam, "img.png")
        fit = load_fit(tmp_path / "f.json")
        assert fit.view == "back" and fit.image == tmp_path / "img.png"
        assert fit.camera.to_dict() == cam.to_dict()


def test_barycentric_examples():
    tri = ((0, 0), (1, 0), (0, 1))
    assert barycentric(tri, (1, 0)) == pytest.approx((0, 1, 0), abs=1e-15)
    assert barycentric(tri, (1 / 3, 1 / 3)) == pytest.approx((1 / 3,) * 3, abs=1e-15)
    with pytest.raises(DegenerateError):
        barycentric(((0, 0), (1, 1), (2, 2)), (0.5, 0.5))


coord = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=4, max_size=4))
def test_barycentric_matches_area_ratios(pts):
    tri, p = pts[:3], pts[3]
    a, b, c = np.array(tri)
    if abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0]) < 1e-3:
        return
    lam = barycentric(tri, p)
    assert sum(lam) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(lam, area_barycentrics(tri, p), atol=1e-7)
    np.testing.assert_allclose(np.array(lam) @ np.array(tri), p, atol=1e-7)


@settings(max_examples=100, deadline=None)
@given(st.tuples(coord, coord, coord).filter(lambda a: np.linalg.norm(a) > 1e-3), st.floats(-7, 7))
def test_rotation_about_is_rotation(axis, angle):
    R = rotation_about(axis, angle)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
