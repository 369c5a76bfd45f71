"""Synthetic meshes, cameras and renders for demos, tests and benchmarks.

``body_fixture`` has the same vertex and face counts as the SMPL template
(6890 / 13776, closed genus 0), which is what the performance budget is
stated against; it is an ellipsoid, not the SMPL surface.
"""

import json
import math
from pathlib import Path

import numpy as np

from uvbake.geometry import Mesh, PerspectiveCamera, WeakPerspectiveCamera, save_fit, save_obj
from uvbake.imageio import write_rgb
from uvbake.visibility import rasterize_depth

FRONT_R = np.diag([1.0, -1.0, -1.0])  # looks along -z, image y down = world y up
BACK_R = np.diag([-1.0, -1.0, 1.0])  # looks along +z


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def plane_mesh(nx=1, ny=1, size=(1.0, 1.0), uv_rect=(0.0, 0.0, 1.0, 1.0)):
    """Grid in the z = 0 plane centred on the origin, normal +z, UVs filling uv_rect."""
    xs = np.linspace(-size[0] / 2, size[0] / 2, nx + 1)
    ys = np.linspace(-size[1] / 2, size[1] / 2, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    pos = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    u0, v0, u1, v1 = uv_rect
    gu, gv = np.meshgrid(np.linspace(u0, u1, nx + 1), np.linspace(v0, v1, ny + 1))
    uv = np.stack([gu.ravel(), gv.ravel()], axis=1)
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            faces += [(a, b, c), (a, c, d)]
    faces = np.array(faces, dtype=np.int64)
    return Mesh(pos, uv, faces, faces.copy())


def merge(*meshes):
    pos, uv, f, tf = [], [], [], []
    npos = nuv = 0
    for m in meshes:
        pos.append(m.positions)
        uv.append(m.uvs)
        f.append(m.faces + npos)
        tf.append(m.uv_faces + nuv)
        npos += len(m.positions)
        nuv += len(m.uvs)
    return Mesh(np.concatenate(pos), np.concatenate(uv), np.concatenate(f), np.concatenate(tf))


def polar_sphere(rings, segments, radii=(1.0, 1.0, 1.0), chart=(0.24, 0.48)):
    """Closed ellipsoid with poles on the z axis and a two-chart atlas.

    `rings` must be odd so the middle ring sits on z = 0. The z >= 0 half is
    orthographically projected into an ellipse centred at (0.25, 0.5) with
    half-axes `chart`, the z <= 0 half (mirrored) into one at (0.75, 0.5).
    """
    if rings % 2 == 0:
        raise ValueError("rings must be odd")
    rx, ry, rz = radii
    phi = np.arange(1, rings + 1) * math.pi / (rings + 1)
    theta = np.arange(segments) * 2 * math.pi / segments
    P, T = np.meshgrid(phi, theta, indexing="ij")
    ring_pos = np.stack([rx * np.sin(P) * np.cos(T), ry * np.sin(P) * np.sin(T), rz * np.cos(P)], axis=-1)
    pos = np.concatenate([[[0, 0, rz]], ring_pos.reshape(-1, 3), [[0, 0, -rz]]])
    back_pole = len(pos) - 1

    def vid(k, j):  # ring k in 0..rings-1; front-chart uv ids coincide
        return 1 + k * segments + (j % segments)

    eq = rings // 2
    disc = np.stack([np.sin(P) * np.cos(T), np.sin(P) * np.sin(T)], axis=-1) * chart
    front_uv = np.concatenate([[[0.25, 0.5]], (disc[: eq + 1] + (0.25, 0.5)).reshape(-1, 2)])
    back_disc = disc[eq:] * (-1.0, 1.0) + (0.75, 0.5)
    back_uv = np.concatenate([back_disc.reshape(-1, 2), [[0.75, 0.5]]])
    nfu = len(front_uv)

    tf = vid

    def tb(k, j):
        return nfu + (k - eq) * segments + (j % segments)

    back_pole_t = nfu + len(back_uv) - 1
    faces, uvf = [], []
    for j in range(segments):
        faces.append((0, vid(0, j), vid(0, j + 1)))
        uvf.append((0, tf(0, j), tf(0, j + 1)))
    for k in range(rings - 1):
        t = tf if k + 1 <= eq else tb
        for j in range(segments):
            a, b, c, d = vid(k, j), vid(k + 1, j), vid(k + 1, j + 1), vid(k, j + 1)
            ta, tb_, tc, td = t(k, j), t(k + 1, j), t(k + 1, j + 1), t(k, j + 1)
            faces += [(a, b, c), (a, c, d)]
            uvf += [(ta, tb_, tc), (ta, tc, td)]
    k = rings - 1
    for j in range(segments):
        faces.append((vid(k, j), back_pole, vid(k, j + 1)))
        uvf.append((tb(k, j), back_pole_t, tb(k, j + 1)))
    return Mesh(pos, np.concatenate([front_uv, back_uv]), np.array(faces), np.array(uvf))


def uv_sphere(rings=31, segments=48, radius=1.0):
    return polar_sphere(rings, segments, (radius, radius, radius))


def body_fixture():
    """6890 vertices / 13776 faces: the SMPL template's counts, body-sized (1.7 units tall)."""
    return polar_sphere(123, 56, radii=(0.3, 0.85, 0.16))


def camera_pair(kind="weak", width=512, height=512, extent=2.2, distance=4.0, elevation=0.0, fov_deg=40.0):
    """Front (looking along -z) and back (along +z) cameras aimed at the origin.

    `extent` is the scene size that fills the shorter image side; a positive
    elevation tilts both cameras to look down on the subject.
    """
    tilt = rot_x(elevation)
    cams = []
    for base in (FRONT_R, BACK_R):
        R = tilt @ base
        if kind == "weak":
            s = min(width, height) / extent
            cams.append(WeakPerspectiveCamera(s, width / 2, height / 2, width, height, R))
        else:
            axis = R.T @ np.array([0.0, 0.0, 1.0])
            C = -axis * distance
            f = (min(width, height) / 2) / math.tan(math.radians(fov_deg) / 2)
            cams.append(PerspectiveCamera(f, f, width / 2, height / 2, R, -R @ C, width, height))
    return tuple(cams)


def checker(uv, cells=8, colours=((0.8, 0.15, 0.1), (0.1, 0.35, 0.85))):
    """Procedural checkerboard in linear RGB over [0,1]^2."""
    uv = np.asarray(uv, dtype=np.float64)
    idx = (np.floor(uv[..., 0] * cells) + np.floor(uv[..., 1] * cells)).astype(np.int64) % 2
    return np.asarray(colours, dtype=np.float64)[idx]


def render(mesh, camera, texture_fn, background=(0.0, 0.0, 0.0)):
    """Render `mesh` with colour texture_fn(uv) (linear RGB) through the z-buffer.

    Returns (rgb H x W x 3, alpha H x W). Each pixel's UV comes from
    intersecting its ray with the visible face's plane.
    """
    buf = rasterize_depth(mesh, camera)
    h, w = buf.height, buf.width
    img = np.broadcast_to(np.asarray(background, dtype=np.float64), (h, w, 3)).copy()
    hit = buf.face_id >= 0
    iy, ix = np.nonzero(hit)
    f = buf.face_id[iy, ix]
    P = camera.to_camera(mesh.positions)[mesh.faces[f]]  # (N, 3, 3) camera frame
    if isinstance(camera, PerspectiveCamera):
        d = np.stack([(ix + 0.5 - camera.cx) / camera.fx, (iy + 0.5 - camera.cy) / camera.fy, np.ones(len(f))], 1)
        o = np.zeros_like(d)
    else:
        o = np.stack([(ix + 0.5 - camera.tx) / camera.scale, (iy + 0.5 - camera.ty) / camera.scale, np.zeros(len(f))], 1)
        d = np.broadcast_to([0.0, 0.0, 1.0], o.shape)
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    pv = np.cross(d, e2)
    det = (e1 * pv).sum(1)
    det = np.where(np.abs(det) > 1e-300, det, 1e-300)
    tv = o - P[:, 0]
    b1 = (tv * pv).sum(1) / det
    b2 = (d * np.cross(tv, e1)).sum(1) / det
    lam = np.stack([1 - b1 - b2, b1, b2], 1)
    uv = np.einsum("nk,nkd->nd", lam, mesh.uvs[mesh.uv_faces[f]])
    img[iy, ix] = texture_fn(uv)
    return img, hit.astype(np.float64)


def write_scene(directory, mesh, cameras, images, resolution=256, inpaint="pullpush", masks=None, **bake):
    """Write OBJ, fit files, PNG images and a pipeline config; returns the config path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_obj(d / "mesh.obj", mesh)
    cfg = {"mesh": "mesh.obj", "fits": {}, "images": {}, "resolution": resolution,
           "inpaint": inpaint, "output_dir": "out"}
    for view, cam, img in zip(("front", "back"), cameras, images):
        alpha = None if masks is None else masks[view]
        write_rgb(d / f"{view}.png", img, alpha=alpha)
        save_fit(d / f"{view}_fit.json", view, cam, f"{view}.png")
        cfg["fits"][view] = f"{view}_fit.json"
        cfg["images"][view] = f"{view}.png"
    if bake:
        cfg["bake"] = bake
    path = d / "config.json"
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path
