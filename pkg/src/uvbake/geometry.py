"""Mesh and camera model, OBJ / fit-file ingestion, projection and barycentrics."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from uvbake.errors import BehindCameraError, DegenerateError, MeshFormatError, ValidationError

log = logging.getLogger(__name__)

# camera-space z at or below this is "behind" a perspective camera
NEAR_Z = 1e-9
UV_TOL = 1e-7
DEFAULT_NORMAL = (0.0, 0.0, 1.0)


def _normalize_rows(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    out = np.zeros_like(v)
    np.divide(v, n, out=out, where=n > 0)
    return out, n[..., 0]


def _area_weighted_normals(positions, faces):
    """Return (unit normals, indices of vertices that fell back to the default)."""
    p = positions[faces]
    # unnormalised cross product: magnitude = 2 * area, so zero-area faces add nothing
    fn = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    acc = np.zeros_like(positions)
    for k in range(3):
        np.add.at(acc, faces[:, k], fn)
    normals, length = _normalize_rows(acc)
    bad = np.flatnonzero(length <= 1e-300)
    normals[bad] = DEFAULT_NORMAL
    return normals, bad


@dataclass(eq=False)
class Mesh:
    """Triangle mesh with a separate UV index per face corner.

    positions (V, 3), uvs (T, 2), faces (F, 3) position indices,
    uv_faces (F, 3) uv indices. Vertex normals are derived on construction.
    """

    positions: np.ndarray
    uvs: np.ndarray
    faces: np.ndarray
    uv_faces: np.ndarray
    vertex_normals: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.uv_faces = np.ascontiguousarray(self.uv_faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.shape != self.uv_faces.shape:
            raise ValidationError("faces and uv_faces must have the same shape")
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.positions):
                raise ValidationError("face position index out of range")
            if self.uv_faces.min() < 0 or self.uv_faces.max() >= len(self.uvs):
                raise ValidationError("face uv index out of range")
        if len(self.uvs) and (self.uvs.min() < -UV_TOL or self.uvs.max() > 1 + UV_TOL):
            raise ValidationError("uv coordinates must lie in [0,1]^2")
        self.uvs = np.clip(self.uvs, 0.0, 1.0)
        if self.vertex_normals is None:
            self.vertex_normals = compute_vertex_normals(self)
        else:
            self.vertex_normals = np.ascontiguousarray(self.vertex_normals, dtype=np.float64)

    @property
    def n_faces(self):
        return len(self.faces)

    def same_atlas(self, other):
        return (
            np.array_equal(self.uv_faces, other.uv_faces)
            and np.array_equal(self.uvs, other.uvs)
            and np.array_equal(self.faces, other.faces)
        )

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0), scale=1.0):
        """Copy with positions mapped through x -> scale * R x + t."""
        R = np.asarray(rotation, dtype=np.float64)
        pos = scale * self.positions @ R.T + np.asarray(translation, dtype=np.float64)
        return Mesh(pos, self.uvs.copy(), self.faces.copy(), self.uv_faces.copy())


def compute_vertex_normals(mesh):
    """Area-weighted vertex normals.

    Vertices whose incident faces are all degenerate (or that have no faces)
    get (0, 0, 1); a warning is logged and appended to ``mesh.warnings``.
    """
    if len(mesh.faces) == 0:
        raise ValidationError("mesh has no faces")
    normals, bad = _area_weighted_normals(mesh.positions, mesh.faces)
    if len(bad):
        msg = f"{len(bad)} vertices have no non-degenerate incident face; normal set to (0,0,1)"
        log.warning(msg)
        mesh.warnings.append(msg)
    return normals


def _parse_index(tok, count, lineno, path, kind):
    try:
        i = int(tok)
    except ValueError:
        raise MeshFormatError(f"bad {kind} index {tok!r}", path, lineno) from None
    if i < 0:
        i = count + i + 1
    if i < 1 or i > count:
        raise MeshFormatError(f"{kind} index {tok} out of range (have {count})", path, lineno)
    return i - 1


def load_mesh(path):
    """Read a Wavefront OBJ whose faces carry UV indices.

    Quads are fan-triangulated as (0,1,2), (0,2,3). Normals in the file are
    ignored; vertex normals are recomputed from geometry.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshFormatError("file not found", path)
    positions, uvs, faces, uv_faces = [], [], [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            tag = toks[0]
            if tag == "v":
                try:
                    positions.append([float(t) for t in toks[1:4]])
                except ValueError:
                    raise MeshFormatError("bad vertex record", path, lineno) from None
                if len(positions[-1]) != 3:
                    raise MeshFormatError("vertex needs 3 coordinates", path, lineno)
            elif tag == "vt":
                try:
                    uv = [float(t) for t in toks[1:3]]
                except ValueError:
                    raise MeshFormatError("bad texture coordinate record", path, lineno) from None
                if len(uv) != 2:
                    raise MeshFormatError("texture coordinate needs u and v", path, lineno)
                if not all(-UV_TOL <= c <= 1 + UV_TOL for c in uv):
                    raise MeshFormatError(f"uv {uv} outside [0,1]^2", path, lineno)
                uvs.append(uv)
            elif tag == "f":
                corners = toks[1:]
                if len(corners) not in (3, 4):
                    raise MeshFormatError(f"{len(corners)}-gon faces are not supported", path, lineno)
                pi, ti = [], []
                for c in corners:
                    parts = c.split("/")
                    if len(parts) < 2 or parts[1] == "":
                        raise MeshFormatError(f"face corner {c!r} lacks a uv index", path, lineno)
                    pi.append(_parse_index(parts[0], len(positions), lineno, path, "position"))
                    ti.append(_parse_index(parts[1], len(uvs), lineno, path, "uv"))
                for a, b in ((1, 2), (2, 3))[: len(corners) - 2]:
                    faces.append((pi[0], pi[a], pi[b]))
                    uv_faces.append((ti[0], ti[a], ti[b]))
    if not faces:
        raise MeshFormatError("no faces", path)
    return Mesh(
        np.array(positions, dtype=np.float64),
        np.clip(np.array(uvs, dtype=np.float64), 0.0, 1.0),
        np.array(faces, dtype=np.int64),
        np.array(uv_faces, dtype=np.int64),
    )


def save_obj(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        for p in mesh.positions:
            fh.write("v %.17g %.17g %.17g\n" % tuple(p))
        for t in mesh.uvs:
            fh.write("vt %.17g %.17g\n" % tuple(t))
        for f, t in zip(mesh.faces + 1, mesh.uv_faces + 1):
            fh.write("f %d/%d %d/%d %d/%d\n" % (f[0], t[0], f[1], t[1], f[2], t[2]))


# -- cameras -----------------------------------------------------------------


def _check_rotation(R):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError("rotation must be 3x3")
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
        raise ValidationError("rotation must be orthonormal with det +1")
    return R


def _check_size(width, height):
    if int(width) < 1 or int(height) < 1:
        raise ValidationError("image size must be at least 1x1")


@dataclass(frozen=True, eq=False)
class PerspectiveCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        _check_size(self.width, self.height)
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @property
    def center(self):
        return -self.rotation.T @ self.translation

    def to_camera(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def project_points(self, points):
        """Vectorised projection: (pixels (N,2), depth (N,), in_front (N,) bool)."""
        pc = self.to_camera(points)
        z = pc[..., 2]
        in_front = z > NEAR_Z
        zs = np.where(in_front, z, 1.0)
        px = np.stack([self.fx * pc[..., 0] / zs + self.cx, self.fy * pc[..., 1] / zs + self.cy], axis=-1)
        return px, z, in_front

    def view_directions(self, points):
        """Unit vectors from the camera centre to each point (world frame)."""
        d, n = _normalize_rows(np.asarray(points, dtype=np.float64) - self.center)
        return d, n

    def to_dict(self):
        return {
            "type": "perspective",
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "rotation": self.rotation.tolist(), "translation": self.translation.tolist(),
            "width": int(self.width), "height": int(self.height),
        }


@dataclass(frozen=True, eq=False)
class WeakPerspectiveCamera:
    """Scaled orthographic camera: pixel = s * (R p)_xy + (tx, ty).

    The rotation is an optional extension (identity by default) so that a
    single posed mesh can be viewed from behind.
    """

    scale: float
    tx: float
    ty: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError("weak-perspective scale must be positive")
        _check_size(self.width, self.height)
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))

    @property
    def axis(self):
        """Viewing direction (camera towards scene) in the world frame."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])

    def to_camera(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T

    def project_points(self, points):
        pc = self.to_camera(points)
        px = np.stack([self.scale * pc[..., 0] + self.tx, self.scale * pc[..., 1] + self.ty], axis=-1)
        return px, pc[..., 2], np.ones(pc.shape[:-1], dtype=bool)

    def view_directions(self, points):
        pts = np.asarray(points, dtype=np.float64)
        d = np.broadcast_to(self.axis, pts.shape).copy()
        return d, np.ones(pts.shape[:-1])

    def to_dict(self):
        return {
            "type": "weak_perspective",
            "scale": self.scale, "tx": self.tx, "ty": self.ty,
            "rotation": self.rotation.tolist(),
            "width": int(self.width), "height": int(self.height),
        }


def project(camera, point):
    """Project one point; returns ((x, y) pixel, depth)."""
    px, depth, in_front = camera.project_points(np.asarray(point, dtype=np.float64)[None])
    if not in_front[0]:
        raise BehindCameraError(f"point {tuple(point)} is behind camera (z={depth[0]:.3g})")
    return (float(px[0, 0]), float(px[0, 1])), float(depth[0])


def view_vector(camera, point):
    """Unit direction from the camera towards `point` (the view axis for weak perspective).

    Callers wanting an incidence angle use the negation: a surface whose
    normal faces the camera has normal . (-v) = 1.
    """
    d, n = camera.view_directions(np.asarray(point, dtype=np.float64)[None])
    if n[0] <= 1e-12:
        raise DegenerateError("point coincides with the camera centre")
    return tuple(float(c) for c in d[0])


def camera_from_dict(d):
    d = dict(d)
    kind = d.pop("type", None)
    try:
        if kind == "perspective":
            return PerspectiveCamera(
                float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                np.asarray(d.get("rotation", np.eye(3)), dtype=np.float64),
                np.asarray(d.get("translation", (0.0, 0.0, 0.0)), dtype=np.float64),
                int(d["width"]), int(d["height"]),
            )
        if kind == "weak_perspective":
            return WeakPerspectiveCamera(
                float(d["scale"]), float(d.get("tx", 0.0)), float(d.get("ty", 0.0)),
                int(d["width"]), int(d["height"]),
                np.asarray(d.get("rotation", np.eye(3)), dtype=np.float64),
            )
    except KeyError as exc:
        raise ValidationError(f"camera of type {kind!r} is missing key {exc.args[0]!r}") from None
    raise ValidationError(f"unknown camera type {kind!r} (expected perspective or weak_perspective)")


@dataclass(frozen=True)
class Fit:
    view: str
    camera: object
    image: Optional[Path] = None


def load_fit(path):
    """Read a fit file: {"view": "front"|"back", "camera": {...}, "image": path}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"fit file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    view = doc.get("view")
    if view not in ("front", "back"):
        raise ValidationError(f"{path}: view must be 'front' or 'back', got {view!r}")
    if "camera" not in doc:
        raise ValidationError(f"{path}: missing 'camera'")
    image = doc.get("image")
    if image is not None:
        image = Path(image)
        if not image.is_absolute():
            image = path.parent / image
    return Fit(view, camera_from_dict(doc["camera"]), image)


def save_fit(path, view, camera, image=None):
    doc = {"view": view, "camera": camera.to_dict()}
    if image is not None:
        doc["image"] = str(image)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


# -- barycentrics ------------------------------------------------------------


def barycentric(tri, p):
    """Barycentric coordinates of 2D point p in triangle tri = (a, b, c)."""
    (x0, y0), (x1, y1), (x2, y2) = [(float(a), float(b)) for a, b in tri]
    px, py = float(p[0]), float(p[1])
    d = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    if abs(d) * 0.5 <= 1e-12:
        raise DegenerateError("degenerate face")
    l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / d
    l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / d
    return l0, l1, 1.0 - l0 - l1


def rotation_about(axis, angle):
    """Rodrigues rotation matrix."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K
