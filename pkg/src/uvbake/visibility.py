"""Forward z-buffer rasterisation of the posed mesh into a camera image."""

from dataclasses import dataclass

import numpy as np

from uvbake import _raster
from uvbake.errors import ValidationError
from uvbake.geometry import PerspectiveCamera

DEFAULT_DEPTH_EPS = 1e-2


@dataclass(eq=False)
class DepthBuffer:
    width: int
    height: int
    depth: np.ndarray  # (H, W), +inf where empty
    face_id: np.ndarray  # (H, W), -1 where empty
    skipped_faces: int = 0

    def is_visible(self, pixels, depths, eps=DEFAULT_DEPTH_EPS):
        """Vectorised visibility test for continuous pixel coordinates (N, 2)."""
        pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
        depths = np.asarray(depths, dtype=np.float64).reshape(-1)
        ix = np.floor(pixels[:, 0])
        iy = np.floor(pixels[:, 1])
        inside = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out = np.zeros(len(depths), dtype=bool)
        i = np.flatnonzero(inside)
        stored = self.depth[iy[i].astype(np.int64), ix[i].astype(np.int64)]
        out[i] = depths[i] <= stored + eps
        return out


def is_visible(buffer, pixel, depth, eps=DEFAULT_DEPTH_EPS):
    if not eps > 0:
        raise ValueError("eps must be positive")
    return bool(buffer.is_visible([pixel], [depth], eps)[0])


def _owned(nx_, ny_):
    # top-left rule: an edge owns its boundary pixels when the triangle lies to
    # its right (inward normal +x) or below a horizontal edge (+y, image y down)
    return (nx_ > 0) | ((nx_ == 0) & (ny_ > 0))


def rasterize_depth(mesh, camera, width=None, height=None, workers=None):
    """Nearest-surface depth and face id at every pixel centre.

    Perspective depth is interpolated as 1/z in screen space (exact for planar
    faces); weak-perspective depth is interpolated linearly. Faces with any
    vertex behind a perspective camera are skipped and counted.
    """
    width = int(camera.width if width is None else width)
    height = int(camera.height if height is None else height)
    if width < 1 or height < 1:
        raise ValidationError("depth buffer must be at least 1x1")
    if mesh.n_faces == 0:
        raise ValidationError("mesh has no faces")

    px, z, in_front = camera.project_points(mesh.positions)
    perspective = isinstance(camera, PerspectiveCamera)
    fv = mesh.faces
    ok = in_front[fv].all(axis=1)
    skipped = int((~ok).sum())
    xs = px[fv, 0]
    ys = px[fv, 1]
    zs = z[fv]
    area2 = (xs[:, 1] - xs[:, 0]) * (ys[:, 2] - ys[:, 0]) - (ys[:, 1] - ys[:, 0]) * (xs[:, 2] - xs[:, 0])
    ok &= np.abs(area2) > 1e-12
    sign = np.sign(area2)
    # inward normals of edges opposite each vertex: (b,c), (c,a), (a,b)
    owned = np.empty((len(fv), 3), dtype=bool)
    for k, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
        owned[:, k] = _owned(-sign * (ys[:, j] - ys[:, i]), sign * (xs[:, j] - xs[:, i]))
    active = np.flatnonzero(ok)
    x0, y0, nx, ny = _raster.bbox_ranges(xs[active], ys[active], width, height)

    def kernel(a, b):
        for f_loc, ix, iy in _raster.iter_candidates(np.arange(a, b), x0[a:b], y0[a:b], nx[a:b], ny[a:b]):
            f = active[f_loc]
            cx = ix + 0.5
            cy = iy + 0.5
            X, Y = xs[f], ys[f]
            lam = np.empty((len(f), 3))
            for k, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
                lam[:, k] = (X[:, j] - X[:, i]) * (cy - Y[:, i]) - (Y[:, j] - Y[:, i]) * (cx - X[:, i])
            lam /= area2[f][:, None]
            inside = ((lam > 0) | ((lam == 0) & owned[f])).all(axis=1)
            if not inside.any():
                continue
            lam, f, ix, iy = lam[inside], f[inside], ix[inside], iy[inside]
            Z = zs[f]
            if perspective:
                d = 1.0 / (lam / Z).sum(axis=1)
            else:
                d = (lam * Z).sum(axis=1)
            yield iy * width + ix, d, f

    res = _raster.rasterize_reduce(len(active), kernel, workers)
    depth = np.full(height * width, np.inf)
    face_id = np.full(height * width, -1, dtype=np.int64)
    if res is not None:
        pix, d, f = res
        depth[pix] = d
        face_id[pix] = f
    return DepthBuffer(width, height, depth.reshape(height, width), face_id.reshape(height, width), skipped)


def save_debug(buffer, depth_png, face_bin):
    """Depth normalised to 16-bit grayscale (empty = white); face ids as raw little-endian int32."""
    from PIL import Image

    d = buffer.depth
    finite = np.isfinite(d)
    out = np.full(d.shape, 65535, dtype=np.uint16)
    if finite.any():
        lo, hi = d[finite].min(), d[finite].max()
        span = hi - lo if hi > lo else 1.0
        out[finite] = np.round((d[finite] - lo) / span * 65534).astype(np.uint16)
    Image.fromarray(out).save(depth_png)
    buffer.face_id.astype("<i4").tofile(face_bin)
