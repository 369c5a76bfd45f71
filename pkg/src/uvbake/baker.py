"""Inverse rasterisation: bake one photograph into the mesh's UV atlas.

Every covered texel is lifted to its surface point, projected into the
view, tested for visibility and incidence, and coloured from the image.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from uvbake import _raster
from uvbake.errors import DegenerateError, ValidationError
from uvbake.parallel import map_chunks
from uvbake.visibility import DEFAULT_DEPTH_EPS

BARY_EPS = 1e-7
REJECT_CAUSES = ("behind_camera", "outside_image", "occluded", "masked", "grazing")


@dataclass(eq=False)
class UvCoverageMap:
    resolution: int
    face_id: np.ndarray  # (R, R) int64, -1 where uncovered
    bary: np.ndarray  # (R, R, 3)
    degenerate_faces: int = 0

    @property
    def footprint(self):
        return self.face_id >= 0


@dataclass(frozen=True)
class BakeParams:
    tau: float = 0.1
    weight_exponent: float = 2.0
    depth_eps: float = DEFAULT_DEPTH_EPS
    use_mask: bool = False

    def __post_init__(self):
        if not 0 <= self.tau < 1:
            raise ValidationError(f"tau must lie in [0, 1), got {self.tau}")
        if not self.weight_exponent >= 0:
            raise ValidationError(f"weight exponent must be >= 0, got {self.weight_exponent}")
        if not self.depth_eps > 0:
            raise ValidationError(f"depth eps must be positive, got {self.depth_eps}")

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class PartialTexture:
    """One view's bake. ``valid`` is the set of texels with a usable projection."""

    resolution: int
    rgb: np.ndarray  # (R, R, 3) linear
    weight: np.ndarray  # (R, R)
    cos_angle: np.ndarray  # (R, R)
    valid: np.ndarray  # (R, R) bool
    footprint: np.ndarray  # (R, R) bool, atlas coverage
    params: BakeParams = field(default_factory=BakeParams)
    stats: dict = field(default_factory=dict)
    view: str = ""


def uv_rasterize(mesh, resolution, workers=None):
    """Map every texel centre to (face, barycentrics) in the UV atlas.

    Texels on seams or shared edges go to the face in which they are most
    interior (largest minimum barycentric), lower face index on ties.
    """
    res = int(resolution)
    if res < 1:
        raise ValidationError("resolution must be >= 1")
    uv = mesh.uvs[mesh.uv_faces]  # (F, 3, 2)
    us, vs = uv[..., 0], uv[..., 1]
    d = (vs[:, 1] - vs[:, 2]) * (us[:, 0] - us[:, 2]) + (us[:, 2] - us[:, 1]) * (vs[:, 0] - vs[:, 2])
    ok = np.abs(d) * 0.5 > 1e-12
    active = np.flatnonzero(ok)
    pad = 1e-6
    x0, y0, nx, ny = _raster.bbox_ranges(
        np.concatenate([us[active] * res - pad, us[active] * res + pad], axis=1),
        np.concatenate([vs[active] * res - pad, vs[active] * res + pad], axis=1),
        res, res,
    )

    def kernel(a, b):
        for f_loc, ix, iy in _raster.iter_candidates(np.arange(a, b), x0[a:b], y0[a:b], nx[a:b], ny[a:b]):
            f = active[f_loc]
            pu = (ix + 0.5) / res
            pv = (iy + 0.5) / res
            U, V, D = us[f], vs[f], d[f]
            l0 = ((V[:, 1] - V[:, 2]) * (pu - U[:, 2]) + (U[:, 2] - U[:, 1]) * (pv - V[:, 2])) / D
            l1 = ((V[:, 2] - V[:, 0]) * (pu - U[:, 2]) + (U[:, 0] - U[:, 2]) * (pv - V[:, 2])) / D
            l2 = 1.0 - l0 - l1
            lo = np.minimum(np.minimum(l0, l1), l2)
            inside = lo >= -BARY_EPS
            if not inside.any():
                continue
            yield (
                (iy * res + ix)[inside], -lo[inside], f[inside],
                l0[inside], l1[inside], l2[inside],
            )

    out = _raster.rasterize_reduce(len(active), kernel, workers)
    face_id = np.full(res * res, -1, dtype=np.int64)
    bary = np.zeros((res * res, 3))
    if out is not None:
        pix, _, f, l0, l1, l2 = out
        face_id[pix] = f
        bary[pix] = np.stack([l0, l1, l2], axis=1)
    return UvCoverageMap(res, face_id.reshape(res, res), bary.reshape(res, res, 3), int((~ok).sum()))


def _surface(mesh, face_id, bary):
    """Positions and unit normals for arrays of (face, barycentric) samples."""
    fv = mesh.faces[face_id]  # (N, 3)
    pos = np.einsum("nk,nkd->nd", bary, mesh.positions[fv])
    nrm = np.einsum("nk,nkd->nd", bary, mesh.vertex_normals[fv])
    length = np.linalg.norm(nrm, axis=1)
    bad = length <= 1e-12
    if bad.any():
        # opposing vertex normals cancelled out: use the geometric face normal
        p = mesh.positions[fv[bad]]
        nrm[bad] = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        length[bad] = np.linalg.norm(nrm[bad], axis=1)
    nrm /= np.where(length > 0, length, 1.0)[:, None]
    return pos, nrm


def texel_geometry(mesh, coverage, texel):
    """Surface position and unit normal of texel (iy, ix)."""
    iy, ix = texel
    f = coverage.face_id[iy, ix]
    if f < 0:
        raise DegenerateError(f"no surface at texel {tuple(texel)}")
    pos, nrm = _surface(mesh, np.array([f]), coverage.bary[iy, ix][None])
    return pos[0], nrm[0]


def bilinear(image, px):
    """Bilinear lookup at continuous pixel coords (N, 2); centres at i + 0.5, clamp to edge."""
    h, w = image.shape[:2]
    x = px[:, 0] - 0.5
    y = px[:, 1] - 0.5
    xf = np.floor(x)
    yf = np.floor(y)
    tx = (x - xf)[:, None]
    ty = (y - yf)[:, None]
    x0 = np.clip(xf, 0, w - 1).astype(np.int64)
    x1 = np.clip(xf + 1, 0, w - 1).astype(np.int64)
    y0 = np.clip(yf, 0, h - 1).astype(np.int64)
    y1 = np.clip(yf + 1, 0, h - 1).astype(np.int64)
    img = image.reshape(h, w, -1)
    top = img[y0, x0] * (1 - tx) + img[y0, x1] * tx
    bot = img[y1, x0] * (1 - tx) + img[y1, x1] * tx
    return top * (1 - ty) + bot * ty


def sample_bilinear(image, pixel):
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise ValidationError("empty image")
    return tuple(float(c) for c in bilinear(image, np.asarray(pixel, dtype=np.float64).reshape(1, 2))[0])


def bake_view(mesh, camera, image, coverage, depth, params=None, mask=None, workers=None, view=""):
    """Bake `image` (linear RGB, H x W x 3) into a PartialTexture.

    ``mask`` is an optional H x W alpha in [0, 1]; it is honoured only when
    ``params.use_mask`` is set.
    """
    params = params or BakeParams()
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    if (depth.height, depth.width) != (h, w):
        raise ValidationError(f"depth buffer is {depth.width}x{depth.height}, image is {w}x{h}")
    if mask is not None and np.shape(mask)[:2] != (h, w):
        raise ValidationError(f"mask is {np.shape(mask)[1]}x{np.shape(mask)[0]}, image is {w}x{h}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError("image must be H x W x 3")
    res = coverage.resolution
    flat_face = coverage.face_id.reshape(-1)
    flat_bary = coverage.bary.reshape(-1, 3)
    covered = np.flatnonzero(flat_face >= 0)
    use_mask = params.use_mask and mask is not None

    def work(a, b):
        t = covered[a:b]
        pos, nrm = _surface(mesh, flat_face[t], flat_bary[t])
        px, z, in_front = camera.project_points(pos)
        dirs, _ = camera.view_directions(pos)
        cos = np.clip(-(nrm * dirs).sum(axis=1), -1.0, 1.0)
        reason = np.zeros(len(t), dtype=np.int8)  # 0 = valid, k = REJECT_CAUSES[k-1]

        def reject(cond, code):
            reason[(reason == 0) & cond] = code

        reject(~in_front, 1)
        inside = (px[:, 0] >= 0) & (px[:, 0] < w) & (px[:, 1] >= 0) & (px[:, 1] < h)
        reject(~inside, 2)
        live = reason == 0
        vis = np.zeros(len(t), dtype=bool)
        vis[live] = depth.is_visible(px[live], z[live], params.depth_eps)
        reject(~vis, 3)
        if use_mask:
            live = reason == 0
            ix = np.clip(np.floor(px[live, 0]), 0, w - 1).astype(np.int64)
            iy = np.clip(np.floor(px[live, 1]), 0, h - 1).astype(np.int64)
            m = np.zeros(len(t), dtype=bool)
            m[live] = mask[iy, ix] < 0.5
            reject(m, 4)
        reject((cos < params.tau) | (cos <= 0), 5)
        ok = reason == 0
        rgb = np.zeros((len(t), 3))
        rgb[ok] = np.clip(bilinear(image, px[ok]), 0.0, 1.0)
        wgt = np.zeros(len(t))
        wgt[ok] = cos[ok] ** params.weight_exponent
        return rgb, wgt, cos, ok, np.bincount(reason, minlength=len(REJECT_CAUSES) + 1)

    parts = map_chunks(work, len(covered), workers)
    n = res * res
    rgb = np.zeros((n, 3))
    weight = np.zeros(n)
    cos_angle = np.zeros(n)
    valid = np.zeros(n, dtype=bool)
    counts = np.zeros(len(REJECT_CAUSES) + 1, dtype=np.int64)
    if len(covered):
        rgb[covered] = np.concatenate([p[0] for p in parts])
        weight[covered] = np.concatenate([p[1] for p in parts])
        cos_angle[covered] = np.concatenate([p[2] for p in parts])
        valid[covered] = np.concatenate([p[3] for p in parts])
        counts = sum(p[4] for p in parts)
    stats = {"texels": n, "covered": int(len(covered)), "uncovered": int(n - len(covered)), "valid": int(counts[0])}
    stats.update({name: int(c) for name, c in zip(REJECT_CAUSES, counts[1:])})
    stats["skipped_faces"] = int(depth.skipped_faces)
    return PartialTexture(
        res,
        rgb.reshape(res, res, 3),
        weight.reshape(res, res),
        cos_angle.reshape(res, res),
        valid.reshape(res, res),
        coverage.footprint.copy(),
        params,
        stats,
        view,
    )
