"""Fusion of the two per-view bakes and deterministic hole filling."""

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from uvbake import imageio
from uvbake.errors import UvbakeError, ValidationError


class Provenance(IntEnum):
    EMPTY = 0
    FRONT = 1
    BACK = 2
    BOTH = 3
    INPAINTED = 4


# palette of the indexed provenance PNG, by Provenance value
PALETTE = {
    Provenance.EMPTY: (0, 0, 0),
    Provenance.FRONT: (230, 97, 1),
    Provenance.BACK: (94, 60, 153),
    Provenance.BOTH: (253, 184, 99),
    Provenance.INPAINTED: (178, 171, 210),
}


class InpaintError(UvbakeError, RuntimeError):
    pass


@dataclass(eq=False)
class FusedTexture:
    resolution: int
    rgb: np.ndarray  # (R, R, 3) linear
    provenance: np.ndarray  # (R, R) uint8 Provenance values
    fill_domain: np.ndarray  # (R, R) bool, texels eligible for inpainting

    def counts(self):
        return {p.name.lower(): int((self.provenance == p).sum()) for p in Provenance}


def _check_pair(a, b):
    if a.resolution != b.resolution or a.valid.shape != b.valid.shape:
        raise ValidationError(f"resolution mismatch: {a.resolution} vs {b.resolution}")


def overlap_mask(a, b):
    _check_pair(a, b)
    return a.valid & b.valid


def fuse(a, b, mode="blend"):
    """Merge front bake `a` and back bake `b`.

    ``blend`` takes the weight-normalised mean on the overlap; ``select``
    keeps the higher-weight view there (front on ties).
    """
    _check_pair(a, b)
    if mode not in ("blend", "select"):
        raise ValidationError(f"unknown fusion mode {mode!r}")
    both = a.valid & b.valid
    only_a = a.valid & ~b.valid
    only_b = b.valid & ~a.valid
    rgb = np.zeros_like(a.rgb)
    rgb[only_a] = a.rgb[only_a]
    rgb[only_b] = b.rgb[only_b]
    wa = a.weight[both][:, None]
    wb = b.weight[both][:, None]
    if mode == "blend":
        rgb[both] = (wa * a.rgb[both] + wb * b.rgb[both]) / (wa + wb)
    else:
        rgb[both] = np.where(wa >= wb, a.rgb[both], b.rgb[both])
    prov = np.full(a.valid.shape, Provenance.EMPTY, dtype=np.uint8)
    prov[only_a] = Provenance.FRONT
    prov[only_b] = Provenance.BACK
    prov[both] = Provenance.BOTH
    return FusedTexture(a.resolution, rgb, prov, a.footprint | b.footprint)


def _down(c, w):
    """One pull step: 2x2 weighted average; weight = number of known children (capped at 1)."""
    h2, w2 = c.shape[0] // 2, c.shape[1] // 2
    cw = (c * w[..., None]).reshape(h2, 2, w2, 2, -1).sum(axis=(1, 3))
    ws = w.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    out = np.zeros_like(cw)
    np.divide(cw, ws[..., None], out=out, where=ws[..., None] > 0)
    return out, np.minimum(ws, 1.0)


def _up(c, shape):
    """Bilinear 2x upsample with texel centres aligned and clamp-to-edge."""
    h, w = shape
    hc, wc = c.shape[:2]
    y = (np.arange(h) + 0.5) / 2 - 0.5
    x = (np.arange(w) + 0.5) / 2 - 0.5
    y0 = np.floor(y).astype(np.int64)
    x0 = np.floor(x).astype(np.int64)
    ty = (y - y0)[:, None, None]
    tx = (x - x0)[None, :, None]
    ya, yb = np.clip(y0, 0, hc - 1), np.clip(y0 + 1, 0, hc - 1)
    xa, xb = np.clip(x0, 0, wc - 1), np.clip(x0 + 1, 0, wc - 1)
    top = c[ya][:, xa] * (1 - tx) + c[ya][:, xb] * tx
    bot = c[yb][:, xa] * (1 - tx) + c[yb][:, xb] * tx
    return top * (1 - ty) + bot * ty


def pull_push(rgb, known):
    """Fill every texel of `rgb` from the `known` texels; known texels are returned untouched."""
    h, w = known.shape
    size = 1 << max(0, int(np.ceil(np.log2(max(h, w, 1)))))
    c = np.zeros((size, size, rgb.shape[-1]))
    c[:h, :w] = rgb
    wt = np.zeros((size, size))
    wt[:h, :w] = known
    levels = [(c, wt)]
    while levels[-1][0].shape[0] > 1:
        levels.append(_down(*levels[-1]))
    filled = levels[-1][0]
    for c, wt in reversed(levels[:-1]):
        up = _up(filled, wt.shape)
        filled = np.where(wt[..., None] > 0, c, up)
    out = np.clip(filled[:h, :w], 0.0, 1.0)
    out[known] = rgb[known]
    return out


def inpaint_pullpush(tex, fill_domain=None):
    """Fill eligible empty texels by pull-push over the non-empty ones."""
    domain = tex.fill_domain if fill_domain is None else np.asarray(fill_domain, dtype=bool)
    known = tex.provenance != Provenance.EMPTY
    target = domain & ~known
    if not target.any() or not known.any():
        return replace(tex, rgb=tex.rgb.copy(), provenance=tex.provenance.copy())
    filled = pull_push(tex.rgb, known)
    rgb = tex.rgb.copy()
    rgb[target] = filled[target]
    prov = tex.provenance.copy()
    prov[target] = Provenance.INPAINTED
    return FusedTexture(tex.resolution, rgb, prov, domain.copy())


def write_inpaint_inputs(tex, target, color_png, mask_png):
    """External inpainting inputs: RGBA colour (alpha 0 where no data) and a fill mask (255 = fill)."""
    known = tex.provenance != Provenance.EMPTY
    imageio.write_rgb(color_png, tex.rgb, alpha=np.where(known, 255, 0).astype(np.uint8), flip=True)
    imageio.write_bitmask(mask_png, target, flip=True)


def inpaint_external(tex, command, fill_domain=None, timeout=None):
    """Run ``<command> <color.png> <mask.png> <out.png>`` and take its output on empty texels."""
    domain = tex.fill_domain if fill_domain is None else np.asarray(fill_domain, dtype=bool)
    target = domain & (tex.provenance == Provenance.EMPTY)
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    if not argv:
        raise InpaintError("empty inpainting command")
    with tempfile.TemporaryDirectory(prefix="uvbake-inpaint-") as tmp:
        tmp = Path(tmp)
        color, mask, out = tmp / "color.png", tmp / "mask.png", tmp / "out.png"
        write_inpaint_inputs(tex, target, color, mask)
        try:
            proc = subprocess.run(
                argv + [str(color), str(mask), str(out)], capture_output=True, text=True, timeout=timeout
            )
        except FileNotFoundError:
            raise InpaintError(f"inpainting command not found: {argv[0]}") from None
        if proc.returncode != 0:
            raise InpaintError(
                f"inpainting command exited with status {proc.returncode}: {proc.stderr.strip()}"
            )
        try:
            rgb, _ = imageio.read_rgba(out)
        except Exception as exc:
            raise InpaintError(f"malformed inpainting output: {exc}") from None
    rgb = rgb[::-1]
    if rgb.shape[:2] != tex.provenance.shape:
        raise InpaintError(
            f"inpainting output is {rgb.shape[1]}x{rgb.shape[0]}, expected {tex.resolution}x{tex.resolution}"
        )
    out_rgb = tex.rgb.copy()
    out_rgb[target] = rgb[target]
    prov = tex.provenance.copy()
    prov[target] = Provenance.INPAINTED
    return FusedTexture(tex.resolution, out_rgb, prov, domain.copy())


def pullpush_files(color_png, mask_png, out_png):
    """Reference external inpainter over the PNG contract (used by ``uvbake-pullpush``)."""
    rgb, alpha = imageio.read_rgba(color_png)
    rgb = rgb[::-1]
    fill = imageio.read_bitmask(mask_png, flip=True)
    known = alpha[::-1] > 0.5 if alpha is not None else ~fill
    filled = pull_push(rgb, known & ~fill)
    out = np.where(fill[..., None], filled, rgb)
    imageio.write_rgb(out_png, out, flip=True)
