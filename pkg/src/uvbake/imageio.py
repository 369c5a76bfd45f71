"""Colour transfer functions and PNG reading/writing.

Colour is kept in linear [0, 1] floats internally; PNGs are 8-bit sRGB.
Texture-space arrays are indexed [iy, ix] with texel centre
v = (iy + 0.5) / res, so rows are flipped on the way to and from PNG to
keep v = 1 at the top of the file like every texture viewer expects.
"""

import numpy as np
from PIL import Image


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


_DECODE_LUT = srgb_to_linear(np.arange(256) / 255.0)


def decode_u8(arr):
    """8-bit sRGB codes -> linear floats."""
    return _DECODE_LUT[np.asarray(arr, dtype=np.uint8)]


def encode_u8(arr):
    """Linear floats -> 8-bit sRGB codes."""
    return np.round(linear_to_srgb(arr) * 255.0).astype(np.uint8)


def read_rgba(path):
    """Load a PNG as (linear rgb float64 HxWx3, alpha float64 HxW or None)."""
    with Image.open(path) as im:
        im.load()
        has_alpha = im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info)
        data = np.asarray(im.convert("RGBA" if has_alpha else "RGB"))
    rgb = decode_u8(data[..., :3])
    alpha = data[..., 3].astype(np.float64) / 255.0 if has_alpha else None
    return rgb, alpha


def read_mask(path):
    """Load a mask image as floats in [0, 1]: alpha channel if present, else luminance."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("RGBA", "LA"):
            data = np.asarray(im.getchannel("A"))
        else:
            data = np.asarray(im.convert("L"))
    return data.astype(np.float64) / 255.0


def write_rgb(path, rgb, alpha=None, flip=False):
    data = encode_u8(rgb)
    if alpha is not None:
        a = np.asarray(alpha)
        if a.dtype != np.uint8:
            a = np.round(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)
        data = np.concatenate([data, a[..., None]], axis=-1)
    if flip:
        data = data[::-1]
    Image.fromarray(np.ascontiguousarray(data), "RGBA" if alpha is not None else "RGB").save(path)


def write_gray16(path, values, flip=False):
    """Values in [0, 1] scaled by 65535 into a 16-bit grayscale PNG."""
    data = np.round(np.clip(values, 0.0, 1.0) * 65535.0).astype(np.uint16)
    if flip:
        data = data[::-1]
    Image.fromarray(np.ascontiguousarray(data)).save(path)


def read_gray16(path, flip=False):
    with Image.open(path) as im:
        data = np.asarray(im).astype(np.float64) / 65535.0
    return data[::-1].copy() if flip else data


def write_bitmask(path, mask, flip=False):
    data = np.asarray(mask, dtype=bool)
    if flip:
        data = data[::-1]
    Image.fromarray(np.ascontiguousarray(data)).convert("1").save(path)


def read_bitmask(path, flip=False):
    with Image.open(path) as im:
        data = np.asarray(im.convert("L")) > 127
    return data[::-1].copy() if flip else data
