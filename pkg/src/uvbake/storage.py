"""On-disk bundles for partial (``.ptx``) and fused (``.ftx``) textures.

A bundle is a directory. PNGs are the interchange format; the ``.npy``
arrays beside them keep the float data lossless so that chained CLI stages
reproduce an in-process run bit for bit. All files are written without
timestamps, so identical data gives identical bytes.
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

from uvbake import imageio
from uvbake.baker import BakeParams, PartialTexture
from uvbake.compose import PALETTE, FusedTexture, Provenance
from uvbake.errors import ValidationError


def _dump_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _save_npy(path, arr):
    with open(path, "wb") as fh:
        np.save(fh, np.ascontiguousarray(arr), allow_pickle=False)


def partial_files(tex):
    return ["color.png", "weight.png", "cos_angle.png", "valid.png", "atlas.png",
            "rgb.npy", "weight.npy", "cos_angle.npy", "bake.json"]


def save_partial(tex, path):
    """Write a PartialTexture bundle; returns the list of files written."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    shown = np.where(tex.valid[..., None], tex.rgb, 0.0)
    imageio.write_rgb(d / "color.png", shown, alpha=np.where(tex.valid, 255, 0).astype(np.uint8), flip=True)
    imageio.write_gray16(d / "weight.png", tex.weight, flip=True)
    imageio.write_gray16(d / "cos_angle.png", tex.cos_angle, flip=True)
    imageio.write_bitmask(d / "valid.png", tex.valid, flip=True)
    imageio.write_bitmask(d / "atlas.png", tex.footprint, flip=True)
    _save_npy(d / "rgb.npy", tex.rgb)
    _save_npy(d / "weight.npy", tex.weight)
    _save_npy(d / "cos_angle.npy", tex.cos_angle)
    _dump_json(d / "bake.json", {
        "format": "uvbake-partial-texture/1",
        "view": tex.view,
        "resolution": tex.resolution,
        "params": tex.params.to_dict(),
        "stats": tex.stats,
    })
    return [d / f for f in partial_files(tex)]


def load_partial(path):
    d = Path(path)
    meta_path = d / "bake.json"
    if not meta_path.is_file():
        raise ValidationError(f"not a partial-texture bundle: {d}")
    meta = json.loads(meta_path.read_text())
    res = int(meta["resolution"])
    valid = imageio.read_bitmask(d / "valid.png", flip=True)
    footprint = imageio.read_bitmask(d / "atlas.png", flip=True)
    if (d / "rgb.npy").is_file():
        rgb = np.load(d / "rgb.npy")
        weight = np.load(d / "weight.npy")
        cos_angle = np.load(d / "cos_angle.npy")
    else:
        rgb, _ = imageio.read_rgba(d / "color.png")
        rgb = rgb[::-1].copy()
        weight = imageio.read_gray16(d / "weight.png", flip=True)
        cos_angle = imageio.read_gray16(d / "cos_angle.png", flip=True)
    if valid.shape != (res, res) or rgb.shape != (res, res, 3):
        raise ValidationError(f"{d}: arrays do not match resolution {res}")
    weight = np.where(valid, weight, 0.0)
    return PartialTexture(res, rgb, weight, cos_angle, valid, footprint,
                          BakeParams(**meta.get("params", {})), meta.get("stats", {}), meta.get("view", ""))


def write_provenance_png(path, provenance):
    im = Image.fromarray(np.ascontiguousarray(provenance[::-1].astype(np.uint8)), "P")
    pal = []
    for p in Provenance:
        pal.extend(PALETTE[p])
    im.putpalette(pal + [0] * (768 - len(pal)))
    im.save(path)


def read_provenance_png(path):
    with Image.open(path) as im:
        if im.mode != "P":
            raise ValidationError(f"{path}: provenance map must be an indexed PNG")
        return np.asarray(im)[::-1].copy()


def save_fused(tex, path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    imageio.write_rgb(d / "texture.png", tex.rgb, flip=True)
    write_provenance_png(d / "provenance.png", tex.provenance)
    imageio.write_bitmask(d / "fill_domain.png", tex.fill_domain, flip=True)
    _save_npy(d / "rgb.npy", tex.rgb)
    _dump_json(d / "fused.json", {
        "format": "uvbake-fused-texture/1",
        "resolution": tex.resolution,
        "provenance_counts": tex.counts(),
        "palette": {p.name.lower(): list(PALETTE[p]) for p in Provenance},
    })
    return [d / f for f in ("texture.png", "provenance.png", "fill_domain.png", "rgb.npy", "fused.json")]


def load_fused(path):
    d = Path(path)
    meta_path = d / "fused.json"
    if not meta_path.is_file():
        raise ValidationError(f"not a fused-texture bundle: {d}")
    res = int(json.loads(meta_path.read_text())["resolution"])
    prov = read_provenance_png(d / "provenance.png")
    domain = imageio.read_bitmask(d / "fill_domain.png", flip=True)
    if (d / "rgb.npy").is_file():
        rgb = np.load(d / "rgb.npy")
    else:
        rgb, _ = imageio.read_rgba(d / "texture.png")
        rgb = rgb[::-1].copy()
    if prov.shape != (res, res) or rgb.shape != (res, res, 3):
        raise ValidationError(f"{d}: arrays do not match resolution {res}")
    return FusedTexture(res, rgb, prov, domain)
