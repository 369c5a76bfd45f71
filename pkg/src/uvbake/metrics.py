"""Self-consistency texture metrics (MPAE, OCE) and pose metrics (MPJPE, PA-MPJPE)."""

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from uvbake.errors import DegenerateError, EmptySetError, ValidationError
from uvbake.imageio import linear_to_srgb

LUMA = np.array([0.2126, 0.7152, 0.0722])
ATTRIBUTES = ("luma", "luma_linear", "r", "g", "b")


def _sum(x):
    # numpy's pairwise summation: order-independent of how callers chunk the data
    return float(np.sum(np.asarray(x, dtype=np.float64)))


def projection_angle(normal, view):
    """Angle between a unit normal and the unit surface-to-camera direction."""
    n = np.asarray(normal, dtype=np.float64)
    v = np.asarray(view, dtype=np.float64)
    for name, x in (("normal", n), ("view", v)):
        if abs(np.linalg.norm(x) - 1.0) > 1e-6:
            raise ValidationError(f"{name} vector is not unit length")
    return math.acos(min(1.0, max(-1.0, float(n @ v))))


def mpae(tex):
    """Mean incidence angle (radians) over the texels with a valid projection."""
    theta = np.arccos(np.clip(tex.cos_angle[tex.valid], -1.0, 1.0))
    if theta.size == 0:
        raise EmptySetError("no valid projections")
    return _sum(theta) / theta.size


def mpae_combined(a, b):
    """MPAE over texels valid in either view.

    A texel seen by both views contributes the mean of its two angles, so
    every texel counts once.
    """
    va, vb = a.valid, b.valid
    union = va | vb
    if not union.any():
        raise EmptySetError("no valid projections")
    ta = np.arccos(np.clip(a.cos_angle, -1.0, 1.0))
    tb = np.arccos(np.clip(b.cos_angle, -1.0, 1.0))
    theta = np.where(va & vb, 0.5 * (ta + tb), np.where(va, ta, tb))
    return _sum(theta[union]) / int(union.sum())


def attribute(rgb, which="luma"):
    """Per-texel scalar compared by OCE. Luma variants and channels are on a 0-255 scale."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if which == "luma":
        return (linear_to_srgb(rgb) @ LUMA) * 255.0
    if which == "luma_linear":
        return (np.clip(rgb, 0, 1) @ LUMA) * 255.0
    if which in ("r", "g", "b"):
        return linear_to_srgb(rgb[..., "rgb".index(which)]) * 255.0
    raise ValidationError(f"unknown attribute {which!r}; choose from {', '.join(ATTRIBUTES)}")


def oce(a, b, which="luma"):
    """Mean absolute attribute difference over texels valid in both views."""
    if a.valid.shape != b.valid.shape:
        raise ValidationError(f"resolution mismatch: {a.resolution} vs {b.resolution}")
    both = a.valid & b.valid
    n = int(both.sum())
    if n == 0:
        raise EmptySetError("no overlap")
    diff = np.abs(attribute(a.rgb[both], which) - attribute(b.rgb[both], which))
    return _sum(diff) / n


def _points(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"{name} must be a list of 3D points")
    return p


def mpjpe(pred, gt):
    pred, gt = _points(pred, "pred"), _points(gt, "gt")
    if len(pred) != len(gt):
        raise ValidationError(f"joint count mismatch: {len(pred)} vs {len(gt)}")
    if len(pred) == 0:
        raise ValidationError("no joints")
    return _sum(np.linalg.norm(pred - gt, axis=1)) / len(pred)


def procrustes_align(pred, gt):
    """Similarity (s, R, t) minimising sum |s R pred_i + t - gt_i|^2."""
    X, Y = _points(pred, "pred"), _points(gt, "gt")
    if len(X) != len(Y):
        raise ValidationError(f"joint count mismatch: {len(X)} vs {len(Y)}")
    if len(X) < 3:
        raise DegenerateError("need at least 3 points")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    sx = np.linalg.svd(Xc, compute_uv=False)
    sy = np.linalg.svd(Yc, compute_uv=False)
    if sx[0] <= 1e-12 or sx[1] <= 1e-9 * sx[0] or sy[0] <= 1e-12 or sy[1] <= 1e-9 * sy[0]:
        raise DegenerateError("point set is collinear or coincident")
    U, S, Vt = np.linalg.svd(Xc.T @ Yc)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ D @ U.T
    s = float(np.trace(np.diag(S) @ D) / (Xc ** 2).sum())
    t = my - s * R @ mx
    return s, R, t


def apply_similarity(s, R, t, points):
    return s * np.asarray(points, dtype=np.float64) @ np.asarray(R).T + t


def pa_mpjpe(pred, gt):
    s, R, t = procrustes_align(pred, gt)
    return mpjpe(apply_similarity(s, R, t, pred), gt)


@dataclass
class MetricsReport:
    mpae: float  # radians
    oce: Optional[float]  # attribute units, None when the views do not overlap
    coverage_front: float
    coverage_back: float
    coverage_overlap: float
    mpae_front: Optional[float] = None
    mpae_back: Optional[float] = None
    atlas_texels: int = 0
    valid_front: int = 0
    valid_back: int = 0
    overlap_texels: int = 0
    attribute: str = "luma"
    mpjpe: Optional[float] = None
    pa_mpjpe: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.mpae <= math.pi:
            raise ValueError(f"mpae {self.mpae} outside [0, pi]")
        if self.oce is not None and self.oce < 0:
            raise ValueError("oce must be non-negative")
        if self.coverage_overlap > min(self.coverage_front, self.coverage_back) + 1e-12:
            raise ValueError("overlap coverage exceeds a single view's coverage")

    def to_dict(self):
        return asdict(self)


def build_report(front, back, which="luma", joints=None):
    """Score a front/back pair; coverage fractions are relative to the atlas footprint."""
    if front.valid.shape != back.valid.shape:
        raise ValidationError(f"resolution mismatch: {front.resolution} vs {back.resolution}")
    footprint = front.footprint | back.footprint
    n_atlas = int(footprint.sum())
    both = front.valid & back.valid
    n_f, n_b, n_o = int(front.valid.sum()), int(back.valid.sum()), int(both.sum())
    denom = max(n_atlas, 1)
    report = MetricsReport(
        mpae=mpae_combined(front, back),
        oce=oce(front, back, which) if n_o else None,
        coverage_front=n_f / denom,
        coverage_back=n_b / denom,
        coverage_overlap=n_o / denom,
        mpae_front=mpae(front) if n_f else None,
        mpae_back=mpae(back) if n_b else None,
        atlas_texels=n_atlas,
        valid_front=n_f,
        valid_back=n_b,
        overlap_texels=n_o,
        attribute=which,
    )
    if joints is not None:
        pred, gt = joints
        report.mpjpe = mpjpe(pred, gt)
        report.pa_mpjpe = pa_mpjpe(pred, gt)
    return report


def _fmt(x, digits=4):
    return "n/a" if x is None else f"{x:.{digits}f}"


def format_table(report, label="uvbake", degrees=False):
    """Aligned plain-text table with the MPAE / OCE columns, plus coverage detail."""
    unit = "deg" if degrees else "rad"
    conv = (lambda x: None if x is None else math.degrees(x)) if degrees else (lambda x: x)
    cols = [
        ("Model", label),
        (f"MPAE ({unit}, lower is better)", _fmt(conv(report.mpae))),
        (f"OCE ({report.attribute}, lower is better)", _fmt(report.oce)),
    ]
    widths = [max(len(h), len(v)) for h, v in cols]
    lines = [
        "  ".join(h.ljust(w) for (h, _), w in zip(cols, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
        "  ".join(v.ljust(w) for (_, v), w in zip(cols, widths)).rstrip(),
        "",
    ]
    detail = [
        ("MPAE front", _fmt(conv(report.mpae_front))),
        ("MPAE back", _fmt(conv(report.mpae_back))),
        ("coverage front", _fmt(report.coverage_front)),
        ("coverage back", _fmt(report.coverage_back)),
        ("coverage overlap", _fmt(report.coverage_overlap)),
        ("atlas texels", str(report.atlas_texels)),
        ("MPJPE", _fmt(report.mpjpe, 6)),
        ("PA-MPJPE", _fmt(report.pa_mpjpe, 6)),
    ]
    w = max(len(k) for k, _ in detail)
    lines += [f"{k.ljust(w)}  {v}" for k, v in detail]
    return "\n".join(lines) + "\n"


CSV_FIELDS = (
    "label", "mpae", "oce", "mpae_front", "mpae_back", "coverage_front", "coverage_back",
    "coverage_overlap", "atlas_texels", "valid_front", "valid_back", "overlap_texels",
    "attribute", "mpjpe", "pa_mpjpe",
)


def csv_row(report, label="uvbake"):
    d = report.to_dict()
    d["label"] = label
    return {k: ("" if d[k] is None else d[k]) for k in CSV_FIELDS}
