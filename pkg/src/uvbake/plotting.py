"""Report figures rendered next to the JSON / text / CSV report."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from uvbake.imageio import linear_to_srgb  # noqa: E402

VIEW_COLOURS = {"front": "#e66101", "back": "#5e3c99", "overlap": "#fdb863"}
BACKGROUND = 0.35


def _preview(tex, max_side=512):
    step = max(1, tex.resolution // max_side)
    rgb = linear_to_srgb(tex.rgb[::step, ::step])
    rgb = np.where(tex.valid[::step, ::step, None], rgb, BACKGROUND)
    return rgb[::-1]  # v = 1 at the top


def report_figure(front, back, report, path, label="uvbake", degrees=False):
    """Baked views, incidence-angle histograms and coverage bars in one PNG."""
    conv = math.degrees if degrees else (lambda x: x)
    unit = "deg" if degrees else "rad"
    fig, axes = plt.subplots(2, 2, figsize=(9, 8))
    for ax, tex, name in ((axes[0, 0], front, "front"), (axes[0, 1], back, "back")):
        ax.imshow(_preview(tex), interpolation="nearest", extent=(0, 1, 0, 1))
        ax.set_title(f"{name} bake ({int(tex.valid.sum())} texels)")
        ax.set_xlabel("u")
        ax.set_ylabel("v")

    ax = axes[1, 0]
    bins = np.linspace(0, conv(math.pi / 2), 46)
    for tex, name, style in ((front, "front", "-"), (back, "back", "--")):
        theta = np.arccos(np.clip(tex.cos_angle[tex.valid], -1, 1))
        if theta.size:
            ax.hist(np.degrees(theta) if degrees else theta, bins=bins, histtype="step",
                    color=VIEW_COLOURS[name], label=name, linewidth=1.5, linestyle=style)
    ax.axvline(conv(report.mpae), color="k", linestyle=":", linewidth=1, label=f"MPAE {conv(report.mpae):.3f}")
    ax.set_xlabel(f"incidence angle ({unit})")
    ax.set_ylabel("texels")
    ax.legend(frameon=False)

    ax = axes[1, 1]
    names = ["front", "back", "overlap"]
    vals = [report.coverage_front, report.coverage_back, report.coverage_overlap]
    ax.bar(names, vals, color=[VIEW_COLOURS[n] for n in names])
    for i, v in enumerate(vals):
        ax.text(i, v + 0.01, f"{v:.3f}", ha="center", va="bottom", fontsize=9)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("fraction of atlas texels")
    oce = "n/a" if report.oce is None else f"{report.oce:.3f}"
    ax.set_title(f"OCE ({report.attribute}) = {oce}")

    fig.suptitle(f"{label}: MPAE {conv(report.mpae):.4f} {unit}, OCE {oce}")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
