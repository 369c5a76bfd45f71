"""End-to-end orchestration: prompts, per-view baking, fusion, inpainting, metrics."""

import csv
import json
import logging
import shutil
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from uvbake import compose, imageio, metrics, storage
from uvbake.baker import BakeParams, bake_view, uv_rasterize
from uvbake.errors import StageError, ValidationError
from uvbake.geometry import load_fit, load_mesh
from uvbake.visibility import rasterize_depth

log = logging.getLogger(__name__)

VIEWS = ("front", "back")
MAX_RESOLUTION = 4096

# Original wording; only the view clause differs between the two prompts.
PROMPT_TEMPLATE = (
    "A full-body, photo-realistic photograph of a {age} {area} {gender} with a {body_shape} "
    "body shape, working as a {profession} and wearing {clothing}, {view_clause}, standing "
    "upright in a relaxed A-pose with the arms held slightly away from the torso, the whole "
    "body visible from head to feet, plain light-grey studio background, soft even lighting, "
    "sharp focus, high resolution."
)
VIEW_CLAUSES = {
    "front": "front view, facing the camera",
    "back": "back view, facing away from the camera",
}


@dataclass(frozen=True)
class SubjectAttributes:
    gender: str
    body_shape: str
    age: str
    area: str
    profession: str
    clothing: str

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, str) or not value.strip():
                raise ValidationError(f"subject attribute '{f.name}' must be non-empty")


def build_prompts(attrs):
    """Fill the fixed template with the six attributes; returns (front, back)."""
    values = {f.name: getattr(attrs, f.name).strip() for f in fields(attrs)}
    return tuple(PROMPT_TEMPLATE.format(view_clause=VIEW_CLAUSES[v], **values) for v in VIEWS)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass
class PipelineConfig:
    meshes: dict
    fits: dict
    images: dict = field(default_factory=dict)
    masks: dict = field(default_factory=dict)
    resolution: int = 1024
    bake: BakeParams = field(default_factory=BakeParams)
    fusion: str = "blend"
    inpaint: str = "pullpush"
    inpaint_command: Optional[str] = None
    attribute: str = "luma"
    joints: Optional[tuple] = None
    label: str = "uvbake"
    degrees: bool = False
    figure: bool = True
    output_dir: Path = Path("out")

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        schema = json.loads(resources.files("uvbake").joinpath("config.schema.json").read_text())
        try:
            jsonschema.validate(doc, schema)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ValidationError(f"config {where}: {exc.message}") from None
        base = Path(base_dir)

        def p(x):
            x = Path(x)
            return x if x.is_absolute() else base / x

        mesh = doc["mesh"]
        meshes = {v: p(mesh) for v in VIEWS} if isinstance(mesh, str) else {v: p(mesh[v]) for v in VIEWS}
        inpaint = doc.get("inpaint", "pullpush")
        command = None
        if isinstance(inpaint, dict):
            inpaint, command = "external", inpaint["external"]
        joints = doc.get("joints")
        return cls(
            meshes=meshes,
            fits={v: p(doc["fits"][v]) for v in VIEWS},
            images={v: p(x) for v, x in doc.get("images", {}).items()},
            masks={v: p(x) for v, x in doc.get("masks", {}).items()},
            resolution=int(doc.get("resolution", 1024)),
            bake=BakeParams(**doc.get("bake", {})),
            fusion=doc.get("fusion", "blend"),
            inpaint=inpaint,
            inpaint_command=command,
            attribute=doc.get("attribute", "luma"),
            joints=None if joints is None else (p(joints["pred"]), p(joints["gt"])),
            label=doc.get("label", "uvbake"),
            degrees=bool(doc.get("degrees", False)),
            figure=bool(doc.get("figure", True)),
            output_dir=p(doc.get("output_dir", "out")),
        )

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ValidationError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc, path.parent)

    def validate(self):
        """Structural checks plus existence of mesh, fit and joint files.

        Image and mask paths are opened by the bake stage, which reports them
        under its own stage name.
        """
        if not _is_pow2(self.resolution) or self.resolution > MAX_RESOLUTION:
            raise ValidationError(f"resolution must be a power of two <= {MAX_RESOLUTION}, got {self.resolution}")
        if self.fusion not in ("blend", "select"):
            raise ValidationError(f"unknown fusion mode {self.fusion!r}")
        if self.inpaint not in ("pullpush", "none", "external"):
            raise ValidationError(f"unknown inpaint mode {self.inpaint!r}")
        if self.inpaint == "external" and not self.inpaint_command:
            raise ValidationError("external inpainting needs a command")
        if self.attribute not in metrics.ATTRIBUTES:
            raise ValidationError(f"unknown attribute {self.attribute!r}")
        required = [*self.meshes.values(), *self.fits.values(), *(self.joints or ())]
        for path in required:
            if not Path(path).is_file():
                raise ValidationError(f"file not found: {path}")
        return self


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except FileNotFoundError as exc:
        raise StageError(name, f"file not found: {exc.filename or exc}") from exc
    except Exception as exc:
        raise StageError(name, exc) from exc


def load_view_image(image_path, mask_path=None):
    """Linear RGB image plus the mask to honour (explicit mask, else the image's alpha)."""
    if image_path is None:
        raise ValidationError("no image given (neither in the config nor in the fit file)")
    if not Path(image_path).is_file():
        raise FileNotFoundError(2, "file not found", str(image_path))
    rgb, alpha = imageio.read_rgba(image_path)
    if mask_path is not None:
        if not Path(mask_path).is_file():
            raise FileNotFoundError(2, "file not found", str(mask_path))
        alpha = imageio.read_mask(mask_path)
    return rgb, alpha


def bake_from_files(mesh, fit, image_path, mask_path, coverage, params, depth=None, workers=None):
    image, mask = load_view_image(image_path, mask_path)
    cam = fit.camera
    if image.shape[:2] != (cam.height, cam.width):
        raise ValidationError(
            f"image is {image.shape[1]}x{image.shape[0]} but the {fit.view} camera expects {cam.width}x{cam.height}"
        )
    if depth is None:
        depth = rasterize_depth(mesh, cam, workers=workers)
    return bake_view(mesh, cam, image, coverage, depth, params, mask=mask, workers=workers, view=fit.view)


def apply_inpaint(fused, mode, command=None):
    if mode == "pullpush":
        return compose.inpaint_pullpush(fused)
    if mode == "external":
        return compose.inpaint_external(fused, command)
    if mode == "none":
        return fused
    raise ValidationError(f"unknown inpaint mode {mode!r}")


def load_joints(path):
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = doc.get("joints")
    arr = np.asarray(doc, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"{path}: expected a list of [x, y, z] joints")
    return arr


REPORT_FILES = ("report.json", "report.txt", "report.csv")


def write_report(out_dir, front, back, report, label="uvbake", degrees=False, figure=True):
    """report.json, report.txt (aligned table), report.csv and optionally report.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": "uvbake-report/1",
        "label": label,
        "units": {"mpae": "radians", "oce": f"{report.attribute} (0-255)", "mpjpe": "scene units"},
        "metrics": report.to_dict(),
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(metrics.format_table(report, label, degrees))
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=metrics.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(metrics.csv_row(report, label))
    written = [out / f for f in REPORT_FILES]
    if figure:
        from uvbake.plotting import report_figure

        report_figure(front, back, report, out / "report.png", label, degrees)
        written.append(out / "report.png")
    return written


class _Artifacts:
    """Tracks written outputs so a failed run can mark them ``.partial``."""

    def __init__(self):
        self.paths = []

    def add(self, paths):
        self.paths.extend(Path(p) for p in paths)

    def mark_partial(self):
        tops = []
        for p in self.paths:
            if p.exists() and p not in tops:
                tops.append(p)
        for p in tops:
            dest = p.with_name(p.name + ".partial")
            if dest.is_dir():
                shutil.rmtree(dest)
            elif dest.exists():
                dest.unlink()
            p.rename(dest)


def run_pipeline(config, workers=None):
    """Run load -> uv_rasterize -> per-view depth + bake -> fuse -> inpaint -> metrics.

    Writes front.ptx/, back.ptx/, fused.ftx/, texture.png, provenance.png
    and the report files into ``config.output_dir``; returns the MetricsReport.
    """
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = _Artifacts()
    try:
        meshes = {}
        with stage("load_mesh"):
            for v in VIEWS:
                path = config.meshes[v]
                same = [u for u in meshes if config.meshes[u] == path]
                meshes[v] = meshes[same[0]] if same else load_mesh(path)
            if not meshes["front"].same_atlas(meshes["back"]):
                raise ValidationError("per-view meshes must share topology and UV atlas")
        fits = {}
        for v in VIEWS:
            with stage(f"load_fit({v})"):
                fits[v] = load_fit(config.fits[v])
                if fits[v].view != v:
                    raise ValidationError(f"fit file {config.fits[v]} is for the {fits[v].view} view")
        with stage("uv_rasterize"):
            coverage = uv_rasterize(meshes["front"], config.resolution, workers)
            log.info("atlas covers %d texels (%d degenerate uv faces)",
                     int(coverage.footprint.sum()), coverage.degenerate_faces)
        partials = {}
        for v in VIEWS:
            fit = fits[v]
            with stage(f"rasterize_depth({v})"):
                depth = rasterize_depth(meshes[v], fit.camera, workers=workers)
            with stage(f"bake_view({v})"):
                partials[v] = bake_from_files(meshes[v], fit, config.images.get(v, fit.image), config.masks.get(v),
                                              coverage, config.bake, depth, workers)
                written.add([out / f"{v}.ptx"])
                storage.save_partial(partials[v], out / f"{v}.ptx")
                log.info("%s: %s", v, partials[v].stats)
        with stage("fuse"):
            fused = compose.fuse(partials["front"], partials["back"], config.fusion)
        with stage("inpaint"):
            fused = apply_inpaint(fused, config.inpaint, config.inpaint_command)
            written.add([out / "fused.ftx", out / "texture.png", out / "provenance.png"])
            storage.save_fused(fused, out / "fused.ftx")
            imageio.write_rgb(out / "texture.png", fused.rgb, flip=True)
            storage.write_provenance_png(out / "provenance.png", fused.provenance)
        with stage("metrics"):
            joints = None
            if config.joints is not None:
                joints = (load_joints(config.joints[0]), load_joints(config.joints[1]))
            report = metrics.build_report(partials["front"], partials["back"], config.attribute, joints)
            written.add([out / f for f in REPORT_FILES] + ([out / "report.png"] if config.figure else []))
            write_report(out, partials["front"], partials["back"], report, config.label,
                         config.degrees, config.figure)
    except StageError:
        written.mark_partial()
        raise
    return report
