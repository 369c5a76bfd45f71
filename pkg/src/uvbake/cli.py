"""Command-line interface.

Exit status: 0 on success, 1 on validation / usage errors, 2 on runtime errors.
The worker count is taken from $UVBAKE_THREADS (0 = one per CPU).
"""

import argparse
import logging
import sys
from pathlib import Path

from uvbake import compose, metrics, pipeline, storage
from uvbake.baker import BakeParams, uv_rasterize
from uvbake.errors import UvbakeError, ValidationError
from uvbake.geometry import load_fit, load_mesh
from uvbake.visibility import DEFAULT_DEPTH_EPS, rasterize_depth, save_debug

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_bake_flags(p, defaults=True):
    d = BakeParams() if defaults else None
    p.add_argument("--resolution", type=int, default=1024 if defaults else None,
                   help="texture resolution in texels per side (power of two, default 1024)")
    p.add_argument("--tau", type=float, default=d.tau if d else None,
                   help="minimum cosine of the incidence angle for a valid texel (default 0.1)")
    p.add_argument("--weight-exp", type=float, default=d.weight_exponent if d else None,
                   help="blend weight exponent p in cos^p (default 2)")
    p.add_argument("--depth-eps", type=float, default=d.depth_eps if d else None,
                   help=f"z-buffer visibility tolerance in scene units (default {DEFAULT_DEPTH_EPS})")
    p.add_argument("--use-mask", action="store_true", default=None if not defaults else False,
                   help="reject texels whose pixel has mask alpha < 0.5")


def build_parser():
    parser = _Parser(prog="uvbake", description="Bake front/back photographs onto a body mesh's UV atlas.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("prompt", help="print the front and back text-to-image prompts")
    for name, flag in (("gender", "--gender"), ("body_shape", "--shape"), ("age", "--age"),
                       ("area", "--area"), ("profession", "--profession"), ("clothing", "--clothing")):
        p.add_argument(flag, dest=name, required=True, help=f"subject {name.replace('_', ' ')}")

    p = sub.add_parser("bake", help="bake one view into a partial-texture bundle (.ptx)")
    p.add_argument("--mesh", required=True, help="posed mesh (OBJ with UVs)")
    p.add_argument("--fit", required=True, help="fit file with the view's camera")
    p.add_argument("--image", help="photograph (PNG); defaults to the image named in the fit file")
    p.add_argument("--mask", help="foreground mask (alpha or grayscale PNG)")
    _add_bake_flags(p)
    p.add_argument("--debug-depth", metavar="DIR", help="also dump the z-buffer (depth.png, face_id.bin)")
    p.add_argument("--out", required=True, help="output bundle directory, e.g. front.ptx")

    p = sub.add_parser("fuse", help="fuse front and back bundles into a fused bundle (.ftx)")
    p.add_argument("--front", required=True, help="front .ptx bundle")
    p.add_argument("--back", required=True, help="back .ptx bundle")
    p.add_argument("--mode", choices=("blend", "select"), default="blend",
                   help="weighted blend (default) or best-view selection on the overlap")
    p.add_argument("--out", required=True, help="output .ftx bundle")

    p = sub.add_parser("inpaint", help="fill empty atlas texels of a fused bundle")
    p.add_argument("--input", required=True, help="fused .ftx bundle")
    p.add_argument("--inpaint", choices=("pullpush", "external", "none"), default="pullpush",
                   help="hole filler (default pullpush)")
    p.add_argument("--command", help="external program: called as <cmd> color.png mask.png out.png")
    p.add_argument("--out", required=True, help="output .ftx bundle")

    p = sub.add_parser("metrics", help="score a front/back pair (MPAE, OCE, coverage)")
    p.add_argument("--front", required=True, help="front .ptx bundle")
    p.add_argument("--back", required=True, help="back .ptx bundle")
    p.add_argument("--attribute", choices=metrics.ATTRIBUTES, default="luma",
                   help="texel attribute compared by OCE (default: sRGB luma, 0-255)")
    p.add_argument("--pred-joints", help="JSON list of predicted [x, y, z] joints")
    p.add_argument("--gt-joints", help="JSON list of reference [x, y, z] joints")
    p.add_argument("--label", default="uvbake", help="row label in the table")
    p.add_argument("--degrees", action="store_true", help="print MPAE in degrees (JSON stays in radians)")
    p.add_argument("--no-figure", action="store_true", help="skip report.png")
    p.add_argument("--out", help="directory for report.json/.txt/.csv/.png")

    p = sub.add_parser("run", help="run the whole pipeline from a JSON config")
    p.add_argument("--config", required=True, help="pipeline config (JSON)")
    _add_bake_flags(p, defaults=False)
    p.add_argument("--inpaint", choices=("pullpush", "external", "none"), help="override the hole filler")
    p.add_argument("--command", help="external inpainting program (with --inpaint external)")
    p.add_argument("--out", help="override the output directory")
    return parser


def _bake_params(args, base=None):
    base = base or BakeParams()
    return BakeParams(
        tau=base.tau if args.tau is None else args.tau,
        weight_exponent=base.weight_exponent if args.weight_exp is None else args.weight_exp,
        depth_eps=base.depth_eps if args.depth_eps is None else args.depth_eps,
        use_mask=base.use_mask if not args.use_mask else True,
    )


def _check_resolution(res):
    if not pipeline._is_pow2(res) or res > pipeline.MAX_RESOLUTION:
        raise ValidationError(f"resolution must be a power of two <= {pipeline.MAX_RESOLUTION}, got {res}")


def cmd_prompt(args):
    attrs = pipeline.SubjectAttributes(args.gender, args.body_shape, args.age, args.area,
                                       args.profession, args.clothing)
    front, back = pipeline.build_prompts(attrs)
    print(f"front: {front}")
    print(f"back: {back}")


def cmd_bake(args):
    _check_resolution(args.resolution)
    params = _bake_params(args)
    fit = load_fit(args.fit)
    with pipeline.stage("load_mesh"):
        mesh = load_mesh(args.mesh)
    with pipeline.stage("uv_rasterize"):
        coverage = uv_rasterize(mesh, args.resolution)
    with pipeline.stage(f"rasterize_depth({fit.view})"):
        depth = rasterize_depth(mesh, fit.camera)
    if args.debug_depth:
        d = Path(args.debug_depth)
        d.mkdir(parents=True, exist_ok=True)
        save_debug(depth, d / "depth.png", d / "face_id.bin")
    with pipeline.stage(f"bake_view({fit.view})"):
        image = Path(args.image) if args.image else fit.image
        tex = pipeline.bake_from_files(mesh, fit, image, args.mask, coverage, params, depth)
    storage.save_partial(tex, args.out)
    print(f"{fit.view}: {tex.stats['valid']} valid of {tex.stats['covered']} atlas texels -> {args.out}")


def cmd_fuse(args):
    front, back = storage.load_partial(args.front), storage.load_partial(args.back)
    fused = compose.fuse(front, back, args.mode)
    storage.save_fused(fused, args.out)
    print(" ".join(f"{k}={v}" for k, v in fused.counts().items()))


def cmd_inpaint(args):
    if args.inpaint == "external" and not args.command:
        raise ValidationError("--inpaint external needs --command")
    fused = storage.load_fused(args.input)
    filled = pipeline.apply_inpaint(fused, args.inpaint, args.command)
    storage.save_fused(filled, args.out)
    print(" ".join(f"{k}={v}" for k, v in filled.counts().items()))


def cmd_metrics(args):
    if (args.pred_joints is None) != (args.gt_joints is None):
        raise ValidationError("--pred-joints and --gt-joints go together")
    front, back = storage.load_partial(args.front), storage.load_partial(args.back)
    joints = None
    if args.pred_joints:
        joints = (pipeline.load_joints(args.pred_joints), pipeline.load_joints(args.gt_joints))
    # a standalone score is meaningless without an overlap, unlike inside `run`
    metrics.oce(front, back, args.attribute)
    report = metrics.build_report(front, back, args.attribute, joints)
    if args.out:
        pipeline.write_report(args.out, front, back, report, args.label, args.degrees, not args.no_figure)
    sys.stdout.write(metrics.format_table(report, args.label, args.degrees))


def cmd_run(args):
    config = pipeline.PipelineConfig.from_file(args.config)
    if args.resolution is not None:
        config.resolution = args.resolution
    config.bake = _bake_params(args, config.bake)
    if args.inpaint is not None:
        config.inpaint = args.inpaint
    if args.command is not None:
        config.inpaint_command = args.command
    if args.out is not None:
        config.output_dir = Path(args.out)
    report = pipeline.run_pipeline(config)
    sys.stdout.write(metrics.format_table(report, config.label, config.degrees))
    print(f"artifacts written to {config.output_dir}")


COMMANDS = {
    "prompt": cmd_prompt, "bake": cmd_bake, "fuse": cmd_fuse,
    "inpaint": cmd_inpaint, "metrics": cmd_metrics, "run": cmd_run,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.subcommand](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (UvbakeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def pullpush_main(argv=None):
    """``uvbake-pullpush color.png mask.png out.png``: the external inpainting contract."""
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print("usage: uvbake-pullpush COLOR.png MASK.png OUT.png", file=sys.stderr)
        return EXIT_INVALID
    try:
        compose.pullpush_files(*argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
