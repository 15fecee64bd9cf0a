"""Command-line front end.

Subcommands: estimate (fit water parameters over a manifest, writing one
sidecar per image), stats (precompute parameters and the variance threshold
over a manifest), augment (batch depth-jittered variants), jitter (one
offset re-render), profile (intensity-vs-depth table), restore (invert the
water model).

Flag precedence: explicit flags > --config JSON > built-in defaults.
Exit codes: 0 full success, 1 runtime or per-entry failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .estimation import (EstimationConfig, EstimationError, read_sidecar,
                         write_sidecar)
from .formation import (CLAMP_TO_UNIT, ClampPolicy, ERROR_ON_OVERFLOW,
                        FormationError, NO_CLAMP, WaterParams,
                        intensity_profile, restore)
from .imageio import (DecodeError, DepthDecodeSpec, PNG16, decode_depth,
                      encode_depth, load_image, save_image, write_profile_csv)
from .pipeline import (ManifestError, jitter_with_accounting, load_manifest,
                       load_stats, run_augment, run_precompute, write_stats)
from .policy import ADAPTIVE, FIXED_RANGE, OffsetPolicy

_CLAMP_BY_NAME = {"unit": CLAMP_TO_UNIT, "error": ERROR_ON_OVERFLOW, "none": NO_CLAMP}


class UsageError(Exception):
    """Bad flag/config combination detected after argparse."""


def _triple(text: str):
    """Parse '0.1,0.2,0.3' (or a single value broadcast to all channels)."""
    try:
        parts = [float(p) for p in str(text).split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected one value or three comma-separated values, got {text!r}")
    return parts


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0,
                        help="global random seed (default 0)")
    shared.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch commands (default 1)")
    shared.add_argument("--config", metavar="PATH",
                        help="JSON file of flag defaults (explicit flags win)")
    gamut = shared.add_mutually_exclusive_group()
    gamut.add_argument("--linear", dest="linear", action="store_true",
                       help="treat image files as linear-light")
    gamut.add_argument("--srgb", dest="linear", action="store_false",
                       help="treat image files as sRGB-encoded (default)")
    shared.add_argument("--clamp", choices=sorted(_CLAMP_BY_NAME), default="unit",
                        help="out-of-range intensity handling (default unit)")
    shared.add_argument("--depth-floor", type=float, default=0.01,
                        help="minimum modified depth in meters (default 0.01)")

    depthio = argparse.ArgumentParser(add_help=False)
    depthio.add_argument("--depth-format", choices=("png16", "tiff_f32"),
                         default="png16", help="depth file encoding (default png16)")
    depthio.add_argument("--depth-scale", type=float, default=0.001,
                         help="meters per stored depth unit (default 0.001)")
    depthio.add_argument("--depth-offset", type=float, default=0.0,
                         help="meters added after scaling (default 0)")

    fit = argparse.ArgumentParser(add_help=False)
    fit.add_argument("--bins", type=int, default=10,
                     help="depth bins for the dark-pixel fit (default 10)")
    fit.add_argument("--dark-fraction", type=float, default=0.02,
                     help="fraction of darkest pixels kept per bin (default 0.02)")

    params_src = argparse.ArgumentParser(add_help=False)
    params_src.add_argument("--params", metavar="PATH",
                            help="parameter sidecar JSON")
    params_src.add_argument("--backscatter", type=_triple, metavar="R,G,B",
                            help="veiling light per channel (alternative to --params)")
    params_src.add_argument("--attenuation", type=_triple, metavar="R,G,B",
                            help="direct-signal decay rate per channel, 1/m")
    params_src.add_argument("--growth", type=_triple, metavar="R,G,B",
                            help="backscatter saturation rate per channel, 1/m")

    parser = argparse.ArgumentParser(
        prog="depthaug",
        description="Depth-aware underwater image augmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[shared, depthio, fit],
                       help="fit water parameters for every manifest entry "
                            "and write one sidecar per image")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="directory for sidecar files (default: "
                   "<image>.params.json next to each image)")
    p.add_argument("--robust-range", action="store_true",
                   help="use 1st/99th depth percentiles as the per-image range")
    p.add_argument("--allow-nonconverged", action="store_true",
                   help="exit 0 even when some fits stopped before the "
                        "step-size tolerance")

    p = sub.add_parser("stats", parents=[shared, depthio, fit],
                       help="precompute parameters and the variance threshold "
                            "for a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="stats path (default: <manifest>.stats.json)")
    p.add_argument("--robust-range", action="store_true",
                   help="use 1st/99th depth percentiles as the per-image range")
    p.add_argument("--no-fallback", action="store_true",
                   help="do not substitute the median fit for failed images")

    p = sub.add_parser("augment", parents=[shared, depthio],
                       help="write jittered image/depth variants for a manifest")
    p.add_argument("manifest")
    p.add_argument("--stats", help="stats path (default: <manifest>.stats.json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--variants", type=int, default=1,
                   help="variants per image (default 1)")
    p.add_argument("--policy", choices=("adaptive", "fixed"), default="adaptive",
                   help="offset sampling rule (default adaptive)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="adaptive lower bound as a fraction of the nearest "
                        "depth (default 0.5)")
    p.add_argument("--beta", type=float, default=0.2,
                   help="adaptive upper bound as a fraction of the farthest "
                        "depth (default 0.2)")
    p.add_argument("--lo", type=float, default=-4.0,
                   help="fixed-policy lower offset in meters (default -4)")
    p.add_argument("--hi", type=float, default=15.0,
                   help="fixed-policy upper offset in meters (default 15)")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--depth-out-scale", type=float, default=0.001,
                   help="meters per unit in written depth maps (default 0.001)")

    p = sub.add_parser("jitter", parents=[shared, depthio, params_src],
                       help="re-render one image at an offset depth")
    p.add_argument("image")
    p.add_argument("depth")
    p.add_argument("--dz", type=float, required=True, help="depth offset in meters")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--depth-out", help="also write the modified depth map here")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--depth-out-scale", type=float, default=0.001)

    p = sub.add_parser("profile", parents=[shared, params_src],
                       help="tabulate observed intensity against depth")
    p.add_argument("--j0", type=_triple, default=[1.0, 1.0, 1.0], metavar="R,G,B",
                   help="scene radiance being observed (default 1,1,1)")
    p.add_argument("--z-lo", type=float, default=0.0)
    p.add_argument("--z-hi", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("restore", parents=[shared, depthio, params_src],
                       help="invert the water model to recover scene radiance")
    p.add_argument("image")
    p.add_argument("depth")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)

    return parser


def _known_dests(parser: argparse.ArgumentParser) -> set:
    dests = set()
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                dests |= {a.dest for a in sub._actions}
        else:
            dests.add(action.dest)
    return dests - {"help", "command", "config"}


def _apply_config(parser: argparse.ArgumentParser, defaults: dict) -> None:
    """Install config values as parser defaults, recursing into subcommands
    (each subparser parses into a fresh namespace, so defaults must be set
    on the subparsers themselves). String values still pass through each
    flag's type converter; explicit flags override as usual."""
    stack = [parser]
    while stack:
        p = stack.pop()
        subset = {}
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                stack.extend(action.choices.values())
            elif action.dest in defaults:
                subset[action.dest] = defaults[action.dest]
        if subset:
            p.set_defaults(**subset)


# Choice flags reachable through the config file bypass argparse's choices=
# validation, so re-check them after parsing.
_ENUM_DESTS = {
    "clamp": ("--clamp", set(_CLAMP_BY_NAME)),
    "policy": ("--policy", {"adaptive", "fixed"}),
    "depth_format": ("--depth-format", {"png16", "tiff_f32"}),
    "bit_depth": ("--bit-depth", {8, 16}),
}


def _validate_args(args) -> None:
    for dest, (flag, allowed) in _ENUM_DESTS.items():
        if hasattr(args, dest) and getattr(args, dest) not in allowed:
            raise UsageError(f"invalid value for {flag}: {getattr(args, dest)!r} "
                             f"(expected one of {sorted(map(str, allowed))})")
    if getattr(args, "threads", 1) < 1:
        raise UsageError(f"--threads must be >= 1, got {args.threads}")
    if getattr(args, "variants", 1) < 1:
        raise UsageError(f"--variants must be >= 1, got {args.variants}")


def _config_defaults(argv, known: set) -> dict:
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"config file {path} sets unknown keys: {', '.join(unknown)}")
    return data


def _clamp_policy(args) -> ClampPolicy:
    return ClampPolicy(mode=_CLAMP_BY_NAME[args.clamp], depth_floor=args.depth_floor)


def _depth_spec(args) -> DepthDecodeSpec:
    try:
        return DepthDecodeSpec(format=args.depth_format, scale=args.depth_scale,
                               offset=args.depth_offset)
    except DecodeError as e:
        raise UsageError(f"bad depth decode flags: {e}") from e


def _resolve_params(args) -> WaterParams:
    explicit = (args.backscatter, args.attenuation, args.growth)
    if args.params is not None:
        if any(v is not None for v in explicit):
            raise UsageError("--params conflicts with explicit parameter flags")
        return read_sidecar(args.params)[0]
    if all(v is not None for v in explicit):
        return WaterParams(B=args.backscatter, beta=args.attenuation, gamma=args.growth)
    raise UsageError("provide --params, or all of --backscatter, --attenuation "
                     "and --growth")


def cmd_estimate(args) -> int:
    manifest = load_manifest(args.manifest, _depth_spec(args), args.linear)
    # Always re-fit: drop any sidecar paths the manifest may already carry.
    manifest = replace(manifest, entries=tuple(
        replace(e, params_path=None) for e in manifest.entries))
    cfg = EstimationConfig(n_bins=args.bins, dark_fraction=args.dark_fraction)
    result = run_precompute(manifest, cfg, robust_depth_range=args.robust_range,
                            median_fallback=False, threads=args.threads)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    paths = {e.image_id: e.image_path for e in manifest.entries}
    failures = list(result.failures)
    print("image_id\tconverged\tresidual")
    all_converged = True
    for rec in result.records:
        if rec.params is None:
            failures.append((rec.image_id, rec.error or "fit failed"))
            continue
        sidecar = (out_dir / f"{rec.image_id}.params.json" if out_dir is not None
                   else paths[rec.image_id].with_suffix(".params.json"))
        write_sidecar(sidecar, rec.image_id, rec.params,
                      residual=rec.residual, converged=rec.converged)
        print(f"{rec.image_id}\t{rec.converged}\t{rec.residual!r}")
        all_converged = all_converged and rec.converged
    for image_id, message in failures:
        print(f"failed: {image_id}: {message}", file=sys.stderr)
    if failures:
        return 1
    if not all_converged and not args.allow_nonconverged:
        print("error: some fits did not converge "
              "(--allow-nonconverged to accept them)", file=sys.stderr)
        return 1
    return 0


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest, _depth_spec(args), args.linear)
    cfg = EstimationConfig(n_bins=args.bins, dark_fraction=args.dark_fraction)
    result = run_precompute(manifest, cfg, robust_depth_range=args.robust_range,
                            median_fallback=not args.no_fallback,
                            threads=args.threads)
    out = Path(args.out) if args.out else Path(args.manifest).with_suffix(".stats.json")
    write_stats(out, result)
    for image_id, message in result.failures:
        print(f"warning: skipped {image_id}: {message}", file=sys.stderr)
    print(f"tau = {result.tau!r}")
    for rec in result.records:
        print(f"variance {rec.image_id} {rec.depth_variance!r}")
    print(f"wrote {out} ({len(result.records)} records, "
          f"{len(result.failures)} failures)")
    return 1 if result.failures else 0


def cmd_augment(args) -> int:
    manifest = load_manifest(args.manifest, _depth_spec(args), args.linear)
    stats_path = Path(args.stats) if args.stats \
        else Path(args.manifest).with_suffix(".stats.json")
    stats = load_stats(stats_path)
    mode = ADAPTIVE if args.policy == "adaptive" else FIXED_RANGE
    policy = OffsetPolicy(mode=mode, alpha_scale=args.alpha,
                          beta_scale=args.beta, range_lo=args.lo,
                          range_hi=args.hi, tau=stats.tau)
    result = run_augment(manifest, stats, policy, seed=args.seed, out_dir=args.out,
                         n_variants=args.variants, threads=args.threads,
                         bit_depth=args.bit_depth, clamp=_clamp_policy(args),
                         depth_out_spec=DepthDecodeSpec(format=PNG16,
                                                        scale=args.depth_out_scale))
    for image_id, message in result.failures:
        print(f"warning: skipped {image_id}: {message}", file=sys.stderr)
    print(f"wrote {len(result.rows)} variant pairs to {result.out_dir} "
          f"(log: {result.log_path})")
    return 1 if result.failures else 0


def _load_pair(args):
    image = load_image(args.image, assume_linear=args.linear)
    depth = decode_depth(args.depth, _depth_spec(args))
    if image.shape[:2] != depth.shape:
        raise UsageError(f"image {args.image} is {image.shape[1]}x{image.shape[0]} "
                         f"but depth {args.depth} is {depth.shape[1]}x{depth.shape[0]}")
    return image, depth


def cmd_jitter(args) -> int:
    params = _resolve_params(args)
    image, depth = _load_pair(args)
    out, z_m, clipped = jitter_with_accounting(image, depth, params, args.dz,
                                               _clamp_policy(args))
    save_image(args.out, out, bit_depth=args.bit_depth, assume_linear=args.linear)
    if args.depth_out:
        encode_depth(args.depth_out, z_m,
                     DepthDecodeSpec(format=PNG16, scale=args.depth_out_scale))
    print(f"clipped_px = {clipped}", file=sys.stderr)
    print(f"wrote {args.out} (dz={args.dz})")
    return 0


def cmd_profile(args) -> int:
    params = _resolve_params(args)
    table = intensity_profile(params, args.j0, (args.z_lo, args.z_hi), args.samples)
    if args.out in (None, "-"):
        write_profile_csv(sys.stdout, table)
    else:
        write_profile_csv(args.out, table)
        print(f"wrote {args.out}")
    return 0


def cmd_restore(args) -> int:
    params = _resolve_params(args)
    image, depth = _load_pair(args)
    recovered = restore(image, depth, params, _clamp_policy(args))
    save_image(args.out, recovered, bit_depth=args.bit_depth,
               assume_linear=args.linear)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "estimate": cmd_estimate,
    "stats": cmd_stats,
    "augment": cmd_augment,
    "jitter": cmd_jitter,
    "profile": cmd_profile,
    "restore": cmd_restore,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        defaults = _config_defaults(argv, _known_dests(parser))
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _apply_config(parser, defaults)
    args = parser.parse_args(argv)
    try:
        _validate_args(args)
        return _COMMANDS[args.command](args)
    except (UsageError, ManifestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormationError, EstimationError, DecodeError,
            OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
