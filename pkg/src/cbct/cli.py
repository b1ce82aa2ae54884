"""Command-line interface.

Subcommands cover the full simulation / reconstruction pipeline:

    cbct phantom       seeded dental phantom -> .vol
    cbct project       volume -> line-integral projections (.prj)
    cbct simulate      projections -> Poisson-noised line integrals
    cbct subsample     keep every k-th view
    cbct fdk           analytic reconstruction
    cbct kltv          TV-regularized Poisson-likelihood reconstruction
    cbct metrics       NRMSE / PSNR / SSIM between two volumes
    cbct normalize     map a volume into [-1, 1] with global bounds
    cbct make-dataset  paired normal / sparse-view dataset + manifest

Any subcommand accepts ``--config FILE`` with a JSON object whose keys
are the long option names (dashes or underscores); explicit command-line
flags win over config values, config values win over defaults.  Unknown
config keys are rejected.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .fdk import FdkOptions, fdk_reconstruct
from .geometry import VoxelGrid, make_circular_geometry
from .kltv import KltvParams, kltv_reconstruct
from .metrics import evaluate
from .phantom import (
    counts_to_line_integrals,
    dental_phantom,
    make_dataset,
    simulate_counts,
)
from .projector import forward_project, subsample_views
from .volio import (
    NormalizationRecord,
    VolioError,
    normalize_global,
    read_projections,
    read_volume,
    write_projections,
    write_volume,
)


class UsageError(Exception):
    pass


def _parse_grid(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise UsageError(f"--grid wants 'n' or 'nx,ny,nz', got {text!r}")
    try:
        nx, ny, nz = (int(p) for p in parts)
    except ValueError as e:
        raise UsageError(f"bad --grid value {text!r}") from e
    return nx, ny, nz


def _grid_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--grid", help="voxel counts, 'n' or 'nx,ny,nz' (default 64)")
    sp.add_argument("--voxel-size", type=float, help="voxel edge length in mm (default 0.3)")


def _geometry_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--views", type=int, help="number of views (default 360)")
    sp.add_argument("--arc-deg", type=float,
                    help="arc span in degrees (default 360)")
    sp.add_argument("--sid", type=float, help="source-isocenter distance mm (default 60)")
    sp.add_argument("--sdd", type=float, help="source-detector distance mm (default 100)")
    sp.add_argument("--det-rows", type=int, help="detector rows (default 96)")
    sp.add_argument("--det-cols", type=int, help="detector cols (default 96)")
    sp.add_argument("--pitch", type=float, help="detector pixel pitch mm (default 0.4)")


_GEOM_DEFAULTS = {
    "views": 360, "arc_deg": 360.0, "sid": 60.0, "sdd": 100.0,
    "det_rows": 96, "det_cols": 96, "pitch": 0.4,
}
_GRID_DEFAULTS = {"grid": "64", "voxel_size": 0.3}


def _build_grid(ns: argparse.Namespace) -> VoxelGrid:
    nx, ny, nz = _parse_grid(ns.grid)
    return VoxelGrid(nx=nx, ny=ny, nz=nz, voxel_size=ns.voxel_size)


def _build_geometry(ns: argparse.Namespace):
    return make_circular_geometry(
        n_views=ns.views,
        arc_span=math.radians(ns.arc_deg),
        sid=ns.sid,
        sdd=ns.sdd,
        n_rows=ns.det_rows,
        n_cols=ns.det_cols,
        pitch_u=ns.pitch,
        pitch_v=ns.pitch,
    )


def _apply_config(ns: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill None values from --config JSON, then from defaults."""
    merged = dict(defaults)
    if getattr(ns, "config", None):
        with open(ns.config, "r", encoding="utf-8") as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise UsageError("--config must hold a JSON object")
        unknown = []
        reserved = {"fn", "command", "config"}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest in reserved or (dest not in defaults and not hasattr(ns, dest)):
                unknown.append(key)
                continue
            merged[dest] = value
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for dest, value in merged.items():
        if getattr(ns, dest, None) is None:
            setattr(ns, dest, value)
    return ns


def _cmd_phantom(ns) -> int:
    _apply_config(ns, {**_GRID_DEFAULTS, "seed": 0, "with_metal": False})
    grid = _build_grid(ns)
    _, vol = dental_phantom(grid, seed=ns.seed, with_metal=bool(ns.with_metal))
    write_volume(ns.out, vol, meta={"phantom_seed": ns.seed,
                                    "with_metal": bool(ns.with_metal)})
    print(f"wrote {ns.out}")
    return 0


def _cmd_project(ns) -> int:
    _apply_config(ns, dict(_GEOM_DEFAULTS))
    vol, _, _ = read_volume(ns.vol)
    geom = _build_geometry(ns)
    proj = forward_project(vol, geom)
    write_projections(ns.out, proj)
    print(f"wrote {ns.out} ({geom.n_views} views)")
    return 0


def _cmd_simulate(ns) -> int:
    _apply_config(ns, {"i0": 1e5, "seed": 0, "keep_counts": None})
    proj, _ = read_projections(ns.proj)
    counts = simulate_counts(proj, i0=ns.i0, seed=ns.seed)
    if ns.keep_counts:
        write_projections(ns.keep_counts, counts, meta={"i0": ns.i0, "seed": ns.seed})
    noisy = counts_to_line_integrals(counts, i0=ns.i0)
    write_projections(ns.out, noisy, meta={"i0": ns.i0, "seed": ns.seed})
    print(f"wrote {ns.out}")
    return 0


def _cmd_subsample(ns) -> int:
    _apply_config(ns, {"keep_every": 5})
    proj, meta = read_projections(ns.proj)
    sub = subsample_views(proj, ns.keep_every)
    write_projections(ns.out, sub, meta={**meta, "keep_every": ns.keep_every})
    print(f"wrote {ns.out} ({sub.geom.n_views} of {proj.geom.n_views} views)")
    return 0


def _cmd_fdk(ns) -> int:
    _apply_config(ns, {**_GRID_DEFAULTS, "filter": "ramlak", "pad_to": None,
                       "short_scan": "auto"})
    proj, _ = read_projections(ns.proj)
    grid = _build_grid(ns)
    opts = FdkOptions(filter_kind=ns.filter, pad_to=ns.pad_to,
                      short_scan=ns.short_scan)
    vol = fdk_reconstruct(proj, grid, opts)
    write_volume(ns.out, vol, meta={"method": "fdk", "filter": ns.filter,
                                    "n_views": proj.geom.n_views})
    print(f"wrote {ns.out}")
    return 0


def _cmd_kltv(ns) -> int:
    _apply_config(ns, {**_GRID_DEFAULTS, "alpha": 0.05, "iters": 500,
                       "theta": 1.0, "epsilon_log": 1e-8, "history_csv": None})
    proj, _ = read_projections(ns.proj)
    grid = _build_grid(ns)
    params = KltvParams(alpha=ns.alpha, n_iter=ns.iters, theta=ns.theta,
                        epsilon_log=ns.epsilon_log)
    vol, history = kltv_reconstruct(proj, grid, params)
    write_volume(ns.out, vol, meta={"method": "kltv", "alpha": ns.alpha,
                                    "iters": ns.iters,
                                    "n_views": proj.geom.n_views})
    if ns.history_csv:
        with open(ns.history_csv, "w", encoding="utf-8") as f:
            f.write("iteration,objective\n")
            for it, obj in history:
                f.write(f"{it},{obj!r}\n")
    print(f"wrote {ns.out}")
    return 0


def _cmd_metrics(ns) -> int:
    _apply_config(ns, {"as_json": False, "ssim_2d": False})
    test, _, _ = read_volume(ns.test)
    ref, _, _ = read_volume(ns.ref)
    report = evaluate(test, ref, ssim_mode="2d" if ns.ssim_2d else "3d")
    if ns.as_json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(f"nrmse {report.nrmse:.6f}")
        print(f"psnr  {report.psnr:.4f}")
        print(f"ssim  {report.ssim:.6f}")
    return 0


def _cmd_normalize(ns) -> int:
    _apply_config(ns, {"lo": None, "hi": None, "from_manifest": None})
    vol, _, meta = read_volume(ns.vol)
    if ns.from_manifest:
        with open(ns.from_manifest, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        rec = NormalizationRecord.from_dict(manifest["normalization"])
        lo, hi = rec.lo, rec.hi
    else:
        if ns.lo is None or ns.hi is None:
            raise UsageError("need --lo and --hi, or --from-manifest")
        lo, hi = float(ns.lo), float(ns.hi)
    out, rec = normalize_global(vol, (lo, hi))
    write_volume(ns.out, out, normalization=rec, meta=meta)
    print(f"wrote {ns.out}")
    return 0


def _cmd_make_dataset(ns) -> int:
    _apply_config(ns, {**_GRID_DEFAULTS, **_GEOM_DEFAULTS, "n_volumes": 4,
                       "i0": 1e5, "keep_every": 5, "noise": False,
                       "metal": "none", "seed": 0})
    grid = _build_grid(ns)
    geom = _build_geometry(ns)
    manifest = make_dataset(
        ns.out_dir, n_volumes=ns.n_volumes, grid=grid, geom=geom,
        i0=ns.i0, keep_every=ns.keep_every, noise=bool(ns.noise),
        metal=ns.metal, seed=ns.seed,
    )
    n = len(manifest["volumes"])
    print(f"wrote {2 * n} volumes + manifest to {ns.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbct",
                                 description="cone-beam CT toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", help="JSON file of option values")
        return sp

    sp = add("phantom", _cmd_phantom, "generate a seeded dental phantom")
    _grid_args(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--with-metal", action="store_const", const=True, default=None)
    sp.add_argument("--out", required=True)

    sp = add("project", _cmd_project, "forward-project a volume")
    sp.add_argument("--vol", required=True)
    _geometry_args(sp)
    sp.add_argument("--out", required=True)

    sp = add("simulate", _cmd_simulate, "add Poisson noise at intensity i0")
    sp.add_argument("--proj", required=True)
    sp.add_argument("--i0", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--keep-counts", help="also write raw counts here")
    sp.add_argument("--out", required=True)

    sp = add("subsample", _cmd_subsample, "keep every k-th view")
    sp.add_argument("--proj", required=True)
    sp.add_argument("--keep-every", type=int)
    sp.add_argument("--out", required=True)

    sp = add("fdk", _cmd_fdk, "filtered backprojection")
    sp.add_argument("--proj", required=True)
    _grid_args(sp)
    sp.add_argument("--filter", choices=["ramlak", "hann"])
    sp.add_argument("--pad-to", type=int)
    sp.add_argument("--short-scan", choices=["auto", "off"])
    sp.add_argument("--out", required=True)

    sp = add("kltv", _cmd_kltv, "TV-regularized Poisson-likelihood solver")
    sp.add_argument("--proj", required=True)
    _grid_args(sp)
    sp.add_argument("--alpha", type=float, help="TV weight (default 0.05)")
    sp.add_argument("--iters", type=int, help="iterations (default 500)")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--epsilon-log", type=float)
    sp.add_argument("--history-csv", help="write (iteration, objective) pairs")
    sp.add_argument("--out", required=True)

    sp = add("metrics", _cmd_metrics, "compare two volumes")
    sp.add_argument("--test", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--json", dest="as_json", action="store_const", const=True,
                    default=None)
    sp.add_argument("--ssim-2d", action="store_const", const=True, default=None)

    sp = add("normalize", _cmd_normalize, "map intensities into [-1, 1]")
    sp.add_argument("--vol", required=True)
    sp.add_argument("--lo", type=float)
    sp.add_argument("--hi", type=float)
    sp.add_argument("--from-manifest", help="take bounds from a dataset manifest")
    sp.add_argument("--out", required=True)

    sp = add("make-dataset", _cmd_make_dataset,
             "paired normal / sparse-view volumes + manifest")
    sp.add_argument("--n-volumes", type=int)
    _grid_args(sp)
    _geometry_args(sp)
    sp.add_argument("--i0", type=float)
    sp.add_argument("--keep-every", type=int)
    sp.add_argument("--noise", action="store_const", const=True, default=None)
    sp.add_argument("--metal", choices=["none", "all", "mixed"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir", required=True)

    return ap


def run(argv: list[str] | None = None) -> int:
    """Parse and execute; returns the process exit code."""
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return ns.fn(ns)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (VolioError, ValueError, OSError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
