"""Command line interface.

    unet-post train       fit a model on a dataset manifest
    unet-post infer       run a trained model over one volume
    unet-post combine-mp  fuse axial/coronal/sagittal outputs
    unet-post loo         leave-one-out cross-validation

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

import torch

from .config import AXES, MpWeights, TrainConfig, UNetConfig
from .data import denormalize, load_dataset, normalize
from .infer import combine_mp, infer_volume
from .loo import format_table, loo_harness
from .model import build_unet
from .train import load_weights, save_weights, train_on_pairs
from .volio import VolumeFormatError, read_volume, write_volume


class UsageError(Exception):
    pass


def _model_config(ns, axis: str) -> UNetConfig:
    dims = ns.dims if ns.dims is not None else (3 if axis == "3d" else 2)
    base = ns.base_filters if ns.base_filters is not None else (
        32 if dims == 3 else 64)
    return UNetConfig(dims=dims, depth=ns.depth, base_filters=base)


def _train_config(ns) -> TrainConfig:
    return TrainConfig(axis=ns.axis, epochs=ns.epochs,
                       batch_size=ns.batch_size, learning_rate=ns.lr,
                       patch_size=ns.patch_size)


def _cmd_train(ns) -> int:
    cfg = _train_config(ns)
    ds = load_dataset(ns.manifest, normalized=True)
    train_pairs = ds.split("train")
    val_pairs = ds.split("val")
    if not train_pairs:
        raise UsageError("manifest has no train volumes")
    torch.manual_seed(ns.seed)
    model, n_params = build_unet(_model_config(ns, ns.axis))
    print(f"model: {model.config.dims}D, base {model.config.base_filters}, "
          f"{n_params} parameters")
    result = train_on_pairs(model, train_pairs, val_pairs, cfg, ns.seed)
    for i, tl in enumerate(result.train_loss):
        vl = f" val {result.val_loss[i]:.6f}" if result.val_loss else ""
        print(f"epoch {i + 1:3d} train {tl:.6f}{vl}")
    save_weights(ns.out, model, (ds.lo, ds.hi), ns.axis,
                 patch_size=ns.patch_size,
                 extra={"seed": ns.seed, "epochs": result.epochs,
                        "steps": result.steps})
    print(f"wrote {ns.out} (+ sidecar {ns.out}.json)")
    return 0


def _cmd_infer(ns) -> int:
    model, sidecar = load_weights(ns.weights)
    axis = ns.axis or sidecar.get("axis", "axial")
    patch = ns.patch_size or sidecar.get("patch_size")
    rec = sidecar["normalization"]
    lo, hi = float(rec["lo"]), float(rec["hi"])
    vol = read_volume(ns.input)
    x = normalize(vol.data, lo, hi)
    y = infer_volume(model, x, axis, patch_size=patch, batch=ns.batch)
    out = vol.with_data(denormalize(y, lo, hi))
    out.meta = dict(out.meta)
    out.meta["postprocess"] = {"axis": axis, "weights": str(ns.weights)}
    write_volume(ns.output, out)
    print(f"wrote {ns.output}")
    return 0


def _cmd_combine_mp(ns) -> int:
    wa, wc, ws = ns.weights
    w = MpWeights(wa, wc, ws)
    f_a = read_volume(ns.axial)
    f_c = read_volume(ns.coronal)
    f_s = read_volume(ns.sagittal)
    write_volume(ns.out, combine_mp(f_a, f_c, f_s, w))
    print(f"wrote {ns.out}")
    return 0


def _cmd_loo(ns) -> int:
    cfg = _train_config(ns)
    report = loo_harness(ns.manifest, cfg, seed=ns.seed,
                         model_config=_model_config(ns, ns.axis),
                         workdir=ns.workdir, verbose=True)
    print(format_table(report))
    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"wrote {ns.out}")
    return 0


def _add_model_flags(sp):
    sp.add_argument("--dims", type=int, choices=(2, 3), default=None)
    sp.add_argument("--depth", type=int, default=5)
    sp.add_argument("--base-filters", type=int, default=None)


def _add_train_flags(sp):
    sp.add_argument("--axis", choices=AXES, default="axial")
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--batch-size", type=int, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--patch-size", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unet-post",
        description="learned post-processing for reconstructed volumes")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="fit a model on a dataset manifest")
    sp.set_defaults(fn=_cmd_train)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    _add_train_flags(sp)
    _add_model_flags(sp)

    sp = sub.add_parser("infer", help="apply a trained model to a volume")
    sp.set_defaults(fn=_cmd_infer)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--axis", choices=AXES, default=None,
                    help="override the sidecar's axis")
    sp.add_argument("--patch-size", type=int, default=None)
    sp.add_argument("--batch", type=int, default=8)

    sp = sub.add_parser("combine-mp", help="fuse three plane outputs")
    sp.set_defaults(fn=_cmd_combine_mp)
    sp.add_argument("--axial", required=True)
    sp.add_argument("--coronal", required=True)
    sp.add_argument("--sagittal", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--weights", type=float, nargs=3, default=[0.5, 0.3, 0.2],
                    metavar=("WA", "WC", "WS"))

    sp = sub.add_parser("loo", help="leave-one-out cross-validation")
    sp.set_defaults(fn=_cmd_loo)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", default=None, help="write the report as JSON")
    sp.add_argument("--workdir", default=None)
    _add_train_flags(sp)
    _add_model_flags(sp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return ns.fn(ns)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError, VolumeFormatError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
