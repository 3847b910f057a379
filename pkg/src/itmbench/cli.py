"""Single executable binding all modules.

Subcommands: synthesize, score, analyze, expand, sde-demo. Exit codes:
0 success, 1 any per-item failure, 2 usage or configuration error. All
output lands under --out; machine output (CSV/JSON) is stable across runs
and worker counts given identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import error_map, error_stats, intensity_error_joint, saturation_split
from .camera import Crf, NoiseParams, generate_dataset, simulate_ldr
from .config import Config, parse_config
from .errors import ConfigError, ItmError
from .image_io import LinearImage, read_hdr, read_ldr8, read_pfm, write_hdr, write_pfm
from .losses import (LossWeights, color_loss, denoise_loss, linear_l1,
                     recon_loss, ssim_pu_loss, total_loss, tv_loss, upf_loss)
from .operators import naive_expand
from .pu21 import SCHEMA_VERSION, score_dataset
from .sde import SdeSchedule, itm_sde_demo


def _read_linear(path: Path) -> LinearImage:
    if path.suffix.lower() == ".pfm":
        return read_pfm(path)
    return read_hdr(path)


def _write_linear(image: LinearImage, path: Path):
    if path.suffix.lower() == ".pfm":
        write_pfm(image, path)
    else:
        write_hdr(image, path)


def _load_config(args) -> Config:
    if getattr(args, "config", None):
        return parse_config(args.config)
    return Config()


def _demo_fixture() -> tuple:
    """Built-in deterministic 16x16 HDR/LDR pair for self-contained demos."""
    y, x = np.mgrid[0:16, 0:16].astype(np.float64) / 15.0
    hdr = np.stack([0.05 + 1.5 * x * y, 0.05 + 0.8 * x, 0.05 + 0.6 * y], axis=-1)
    gt = LinearImage(hdr.astype(np.float32))
    ldr = simulate_ldr(gt, ev=0.0, crf=Crf.identity(), noise=NoiseParams(), seed=0)
    degraded = naive_expand(ldr, Crf.identity())
    return degraded, gt


def cmd_synthesize(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else cfg.master_seed
    records, errors = generate_dataset(
        args.hdr_dir, args.out, count_per_image=args.count,
        settings=cfg.synth, master_seed=seed, jobs=args.jobs,
    )
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    print(f"wrote {len(records)} pairs to {args.out}")
    return 1 if errors else 0


def cmd_score(args) -> int:
    cfg = _load_config(args)
    report = score_dataset(args.pred, args.gt, encoding=cfg.encoding(),
                           mapping=cfg.display, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    agg = report.aggregate
    if agg["pu_psnr"] is not None:
        print(f"pu_psnr={agg['pu_psnr']} pu_ssim={agg['pu_ssim']} rmse={agg['rmse_linear']}")
    return 1 if report.errors else 0


def _loss_breakdown(pred: LinearImage, gt: LinearImage) -> dict:
    total, contributions = total_loss([pred], pred, gt)
    doc = {
        "raw": {
            "recon": recon_loss([pred], gt),
            "linear": linear_l1(pred, gt),
            "denoise": denoise_loss(pred, gt),
            "ssim_pu": ssim_pu_loss(pred, gt),
            "color": color_loss(pred, gt),
            "tv": tv_loss(pred),
            "upf": upf_loss(pred, gt),
        },
        "weighted": contributions,
        "weights": LossWeights().__dict__,
        "total": total,
    }
    return doc


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    pred = _read_linear(Path(args.pred))
    gt = _read_linear(Path(args.gt))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    err = error_map(pred, gt, encoding=cfg.encoding(), mapping=cfg.display)
    write_pfm(LinearImage(np.repeat(err[..., None], 3, axis=-1).astype(np.float32)),
              out / "error_map.pfm")
    doc: dict = {"schema": SCHEMA_VERSION}
    if args.ldr:
        ldr = read_ldr8(Path(args.ldr))
        split = saturation_split(ldr, quantile=args.quantile)
        doc["saturation"] = {
            "threshold": split.threshold,
            "frac": split.frac,
            "stats": error_stats(err, split),
        }
        doc["intensity_error_joint"] = intensity_error_joint(ldr, err)
    if args.losses:
        doc["losses"] = _loss_breakdown(pred, gt)
    (out / "analysis.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote analysis to {args.out}")
    return 0


def cmd_expand(args) -> int:
    crf = Crf.from_spec(args.crf)
    ldr = read_ldr8(Path(args.input))
    expanded = naive_expand(ldr, crf)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = Path(args.input).stem + ("." + args.format)
    _write_linear(expanded, out / name)
    print(f"wrote {out / name}")
    return 0


def cmd_sde_demo(args) -> int:
    cfg = _load_config(args)
    if args.hdr and args.ldr:
        gt = _read_linear(Path(args.hdr))
        degraded = _read_linear(Path(args.ldr))
    else:
        degraded, gt = _demo_fixture()
    sched = SdeSchedule.cosine(steps=args.steps)
    seed = args.seed if args.seed is not None else cfg.master_seed
    result = itm_sde_demo(degraded, gt, sched=sched, encoding=cfg.encoding(),
                          mapping=cfg.display, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sde_report.json").write_text(result.report.to_json())
    write_pfm(
        LinearImage(np.repeat(result.error_map[..., None], 3, axis=-1).astype(np.float32)),
        out / "sde_error_map.pfm",
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    track = min(4, result.forward_history.shape[1])
    writer.writerow(["step"] + [f"pixel{i}" for i in range(track)])
    for step in range(result.forward_history.shape[0]):
        row = [step] + [repr(float(v)) for v in result.forward_history[step, :track]]
        writer.writerow(row)
    (out / "sde_trajectories.csv").write_text(buf.getvalue())
    diag = json.dumps(result.diagnostics, indent=2, sort_keys=True)
    (out / "sde_diagnostics.json").write_text(diag + "\n")
    print(f"wrote SDE demo outputs to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itmbench",
        description="Inverse tone mapping benchmark toolkit",
    )
    parser.add_argument("--version", action="version",
                        version=f"itmbench {__version__} (schema {SCHEMA_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master random seed")
        p.add_argument("--config", type=str, default=None, help="key = value config file")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p = sub.add_parser("synthesize", help="generate LDR/HDR training pairs")
    p.add_argument("--hdr-dir", required=True, help="directory of source HDR images")
    p.add_argument("--count", type=int, default=1, help="pairs per source image")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("score", help="score HDR reconstructions against ground truth")
    p.add_argument("--pred", required=True, help="directory of predictions")
    p.add_argument("--gt", required=True, help="directory of ground truth")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze", help="error maps, saturation stats, loss breakdown")
    p.add_argument("--pred", required=True, help="prediction image (.hdr/.pfm)")
    p.add_argument("--gt", required=True, help="ground-truth image (.hdr/.pfm)")
    p.add_argument("--ldr", default=None, help="input LDR image for saturation analysis")
    p.add_argument("--quantile", type=float, default=0.85, help="saturation quantile")
    p.add_argument("--losses", action="store_true", help="emit per-term loss breakdown")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("expand", help="naive linearization baseline (8-bit -> linear)")
    p.add_argument("--input", required=True, help="8-bit input image")
    p.add_argument("--crf", default="identity",
                   help="CRF spec: identity | gamma:G | sigmoid:N,C | table:PATH")
    p.add_argument("--format", choices=("hdr", "pfm"), default="hdr")
    common(p)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("sde-demo", help="mean-reverting restoration SDE diagnostic")
    p.add_argument("--hdr", default=None, help="ground-truth image (.hdr/.pfm)")
    p.add_argument("--ldr", default=None, help="degraded linear image (.hdr/.pfm)")
    p.add_argument("--steps", type=int, default=100, help="SDE step count")
    common(p)
    p.set_defaults(func=cmd_sde_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ItmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
