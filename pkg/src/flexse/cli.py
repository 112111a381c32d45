"""Command line: datagen, train, enhance, evaluate, info.

The config file is JSON with optional "model" and "train" sections whose
fields mirror ModelConfig and TrainConfig. Commands exit 0 on success and
nonzero with a one-line diagnostic on stderr otherwise.
"""

import argparse
import json
import pathlib
import sys

from .audio import read_wav, write_wav
from .datagen import build_corpus, read_manifest
from .evaluation import enhance_waveform, evaluate_manifest
from .model import (
    ModelConfig,
    build_model,
    count_macs,
    count_params,
    load_checkpoint,
    save_checkpoint,
    transformer_layer_count,
)
from .training import TrainConfig, train_stage


def _load_config_file(path):
    blob = json.loads(pathlib.Path(path).read_text()) if path else {}
    model_cfg = ModelConfig.from_dict(blob.get("model", {}))
    train_cfg = TrainConfig.from_dict(blob.get("train", {}))
    max_steps = blob.get("max_steps")
    return model_cfg, train_cfg, max_steps


def _cmd_datagen(args):
    manifests = build_corpus(args.out, args.seed, args.train, args.dev, args.test)
    for split, path in manifests.items():
        print(f"{split}: {path}")
    return 0


def _cmd_train(args):
    model_cfg, train_cfg, cfg_steps = _load_config_file(args.config)
    if args.resume:
        model, meta = load_checkpoint(args.resume)
    else:
        if args.stage == 2:
            raise ValueError("stage 2 requires --resume with a stage-1 checkpoint")
        model = build_model(model_cfg, seed=train_cfg.seed)
    model.train()
    records = read_manifest(args.data)
    val_records = read_manifest(args.val_data) if args.val_data else None
    steps = args.steps if args.steps is not None else (cfg_steps or 1000)
    out_dir = pathlib.Path(args.out)
    train_stage(
        model,
        args.stage,
        records,
        train_cfg,
        out_dir,
        max_steps=steps,
        val_records=val_records,
    )
    ckpt = out_dir / f"ckpt-stage{args.stage}"
    print(f"checkpoint: {ckpt}")
    return 0


def _cmd_enhance(args):
    model, _ = load_checkpoint(args.ckpt)
    wave = read_wav(args.in_wav)
    out = enhance_waveform(model, wave)
    write_wav(args.out_wav, out, fmt="float32")
    print(f"wrote {args.out_wav} ({out.channels} ch, {out.length} samples)")
    return 0


def _cmd_evaluate(args):
    model, _ = load_checkpoint(args.ckpt)
    records = read_manifest(args.manifest)
    report = evaluate_manifest(model, records)
    pathlib.Path(args.report).write_text(
        json.dumps(report.to_dict(), indent=2) + "\n"
    )
    print(
        f"{len(report.rows)} utterances  "
        f"mean si_sdr {report.mean_si_sdr_db:.2f} dB  "
        f"mean improvement {report.mean_improvement_db:.2f} dB"
    )
    print(f"report: {args.report}")
    return 0


def _cmd_info(args):
    if args.ckpt:
        model, meta = load_checkpoint(args.ckpt)
        config = model.config
    else:
        config = (
            ModelConfig(variant=args.variant)
            if args.variant
            else _load_config_file(args.config)[0]
        )
        model = build_model(config, seed=0)
        meta = {}
    giga = 1e9
    print(f"variant: {config.variant}")
    print(f"channel module: {config.channel_module}")
    print(f"blocks: {config.K} (channel modeling in first {config.K_s})")
    print(f"transformer layers: {transformer_layer_count(model)}")
    print(f"parameters: {count_params(model):,}")
    for ch in (1, 2):
        macs = count_macs(config, 16000, ch, 1.0)
        print(f"macs per second (16 kHz, {ch} ch): {macs / giga:.2f} G")
    if meta:
        print(f"training meta: {json.dumps(meta)}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="flexse",
        description="Speech enhancement invariant to rate, channel count, and length.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="write a synthetic corpus and manifests")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=8)
    p.add_argument("--dev", type=int, default=2)
    p.add_argument("--test", type=int, default=2)
    p.set_defaults(fn=_cmd_datagen)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--config", default=None, help="JSON with model/train sections")
    p.add_argument("--data", required=True, help="training manifest")
    p.add_argument("--val-data", default=None, help="validation manifest")
    p.add_argument("--resume", default=None, help="checkpoint dir to start from")
    p.add_argument("--out", default="run", help="output dir for logs/checkpoints")
    p.add_argument("--steps", type=int, default=None, help="optimizer steps")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("enhance", help="enhance one WAV file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="in_wav", required=True)
    p.add_argument("--out", dest="out_wav", required=True)
    p.set_defaults(fn=_cmd_enhance)

    p = sub.add_parser("evaluate", help="score a manifest and write a report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("info", help="print parameter and MAC statistics")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--variant", default=None, choices=("comp", "swin", "uses_baseline"))
    p.set_defaults(fn=_cmd_info)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # one diagnostic line, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
