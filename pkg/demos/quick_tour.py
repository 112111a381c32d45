"""End-to-end walkthrough on a throwaway synthetic corpus.

Generates a few utterances, trains a tiny model for a handful of steps,
enhances one file, and prints an evaluation report. Everything lands in
./quick_tour_out. Takes about a minute on a laptop CPU; the model is far
too small and briefly trained to enhance anything well, the point is the
plumbing.

    python3 demos/quick_tour.py
"""

import json
import pathlib

import torch

from flexse import (
    ModelConfig,
    TrainConfig,
    build_model,
    load_checkpoint,
    train_stage,
)
from flexse.audio import read_wav, write_wav
from flexse.datagen import build_corpus, read_manifest
from flexse.evaluation import enhance_waveform, evaluate_manifest

out = pathlib.Path("quick_tour_out")
out.mkdir(exist_ok=True)

print("== 1. synthetic corpus ==")
manifests = build_corpus(out / "data", seed=7, train=4, dev=2, test=2)
train_records = read_manifest(manifests["train"])
for rec in train_records[:3]:
    print(f"  {rec.id}: {rec.channels} ch @ {rec.rate_hz} Hz, snr {rec.snr_db}")
print(f"  ... {len(train_records)} training utterances total")

print("== 2. stage 1: train everything except the channel modules ==")
cfg = ModelConfig(variant="comp", K=2, K_s=1, N=16, heads=2, W_F=4, W_T=4)
schedule = TrainConfig(peak_lr=1e-3, warmup_steps=10, batch=2,
                       chunk_seconds=1.0, seed=0)
model = build_model(cfg, seed=0)
logs = train_stage(model, 1, train_records, schedule, out / "run",
                   max_steps=6, val_records=read_manifest(manifests["dev"]))
for entry in logs:
    tag = "val" if entry["val_loss"] is not None else "   "
    print(f"  step {entry['step']:2d} {tag} loss {entry['train_loss']:.3f}"
          f"  lr {entry['lr']:.1e}")

print("== 3. stage 2: freeze that, train only the channel modules ==")
model2, _ = load_checkpoint(out / "run" / "ckpt-stage1")
model2.train()
train_stage(model2, 2, train_records, schedule, out / "run", max_steps=4)
print(f"  wrote {out / 'run' / 'ckpt-stage2'}")

print("== 4. enhance one file ==")
rec = read_manifest(manifests["test"])[0]
noisy = read_wav(rec.mixture_path)
enhanced = enhance_waveform(model2, noisy)
write_wav(out / "enhanced.wav", enhanced)
print(f"  {rec.id}: {noisy.channels} ch in -> {enhanced.channels} ch out, "
      f"{enhanced.length} samples @ {enhanced.rate_hz} Hz")

print("== 5. evaluate the test split ==")
report = evaluate_manifest(model2, read_manifest(manifests["test"]))
print(f"  mean si_sdr      {report.mean_si_sdr_db:7.2f} dB")
print(f"  mean improvement {report.mean_improvement_db:7.2f} dB")
print(f"  params {report.params:,}   macs/s @16k 1ch {report.macs_per_s_1ch/1e9:.2f} G")
(out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
print(f"  full report: {out / 'report.json'}")
