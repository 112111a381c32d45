"""Two-stage training: schedule, chunk/channel sampling, the update loop.

Stage 1 trains every parameter outside the channel modules on
single-channel data; stage 2 trains only the channel-module parameters on
multi-channel data with everything else frozen (enforced through
requires_grad, so frozen parameters stay bit-identical).

The learning rate follows a closed form: linear warmup to the peak, then a
halving for every run of `plateau_patience` consecutive validation epochs
without a strictly lower loss (the streak counter resets after each
halving). Every random decision is drawn from an rng keyed by
(seed, stage, step, slot) or (seed, stage, epoch), so data loading order
cannot change results.
"""

import dataclasses
import json
import math
import pathlib

import numpy as np
import torch

from . import datagen
from .model import is_channel_param, save_checkpoint
from .objective import LossConfig, loss

__all__ = [
    "TrainConfig",
    "StageSpec",
    "make_stage_spec",
    "lr_at",
    "PlateauTracker",
    "sample_chunk",
    "sample_channels",
    "train_stage",
]


@dataclasses.dataclass
class TrainConfig:
    peak_lr: float = 4e-4
    warmup_steps: int = 4000
    plateau_patience: int = 2  # validation epochs
    halving: float = 0.5
    batch: int = 4
    chunk_seconds: float = 4.0
    max_channels: int = 4
    seed: int = 0
    clip_norm: float = 5.0
    val_every: int = 1  # epochs between validation passes

    def __post_init__(self):
        numeric = (
            self.peak_lr, self.warmup_steps, self.plateau_patience, self.halving,
            self.batch, self.chunk_seconds, self.max_channels, self.clip_norm,
            self.val_every,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("all TrainConfig values must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**d)


@dataclasses.dataclass(frozen=True)
class StageSpec:
    stage: int
    trainable: object  # predicate over parameter names
    wants: object  # predicate over manifest records


def make_stage_spec(stage: int) -> StageSpec:
    if stage == 1:
        return StageSpec(1, lambda n: not is_channel_param(n), lambda r: r.channels == 1)
    if stage == 2:
        return StageSpec(2, is_channel_param, lambda r: r.channels >= 2)
    raise ValueError(f"stage must be 1 or 2, got {stage}")


def lr_at(step: int, halvings: int, cfg: TrainConfig) -> float:
    """peak * min(step/warmup, 1) * halving^halvings."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return cfg.peak_lr * min(step / cfg.warmup_steps, 1.0) * cfg.halving**halvings


class PlateauTracker:
    """Counts validation epochs without strict improvement; fires a halving
    after each full run of `patience`, then resets the streak."""

    def __init__(self, patience: int = 2):
        self.patience = patience
        self.best = math.inf
        self.streak = 0
        self.halvings = 0

    def update(self, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.streak = 0
            return False
        self.streak += 1
        if self.streak >= self.patience:
            self.halvings += 1
            self.streak = 0
            return True
        return False


def sample_chunk(samples: np.ndarray, chunk_len: int, rng) -> np.ndarray:
    """Random fixed-length crop; shorter inputs are zero-padded at the end.

    Rows are cropped together, so stacking mixture and reference keeps them
    aligned through the random offset.
    """
    if samples.ndim != 2 or samples.shape[1] < 1:
        raise ValueError(f"need (C, L) samples with L >= 1, got {samples.shape}")
    c, length = samples.shape
    if length >= chunk_len:
        start = int(rng.integers(0, length - chunk_len + 1))
        return samples[:, start : start + chunk_len].copy()
    out = np.zeros((c, chunk_len), dtype=samples.dtype)
    out[:, :length] = samples
    return out


def sample_channels(channels: int, stage: int, rng, max_channels: int = 4):
    """Stage 1: one channel uniformly. Stage 2: shuffle, keep C' channels
    with C' uniform over {2..min(C, max_channels)}."""
    if channels < 1:
        raise ValueError("need at least one channel")
    if stage == 1:
        return np.array([int(rng.integers(0, channels))])
    if channels < 2:
        raise ValueError("stage 2 requires multi-channel input")
    top = min(channels, max_channels)
    keep = int(rng.integers(2, top + 1))
    return rng.permutation(channels)[:keep]


def _example_rng(cfg, stage, step, slot):
    return np.random.default_rng([cfg.seed, stage, step, slot])


class _WavCache:
    def __init__(self):
        self._store = {}

    def get(self, rec):
        if rec.id not in self._store:
            self._store[rec.id] = datagen.load_record(rec)
        return self._store[rec.id]


def _validation_loss(model, records, cache, loss_cfg) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for rec in records:
            mixture, reference, rate = cache.get(rec)
            est = model(torch.from_numpy(mixture), rate)
            total += float(loss(est, torch.from_numpy(reference), loss_cfg))
    model.train()
    return total / len(records)


def train_stage(
    model,
    stage: int,
    train_records,
    cfg: TrainConfig,
    out_dir,
    max_steps: int,
    val_records=None,
    loss_cfg: LossConfig = LossConfig(),
):
    """Run one training stage for `max_steps` optimizer steps.

    Returns the list of log entries; also appends them as JSON lines to
    out_dir/train_log.jsonl and writes a checkpoint directory
    out_dir/ckpt-stage{N} at the end.
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = make_stage_spec(stage)
    records = [r for r in train_records if spec.wants(r)]
    if not records:
        raise ValueError(
            f"stage {stage} found no usable records "
            f"({'single' if stage == 1 else 'multi'}-channel required)"
        )
    vals = [r for r in (val_records if val_records is not None else records) if spec.wants(r)]
    if not vals:
        raise ValueError(f"stage {stage} validation set is empty after filtering")

    for name, p in model.named_parameters():
        p.requires_grad = bool(spec.trainable(name))
    trainable = [p for p in model.parameters() if p.requires_grad]
    if not trainable:
        raise ValueError(f"stage {stage} leaves no trainable parameters")

    optimizer = torch.optim.Adam(trainable, lr=cfg.peak_lr)
    tracker = PlateauTracker(cfg.plateau_patience)
    cache = _WavCache()
    log_path = out_dir / "train_log.jsonl"
    logs = []
    model.train()

    def emit(entry):
        logs.append(entry)
        with open(log_path, "a") as fh:
            fh.write(json.dumps(entry) + "\n")

    step = 0
    epoch = 0
    while step < max_steps:
        order = np.random.default_rng([cfg.seed, stage, 1_000_000 + epoch]).permutation(
            len(records)
        )
        last_train = None
        for b0 in range(0, len(order), cfg.batch):
            step += 1
            lr = lr_at(step, tracker.halvings, cfg)
            for group in optimizer.param_groups:
                group["lr"] = lr
            batch_losses = []
            for slot, ridx in enumerate(order[b0 : b0 + cfg.batch]):
                rng = _example_rng(cfg, stage, step, slot)
                mixture, reference, rate = cache.get(records[int(ridx)])
                chans = sample_channels(
                    mixture.shape[0], stage, rng, cfg.max_channels
                )
                picked = mixture[chans]
                stacked = np.concatenate([picked, reference], axis=0)
                chunk = sample_chunk(stacked, int(cfg.chunk_seconds * rate), rng)
                mix_t = torch.from_numpy(chunk[: len(chans)])
                ref_t = torch.from_numpy(chunk[len(chans) :])
                est = model(mix_t, rate)
                batch_losses.append(loss(est, ref_t, loss_cfg))
            total = torch.stack(batch_losses).mean()
            optimizer.zero_grad()
            total.backward()
            torch.nn.utils.clip_grad_norm_(trainable, cfg.clip_norm)
            optimizer.step()
            last_train = float(total.detach())
            emit(
                {
                    "step": step,
                    "stage": stage,
                    "lr": lr,
                    "train_loss": last_train,
                    "val_loss": None,
                }
            )
            if step >= max_steps:
                break
        epoch += 1
        if epoch % cfg.val_every == 0 or step >= max_steps:
            vloss = _validation_loss(model, vals, cache, loss_cfg)
            tracker.update(vloss)
            emit(
                {
                    "step": step,
                    "stage": stage,
                    "lr": lr_at(step, tracker.halvings, cfg),
                    "train_loss": last_train,
                    "val_loss": vloss,
                }
            )

    ckpt_dir = out_dir / f"ckpt-stage{stage}"
    save_checkpoint(model, ckpt_dir, meta={"stage": stage, "step": step})
    return logs
