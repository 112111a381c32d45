"""Model assembly, configuration, parameter/MAC accounting, checkpoints.

A model is: STFT -> conv encoder -> K multi-path blocks -> reference-channel
selection -> conv decoder -> iSTFT. Each block holds a T-F module and, in
the first K_s blocks, a channel module. Three variants share the block
library:

* comp:          window layer + memory tokens + freq/time path per block
* swin:          four window layers per block (plain/shifted alternating)
* uses_baseline: freq/time path pairs with memory tokens, channel module
                 applied even to single-channel input (the older coupled
                 design this code base decouples from)

comp and swin skip their channel modules entirely when C == 1, so their
single-channel output cannot depend on channel-module parameters. Inputs
longer than the configured segment length are processed in segments with
the memory-token carry (swin attends locally and takes the full length in
one pass).
"""

import dataclasses
import json
import pathlib
import struct

import numpy as np
import torch
from torch import nn

from .channel_blocks import build_channel_module
from .codec import SpectrumDecoder, SpectrumEncoder
from .stft import HOP_MS, fft_size_for, istft, stft
from .tf_blocks import (
    AxialTransformerLayer,
    CompositeTFModule,
    DualPathTFModule,
    WindowTFModule,
    WindowTransformerLayer,
)

__all__ = [
    "ModelConfig",
    "SpeechEnhancer",
    "build_model",
    "count_params",
    "count_macs",
    "transformer_layer_count",
    "is_channel_param",
    "channel_param_names",
    "save_checkpoint",
    "load_checkpoint",
    "read_weight_records",
]

VARIANTS = ("comp", "swin", "uses_baseline")
CHANNEL_MODULES = ("tac", "tattc", "att_tac_cascade")
_DEFAULT_BLOCKS = {"comp": 4, "swin": 3, "uses_baseline": 6}
WEIGHT_DTYPE_F32 = 0


@dataclasses.dataclass
class ModelConfig:
    """Architectural hyperparameters; every field round-trips through JSON.

    K defaults per variant (comp 4, swin 3, uses_baseline 6) so that the
    default models all contain 12 transformer layers. The channel module
    defaults to the attention kind except for the baseline, which keeps the
    average kind it is meant to represent.
    """

    variant: str = "comp"
    K: int = None
    K_s: int = 2
    N: int = 128
    H: int = None
    W_F: int = 8
    W_T: int = 8
    G: int = 2
    heads: int = 4
    channel_module: str = None
    reference_channel: int = 0
    segment_seconds: float = 4.0
    attn_scale: str = "ht2"
    residual_channel_module: bool = True
    mlp_ratio: int = 3
    gru_hidden: int = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.K is None:
            self.K = _DEFAULT_BLOCKS[self.variant]
        if self.channel_module is None:
            self.channel_module = "tac" if self.variant == "uses_baseline" else "tattc"
        if self.channel_module not in CHANNEL_MODULES:
            raise ValueError(
                f"channel_module must be one of {CHANNEL_MODULES}, "
                f"got {self.channel_module!r}"
            )
        if self.H is None:
            self.H = self.N
        if self.gru_hidden is None:
            self.gru_hidden = self.N // 2
        if not 1 <= self.K_s <= self.K:
            raise ValueError(f"need 1 <= K_s <= K, got K_s={self.K_s}, K={self.K}")
        if self.N % self.heads != 0:
            raise ValueError(f"heads={self.heads} must divide N={self.N}")
        if min(self.N, self.H, self.W_F, self.W_T, self.G, self.gru_hidden) < 1:
            raise ValueError("N, H, W_F, W_T, G, gru_hidden must all be >= 1")
        if self.reference_channel < 0:
            raise ValueError("reference_channel must be >= 0")
        if self.segment_seconds <= 0:
            raise ValueError("segment_seconds must be > 0")
        if self.attn_scale not in ("ht2", "hft"):
            raise ValueError(f"attn_scale must be 'ht2' or 'hft', got {self.attn_scale!r}")
        if self.mlp_ratio < 1:
            raise ValueError("mlp_ratio must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**d)

    @property
    def segment_frames(self) -> int:
        """Frames per processing segment; rate-independent by construction."""
        return int(self.segment_seconds * 1000) // HOP_MS + 1

    def layers_per_block(self) -> int:
        return {"comp": 3, "swin": 4, "uses_baseline": 2}[self.variant]


class _Block(nn.Module):
    def __init__(self, tf_module, channel_mod=None):
        super().__init__()
        self.tf = tf_module
        self.channel_mod = channel_mod


def _make_tf_module(cfg: ModelConfig):
    if cfg.variant == "swin":
        return WindowTFModule(
            cfg.N, cfg.heads, cfg.W_F, cfg.W_T, layers=4, mlp_ratio=cfg.mlp_ratio
        )
    if cfg.variant == "comp":
        return CompositeTFModule(
            cfg.N, cfg.heads, cfg.W_F, cfg.W_T, cfg.G,
            mlp_ratio=cfg.mlp_ratio, gru_hidden=cfg.gru_hidden,
        )
    return DualPathTFModule(cfg.N, cfg.heads, cfg.G, gru_hidden=cfg.gru_hidden)


class SpeechEnhancer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = SpectrumEncoder(config.N)
        self.blocks = nn.ModuleList(
            _Block(
                _make_tf_module(config),
                build_channel_module(
                    config.channel_module,
                    config.N,
                    config.H,
                    config.attn_scale,
                    config.residual_channel_module,
                    position=k,
                )
                if k < config.K_s
                else None,
            )
            for k in range(config.K)
        )
        self.decoder = SpectrumDecoder(config.N)

    def _run_blocks(self, feat, carries, channels):
        apply_channel = channels > 1 or self.config.variant == "uses_baseline"
        new_carries = []
        for k, block in enumerate(self.blocks):
            feat, carry = block.tf(feat, None if carries is None else carries[k])
            new_carries.append(carry)
            if block.channel_mod is not None and apply_channel:
                feat = block.channel_mod(feat)
        return feat, new_carries

    def forward(self, samples, rate_hz: int, reference_channel: int = None):
        """(C, L) mixture -> (1, L) enhanced reference channel, same rate."""
        if not torch.is_tensor(samples):
            samples = torch.as_tensor(np.asarray(samples))
        if samples.dim() == 1:
            samples = samples[None, :]
        channels, length = samples.shape
        ref = (
            self.config.reference_channel
            if reference_channel is None
            else reference_channel
        )
        if not 0 <= ref < channels:
            raise ValueError(f"reference channel {ref} out of range for C={channels}")
        spec = stft(samples, rate_hz)
        feat = self.encoder(spec)  # (N, C, F, T)
        frames = feat.shape[3]
        seg = self.config.segment_frames
        if self.config.variant == "swin" or frames <= seg:
            feat, _ = self._run_blocks(feat, None, channels)
        else:
            carries = None
            pieces = []
            for start in range(0, frames, seg):
                piece, carries = self._run_blocks(
                    feat[:, :, :, start : start + seg], carries, channels
                )
                pieces.append(piece)
            feat = torch.cat(pieces, dim=3)
        out_spec = self.decoder(feat[:, ref : ref + 1])
        return istft(out_spec, rate_hz, length)


def build_model(config: ModelConfig, seed: int = 0) -> SpeechEnhancer:
    """Deterministic construction: same (config, seed) gives identical weights."""
    torch.manual_seed(seed)
    return SpeechEnhancer(config)


def count_params(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def transformer_layer_count(module: nn.Module) -> int:
    return sum(
        1
        for m in module.modules()
        if isinstance(m, (WindowTransformerLayer, AxialTransformerLayer))
    )


def is_channel_param(name: str) -> bool:
    return ".channel_mod." in name


def channel_param_names(model: nn.Module):
    return {n for n, _ in model.named_parameters() if is_channel_param(n)}


# ---------------------------------------------------------------------------
# Analytic MAC accounting. Multiplies in convolutions, linear layers,
# attention matmuls, and GRU gate matmuls are counted; normalizations,
# activations, softmax, and the (i)STFT itself are not.

def _ceil_mult(x, w):
    return ((x + w - 1) // w) * w


def _window_layer_macs(cfg, c, f, t):
    tokens = cfg.W_F * cfg.W_T
    n_windows = c * (_ceil_mult(f, cfg.W_F) // cfg.W_F) * (
        _ceil_mult(t, cfg.W_T) // cfg.W_T
    )
    proj = tokens * (4 + 2 * cfg.mlp_ratio) * cfg.N * cfg.N  # qkv+out+mlp
    attn = 2 * tokens * tokens * cfg.N  # logits + weighted sum
    return n_windows * (proj + attn)


def _axial_layer_macs(cfg, seq, batch):
    n, h = cfg.N, cfg.gru_hidden
    attn = batch * (4 * n * n * seq + 2 * seq * seq * n)
    gru = batch * seq * 2 * (3 * h * n + 3 * h * h)  # both directions
    fc = batch * seq * 2 * h * n
    return attn + gru + fc


def _channel_attention_macs(h, c, positions):
    fc_qkv = 3 * h * h * c * positions
    map_and_apply = 2 * c * c * h * positions
    fc_out = h * h * c * positions
    return fc_qkv + map_and_apply + fc_out


def _channel_module_macs(cfg, kind, c, f, t):
    n, h = cfg.N, cfg.H
    positions = f * t
    if kind == "tac":
        hidden = 3 * n
        return (
            c * positions * n * hidden
            + positions * hidden * hidden
            + c * positions * 2 * hidden * n
        )
    if kind == "tattc":
        return (
            c * positions * n * h
            + _channel_attention_macs(h, c, positions)
            + c * positions * h * h
            + c * positions * 2 * h * n
        )
    # standalone attention block
    return (
        c * positions * n * h
        + _channel_attention_macs(h, c, positions)
        + c * positions * h * n
    )


def _tf_module_macs(cfg, c, f, t):
    if cfg.variant == "swin":
        return 4 * _window_layer_macs(cfg, c, f, t)
    t_ext = t + cfg.G  # memory frames ride along the paths
    freq = _axial_layer_macs(cfg, seq=f, batch=c * t_ext)
    time = _axial_layer_macs(cfg, seq=t_ext, batch=c * f)
    if cfg.variant == "comp":
        return _window_layer_macs(cfg, c, f, t) + freq + time
    return freq + time


def count_macs(
    config: ModelConfig, rate_hz: int = 16000, channels: int = 1, seconds: float = 1.0
) -> int:
    """Multiply-accumulates for one forward pass of `seconds` of audio."""
    fft = fft_size_for(rate_hz)
    f = fft // 2 + 1
    length = int(round(seconds * rate_hz))
    t = length // (fft // 2) + 1
    n, c = config.N, channels

    total = c * f * t * (2 * n * 9 + n * n)  # encoder convs
    total += f * t * (n * n + n * 2 * 9)  # decoder convs, reference channel

    seg = config.segment_frames
    if config.variant == "swin" or t <= seg:
        segments = [t]
    else:
        segments = [min(seg, t - s) for s in range(0, t, seg)]
    apply_channel = channels > 1 or config.variant == "uses_baseline"
    for t_s in segments:
        for k in range(config.K):
            total += _tf_module_macs(config, c, f, t_s)
            if k < config.K_s and apply_channel:
                kind = config.channel_module
                if kind == "att_tac_cascade":
                    kind = "catt" if k == 0 else "tac"
                total += _channel_module_macs(config, kind, c, f, t_s)
    return int(total)


# ---------------------------------------------------------------------------
# Checkpoints: a directory with config.json (model config + stage metadata)
# and weights.bin, a flat archive of records sorted by parameter name:
#   uint32 LE  name length in bytes
#   bytes      name (utf-8)
#   uint8      dtype tag (0 = float32)
#   uint8      rank
#   uint32 LE  per dimension, outermost first
#   bytes      raw little-endian float32 values, C order

def save_checkpoint(model: SpeechEnhancer, ckpt_dir, meta: dict = None) -> None:
    path = pathlib.Path(ckpt_dir)
    path.mkdir(parents=True, exist_ok=True)
    blob = {
        "model": dataclasses.asdict(model.config),
        "meta": dict(meta or {}),
    }
    (path / "config.json").write_text(json.dumps(blob, indent=2) + "\n")
    state = model.state_dict()
    with open(path / "weights.bin", "wb") as fh:
        for name in sorted(state):
            arr = state[name].detach().cpu().to(torch.float32).numpy()
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", WEIGHT_DTYPE_F32, arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def read_weight_records(path) -> dict:
    """Parse a weights.bin into {name: float32 ndarray}."""
    out = {}
    raw = pathlib.Path(path).read_bytes()
    pos = 0
    while pos < len(raw):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        dtype_tag, rank = struct.unpack_from("<BB", raw, pos)
        pos += 2
        if dtype_tag != WEIGHT_DTYPE_F32:
            raise ValueError(f"unsupported dtype tag {dtype_tag} for {name!r}")
        dims = struct.unpack_from(f"<{rank}I", raw, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        out[name] = arr
    return out


def load_checkpoint(ckpt_dir):
    """Rebuild the model from a checkpoint directory -> (model, meta dict)."""
    path = pathlib.Path(ckpt_dir)
    blob = json.loads((path / "config.json").read_text())
    config = ModelConfig.from_dict(blob["model"])
    model = SpeechEnhancer(config)
    records = read_weight_records(path / "weights.bin")
    state = {k: torch.from_numpy(v.copy()) for k, v in records.items()}
    model.load_state_dict(state, strict=True)
    model.eval()
    return model, blob.get("meta", {})
