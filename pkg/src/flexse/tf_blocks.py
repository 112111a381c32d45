"""Time-frequency modeling layers and the per-block T-F modules.

Three layer families operate on (N, C, F, T) features:

* WindowTransformerLayer: multi-head self-attention inside W_F x W_T tiles
  with a learnable 2D relative positional bias, optionally on a half-window
  cyclically shifted tiling. Pre-norm transformer structure.
* AxialTransformerLayer: self-attention restricted to the frequency axis
  (each frame separately) or the time axis (each bin separately), followed
  by a recurrent feed-forward: BiGRU over the same axis, ReLU, linear,
  residual, post-norm. The attention sublayer is post-norm as well.
* MemoryTokens + attach/detach: G learned frames prepended along time that
  carry summary state between consecutive segments of a long recording.

No parameter here depends on F or T, so trained layers transfer across
sampling rates unchanged.
"""

import math

import torch
from torch import nn

from .windows import (
    WindowSpec,
    merge_windows,
    partition_windows,
    relative_position_index,
    shift_region_mask,
)

__all__ = [
    "WindowTransformerLayer",
    "AxialTransformerLayer",
    "MemoryTokens",
    "attach_memory",
    "detach_memory",
    "WindowTFModule",
    "CompositeTFModule",
    "DualPathTFModule",
]


class WindowTransformerLayer(nn.Module):
    """Self-attention within T-F windows, plus an MLP, both pre-norm.

    With zeroed output projections (attn proj and second MLP linear) the
    layer is exactly the identity, which the tests rely on.
    """

    def __init__(self, n_embed, heads, w_f, w_t, shifted=False, mlp_ratio=3):
        super().__init__()
        if n_embed % heads != 0:
            raise ValueError(f"heads={heads} must divide n_embed={n_embed}")
        self.spec = WindowSpec(w_f, w_t, shifted)
        self.heads = heads
        self.head_dim = n_embed // heads
        self.norm_attn = nn.LayerNorm(n_embed)
        self.qkv = nn.Linear(n_embed, 3 * n_embed)
        self.proj = nn.Linear(n_embed, n_embed)
        # one bias per head and per relative (df, dt) offset; independent of F, T
        self.rel_bias = nn.Parameter(
            torch.zeros(heads, 2 * w_f - 1, 2 * w_t - 1)
        )
        nn.init.trunc_normal_(self.rel_bias, std=0.02)
        self.register_buffer(
            "rel_index", relative_position_index(w_f, w_t), persistent=False
        )
        self.norm_mlp = nn.LayerNorm(n_embed)
        self.mlp_in = nn.Linear(n_embed, mlp_ratio * n_embed)
        self.mlp_out = nn.Linear(mlp_ratio * n_embed, n_embed)

    def _bias(self, dtype):
        flat = self.rel_bias.reshape(self.heads, -1)
        tokens = self.spec.tokens
        bias = flat[:, self.rel_index.reshape(-1)].reshape(self.heads, tokens, tokens)
        return bias.to(dtype)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        windows, rec = partition_windows(feat, self.spec)
        b, tokens, n = windows.shape
        h = self.norm_attn(windows)
        qkv = (
            self.qkv(h)
            .reshape(b, tokens, 3, self.heads, self.head_dim)
            .permute(2, 0, 3, 1, 4)
        )
        q, k, v = qkv[0], qkv[1], qkv[2]
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        logits = logits + self._bias(logits.dtype)[None]
        mask = shift_region_mask(rec.f_pad, rec.t_pad, self.spec, feat.device)
        if mask is not None:
            per_channel = mask.shape[0]
            logits = logits.reshape(-1, per_channel, self.heads, tokens, tokens)
            logits = logits + mask.to(logits.dtype)[None, :, None]
            logits = logits.reshape(b, self.heads, tokens, tokens)
        attn = torch.softmax(logits, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, tokens, n)
        windows = windows + self.proj(out)
        windows = windows + self.mlp_out(
            torch.nn.functional.gelu(self.mlp_in(self.norm_mlp(windows)))
        )
        return merge_windows(windows, rec)


class AxialTransformerLayer(nn.Module):
    """Attention + BiGRU feed-forward along the frequency or time axis."""

    def __init__(self, n_embed, heads, axis, gru_hidden=None):
        super().__init__()
        if axis not in ("freq", "time"):
            raise ValueError(f"axis must be 'freq' or 'time', got {axis!r}")
        if n_embed % heads != 0:
            raise ValueError(f"heads={heads} must divide n_embed={n_embed}")
        hidden = n_embed // 2 if gru_hidden is None else gru_hidden
        self.axis = axis
        self.attn = nn.MultiheadAttention(n_embed, heads, batch_first=True)
        self.norm_attn = nn.LayerNorm(n_embed)
        self.gru = nn.GRU(
            n_embed, hidden, batch_first=True, bidirectional=True
        )
        self.fc = nn.Linear(2 * hidden, n_embed)
        self.norm_ff = nn.LayerNorm(n_embed)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        n, c, f, t = feat.shape
        if self.axis == "freq":
            x = feat.permute(1, 3, 2, 0).reshape(c * t, f, n)
        else:
            x = feat.permute(1, 2, 3, 0).reshape(c * f, t, n)
        a, _ = self.attn(x, x, x, need_weights=False)
        x = self.norm_attn(x + a)
        r, _ = self.gru(x)
        x = self.norm_ff(x + self.fc(torch.relu(r)))
        if self.axis == "freq":
            return x.reshape(c, t, f, n).permute(3, 0, 2, 1)
        return x.reshape(c, f, t, n).permute(3, 0, 1, 2)


class MemoryTokens(nn.Module):
    """A group of G learned frames, shape (1, N, 1, G)."""

    def __init__(self, n_embed, group):
        super().__init__()
        if group < 1:
            raise ValueError(f"group size must be >= 1, got {group}")
        self.group = group
        self.tokens = nn.Parameter(torch.zeros(1, n_embed, 1, group))
        nn.init.trunc_normal_(self.tokens, std=0.02)


def attach_memory(feat, tokens, carry=None):
    """Prepend G memory frames along time: (N,C,F,T) -> (N,C,F,T+G).

    The learned tokens seed the first segment; afterwards the carry from
    detach_memory() takes their place. Either is broadcast over C and F.
    """
    n, c, f, _ = feat.shape
    mem = tokens if carry is None else carry
    if mem.shape[0] != 1 or mem.shape[1] != n or mem.shape[2] != 1:
        raise ValueError(
            f"memory state must be (1, {n}, 1, G), got {tuple(mem.shape)}"
        )
    mem_feat = mem[0].unsqueeze(1).expand(n, c, f, mem.shape[-1])
    return torch.cat([mem_feat, feat], dim=3)


def detach_memory(feat_ext, group):
    """Split off the leading G frames; their C,F-mean is the next carry.

    (N,C,F,T+G) -> ((N,C,F,T), carry (1,N,1,G))
    """
    if feat_ext.shape[3] <= group:
        raise ValueError(
            f"feature has {feat_ext.shape[3]} frames, cannot detach {group}"
        )
    head = feat_ext[:, :, :, :group]
    carry = head.mean(dim=(1, 2)).unsqueeze(0).unsqueeze(2)
    return feat_ext[:, :, :, group:], carry


class WindowTFModule(nn.Module):
    """T-F module of the window-only variant: plain/shifted layers alternate."""

    def __init__(self, n_embed, heads, w_f, w_t, layers=4, mlp_ratio=3):
        super().__init__()
        self.layers = nn.ModuleList(
            WindowTransformerLayer(
                n_embed, heads, w_f, w_t, shifted=bool(i % 2), mlp_ratio=mlp_ratio
            )
            for i in range(layers)
        )

    def forward(self, feat, carry=None):
        for layer in self.layers:
            feat = layer(feat)
        return feat, None


class CompositeTFModule(nn.Module):
    """Window layer, then memory-extended frequency-path and time-path layers.

    The memory frames are prepended after the window layer; the frequency
    path processes frames independently, so the tokens exchange information
    with the content only inside the time-path attention span.
    """

    def __init__(
        self, n_embed, heads, w_f, w_t, group, mlp_ratio=3, gru_hidden=None
    ):
        super().__init__()
        self.window = WindowTransformerLayer(
            n_embed, heads, w_f, w_t, shifted=False, mlp_ratio=mlp_ratio
        )
        self.memory = MemoryTokens(n_embed, group)
        self.freq_path = AxialTransformerLayer(n_embed, heads, "freq", gru_hidden)
        self.time_path = AxialTransformerLayer(n_embed, heads, "time", gru_hidden)

    def forward(self, feat, carry=None):
        feat = self.window(feat)
        feat = attach_memory(feat, self.memory.tokens, carry)
        feat = self.freq_path(feat)
        feat = self.time_path(feat)
        return detach_memory(feat, self.memory.group)


class DualPathTFModule(nn.Module):
    """Frequency-path + time-path pair with memory tokens (no window layer)."""

    def __init__(self, n_embed, heads, group, gru_hidden=None):
        super().__init__()
        self.memory = MemoryTokens(n_embed, group)
        self.freq_path = AxialTransformerLayer(n_embed, heads, "freq", gru_hidden)
        self.time_path = AxialTransformerLayer(n_embed, heads, "time", gru_hidden)

    def forward(self, feat, carry=None):
        feat = attach_memory(feat, self.memory.tokens, carry)
        feat = self.freq_path(feat)
        feat = self.time_path(feat)
        return detach_memory(feat, self.memory.group)
