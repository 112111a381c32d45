"""Channel modeling blocks: average-based, attention-based, and a cascade.

All blocks map (N, C, F, T) -> (N, C, F, T), share parameters across
channels, and contain nothing shaped by C, F, or T, so one parameter set
serves any microphone count at any sampling rate. Internally the T-F axes
are flattened so each block works on C vectors per position, matching the
N x C x (F T) view the math is written in.

TransformAverageConcat mixes channels through their mean; the attention
variants replace the mean with a C x C channel attention map so uneven or
failed microphones can be down-weighted instead of averaged in.
"""

import math

import torch
from torch import nn

__all__ = [
    "TransformAverageConcat",
    "ChannelWiseAttention",
    "TransformAttendConcat",
    "ChannelAttentionBlock",
    "build_channel_module",
]


def _to_channel_last(x):
    # (N, C, F, T) -> (C, F*T, N)
    n, c, f, t = x.shape
    return x.permute(1, 2, 3, 0).reshape(c, f * t, n), (n, c, f, t)


def _from_channel_last(x, dims):
    n, c, f, t = dims
    return x.reshape(c, f, t, n).permute(3, 0, 1, 2)


class TransformAverageConcat(nn.Module):
    """Per-channel transform, channel mean, re-transform, concatenate, project.

    The hidden width follows the original 3N design. Output is layer
    normalized over the embedding and added back to the input.
    """

    def __init__(self, n_embed, residual=True):
        super().__init__()
        hidden = 3 * n_embed
        self.residual = residual
        self.fc_in = nn.Linear(n_embed, hidden)
        self.act_in = nn.PReLU()
        self.fc_avg = nn.Linear(hidden, hidden)
        self.act_avg = nn.PReLU()
        self.fc_out = nn.Linear(2 * hidden, n_embed)
        self.act_out = nn.PReLU()
        self.norm = nn.LayerNorm(n_embed)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        xc, dims = _to_channel_last(x)
        y = self.act_in(self.fc_in(xc))  # (C, FT, hidden)
        avg = self.act_avg(self.fc_avg(y.mean(dim=0, keepdim=True)))
        avg = avg.expand_as(y)
        out = self.norm(self.act_out(self.fc_out(torch.cat([y, avg], dim=-1))))
        out = _from_channel_last(out, dims)
        return x + out if self.residual else out


class ChannelWiseAttention(nn.Module):
    """C x C attention over channels with T-F folded into the embedding.

    Q and K are flattened to one (H F T)-vector per channel, so the map is
    1 x C x C whatever the size of F and T. Scale follows the stated
    sqrt(H T^2) divisor; "hft" switches to the conventional sqrt(dim).
    """

    def __init__(self, h_dim, scale_mode="ht2"):
        super().__init__()
        if scale_mode not in ("ht2", "hft"):
            raise ValueError(f"scale_mode must be 'ht2' or 'hft', got {scale_mode!r}")
        self.scale_mode = scale_mode
        self.fc_q = nn.Linear(h_dim, h_dim)
        self.norm_q = nn.LayerNorm(h_dim)
        self.fc_k = nn.Linear(h_dim, h_dim)
        self.norm_k = nn.LayerNorm(h_dim)
        self.fc_v = nn.Linear(h_dim, h_dim)
        self.norm_v = nn.LayerNorm(h_dim)
        self.fc_out = nn.Linear(h_dim, h_dim)
        self.norm_out = nn.LayerNorm(h_dim)

    def forward(self, y: torch.Tensor, f_bins: int, t_frames: int):
        """y: (C, F*T, H) -> (attended (C, F*T, H), attention map (C, C))"""
        c, ft, h = y.shape
        q = self.norm_q(torch.relu(self.fc_q(y))).reshape(c, ft * h)
        k = self.norm_k(torch.relu(self.fc_k(y))).reshape(c, ft * h)
        v = self.norm_v(torch.relu(self.fc_v(y)))
        if self.scale_mode == "ht2":
            scale = math.sqrt(h) * t_frames
        else:
            scale = math.sqrt(h * f_bins * t_frames)
        attn = torch.softmax(q @ k.T / scale, dim=-1)  # rows sum to 1
        mixed = torch.einsum("cd,dph->cph", attn, v)
        return self.norm_out(torch.relu(self.fc_out(mixed))), attn


class TransformAttendConcat(nn.Module):
    """Channel mixing through attention instead of averaging.

    Y = PReLU(FC(X)); Ybar = PReLU(FC(Attn(Y))); the two are concatenated
    along the embedding and projected back to N with PReLU + LN. A residual
    connection around the whole block is on by default (toggleable).
    """

    def __init__(self, n_embed, h_dim=None, scale_mode="ht2", residual=True):
        super().__init__()
        h_dim = n_embed if h_dim is None else h_dim
        self.residual = residual
        self.fc_in = nn.Linear(n_embed, h_dim)
        self.act_in = nn.PReLU()
        self.attn = ChannelWiseAttention(h_dim, scale_mode)
        self.fc_attn = nn.Linear(h_dim, h_dim)
        self.act_attn = nn.PReLU()
        self.fc_out = nn.Linear(2 * h_dim, n_embed)
        self.act_out = nn.PReLU()
        self.norm = nn.LayerNorm(n_embed)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, c, f, t = x.shape
        xc, dims = _to_channel_last(x)
        y = self.act_in(self.fc_in(xc))  # (C, FT, H)
        a, _ = self.attn(y, f, t)
        ybar = self.act_attn(self.fc_attn(a))
        xhat = self.norm(self.act_out(self.fc_out(torch.cat([y, ybar], dim=-1))))
        xhat = _from_channel_last(xhat, dims)
        return x + xhat if self.residual else xhat


class ChannelAttentionBlock(nn.Module):
    """Standalone channel attention: transform in, attend, project back."""

    def __init__(self, n_embed, h_dim=None, scale_mode="ht2", residual=True):
        super().__init__()
        h_dim = n_embed if h_dim is None else h_dim
        self.residual = residual
        self.fc_in = nn.Linear(n_embed, h_dim)
        self.act_in = nn.PReLU()
        self.attn = ChannelWiseAttention(h_dim, scale_mode)
        self.fc_out = nn.Linear(h_dim, n_embed)
        self.act_out = nn.PReLU()
        self.norm = nn.LayerNorm(n_embed)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, c, f, t = x.shape
        xc, dims = _to_channel_last(x)
        y = self.act_in(self.fc_in(xc))
        a, _ = self.attn(y, f, t)
        out = self.norm(self.act_out(self.fc_out(a)))
        out = _from_channel_last(out, dims)
        return x + out if self.residual else out


def build_channel_module(kind, n_embed, h_dim, scale_mode, residual, position=0):
    """Channel module for one block. `position` is the block index within
    the channel-equipped prefix; the cascade places the attention block
    first and average blocks after it."""
    if kind == "tac":
        return TransformAverageConcat(n_embed, residual=residual)
    if kind == "tattc":
        return TransformAttendConcat(n_embed, h_dim, scale_mode, residual)
    if kind == "att_tac_cascade":
        if position == 0:
            return ChannelAttentionBlock(n_embed, h_dim, scale_mode, residual)
        return TransformAverageConcat(n_embed, residual=residual)
    raise ValueError(f"unknown channel module kind {kind!r}")
