"""Convolutional codec between spectra and N-dimensional T-F embeddings.

Encoder: 3x3 conv (2 -> N, same padding), layer norm over the embedding
dimension per T-F bin, then a pointwise conv (N -> N). Decoder mirrors it:
PReLU, pointwise conv (N -> N), transposed 3x3 conv (N -> 2, same padding).

Channels are treated as a batch axis throughout, so the codec never mixes
microphones, and no parameter depends on F or T (the convolutions are local),
which keeps the codec usable at any sampling rate.

Features are (N, C, F, T); spectra are (C, 2, F, T).
"""

import torch
from torch import nn

__all__ = ["SpectrumEncoder", "SpectrumDecoder"]


class SpectrumEncoder(nn.Module):
    def __init__(self, n_embed: int):
        super().__init__()
        self.conv_in = nn.Conv2d(2, n_embed, kernel_size=3, padding=1)
        self.norm = nn.LayerNorm(n_embed)
        self.conv_pw = nn.Conv2d(n_embed, n_embed, kernel_size=1)

    def forward(self, spec: torch.Tensor) -> torch.Tensor:
        """(C, 2, F, T) -> (N, C, F, T)"""
        if spec.dim() != 4 or spec.shape[1] != 2:
            raise ValueError(f"expected (C, 2, F, T), got {tuple(spec.shape)}")
        h = self.conv_in(spec)  # (C, N, F, T)
        h = self.norm(h.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)
        h = self.conv_pw(h)
        return h.permute(1, 0, 2, 3).contiguous()


class SpectrumDecoder(nn.Module):
    def __init__(self, n_embed: int):
        super().__init__()
        self.act = nn.PReLU()
        self.conv_pw = nn.Conv2d(n_embed, n_embed, kernel_size=1)
        self.conv_out = nn.ConvTranspose2d(n_embed, 2, kernel_size=3, padding=1)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        """(N, 1, F, T) reference-channel feature -> (1, 2, F, T)"""
        if feat.dim() != 4:
            raise ValueError(f"expected (N, 1, F, T), got {tuple(feat.shape)}")
        if feat.shape[1] != 1:
            raise ValueError(
                f"decoder takes a single channel, got C={feat.shape[1]}; "
                "select the reference channel first"
            )
        h = feat.permute(1, 0, 2, 3)  # (1, N, F, T)
        h = self.conv_pw(self.act(h))
        return self.conv_out(h)
