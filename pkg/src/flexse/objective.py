"""Scale-invariant multi-resolution spectral loss with a time-domain term.

The estimate is first rescaled by the closed-form optimal scalar
beta = <e, r> / <e, e>, then compared to the reference through L1 distances
between STFT magnitudes at several resolutions plus a weighted time-domain
L1. Because beta absorbs any global gain of the estimate, loss(a*s, s) = 0
for every a > 0.
"""

import dataclasses

import torch

__all__ = ["LossConfig", "optimal_scale", "loss"]


@dataclasses.dataclass(frozen=True)
class LossConfig:
    fft_sizes: tuple = (256, 512, 768, 1024)
    time_weight: float = 0.5

    def __post_init__(self):
        if not self.fft_sizes:
            raise ValueError("fft_sizes must be non-empty")
        if any(w < 16 for w in self.fft_sizes):
            raise ValueError(f"fft_sizes must each be >= 16, got {self.fft_sizes}")
        if self.time_weight < 0:
            raise ValueError(f"time_weight must be >= 0, got {self.time_weight}")


def optimal_scale(estimate: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
    """beta minimizing ||beta*estimate - reference||: <e,r> / <e,e>."""
    e = estimate.reshape(-1)
    r = reference.reshape(-1)
    energy = torch.dot(e, e)
    if energy.item() == 0.0:
        raise ValueError("optimal scale undefined for a zero-energy estimate")
    return torch.dot(e, r) / energy


def _magnitude_stft(x: torch.Tensor, fft_size: int) -> torch.Tensor:
    # Zero padding (not reflection): chunks may be shorter than fft_size.
    window = torch.hann_window(
        fft_size, periodic=True, dtype=x.dtype, device=x.device
    )
    spec = torch.stft(
        x,
        n_fft=fft_size,
        hop_length=fft_size // 4,
        win_length=fft_size,
        window=window,
        center=True,
        pad_mode="constant",
        return_complex=True,
    )
    return spec.abs()


def loss(
    estimate: torch.Tensor,
    reference: torch.Tensor,
    cfg: LossConfig = LossConfig(),
) -> torch.Tensor:
    """Scalar loss, differentiable w.r.t. the estimate.

    Both signals are flattened; shapes must match. Each resolution
    contributes the mean absolute magnitude difference, so resolutions
    weigh equally regardless of bin count.
    """
    if estimate.shape != reference.shape:
        raise ValueError(
            f"shape mismatch: estimate {tuple(estimate.shape)} vs "
            f"reference {tuple(reference.shape)}"
        )
    e = estimate.reshape(-1)
    r = reference.reshape(-1)
    scaled = optimal_scale(e, r) * e
    total = cfg.time_weight * (scaled - r).abs().mean()
    for fft_size in cfg.fft_sizes:
        mag_e = _magnitude_stft(scaled, fft_size)
        mag_r = _magnitude_stft(r, fft_size)
        total = total + (mag_e - mag_r).abs().mean()
    return total
