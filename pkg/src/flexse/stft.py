"""Sampling-frequency-independent STFT front end.

The analysis window and hop are fixed in physical time (32 ms / 16 ms), so
the FFT size scales with the sampling rate and the frame count for a given
duration does not. A 4 s signal yields T = 251 frames at 8, 16, and 48 kHz
alike; only the number of frequency bins F = fft_size/2 + 1 changes.

Spectra are real tensors of shape (C, 2, F, T) with plane 0 = real and
plane 1 = imaginary.
"""

import torch

__all__ = [
    "WIN_MS",
    "HOP_MS",
    "fft_size_for",
    "hop_for",
    "frames_for",
    "stft",
    "istft",
]

WIN_MS = 32
HOP_MS = 16


def fft_size_for(rate_hz: int) -> int:
    """FFT size for a 32 ms window at the given rate.

    Raises ValueError when 32 ms is not a whole, even number of samples
    (the hop must be exactly half a window).
    """
    if rate_hz <= 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    num = rate_hz * WIN_MS
    if num % 1000 != 0:
        raise ValueError(
            f"unsupported rate {rate_hz} Hz: 32 ms is not a whole sample count"
        )
    fft_size = num // 1000
    if fft_size % 2 != 0:
        raise ValueError(
            f"unsupported rate {rate_hz} Hz: window of {fft_size} samples is odd"
        )
    return fft_size


def hop_for(rate_hz: int) -> int:
    return fft_size_for(rate_hz) // 2


def frames_for(length: int, rate_hz: int) -> int:
    """T for a centered STFT: floor(length / hop) + 1."""
    return length // hop_for(rate_hz) + 1


def _window(fft_size: int, dtype, device):
    return torch.hann_window(fft_size, periodic=True, dtype=dtype, device=device)


def stft(samples: torch.Tensor, rate_hz: int) -> torch.Tensor:
    """(C, L) real -> (C, 2, F, T) spectrum.

    Centered frames with reflection padding of fft_size/2 at both ends and a
    periodic Hann window, so istft() below reconstructs exactly. Requires
    L > fft_size/2 for the reflection to be defined.
    """
    if samples.dim() == 1:
        samples = samples[None, :]
    if samples.dim() != 2:
        raise ValueError(f"samples must be (C, L), got {tuple(samples.shape)}")
    c, length = samples.shape
    if length < 1:
        raise ValueError("empty signal")
    fft_size = fft_size_for(rate_hz)
    if length <= fft_size // 2:
        raise ValueError(
            f"signal of {length} samples is shorter than half a window "
            f"({fft_size // 2} samples at {rate_hz} Hz)"
        )
    spec = torch.stft(
        samples,
        n_fft=fft_size,
        hop_length=fft_size // 2,
        win_length=fft_size,
        window=_window(fft_size, samples.dtype, samples.device),
        center=True,
        pad_mode="reflect",
        normalized=False,
        onesided=True,
        return_complex=True,
    )
    return torch.view_as_real(spec).permute(0, 3, 1, 2).contiguous()


def istft(spec: torch.Tensor, rate_hz: int, length: int) -> torch.Tensor:
    """(C, 2, F, T) spectrum -> (C, length) real.

    Overlap-add with the dual window of the analysis Hann; inverse of
    stft() up to float rounding. `length` must agree with T to within one
    hop of slack.
    """
    if spec.dim() != 4 or spec.shape[1] != 2:
        raise ValueError(f"spec must be (C, 2, F, T), got {tuple(spec.shape)}")
    fft_size = fft_size_for(rate_hz)
    if spec.shape[2] != fft_size // 2 + 1:
        raise ValueError(
            f"spec has {spec.shape[2]} bins but rate {rate_hz} Hz implies "
            f"{fft_size // 2 + 1}"
        )
    hop = fft_size // 2
    frames = spec.shape[3]
    if not (frames - 1) * hop <= length < frames * hop:
        raise ValueError(
            f"length {length} inconsistent with {frames} frames at hop {hop}"
        )
    cplx = torch.view_as_complex(spec.permute(0, 2, 3, 1).contiguous())
    return torch.istft(
        cplx,
        n_fft=fft_size,
        hop_length=hop,
        win_length=fft_size,
        window=_window(fft_size, spec.dtype, spec.device),
        center=True,
        normalized=False,
        onesided=True,
        length=length,
    )
