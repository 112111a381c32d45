"""Waveform container and RIFF WAV I/O.

Audio is held planar as float32 (channels, length) in [-1, 1]. Files are
read/written through scipy's WAV support, which covers little-endian PCM-16
and IEEE float-32 with arbitrary channel counts.
"""

import dataclasses

import numpy as np
from scipy.io import wavfile

__all__ = ["Waveform", "read_wav", "write_wav"]

PCM16_SCALE = 32768.0


@dataclasses.dataclass
class Waveform:
    """Multi-channel audio: samples (C, L) float32, rate in Hz."""

    samples: np.ndarray
    rate_hz: int

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2:
            raise ValueError(f"samples must be (C, L), got shape {s.shape}")
        if s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"empty waveform: shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains non-finite samples")
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        self.samples = np.ascontiguousarray(s, dtype=np.float32)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.rate_hz


def read_wav(path) -> Waveform:
    """Read a WAV file into a float32 (C, L) Waveform.

    PCM-16 is scaled by 1/32768; float WAVs are passed through. PCM-32
    and PCM-8 are scaled to the same nominal [-1, 1) range.
    """
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    data = data.T  # scipy gives (L, C)
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / PCM16_SCALE
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype} in {path}")
    return Waveform(samples, int(rate))


def write_wav(path, wave: Waveform, fmt: str = "float32") -> None:
    """Write a Waveform as float32 (default) or PCM-16 WAV."""
    data = wave.samples.T  # (L, C) for scipy
    if fmt == "float32":
        out = data.astype(np.float32)
    elif fmt == "pcm16":
        clipped = np.clip(data, -1.0, 1.0 - 1.0 / PCM16_SCALE)
        out = np.round(clipped * PCM16_SCALE).astype(np.int16)
    else:
        raise ValueError(f"fmt must be 'float32' or 'pcm16', got {fmt!r}")
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(path, wave.rate_hz, out)
