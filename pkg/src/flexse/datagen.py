"""Synthetic desk-scale corpus: pseudo-speech, spatialized mixtures, manifests.

The generator produces deterministic pseudo-speech (amplitude-modulated
harmonics on a drifting fundamental plus band-limited noise bursts), spreads
it over C microphone channels with per-channel gain, integer delay, and
noise at a requested SNR, and writes float32 WAVs plus line-oriented JSON
manifests. Noise is scaled against the measured speech power of each
channel, so the realized SNR equals the request up to float rounding.

A channel can be marked failed: its speech is zeroed while its noise stays,
imitating a dead microphone in an array.
"""

import dataclasses
import json
import math
import pathlib

import numpy as np

from .audio import Waveform, read_wav, write_wav

__all__ = [
    "SceneSpec",
    "UtteranceRecord",
    "synthesize_speech_like",
    "spatialize_and_mix",
    "build_corpus",
    "write_manifest",
    "read_manifest",
]

PEAK = 0.5
_SPLIT_IDS = {"train": 0, "dev": 1, "test": 2}


@dataclasses.dataclass
class SceneSpec:
    duration_s: float
    rate_hz: int
    channels: int
    gains_db: tuple
    delays: tuple  # per-channel delay in samples, >= 0
    snr_db: tuple  # per-channel; math.inf means no noise
    failed: tuple = None  # per-channel bool; None means all alive

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.channels < 1:
            raise ValueError("need at least one channel")
        if self.failed is None:
            self.failed = tuple(False for _ in range(self.channels))
        for name in ("gains_db", "delays", "snr_db", "failed"):
            if len(getattr(self, name)) != self.channels:
                raise ValueError(f"{name} must have {self.channels} entries")
        if any(d < 0 for d in self.delays):
            raise ValueError("delays must be >= 0")


@dataclasses.dataclass
class UtteranceRecord:
    id: str
    mixture_path: str
    reference_path: str
    rate_hz: int
    channels: int
    snr_db: list

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "UtteranceRecord":
        return cls(**json.loads(line))


def synthesize_speech_like(duration_s: float, rate_hz: int, rng) -> Waveform:
    """Deterministic pseudo-speech, peak-normalized to 0.5.

    Harmonics of a fundamental drifting in 90-220 Hz, shaped by a syllabic
    amplitude envelope and a broad spectral tilt, plus sparse band-limited
    noise bursts. Energy spans roughly 100 Hz to 3.8 kHz.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    length = int(round(duration_s * rate_hz))
    t_idx = np.arange(length)

    # fundamental: smooth interpolation between random control points
    n_ctrl = max(int(duration_s * 2) + 2, 3)
    ctrl_f0 = rng.uniform(90.0, 220.0, n_ctrl)
    f0 = np.interp(t_idx, np.linspace(0, length - 1, n_ctrl), ctrl_f0)
    phase = 2.0 * np.pi * np.cumsum(f0) / rate_hz

    top_hz = min(3800.0, 0.45 * rate_hz)
    n_harm = max(int(top_hz / ctrl_f0.max()), 3)
    voiced = np.zeros(length)
    for k in range(1, n_harm + 1):
        # spectral tilt plus a mild resonance bump around 500 Hz
        center = k * float(np.median(f0))
        weight = (1.0 / k) * (1.0 + 1.5 * math.exp(-(((center - 500.0) / 400.0) ** 2)))
        voiced += weight * np.sin(k * phase)

    # syllabic envelope around 3 Hz
    n_env = max(int(duration_s * 6) + 2, 3)
    ctrl_env = rng.uniform(0.05, 1.0, n_env)
    env = np.interp(t_idx, np.linspace(0, length - 1, n_env), ctrl_env) ** 1.5
    voiced *= env

    # sparse band-limited bursts (consonant-ish)
    bursts = np.zeros(length)
    for _ in range(max(int(duration_s * 2), 1)):
        start = int(rng.integers(0, max(length - 1, 1)))
        width = int(rng.uniform(0.02, 0.08) * rate_hz)
        stop = min(start + width, length)
        bursts[start:stop] += rng.standard_normal(stop - start)
    spec = np.fft.rfft(bursts)
    freqs = np.fft.rfftfreq(length, d=1.0 / rate_hz)
    band = (freqs >= 1000.0) & (freqs <= top_hz)
    spec[~band] = 0.0
    bursts = np.fft.irfft(spec, n=length)
    peak_b = np.max(np.abs(bursts))
    if peak_b > 0:
        bursts *= 0.3 * np.max(np.abs(voiced)) / peak_b

    x = voiced + bursts
    x *= PEAK / np.max(np.abs(x))
    return Waveform(x[None, :].astype(np.float32), rate_hz)


def _delayed(x: np.ndarray, delay: int) -> np.ndarray:
    if delay == 0:
        return x.copy()
    out = np.zeros_like(x)
    out[delay:] = x[: len(x) - delay]
    return out


def spatialize_and_mix(clean: Waveform, scene: SceneSpec, rng):
    """1-ch clean -> (C-ch mixture, 1-ch reference).

    Channel c carries gain_c * delay(clean, d_c) plus noise realized at
    SNR_c against that channel's own speech power. The reference is channel
    0's clean component (before any failure zeroing).
    """
    if clean.channels != 1:
        raise ValueError("clean input must be single-channel")
    if clean.rate_hz != scene.rate_hz:
        raise ValueError("scene rate does not match the clean signal")
    base = clean.samples[0].astype(np.float64)
    length = len(base)
    mixture = np.zeros((scene.channels, length))
    reference = None
    for c in range(scene.channels):
        speech = 10.0 ** (scene.gains_db[c] / 20.0) * _delayed(base, int(scene.delays[c]))
        if c == 0:
            reference = speech.copy()
        noise = np.zeros(length)
        if math.isfinite(scene.snr_db[c]):
            noise = rng.standard_normal(length)
            p_speech = np.mean(speech**2)
            p_noise = np.mean(noise**2)
            noise *= np.sqrt(p_speech / (p_noise * 10.0 ** (scene.snr_db[c] / 10.0)))
        if scene.failed[c]:
            speech = np.zeros(length)
        mixture[c] = speech + noise
    return (
        Waveform(mixture.astype(np.float32), scene.rate_hz),
        Waveform(reference[None, :].astype(np.float32), scene.rate_hz),
    )


def _utterance_rng(seed, split, kind, index):
    return np.random.default_rng([seed, _SPLIT_IDS[split], kind, index])


def _make_single(seed, split, index, out_dir):
    rng = _utterance_rng(seed, split, 0, index)
    rate = 8000 if index % 2 == 0 else 16000
    duration = float(rng.uniform(4.0, 6.0))
    clean = synthesize_speech_like(duration, rate, rng)
    snr = float(rng.uniform(0.0, 15.0))
    scene = SceneSpec(duration, rate, 1, (0.0,), (0,), (snr,))
    mixture, reference = spatialize_and_mix(clean, scene, rng)
    return _write_pair(out_dir, split, f"{split}-single-{index:04d}", mixture, reference, [snr])


def _make_multi(seed, split, index, out_dir):
    rng = _utterance_rng(seed, split, 1, index)
    rate = 8000 if index % 2 == 0 else 16000
    duration = float(rng.uniform(4.0, 6.0))
    clean = synthesize_speech_like(duration, rate, rng)
    channels = int(rng.integers(2, 6))
    gains = [0.0] + [float(g) for g in rng.uniform(-6.0, 3.0, channels - 1)]
    delays = [0] + [int(d) for d in rng.integers(0, 5, channels - 1)]
    snrs = [float(s) for s in rng.uniform(-5.0, 15.0, channels)]
    failed = [False] * channels
    if channels > 2 and rng.random() < 0.25:
        failed[int(rng.integers(1, channels))] = True
    scene = SceneSpec(
        duration, rate, channels, tuple(gains), tuple(delays), tuple(snrs), tuple(failed)
    )
    mixture, reference = spatialize_and_mix(clean, scene, rng)
    return _write_pair(out_dir, split, f"{split}-multi-{index:04d}", mixture, reference, snrs)


def _write_pair(out_dir, split, uid, mixture, reference, snrs):
    split_dir = pathlib.Path(out_dir) / split
    split_dir.mkdir(parents=True, exist_ok=True)
    mix_rel = f"{split}/{uid}-mix.wav"
    ref_rel = f"{split}/{uid}-ref.wav"
    write_wav(pathlib.Path(out_dir) / mix_rel, mixture, fmt="float32")
    write_wav(pathlib.Path(out_dir) / ref_rel, reference, fmt="float32")
    return UtteranceRecord(
        uid, mix_rel, ref_rel, mixture.rate_hz, mixture.channels, list(snrs)
    )


def write_manifest(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_manifest(path):
    """Read records; relative WAV paths are resolved against the manifest dir."""
    base = pathlib.Path(path).parent
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = UtteranceRecord.from_json(line)
            rec.mixture_path = str((base / rec.mixture_path).resolve())
            rec.reference_path = str((base / rec.reference_path).resolve())
            records.append(rec)
    return records


def load_record(rec: UtteranceRecord):
    """-> (mixture (C, L) float32, reference (1, L) float32, rate)."""
    mixture = read_wav(rec.mixture_path)
    reference = read_wav(rec.reference_path)
    if mixture.channels != rec.channels:
        raise ValueError(
            f"{rec.id}: manifest says {rec.channels} channels, "
            f"file has {mixture.channels}"
        )
    if mixture.rate_hz != rec.rate_hz or reference.rate_hz != rec.rate_hz:
        raise ValueError(f"{rec.id}: rate mismatch between manifest and files")
    return mixture.samples, reference.samples, rec.rate_hz


def build_corpus(out_dir, seed: int, train: int, dev: int, test: int) -> dict:
    """Write WAVs and one manifest per split; returns {split: manifest path}.

    Each split gets `count` single-channel and `count` multi-channel
    utterances (C in 2..5) at 8 and 16 kHz.
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifests = {}
    for split, count in (("train", train), ("dev", dev), ("test", test)):
        records = []
        for i in range(count):
            records.append(_make_single(seed, split, i, out_dir))
        for i in range(count):
            records.append(_make_multi(seed, split, i, out_dir))
        manifest = out_dir / f"{split}.jsonl"
        write_manifest(records, manifest)
        manifests[split] = str(manifest)
    return manifests
