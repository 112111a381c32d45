import numpy as np
import pytest
import torch

from oracles import reference_stft

from flexse.stft import fft_size_for, frames_for, hop_for, istft, stft

RATES = (8000, 16000, 48000)


def test_fft_sizes_per_rate():
    assert fft_size_for(8000) == 256
    assert fft_size_for(16000) == 512
    assert fft_size_for(48000) == 1536
    assert hop_for(8000) == 128


@pytest.mark.parametrize("rate", [22050, 44100, 11025, 0, -8000])
def test_unsupported_rates_raise(rate):
    with pytest.raises(ValueError):
        fft_size_for(rate)


def test_shape_8k_4s():
    x = torch.randn(1, 32000)
    spec = stft(x, 8000)
    assert spec.shape == (1, 2, 129, 251)


def test_shape_48k_4s():
    x = torch.randn(1, 192000)
    spec = stft(x, 48000)
    assert spec.shape == (1, 2, 769, 251)


def test_frame_count_constant_across_rates():
    duration = 4.0
    frames = {frames_for(int(duration * r), r) for r in RATES}
    assert frames == {251}


def test_matches_reference_dft():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(4000)
    spec = stft(torch.tensor(x, dtype=torch.float64)[None], 8000)[0]
    ref = reference_stft(x, fft_size=256, hop=128)
    got = spec[0].numpy() + 1j * spec[1].numpy()
    assert got.shape == ref.shape
    assert np.max(np.abs(got - ref)) < 1e-9 * np.max(np.abs(ref))


@pytest.mark.parametrize("rate", RATES)
@pytest.mark.parametrize("channels", [1, 2, 5])
def test_round_trip(rate, channels):
    g = torch.Generator().manual_seed(rate + channels)
    x = torch.randn(channels, int(4.0 * rate), generator=g)
    y = istft(stft(x, rate), rate, x.shape[1])
    assert y.shape == x.shape
    assert (y - x).abs().max().item() < 1e-4


def test_zero_signal_zero_spectrum():
    spec = stft(torch.zeros(2, 16000), 16000)
    assert torch.equal(spec, torch.zeros_like(spec))
    back = istft(torch.zeros(2, 2, 257, 63), 16000, 16000)
    assert torch.equal(back, torch.zeros(2, 16000))


def test_window_length_input_round_trips():
    # shortest interesting input: exactly one analysis window of samples
    x = torch.randn(1, 256)
    y = istft(stft(x, 8000), 8000, 256)
    assert (y - x).abs().max().item() < 1e-4


def test_empty_and_too_short_raise():
    with pytest.raises(ValueError):
        stft(torch.zeros(1, 0), 8000)
    with pytest.raises(ValueError):
        stft(torch.zeros(1, 100), 8000)  # shorter than half a window


def test_istft_inconsistent_length_raises():
    spec = stft(torch.randn(1, 32000), 8000)
    with pytest.raises(ValueError):
        istft(spec, 8000, 1000)
    with pytest.raises(ValueError):
        istft(spec, 16000, 32000)  # wrong bin count for the rate
