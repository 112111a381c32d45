import math

import numpy as np
import pytest

from flexse.metrics import sdr, si_sdr


def test_sdr_perfect_estimate_caps():
    ref = np.random.default_rng(0).standard_normal(8000)
    assert sdr(ref, ref) == 100.0


def test_sdr_known_snr():
    rng = np.random.default_rng(1)
    ref = rng.standard_normal(16000)
    noise = rng.standard_normal(16000)
    # project out the reference component so the error is orthogonal
    noise = noise - (noise @ ref) / (ref @ ref) * ref
    noise *= math.sqrt((ref @ ref) / (noise @ noise)) / 10.0  # -20 dB error
    value = sdr(ref + noise, ref)
    assert value == pytest.approx(20.0, abs=0.01)


def test_sdr_zero_reference_raises():
    with pytest.raises(ValueError):
        sdr(np.ones(100), np.zeros(100))


def test_sdr_length_mismatch_raises():
    with pytest.raises(ValueError):
        sdr(np.ones(100), np.ones(101))


def test_si_sdr_ignores_scale():
    rng = np.random.default_rng(2)
    ref = rng.standard_normal(8000)
    for alpha in (0.1, 1.0, 7.5):
        assert si_sdr(alpha * ref, ref) == 100.0


def test_si_sdr_matches_sdr_after_projection():
    rng = np.random.default_rng(3)
    ref = rng.standard_normal(8000)
    est = 0.5 * ref + 0.05 * rng.standard_normal(8000)
    alpha = (est @ ref) / (ref @ ref)
    assert si_sdr(est, ref) == pytest.approx(sdr(est, alpha * ref), abs=1e-9)


def test_si_sdr_orthogonal_estimate_floors():
    est = np.zeros(100)
    est[0] = 1.0
    ref = np.zeros(100)
    ref[1] = 1.0
    assert si_sdr(est, ref) == -100.0


def test_si_sdr_scale_invariance_numeric():
    rng = np.random.default_rng(4)
    ref = rng.standard_normal(4000)
    est = ref + 0.1 * rng.standard_normal(4000)
    a = si_sdr(est, ref)
    b = si_sdr(3.7 * est, ref)
    assert a == pytest.approx(b, abs=1e-9)
