import math

import numpy as np
import pytest

from oracles import measured_snr_db

from flexse.audio import read_wav
from flexse.datagen import (
    SceneSpec,
    build_corpus,
    load_record,
    read_manifest,
    spatialize_and_mix,
    synthesize_speech_like,
)


def test_speech_like_is_deterministic():
    a = synthesize_speech_like(2.0, 8000, np.random.default_rng(5))
    b = synthesize_speech_like(2.0, 8000, np.random.default_rng(5))
    assert np.array_equal(a.samples, b.samples)
    c = synthesize_speech_like(2.0, 8000, np.random.default_rng(6))
    assert not np.array_equal(a.samples, c.samples)


def test_speech_like_peak_and_shape():
    wave = synthesize_speech_like(1.5, 16000, np.random.default_rng(0))
    assert wave.samples.shape == (1, 24000)
    assert abs(np.max(np.abs(wave.samples)) - 0.5) < 1e-6


def test_speech_like_band_concentration():
    wave = synthesize_speech_like(3.0, 16000, np.random.default_rng(1))
    x = wave.samples[0].astype(np.float64)
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), d=1 / 16000)
    band = (freqs >= 80.0) & (freqs <= 3900.0)
    assert spec[band].sum() / spec.sum() > 0.95


def test_clean_scene_reproduces_clean_signal():
    clean = synthesize_speech_like(1.0, 8000, np.random.default_rng(2))
    scene = SceneSpec(1.0, 8000, 3, (0.0, 0.0, 0.0), (0, 0, 0),
                      (math.inf, math.inf, math.inf))
    mixture, reference = spatialize_and_mix(clean, scene, np.random.default_rng(3))
    for c in range(3):
        assert np.allclose(mixture.samples[c], clean.samples[0], atol=1e-7)
    assert np.allclose(reference.samples, clean.samples, atol=1e-7)


def test_gain_and_delay_applied_per_channel():
    clean = synthesize_speech_like(1.0, 8000, np.random.default_rng(4))
    scene = SceneSpec(1.0, 8000, 2, (0.0, -6.0), (0, 3), (math.inf, math.inf))
    mixture, _ = spatialize_and_mix(clean, scene, np.random.default_rng(5))
    base = clean.samples[0].astype(np.float64)
    gained = 10 ** (-6.0 / 20.0) * base
    assert np.allclose(mixture.samples[1][3:], gained[:-3].astype(np.float32), atol=1e-7)
    assert np.allclose(mixture.samples[1][:3], 0.0)


def test_realized_snr_matches_request():
    clean = synthesize_speech_like(4.0, 8000, np.random.default_rng(6))
    scene = SceneSpec(4.0, 8000, 2, (0.0, -3.0), (0, 2), (10.0, 3.0))
    mixture, _ = spatialize_and_mix(clean, scene, np.random.default_rng(7))
    base = clean.samples[0].astype(np.float64)
    for c, want in ((0, 10.0), (1, 3.0)):
        speech = 10 ** (scene.gains_db[c] / 20.0) * np.concatenate(
            [np.zeros(scene.delays[c]), base[: len(base) - scene.delays[c]]]
        )
        noise = mixture.samples[c].astype(np.float64) - speech
        assert measured_snr_db(speech, noise) == pytest.approx(want, abs=0.1)


def test_failed_channel_has_no_speech():
    clean = synthesize_speech_like(4.0, 8000, np.random.default_rng(8))
    scene = SceneSpec(
        4.0, 8000, 3, (0.0, 0.0, 0.0), (0, 0, 0), (5.0, 5.0, 5.0),
        failed=(False, False, True),
    )
    mixture, reference = spatialize_and_mix(clean, scene, np.random.default_rng(9))
    dead = mixture.samples[2].astype(np.float64)
    speech = clean.samples[0].astype(np.float64)
    rho = abs(np.corrcoef(dead, speech)[0, 1])
    assert rho < 0.05  # noise only
    # reference channel unaffected by the failure elsewhere
    assert np.allclose(reference.samples[0], speech.astype(np.float32))


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneSpec(1.0, 8000, 2, (0.0,), (0, 0), (5.0, 5.0))
    with pytest.raises(ValueError):
        SceneSpec(1.0, 8000, 1, (0.0,), (-1,), (5.0,))
    with pytest.raises(ValueError):
        SceneSpec(0.0, 8000, 1, (0.0,), (0,), (5.0,))


def test_build_corpus_layout_and_determinism(tmp_path):
    manifests = build_corpus(tmp_path / "a", seed=11, train=2, dev=1, test=1)
    assert set(manifests) == {"train", "dev", "test"}
    train = read_manifest(manifests["train"])
    assert len(train) == 4  # 2 single + 2 multi
    singles = [r for r in train if r.channels == 1]
    multis = [r for r in train if r.channels >= 2]
    assert len(singles) == 2 and len(multis) == 2
    rates = {r.rate_hz for r in train}
    assert rates == {8000, 16000}

    manifests_b = build_corpus(tmp_path / "b", seed=11, train=2, dev=1, test=1)
    for split in manifests:
        a_recs = read_manifest(manifests[split])
        b_recs = read_manifest(manifests_b[split])
        for ra, rb in zip(a_recs, b_recs):
            assert ra.id == rb.id
            wa, wb = read_wav(ra.mixture_path), read_wav(rb.mixture_path)
            assert np.array_equal(wa.samples, wb.samples)


def test_manifest_wav_consistency(tmp_path):
    manifests = build_corpus(tmp_path, seed=12, train=1, dev=1, test=1)
    for split, manifest in manifests.items():
        for rec in read_manifest(manifest):
            mixture, reference, rate = load_record(rec)
            assert mixture.shape[0] == rec.channels
            assert reference.shape[0] == 1
            assert mixture.shape[1] == reference.shape[1]
            assert rate == rec.rate_hz
            assert 4.0 <= mixture.shape[1] / rate <= 6.0


def test_different_seeds_differ(tmp_path):
    m1 = build_corpus(tmp_path / "s1", seed=1, train=1, dev=1, test=1)
    m2 = build_corpus(tmp_path / "s2", seed=2, train=1, dev=1, test=1)
    r1 = read_manifest(m1["train"])[0]
    r2 = read_manifest(m2["train"])[0]
    w1, w2 = read_wav(r1.mixture_path), read_wav(r2.mixture_path)
    assert not np.array_equal(w1.samples, w2.samples)
