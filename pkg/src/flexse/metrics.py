"""SDR metrics for scoring enhanced signals against references.

sdr is the plain energy ratio 10 log10(||s||^2 / ||s_hat - s||^2); si_sdr
first replaces the target by the scale projection of the estimate onto the
reference, making it blind to global gain. Both are capped at +100 dB so
identical signals produce a finite score.
"""

import numpy as np

__all__ = ["CAP_DB", "sdr", "si_sdr"]

CAP_DB = 100.0


def _as_1d(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).reshape(-1)


def sdr(estimate, reference) -> float:
    s = _as_1d(reference)
    s_hat = _as_1d(estimate)
    if s_hat.shape != s.shape:
        raise ValueError(f"length mismatch: {s_hat.shape} vs {s.shape}")
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0.0:
        raise ValueError("sdr undefined for a zero reference")
    err_energy = float(np.dot(s_hat - s, s_hat - s))
    if err_energy == 0.0:
        return CAP_DB
    return min(10.0 * np.log10(ref_energy / err_energy), CAP_DB)


def si_sdr(estimate, reference) -> float:
    s = _as_1d(reference)
    s_hat = _as_1d(estimate)
    if s_hat.shape != s.shape:
        raise ValueError(f"length mismatch: {s_hat.shape} vs {s.shape}")
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0.0:
        raise ValueError("si_sdr undefined for a zero reference")
    projection = float(np.dot(s_hat, s)) / ref_energy
    if projection == 0.0:
        return -CAP_DB  # estimate orthogonal to reference; symmetric cap
    return sdr(s_hat, projection * s)
