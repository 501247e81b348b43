"""Audio preprocessing: resampling, log-mel spectrograms and per-frame
spectrogram image windows.

The soundtrack is resampled to 22050 Hz mono and turned into a 64-band
log-mel spectrogram (hop 512). For every video frame at time t we cut the
spectrogram columns covering (t - 230 ms, t + 230 ms] — exactly 20 hops —
resize that slab to a square image and min-max normalize per clip, so each
frame gets one spectrogram image aligned with it in time.
"""
from __future__ import annotations

import numpy as np
import scipy.signal
from scipy.fft import rfft

SAMPLE_RATE = 22050
HOP_LENGTH = 512
N_FFT = 2048
N_MELS = 64
LOG_FLOOR = 1e-6
WINDOW_SECONDS = 0.23
WINDOW_COLUMNS = 20  # ceil(2 * 0.23 * 22050 / 512)

_SILENCE = float(np.log(LOG_FLOOR))


def resample_audio(samples: np.ndarray, rate: int, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Downmix to mono and polyphase-resample to ``target_rate``."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise ValueError(f"expected 1-D or (n, channels) audio, got shape {samples.shape}")
    if rate == target_rate:
        return samples
    g = np.gcd(int(rate), int(target_rate))
    return scipy.signal.resample_poly(samples, target_rate // g, rate // g)


def mel_filterbank(sr: int = SAMPLE_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """Triangular mel filterbank (n_mels, n_fft // 2 + 1), HTK mel scale."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    fft_freqs = np.linspace(0.0, sr / 2.0, n_bins)
    mel_pts = np.linspace(hz_to_mel(0.0), hz_to_mel(sr / 2.0), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (fft_freqs - left) / max(center - left, 1e-12)
        down = (right - fft_freqs) / max(right - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def logmel_spectrogram(samples: np.ndarray, rate: int = SAMPLE_RATE) -> np.ndarray:
    """Log-mel spectrogram (N_MELS, n_hops) of mono audio at SAMPLE_RATE.

    Frames are centered: the signal is zero-padded by n_fft // 2 on both
    sides, so n_hops = len(samples) // HOP_LENGTH + 1 and column k is
    centered on sample k * HOP_LENGTH. Power spectra go through the mel
    filterbank and log(x + LOG_FLOOR); silence therefore maps to
    log(LOG_FLOOR) exactly.
    """
    if rate != SAMPLE_RATE:
        samples = resample_audio(samples, rate)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"expected mono audio, got shape {samples.shape}")

    pad = N_FFT // 2
    padded = np.pad(samples, (pad, pad), mode="constant")
    n_hops = len(samples) // HOP_LENGTH + 1
    window = scipy.signal.get_window("hann", N_FFT, fftbins=True)

    mel = np.empty((N_MELS, n_hops))
    fb = mel_filterbank(SAMPLE_RATE, N_FFT, N_MELS)
    for k in range(n_hops):
        start = k * HOP_LENGTH
        frame = padded[start:start + N_FFT]
        spectrum = rfft(frame * window)
        power = np.abs(spectrum) ** 2
        mel[:, k] = fb @ power
    return np.log(mel + LOG_FLOOR)


def window_columns(t_seconds: float) -> range:
    """Hop-column indices covering the window (t - 0.23 s, t + 0.23 s].

    Column k is centered at k * HOP_LENGTH / SAMPLE_RATE; the selection
    takes every center inside the half-open interval, which is always
    exactly WINDOW_COLUMNS consecutive indices. Indices may run past the
    spectrogram on either side (the caller pads with silence).
    """
    hop_dur = HOP_LENGTH / SAMPLE_RATE
    k_start = int(np.floor((t_seconds - WINDOW_SECONDS) / hop_dur)) + 1
    return range(k_start, k_start + WINDOW_COLUMNS)


def frame_audio_window(logmel: np.ndarray, t_seconds: float, size: int = 256) -> np.ndarray:
    """Spectrogram image for the window (t - 0.23 s, t + 0.23 s].

    Selects the WINDOW_COLUMNS hop columns whose centers fall in the
    half-open interval; columns outside the spectrogram are padded with
    the silence value log(LOG_FLOOR). The (N_MELS, WINDOW_COLUMNS) slab is
    bilinearly resized to (size, size). Not yet normalized — see
    clip_audio_windows for the per-clip min-max step.
    """
    import cv2

    n_hops = logmel.shape[1]
    cols = window_columns(t_seconds)
    slab = np.full((N_MELS, WINDOW_COLUMNS), _SILENCE)
    for j, k in enumerate(cols):
        if 0 <= k < n_hops:
            slab[:, j] = logmel[:, k]
    return cv2.resize(slab, (size, size), interpolation=cv2.INTER_LINEAR)


def clip_audio_windows(logmel: np.ndarray, frame_times: np.ndarray, size: int = 256) -> np.ndarray:
    """Stack of per-frame spectrogram images, min-max normalized per clip.

    Returns (T, size, size) float32 in [0, 1]. The min and max are taken
    over the whole stack so relative loudness across the clip survives; a
    constant stack (e.g. pure silence) maps to all zeros.
    """
    frames = np.stack([frame_audio_window(logmel, float(t), size) for t in frame_times])
    lo, hi = float(frames.min()), float(frames.max())
    if hi > lo:
        frames = (frames - lo) / (hi - lo)
    else:
        frames = np.zeros_like(frames)
    return frames.astype(np.float32)


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a PCM wav file as float64 in [-1, 1]; returns (samples, rate)."""
    import scipy.io.wavfile

    rate, data = scipy.io.wavfile.read(path)
    data = np.asarray(data)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    return data, int(rate)
