"""Log-mel patches for the CNNs, plus a reader for externally dumped
spectrograms (raw little-endian float32 with a `kind,bands,frames` sidecar).

The mel scale here is the HTK variant; the patch geometry (128 bands x 154
frames from window 2048 / hop 1024 on a 10 s, 16 kHz clip) matches what the
downstream networks expect.
"""

import numpy as np

RATE = 16000
WINDOW = 2048
HOP = 1024
BANDS = 128
FRAMES = 154
LOG_FLOOR = 1e-10


def _hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_matrix(n_bands=BANDS, n_fft=WINDOW, rate=RATE, fmin=0.0, fmax=8000.0):
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_bands + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (rate / n_fft)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def logmel_patch(samples: np.ndarray, n_bands=BANDS, n_frames=FRAMES) -> np.ndarray:
    """(n_bands, n_frames) log-mel patch of a normalized 10 s clip."""
    if len(samples) < WINDOW:
        raise ValueError("clip shorter than one analysis window")
    frames = np.lib.stride_tricks.sliding_window_view(samples, WINDOW)[::HOP]
    window = np.hanning(WINDOW)
    power = np.abs(np.fft.rfft(frames * window, axis=1)) ** 2
    mel = power @ mel_filter_matrix(n_bands=n_bands).T
    mel = np.log(np.maximum(mel.T, LOG_FLOOR))
    if mel.shape[1] >= n_frames:
        return mel[:, :n_frames]
    pad = np.full((n_bands, n_frames - mel.shape[1]), np.log(LOG_FLOOR))
    return np.hstack([mel, pad])


def read_patch_dump(path) -> tuple[np.ndarray, str]:
    """Read a dumped spectrogram (raw f32 + sidecar header)."""
    with open(str(path) + ".hdr", encoding="utf-8") as fh:
        kind, bands, frames = fh.readline().strip().split(",")
    matrix = np.fromfile(str(path), dtype="<f4").reshape(int(bands), int(frames))
    return matrix.astype(np.float64), kind
