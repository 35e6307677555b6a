"""Minimal audio ingestion for the extractor: 16-bit PCM WAVE, mono,
normalized to 16 kHz / 10 s."""

import wave

import numpy as np

TARGET_RATE = 16000
TARGET_SAMPLES = 160000


def load_pcm16(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM WAVE file; multichannel is averaged to mono."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getsampwidth() != 2:
                raise ValueError(f"{path}: expected 16-bit PCM")
            rate = fh.getframerate()
            n_channels = fh.getnchannels()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ValueError(f"{path}: not a readable WAVE file ({exc})") from None
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return samples, rate


def normalize_clip(samples: np.ndarray, rate: int) -> np.ndarray:
    """Resample (linear interpolation) to 16 kHz, tile/truncate to 10 s."""
    if rate != TARGET_RATE:
        duration = len(samples) / rate
        grid = np.arange(int(round(duration * TARGET_RATE))) / TARGET_RATE
        samples = np.interp(grid, np.arange(len(samples)) / rate, samples)
    if len(samples) == 0:
        raise ValueError("empty clip")
    reps = -(-TARGET_SAMPLES // len(samples))
    return np.tile(samples, reps)[:TARGET_SAMPLES]


def load_normalized(path) -> np.ndarray:
    samples, rate = load_pcm16(path)
    return normalize_clip(samples, rate)
