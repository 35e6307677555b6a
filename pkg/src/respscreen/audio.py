"""Raw audio ingestion and duration/rate normalization.

Every recording entering the pipeline is reduced to a mono ``AudioClip``,
resampled to ``TARGET_RATE`` and tiled/truncated to ``TARGET_SECONDS`` so all
downstream features see the same geometry.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import MalformedWaveError, UnsupportedCodecError, ValidationError

TARGET_RATE = 16000
TARGET_SECONDS = 10.0

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono sample sequence with its sample rate.

    Samples are float64 amplitudes, nominally in [-1, 1]. After
    normalization (resample + tile) a clip has rate 16000 and exactly
    160000 samples.
    """

    samples: np.ndarray
    rate: int

    def __post_init__(self):
        if self.rate <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.rate}")
        if len(self.samples) == 0:
            raise ValidationError("audio clip has no samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono AudioClip.

    Supports 16-bit PCM and 32-bit IEEE-float samples (plus the
    WAVE_FORMAT_EXTENSIBLE wrapper around either). Multichannel audio is
    averaged to mono; integer samples are scaled by 1/32768.

    Raises FileNotFoundError for a missing file, MalformedWaveError for a
    broken container, and UnsupportedCodecError for other sample formats.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWaveError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if len(body) < chunk_size:
            raise MalformedWaveError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise MalformedWaveError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _FORMAT_EXTENSIBLE:
                # sub-format GUID starts with the real format tag
                if chunk_size < 40:
                    raise MalformedWaveError(f"{path}: extensible fmt chunk too short")
                (sub_tag,) = struct.unpack_from("<H", body, 24)
                fmt = (sub_tag,) + fmt[1:]
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MalformedWaveError(f"{path}: missing fmt chunk")
    if payload is None:
        raise MalformedWaveError(f"{path}: missing data chunk")

    tag, n_channels, rate, _byte_rate, _block_align, bits = fmt
    if n_channels < 1 or rate <= 0:
        raise MalformedWaveError(f"{path}: invalid fmt fields")

    if tag == _FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif tag == _FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: unsupported sample format (tag={tag}, bits={bits}); "
            "expected 16-bit PCM or 32-bit float"
        )

    if len(samples) == 0:
        raise MalformedWaveError(f"{path}: empty data chunk")
    if n_channels > 1:
        usable = len(samples) - len(samples) % n_channels
        samples = samples[:usable].reshape(-1, n_channels).mean(axis=1)
    return AudioClip(samples=samples, rate=int(rate))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling via a windowed-sinc kernel.

    Output length is round(len * target_rate / rate). The sinc cutoff is
    placed at the lower of the two Nyquist rates, which anti-alias filters
    when downsampling. A clip already at target_rate is returned unchanged.
    """
    if target_rate <= 0:
        raise ValidationError(f"target rate must be positive, got {target_rate}")
    if clip.rate == target_rate:
        return clip

    x = clip.samples
    n_in = len(x)
    ratio = target_rate / clip.rate
    n_out = int(round(n_in * ratio))
    cutoff = min(1.0, ratio)  # relative to the input Nyquist
    half_width = 32.0 / cutoff  # kernel half-width in input samples
    halfw = int(np.ceil(half_width))
    taps = np.arange(-halfw, halfw + 1)

    out = np.empty(n_out, dtype=np.float64)
    block = 8192
    for start in range(0, n_out, block):
        idx = np.arange(start, min(start + block, n_out))
        centers = idx / ratio  # output instants in input-sample units
        j = np.floor(centers).astype(np.int64)[:, None] + taps[None, :]
        d = centers[:, None] - j
        kernel = cutoff * np.sinc(cutoff * d)
        kernel *= 0.5 * (1.0 + np.cos(np.pi * np.clip(d / half_width, -1.0, 1.0)))
        kernel[np.abs(d) > half_width] = 0.0
        valid = (j >= 0) & (j < n_in)
        gathered = np.where(valid, x[np.clip(j, 0, n_in - 1)], 0.0)
        out[idx] = np.sum(gathered * kernel, axis=1)
    return AudioClip(samples=out, rate=int(target_rate))


def tile_to_duration(clip: AudioClip, seconds: float = TARGET_SECONDS) -> AudioClip:
    """Duplicate the clip back-to-back, then truncate to exactly `seconds`.

    Clips already at or beyond the target are truncated. A partial final
    copy is kept when the target is not an integer multiple of the input.
    """
    if seconds <= 0:
        raise ValidationError(f"target duration must be positive, got {seconds}")
    n_target = int(round(seconds * clip.rate))
    n = len(clip.samples)
    if n == n_target:
        return clip
    reps = -(-n_target // n)  # ceil division
    tiled = np.tile(clip.samples, reps)[:n_target]
    return AudioClip(samples=tiled, rate=clip.rate)


def normalize(clip: AudioClip) -> AudioClip:
    """Resample to 16 kHz and tile/truncate to 10 s."""
    return tile_to_duration(resample(clip, TARGET_RATE), TARGET_SECONDS)


def write_wav_pcm16(path, samples: np.ndarray, rate: int) -> None:
    """Write mono float samples in [-1, 1] as a 16-bit PCM WAVE file."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, _FORMAT_PCM, 1, rate, rate * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(header + payload)
