"""Low-level time-frequency front-ends.

Three spectrogram types share one fixed geometry (128 bands x 154 frames in
paper mode): an STFT-based log-mel, an ERB-spaced gammatone filterbank
energy map, and a Morse-wavelet scalogram. All are pure functions of the
clip and config, so outputs are bit-reproducible.

Note on frame count: a 10 s clip at 16 kHz with window 2048 / hop 1024 and
no padding yields 155 full frames; the grid is truncated to ``frames``
(154) to keep the advertised geometry.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .audio import AudioClip
from .errors import ValidationError
from .validation import SPECTROGRAM_KINDS

PAPER_WINDOW = 2048
PAPER_HOP = 1024
PAPER_BANDS = 128
PAPER_FRAMES = 154
LOG_FLOOR = 1e-10

# Generalized Morse wavelet shape parameters for the scalogram.
MORSE_GAMMA = 3.0
MORSE_BETA = 20.0


@dataclass(frozen=True)
class SpectrogramConfig:
    """Geometry and band-placement parameters for one front-end."""

    kind: str = "logmel"
    window: int = PAPER_WINDOW
    hop: int = PAPER_HOP
    bands: int = PAPER_BANDS
    frames: int = PAPER_FRAMES
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = LOG_FLOOR

    def __post_init__(self):
        if self.kind not in SPECTROGRAM_KINDS:
            raise ValidationError(f"unknown spectrogram kind {self.kind!r}")
        if not (self.window >= self.hop > 0):
            raise ValidationError("require window >= hop > 0")
        if self.bands < 1 or self.frames < 1:
            raise ValidationError("bands and frames must be positive")
        if not (0.0 <= self.fmin < self.fmax):
            raise ValidationError("require 0 <= fmin < fmax")
        if self.log_floor <= 0.0:
            raise ValidationError("log_floor must be positive")


def default_config(kind: str) -> SpectrogramConfig:
    """Paper-mode config for a front-end kind.

    The filterbank front-ends place bands on [50 Hz, 8 kHz]; log-mel spans
    the full [0, 8 kHz] band.
    """
    if kind == "logmel":
        return SpectrogramConfig(kind="logmel", fmin=0.0, fmax=8000.0)
    if kind in ("gammatone", "scalogram"):
        return SpectrogramConfig(kind=kind, fmin=50.0, fmax=8000.0)
    raise ValidationError(f"unknown spectrogram kind {kind!r}")


@dataclass(frozen=True)
class Spectrogram:
    """bands x frames matrix of log-compressed energies."""

    matrix: np.ndarray
    kind: str
    config: SpectrogramConfig

    def __post_init__(self):
        expected = (self.config.bands, self.config.frames)
        if self.matrix.shape != expected:
            raise ValidationError(
                f"spectrogram shape {self.matrix.shape} != configured {expected}"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise ValidationError("spectrogram contains non-finite entries")


def _frame_signal(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """View of all full frames, one per row; no padding."""
    if len(x) < window:
        raise ValidationError(
            f"clip of {len(x)} samples is shorter than one window ({window})"
        )
    return np.lib.stride_tricks.sliding_window_view(x, window)[::hop]


def _fit_frame_count(frames_mat: np.ndarray, n_frames: int) -> np.ndarray:
    """Truncate or zero-pad the frame axis (axis 0) to exactly n_frames."""
    have = frames_mat.shape[0]
    if have >= n_frames:
        return frames_mat[:n_frames]
    pad = np.zeros((n_frames - have,) + frames_mat.shape[1:], dtype=frames_mat.dtype)
    return np.vstack([frames_mat, pad])


def stft_power(clip: AudioClip, config: SpectrogramConfig) -> np.ndarray:
    """One-sided STFT power, shape (config.frames, window//2 + 1).

    Frame f covers samples [f*hop, f*hop + window) under a periodic Hann
    window. Bins are scaled so that the sum over bins of one frame equals
    that frame's windowed time-domain energy (Parseval); interior bins
    carry the factor 2 of their conjugate twins.
    """
    frames = _frame_signal(clip.samples, config.window, config.hop)
    window = scipy.signal.get_window("hann", config.window, fftbins=True)
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = (spectrum.real**2 + spectrum.imag**2) / config.window
    power[:, 1:-1] *= 2.0
    if config.window % 2 != 0:  # odd window: last rfft bin is not Nyquist
        power[:, -1] *= 2.0
    return _fit_frame_count(power, config.frames)


# ---------------------------------------------------------------------------
# log-mel


def hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_hz = 1000.0
    logstep = np.log(6.4) / 27.0
    mel = freq / f_sp
    above = freq >= min_log_hz
    mel = np.where(above, min_log_hz / f_sp + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mel)
    return mel


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_mel = 1000.0 / f_sp
    logstep = np.log(6.4) / 27.0
    freq = mel * f_sp
    above = mel >= min_log_mel
    return np.where(above, 1000.0 * np.exp(logstep * (mel - min_log_mel)), freq)


def mel_edge_frequencies(config: SpectrogramConfig) -> np.ndarray:
    """bands + 2 edge frequencies, equally spaced on the mel scale."""
    mels = np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.bands + 2)
    return mel_to_hz(mels)


def mel_band_centers(config: SpectrogramConfig) -> np.ndarray:
    return mel_edge_frequencies(config)[1:-1]


def mel_filterbank(config: SpectrogramConfig, rate: int) -> np.ndarray:
    """Triangular, area-normalized mel filters, shape (bands, window//2 + 1)."""
    if config.fmax > rate / 2:
        raise ValidationError(f"fmax {config.fmax} exceeds Nyquist {rate / 2}")
    n_bins = config.window // 2 + 1
    bin_freqs = np.arange(n_bins) * (rate / config.window)
    edges = mel_edge_frequencies(config)
    lower = edges[:-2][:, None]
    center = edges[1:-1][:, None]
    upper = edges[2:][:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights *= (2.0 / (upper - lower))  # equal-area normalization
    return weights


def log_mel(power: np.ndarray, config: SpectrogramConfig, rate: int = 16000) -> Spectrogram:
    """Pool STFT power through the mel filterbank and log-compress."""
    filterbank = mel_filterbank(config, rate)
    if power.shape[1] != filterbank.shape[1]:
        raise ValidationError(
            f"power has {power.shape[1]} bins; filterbank expects {filterbank.shape[1]}"
        )
    mel_energy = power @ filterbank.T  # (frames, bands)
    matrix = np.log(np.maximum(mel_energy.T, config.log_floor))
    return Spectrogram(matrix=matrix, kind="logmel", config=config)


# ---------------------------------------------------------------------------
# gammatonegram

_EAR_Q = 9.26449  # Glasberg & Moore ERB parameters
_MIN_BW = 24.7


def erb_space(low: float, high: float, n: int) -> np.ndarray:
    """n center frequencies uniformly spaced on the ERB-rate scale, ascending."""
    c = _EAR_Q * _MIN_BW
    cf = -c + np.exp(
        np.arange(1, n + 1) * (-np.log(high + c) + np.log(low + c)) / n
    ) * (high + c)
    return cf[::-1].copy()


def _gammatone_coefficients(cf: np.ndarray, rate: int):
    """Per-channel coefficients of the 4th-order all-pole gammatone cascade.

    Patterson-Holdsworth design via Slaney's four-biquad decomposition,
    peak-gain normalized at each center frequency.
    """
    t = 1.0 / rate
    erb = ((cf / _EAR_Q) + _MIN_BW)
    b = 1.019 * 2.0 * np.pi * erb

    arg = 2.0 * cf * np.pi * t
    vec = np.exp(2j * arg)
    k1 = np.cos(arg) / np.exp(b * t)
    k2 = np.sin(arg) / np.exp(b * t)

    a0 = t
    a2 = 0.0
    b0 = 1.0
    b1 = -2.0 * k1
    b2 = np.exp(-2.0 * b * t)

    sq_plus = np.sqrt(3.0 + 2.0**1.5)
    sq_minus = np.sqrt(3.0 - 2.0**1.5)
    a11 = -(2.0 * t * k1 + 2.0 * sq_plus * t * k2) / 2.0
    a12 = -(2.0 * t * k1 - 2.0 * sq_plus * t * k2) / 2.0
    a13 = -(2.0 * t * k1 + 2.0 * sq_minus * t * k2) / 2.0
    a14 = -(2.0 * t * k1 - 2.0 * sq_minus * t * k2) / 2.0

    exp_term = 2.0 * np.exp(-(b * t) + 1j * arg) * t
    gain = np.abs(
        (-2.0 * vec * t + exp_term * (np.cos(arg) - sq_minus * np.sin(arg)))
        * (-2.0 * vec * t + exp_term * (np.cos(arg) + sq_minus * np.sin(arg)))
        * (-2.0 * vec * t + exp_term * (np.cos(arg) - sq_plus * np.sin(arg)))
        * (-2.0 * vec * t + exp_term * (np.cos(arg) + sq_plus * np.sin(arg)))
        / (-2.0 / np.exp(2.0 * b * t) - 2.0 * vec + 2.0 * (1.0 + vec) / np.exp(b * t)) ** 4
    )
    return a0, (a11, a12, a13, a14), a2, (b0, b1, b2), gain


def gammatone_center_frequencies(config: SpectrogramConfig) -> np.ndarray:
    return erb_space(config.fmin, config.fmax, config.bands)


def gammatonegram(clip: AudioClip, config: SpectrogramConfig) -> Spectrogram:
    """Filter through the ERB-spaced gammatone bank and frame the energy.

    Per-channel output energy is averaged over the same window/hop grid as
    the STFT, then log-compressed with the shared floor.
    """
    cf = gammatone_center_frequencies(config)
    a0, a1s, a2, (b0, b1, b2), gain = _gammatone_coefficients(cf, clip.rate)
    x = clip.samples
    n_raw = (len(x) - config.window) // config.hop + 1
    if n_raw < 1:
        raise ValidationError(
            f"clip of {len(x)} samples is shorter than one window ({config.window})"
        )
    energy = np.empty((config.bands, n_raw), dtype=np.float64)
    for ch in range(config.bands):
        denom = np.array([b0, b1[ch], b2[ch]])
        y = scipy.signal.lfilter(np.array([a0 / gain[ch], a1s[0][ch] / gain[ch], a2 / gain[ch]]), denom, x)
        y = scipy.signal.lfilter(np.array([a0, a1s[1][ch], a2]), denom, y)
        y = scipy.signal.lfilter(np.array([a0, a1s[2][ch], a2]), denom, y)
        y = scipy.signal.lfilter(np.array([a0, a1s[3][ch], a2]), denom, y)
        frames = _frame_signal(y, config.window, config.hop)
        energy[ch] = np.mean(frames**2, axis=1)
    matrix = np.log(np.maximum(_fit_frame_count(energy.T, config.frames).T, config.log_floor))
    return Spectrogram(matrix=matrix, kind="gammatone", config=config)


# ---------------------------------------------------------------------------
# scalogram


def scalogram_frequencies(config: SpectrogramConfig) -> np.ndarray:
    """Logarithmically spaced equivalent frequencies, ascending."""
    return np.geomspace(config.fmin, config.fmax, config.bands)


def _morse_spectrum(omega: np.ndarray) -> np.ndarray:
    """Frequency response of the analytic Morse wavelet, peak value 2."""
    peak = (MORSE_BETA / MORSE_GAMMA) ** (1.0 / MORSE_GAMMA)
    psi = np.zeros_like(omega)
    positive = omega > 0.0
    w = omega[positive]
    log_psi = MORSE_BETA * np.log(w / peak) + peak**MORSE_GAMMA - w**MORSE_GAMMA
    psi[positive] = 2.0 * np.exp(log_psi)
    return psi


def scalogram(clip: AudioClip, config: SpectrogramConfig) -> Spectrogram:
    """|CWT|^2 with a generalized Morse wavelet, block-averaged in time.

    Scales are chosen so each row's wavelet peaks at one of the log-spaced
    equivalent frequencies; the time axis is partitioned into ``frames``
    contiguous blocks whose mean power is log-compressed.
    """
    x = clip.samples
    n = len(x)
    if n < config.window:
        raise ValidationError(
            f"clip of {n} samples is shorter than one window ({config.window})"
        )
    freqs = scalogram_frequencies(config)
    peak = (MORSE_BETA / MORSE_GAMMA) ** (1.0 / MORSE_GAMMA)
    scales = peak * clip.rate / (2.0 * np.pi * freqs)

    spectrum = np.fft.fft(x)
    omega = 2.0 * np.pi * np.fft.fftfreq(n)
    bounds = np.floor(np.linspace(0, n, config.frames + 1)).astype(np.int64)
    counts = np.diff(bounds).astype(np.float64)
    matrix = np.empty((config.bands, config.frames), dtype=np.float64)
    for row, s in enumerate(scales):
        coeff = np.fft.ifft(spectrum * _morse_spectrum(s * omega))
        power = coeff.real**2 + coeff.imag**2
        matrix[row] = np.add.reduceat(power, bounds[:-1]) / counts
    matrix = np.log(np.maximum(matrix, config.log_floor))
    return Spectrogram(matrix=matrix, kind="scalogram", config=config)


# ---------------------------------------------------------------------------
# front-end estimators and dump format

_EXTRACTORS = {
    "logmel": lambda clip, cfg: log_mel(stft_power(clip, cfg), cfg, clip.rate),
    "gammatone": gammatonegram,
    "scalogram": scalogram,
}


class SpectrogramFrontend:
    """Stateless transformer turning normalized clips into spectrograms.

    Follows the fit/transform convention so front-ends can slot into
    sklearn-style pipelines; fit is a no-op.
    """

    def __init__(self, kind: str = "logmel", config: SpectrogramConfig | None = None):
        self.kind = kind
        self.config = config

    def get_params(self, deep: bool = True) -> dict:
        return {"kind": self.kind, "config": self.config}

    def set_params(self, **params) -> "SpectrogramFrontend":
        for key, value in params.items():
            if key not in ("kind", "config"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _resolved_config(self) -> SpectrogramConfig:
        if self.config is not None:
            if self.config.kind != self.kind:
                return replace(self.config, kind=self.kind)
            return self.config
        return default_config(self.kind)

    def fit(self, X=None, y=None) -> "SpectrogramFrontend":
        return self

    def transform_clip(self, clip: AudioClip) -> Spectrogram:
        return _EXTRACTORS[self.kind](clip, self._resolved_config())

    def transform(self, clips) -> list:
        return [self.transform_clip(clip) for clip in clips]


def compute_spectrogram(clip: AudioClip, kind: str, config: SpectrogramConfig | None = None) -> Spectrogram:
    return SpectrogramFrontend(kind=kind, config=config).transform_clip(clip)


def write_spectrogram_dump(spec: Spectrogram, path) -> None:
    """Raw little-endian float32 matrix plus a one-line sidecar header."""
    path = str(path)
    spec.matrix.astype("<f4").tofile(path)
    with open(path + ".hdr", "w", encoding="utf-8") as fh:
        fh.write(f"{spec.kind},{spec.config.bands},{spec.config.frames}\n")


def read_spectrogram_dump(path) -> tuple[np.ndarray, str]:
    """Read back a dump; returns (bands x frames float32 matrix, kind)."""
    path = str(path)
    with open(path + ".hdr", encoding="utf-8") as fh:
        kind, bands, frames = fh.readline().strip().split(",")
    matrix = np.fromfile(path, dtype="<f4").reshape(int(bands), int(frames))
    return matrix, kind
