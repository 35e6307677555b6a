"""Manifest bookkeeping and the synthetic desk-scale corpus.

The manifest CSV (``subject_id,modality,path,label,split``) is the single
source of truth for which recordings exist, their labels, and the dev/test
partition. The synthetic generator plants a modality-specific narrowband
energy boost for positive subjects over a pink-noise background, so every
front-end can recover the class signal.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .audio import write_wav_pcm16
from .errors import ManifestError
from .validation import MODALITIES, check_fraction

MANIFEST_COLUMNS = ["subject_id", "modality", "path", "label", "split"]
LABELS = ("p", "n")
SPLITS = ("dev", "test")

# Hz band boosted for positive subjects, per modality.
CLASS_BANDS = {
    "breathing": (400.0, 700.0),
    "cough": (1200.0, 2000.0),
    "speech": (3000.0, 5000.0),
}
DEFAULT_BOOST_DB = 6.0

_SYNTH_RATE = 16000


@dataclass(frozen=True)
class ManifestRecord:
    subject_id: str
    modality: str
    path: str
    label: str  # 'p' / 'n'; '' allowed for unlabeled test rows
    split: str  # 'dev' / 'test'


@dataclass(frozen=True)
class SplitSummary:
    dev_count: int
    test_count: int
    dev_positive: int

    @property
    def dev_negative(self) -> int:
        return self.dev_count - self.dev_positive


def load_manifest(path) -> list:
    """Read and validate manifest rows; duplicates and bad values reject."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        records = []
        seen = set()
        for row_no, row in enumerate(reader, start=2):
            values = [row.get(col) for col in MANIFEST_COLUMNS]
            if any(v is None for v in values):
                raise ManifestError(f"{path}: row {row_no} is missing a column")
            subject_id, modality, rec_path, label, split = values
            if modality not in MODALITIES:
                raise ManifestError(
                    f"{path}: row {row_no} has unknown modality {modality!r}"
                )
            if split not in SPLITS:
                raise ManifestError(f"{path}: row {row_no} has unknown split {split!r}")
            if label not in LABELS and label != "":
                raise ManifestError(f"{path}: row {row_no} has unknown label {label!r}")
            if split == "dev" and label == "":
                raise ManifestError(
                    f"{path}: row {row_no} is a dev row without a label"
                )
            key = (subject_id, modality)
            if key in seen:
                raise ManifestError(f"{path}: duplicate (subject, modality) {key}")
            seen.add(key)
            records.append(
                ManifestRecord(
                    subject_id=subject_id,
                    modality=modality,
                    path=rec_path,
                    label=label,
                    split=split,
                )
            )
    return records


def write_manifest(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            writer.writerow([rec.subject_id, rec.modality, rec.path, rec.label, rec.split])


def summarize_splits(records) -> SplitSummary:
    """Subject-level counts per split; positives counted on the dev side."""
    dev_subjects = {}
    test_subjects = set()
    for rec in records:
        if rec.split == "dev":
            dev_subjects[rec.subject_id] = rec.label
        else:
            test_subjects.add(rec.subject_id)
    dev_positive = sum(1 for label in dev_subjects.values() if label == "p")
    return SplitSummary(
        dev_count=len(dev_subjects),
        test_count=len(test_subjects),
        dev_positive=dev_positive,
    )


def stratified_split(labels, valid_fraction: float, seed: int):
    """Index split preserving class balance; returns (train_idx, valid_idx)."""
    labels = np.asarray(labels)
    check_fraction(valid_fraction, "valid_fraction")
    rng = np.random.default_rng(seed)
    train_idx, valid_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        n_valid = max(1, int(round(valid_fraction * len(members))))
        n_valid = min(n_valid, len(members) - 1)
        valid_idx.extend(members[:n_valid])
        train_idx.extend(members[n_valid:])
    return np.sort(np.array(train_idx)), np.sort(np.array(valid_idx))


def _pink_magnitude(n_bins: int, rate: int) -> np.ndarray:
    freqs = np.arange(n_bins) * (rate / (2.0 * (n_bins - 1)))
    mags = np.zeros(n_bins)
    mags[1:] = 1.0 / np.sqrt(freqs[1:])
    return mags


def _synth_clip(rng, modality: str, positive: bool, seconds: float, boost_db: float) -> np.ndarray:
    """Random-phase spectral synthesis of one clip.

    Background is pink noise with per-chunk gain jitter (16 log-spaced
    chunks, sigma 3 dB); positives get `boost_db` extra power inside the
    modality's designated band.
    """
    n = int(round(seconds * _SYNTH_RATE))
    n_bins = n // 2 + 1
    freqs = np.fft.rfftfreq(n, d=1.0 / _SYNTH_RATE)
    mags = np.zeros(n_bins)
    mags[1:] = 1.0 / np.sqrt(freqs[1:])

    chunk_edges = np.geomspace(50.0, 8000.0, 17)
    jitter_db = rng.normal(0.0, 3.0, size=16)
    for lo, hi, db in zip(chunk_edges[:-1], chunk_edges[1:], jitter_db):
        band = (freqs >= lo) & (freqs < hi)
        mags[band] *= 10.0 ** (db / 20.0)

    if positive:
        lo, hi = CLASS_BANDS[modality]
        band = (freqs >= lo) & (freqs < hi)
        mags[band] *= 10.0 ** (boost_db / 20.0)

    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_bins)
    phases[0] = 0.0
    spectrum = mags * np.exp(1j * phases)
    samples = np.fft.irfft(spectrum, n=n)
    peak = np.max(np.abs(samples))
    if peak > 0:
        samples = 0.5 * samples / peak
    return samples


def synth_corpus(
    seed: int,
    n_dev: int,
    n_test: int,
    positive_rate: float,
    out_dir,
    boost_db: float = DEFAULT_BOOST_DB,
) -> str:
    """Generate a labeled three-modality corpus; returns the manifest path.

    Deterministic per (seed, parameters): per-clip RNG streams are derived
    from the seed and the subject/modality indices, so the corpus is
    byte-identical across runs.
    """
    if n_dev <= 0 or n_test <= 0:
        raise ManifestError("n_dev and n_test must be positive")
    check_fraction(positive_rate, "positive_rate")
    out_dir = str(out_dir)
    audio_dir = os.path.join(out_dir, "audio")
    os.makedirs(audio_dir, exist_ok=True)

    records = []
    for split, count, offset in (("dev", n_dev, 0), ("test", n_test, n_dev)):
        n_pos = int(round(positive_rate * count))
        assign_rng = np.random.default_rng(np.random.SeedSequence([seed, offset]))
        positives = set(assign_rng.permutation(count)[:n_pos].tolist())
        for i in range(count):
            subject_idx = offset + i
            subject_id = f"subj{subject_idx:04d}"
            positive = i in positives
            for mod_idx, modality in enumerate(MODALITIES):
                clip_rng = np.random.default_rng(
                    np.random.SeedSequence([seed, subject_idx, mod_idx])
                )
                seconds = clip_rng.uniform(4.0, 10.0)
                samples = _synth_clip(clip_rng, modality, positive, seconds, boost_db)
                rel_path = os.path.join("audio", f"{subject_id}_{modality}.wav")
                write_wav_pcm16(os.path.join(out_dir, rel_path), samples, _SYNTH_RATE)
                records.append(
                    ManifestRecord(
                        subject_id=subject_id,
                        modality=modality,
                        path=rel_path,
                        label="p" if positive else "n",
                        split=split,
                    )
                )

    manifest_path = os.path.join(out_dir, "manifest.csv")
    write_manifest(records, manifest_path)
    return manifest_path
