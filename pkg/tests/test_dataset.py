"""Manifest handling, split bookkeeping, and synthetic corpus generation."""

import os

import numpy as np
import pytest

from respscreen.dataset import (
    CLASS_BANDS,
    ManifestRecord,
    load_manifest,
    stratified_split,
    summarize_splits,
    synth_corpus,
    write_manifest,
)
from respscreen.audio import load_wav
from respscreen.errors import ManifestError


def _record(subject, modality="cough", label="n", split="dev"):
    return ManifestRecord(
        subject_id=subject,
        modality=modality,
        path=f"{subject}_{modality}.wav",
        label=label,
        split=split,
    )


class TestManifest:
    def test_dicova_shaped_counts(self, tmp_path):
        records = []
        for i in range(965):
            label = "p" if i < 172 else "n"
            records.append(_record(f"d{i}", label=label, split="dev"))
        for i in range(471):
            records.append(_record(f"t{i}", label="", split="test"))
        path = tmp_path / "manifest.csv"
        write_manifest(records, path)
        summary = summarize_splits(load_manifest(path))
        assert summary.dev_count == 965
        assert summary.test_count == 471
        assert summary.dev_positive == 172
        assert summary.dev_negative == 793

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("subject_id,modality,path,label,split\n")
        assert load_manifest(path) == []

    def test_duplicate_key_names_it(self, tmp_path):
        path = tmp_path / "dup.csv"
        write_manifest([_record("s1"), _record("s1")], path)
        with pytest.raises(ManifestError, match=r"\('s1', 'cough'\)"):
            load_manifest(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("subject_id,modality,path,label\ns1,cough,x.wav,p\n")
        with pytest.raises(ManifestError, match="header"):
            load_manifest(path)

    def test_unknown_modality_and_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "subject_id,modality,path,label,split\ns1,sneezing,x.wav,p,dev\n"
        )
        with pytest.raises(ManifestError, match="modality"):
            load_manifest(path)
        path.write_text(
            "subject_id,modality,path,label,split\ns1,cough,x.wav,maybe,dev\n"
        )
        with pytest.raises(ManifestError, match="label"):
            load_manifest(path)

    def test_dev_row_requires_label(self, tmp_path):
        path = tmp_path / "unlabeled.csv"
        path.write_text("subject_id,modality,path,label,split\ns1,cough,x.wav,,dev\n")
        with pytest.raises(ManifestError, match="without a label"):
            load_manifest(path)

    def test_counts_stable_under_reordering(self, tmp_path):
        records = [
            _record("a", label="p"),
            _record("b", label="n"),
            _record("c", label="", split="test"),
        ]
        forward = summarize_splits(records)
        backward = summarize_splits(records[::-1])
        assert forward == backward

    def test_all_test_manifest(self):
        records = [_record(f"t{i}", label="", split="test") for i in range(5)]
        summary = summarize_splits(records)
        assert summary.dev_count == 0
        assert summary.test_count == 5


class TestStratifiedSplit:
    def test_partition_and_balance(self):
        labels = np.array([1] * 20 + [0] * 60)
        train, valid = stratified_split(labels, 0.2, seed=0)
        assert len(train) + len(valid) == 80
        assert set(train) & set(valid) == set()
        assert np.sum(labels[valid]) == 4  # 20% of 20 positives

    def test_deterministic(self):
        labels = np.array([0, 1] * 25)
        a = stratified_split(labels, 0.25, seed=3)
        b = stratified_split(labels, 0.25, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_both_sides_keep_both_classes(self):
        labels = np.array([1] * 3 + [0] * 5)
        train, valid = stratified_split(labels, 0.2, seed=1)
        assert set(labels[train]) == {0, 1}
        assert set(labels[valid]) == {0, 1}


class TestSynthCorpus:
    def test_same_seed_byte_identical(self, tmp_path):
        path_a = synth_corpus(11, n_dev=3, n_test=2, positive_rate=0.4, out_dir=tmp_path / "a")
        path_b = synth_corpus(11, n_dev=3, n_test=2, positive_rate=0.4, out_dir=tmp_path / "b")
        manifest_a = open(path_a, "rb").read()
        manifest_b = open(path_b, "rb").read()
        assert manifest_a == manifest_b
        for rec in load_manifest(path_a):
            bytes_a = open(os.path.join(tmp_path, "a", rec.path), "rb").read()
            bytes_b = open(os.path.join(tmp_path, "b", rec.path), "rb").read()
            assert bytes_a == bytes_b

    def test_zero_positive_rate(self, tmp_path):
        manifest = synth_corpus(5, n_dev=4, n_test=2, positive_rate=0.0, out_dir=tmp_path)
        records = load_manifest(manifest)
        assert all(rec.label == "n" for rec in records)

    def test_counts_and_modalities(self, tmp_path):
        manifest = synth_corpus(7, n_dev=4, n_test=2, positive_rate=0.25, out_dir=tmp_path)
        records = load_manifest(manifest)
        assert len(records) == (4 + 2) * 3
        summary = summarize_splits(records)
        assert summary.dev_count == 4
        assert summary.test_count == 2
        assert summary.dev_positive == 1

    def test_class_signal_measurable_in_band(self, tmp_path):
        # spectral-energy oracle: positives must carry more direct-DFT power
        # than negatives inside each modality's designated band
        manifest = synth_corpus(13, n_dev=16, n_test=4, positive_rate=0.5, out_dir=tmp_path)
        records = [r for r in load_manifest(manifest) if r.split == "dev"]
        for modality, (lo, hi) in CLASS_BANDS.items():
            band_power = {"p": [], "n": []}
            for rec in records:
                if rec.modality != modality:
                    continue
                clip = load_wav(os.path.join(tmp_path, rec.path))
                spectrum = np.abs(np.fft.rfft(clip.samples)) ** 2
                freqs = np.fft.rfftfreq(len(clip.samples), d=1.0 / clip.rate)
                band = (freqs >= lo) & (freqs < hi)
                total = spectrum.sum()
                band_power[rec.label].append(spectrum[band].sum() / total)
            assert np.mean(band_power["p"]) > np.mean(band_power["n"])
