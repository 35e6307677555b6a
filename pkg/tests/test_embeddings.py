"""Embedding pooling, fusion, and CSV exchange."""

import numpy as np
import pytest

from respscreen.embeddings import (
    EmbeddingSet,
    EmbeddingVector,
    average_time_embeddings,
    baseline_embed,
    concat_fusion,
    read_embeddings,
    write_embeddings,
)
from respscreen.errors import EmbeddingFormatError, ValidationError
from respscreen.spectrograms import Spectrogram, default_config


def _spec(matrix):
    return Spectrogram(matrix=matrix, kind="logmel", config=default_config("logmel"))


def _vec(subject="s1", modality="cough", source="unit", values=(1.0, 2.0)):
    return EmbeddingVector(
        subject_id=subject, modality=modality, source=source, values=np.asarray(values)
    )


class TestBaselineEmbed:
    def test_constant_matrix(self):
        vec = baseline_embed(_spec(np.full((128, 154), 3.5)), "s1", "cough")
        assert vec.dim == 256
        np.testing.assert_array_equal(vec.values[:128], np.full(128, 3.5))
        np.testing.assert_array_equal(vec.values[128:], np.zeros(128))

    def test_dimension_is_256(self):
        rng = np.random.default_rng(0)
        vec = baseline_embed(_spec(rng.normal(size=(128, 154))), "s1", "breathing")
        assert vec.dim == 256
        assert vec.source == "baseline-logmel"

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(1)
        matrix = rng.normal(size=(128, 154))
        vec = baseline_embed(_spec(matrix), "s1", "speech")
        # independent two-pass mean/std computation, row by row
        for band in range(128):
            row = matrix[band]
            mean = sum(row) / len(row)
            var = sum((value - mean) ** 2 for value in row) / len(row)
            assert vec.values[band] == pytest.approx(mean, abs=1e-9)
            assert vec.values[128 + band] == pytest.approx(var**0.5, abs=1e-9)


class TestAverageTimeEmbeddings:
    def test_single_vector_identity(self):
        np.testing.assert_array_equal(
            average_time_embeddings([np.array([1.0, 2.0, 3.0])]), [1.0, 2.0, 3.0]
        )

    def test_symmetry(self):
        out = average_time_embeddings([np.array([0.0, 2.0]), np.array([2.0, 0.0])])
        np.testing.assert_array_equal(out, [1.0, 1.0])

    def test_ten_segments_match_sum_oracle(self):
        rng = np.random.default_rng(2)
        segments = [rng.normal(size=512) for _ in range(10)]
        got = average_time_embeddings(segments)
        want = sum(segments) / 10.0
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        segments = [rng.normal(size=16) for _ in range(7)]
        forward = average_time_embeddings(segments)
        shuffled = average_time_embeddings(segments[::-1])
        np.testing.assert_allclose(forward, shuffled, atol=1e-15)

    def test_empty_and_ragged_rejected(self):
        with pytest.raises(ValidationError):
            average_time_embeddings([])
        with pytest.raises(ValidationError):
            average_time_embeddings([np.zeros(3), np.zeros(4)])


class TestConcatFusion:
    def _triple(self):
        rng = np.random.default_rng(4)
        return {
            m: _vec(modality=m, source=f"src-{m}", values=rng.normal(size=256))
            for m in ("breathing", "cough", "speech")
        }

    def test_dims_add_up(self):
        fused = concat_fusion(self._triple())
        assert fused.dim == 768
        assert fused.source == "src-breathing+src-cough+src-speech"

    def test_single_modality_identity(self):
        per = self._triple()
        fused = concat_fusion({"cough": per["cough"]}, order=("cough",))
        np.testing.assert_array_equal(fused.values, per["cough"].values)

    def test_slices_recover_inputs(self):
        per = self._triple()
        fused = concat_fusion(per)
        np.testing.assert_array_equal(fused.values[:256], per["breathing"].values)
        np.testing.assert_array_equal(fused.values[256:512], per["cough"].values)
        np.testing.assert_array_equal(fused.values[512:], per["speech"].values)

    def test_missing_modality_rejected(self):
        per = self._triple()
        del per["speech"]
        with pytest.raises(ValidationError, match="speech"):
            concat_fusion(per)

    def test_subject_mismatch_rejected(self):
        per = self._triple()
        per["cough"] = _vec(subject="other", modality="cough", values=np.zeros(256))
        with pytest.raises(ValidationError, match="subject"):
            concat_fusion(per)


class TestEmbeddingCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        vectors = [
            _vec(subject=f"s{i}", modality="cough", source="ext", values=rng.normal(size=12))
            for i in range(4)
        ]
        path = tmp_path / "emb.csv"
        write_embeddings(EmbeddingSet(vectors=vectors), path)
        loaded = read_embeddings(path)
        assert len(loaded) == 4
        assert loaded.dim == 12
        for original, copy in zip(vectors, loaded):
            assert original.key == copy.key
            np.testing.assert_array_equal(original.values, copy.values)

    def test_wrong_dim_row_names_the_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "subject_id,modality,source,dim,v0,v1\n"
            "s1,cough,ext,2,0.1,0.2\n"
            "s2,cough,ext,3,0.1,0.2\n"
        )
        with pytest.raises(EmbeddingFormatError, match="row 3"):
            read_embeddings(path)

    def test_external_extractor_fixture(self, tmp_path):
        # file shaped like the standalone extractor's export: 3 subjects, dim 512
        rng = np.random.default_rng(6)
        rows = []
        for i in range(3):
            values = rng.normal(size=512)
            rows.append(
                f"s{i},breathing,pann,512," + ",".join(repr(float(v)) for v in values)
            )
        header = "subject_id,modality,source,dim," + ",".join(f"v{i}" for i in range(512))
        path = tmp_path / "pann.csv"
        path.write_text(header + "\n" + "\n".join(rows) + "\n")
        loaded = read_embeddings(path)
        assert len(loaded) == 3
        assert loaded.dim == 512
        assert loaded.source == "pann"

    def test_malformed_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("subject,modality,source,dim,v0\ns1,cough,x,1,0.0\n")
        with pytest.raises(EmbeddingFormatError, match="header"):
            read_embeddings(path)

    def test_mixed_sources_rejected(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text(
            "subject_id,modality,source,dim,v0\n"
            "s1,cough,a,1,0.0\n"
            "s2,cough,b,1,0.0\n"
        )
        with pytest.raises(EmbeddingFormatError, match="source"):
            read_embeddings(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "subject_id,modality,source,dim,v0\n"
            "s1,cough,a,1,0.0\n"
            "s1,cough,a,1,1.0\n"
        )
        with pytest.raises(EmbeddingFormatError, match="duplicate"):
            read_embeddings(path)
