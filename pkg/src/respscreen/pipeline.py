"""End-to-end track runner: extract -> embed -> reduce -> fuse -> oversample
-> train -> evaluate.

One user-facing seed fans out to fixed per-stage seeds, so a RunConfig is a
complete reproducibility record: identical configs yield byte-identical
reports. Embedding extraction is cached under the output directory keyed
by a content hash of the manifest, the audio bytes, and the front-end
config.
"""

import csv
import hashlib
import json
import os
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .audio import load_wav, normalize
from .dataset import load_manifest, stratified_split
from .embeddings import (
    EmbeddingSet,
    baseline_embed,
    read_embeddings,
    write_embeddings,
)
from .errors import DataError, ValidationError
from .gbdt import BoostedModel, TrainConfig, predict_proba, save_model, train
from .metrics import SPEC_FLOOR, confidence_interval, roc_auc, sen_at_spec
from .selection import (
    SvmSmote,
    apply_mask,
    apply_reduction,
    rank_dimensions,
    write_mask,
)
from .spectrograms import SpectrogramFrontend, write_spectrogram_dump
from .validation import MODALITIES, check_fraction

TRACKS = ("breathing", "cough", "speech", "all")
_STAGE_NAMES = ("synth", "split", "oversample", "train", "ci")


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs; the single reproducibility knob."""

    manifest: str
    out_dir: str
    track: str = "all"
    frontend: str = "logmel"
    embedder: str = "baseline"  # 'baseline' or 'imported'
    embeddings: dict = field(default_factory=dict)  # modality -> csv path
    rho: float = 0.0
    oversample_m: int | None = None
    valid_fraction: float = 0.2
    min_spec: float = SPEC_FLOOR
    seed: int = 0
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.track not in TRACKS:
            raise ValidationError(f"unknown track {self.track!r}; expected {TRACKS}")
        if self.embedder not in ("baseline", "imported"):
            raise ValidationError(f"unknown embedder {self.embedder!r}")
        if self.embedder == "imported" and not self.embeddings:
            raise ValidationError("imported embedder requires embeddings paths")
        check_fraction(self.rho, "rho", high=0.9)
        if self.oversample_m is not None and not (2 <= self.oversample_m <= 5):
            raise ValidationError("oversample_m must be in [2, 5] when set")

    @property
    def modalities(self) -> tuple:
        return MODALITIES if self.track == "all" else (self.track,)


def derive_stage_seeds(seed: int) -> dict:
    """Fixed fan-out from the run seed to one integer seed per stage."""
    children = np.random.SeedSequence(seed).spawn(len(_STAGE_NAMES))
    return {
        name: int(child.generate_state(1, dtype=np.uint32)[0])
        for name, child in zip(_STAGE_NAMES, children)
    }


def _resolve(manifest_path: str, rel_path: str) -> str:
    if os.path.isabs(rel_path):
        return rel_path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rel_path)


def _corpus_fingerprint(config: RunConfig, records) -> str:
    """Content hash of manifest rows, audio bytes, and front-end config."""
    digest = hashlib.sha256()
    digest.update(__version__.encode())
    digest.update(config.frontend.encode())
    digest.update(config.embedder.encode())
    for rec in records:
        digest.update(repr((rec.subject_id, rec.modality, rec.label, rec.split)).encode())
        path = _resolve(config.manifest, rec.path)
        if os.path.exists(path):
            with open(path, "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()[:24]


def _baseline_embeddings(config: RunConfig, records) -> dict:
    """Compute (or load cached) baseline embeddings for the needed records.

    Unreadable audio degrades to a warning here; missing vectors become
    fatal later, when the training matrices are assembled.
    """
    wanted = [rec for rec in records if rec.modality in config.modalities]
    cache_dir = os.path.join(config.out_dir, "cache")
    os.makedirs(cache_dir, exist_ok=True)
    cache_path = os.path.join(
        cache_dir, f"emb_{_corpus_fingerprint(config, wanted)}.csv"
    )
    if os.path.exists(cache_path):
        cached = read_embeddings(cache_path)
        return {(vec.subject_id, vec.modality): vec for vec in cached}

    frontend = SpectrogramFrontend(kind=config.frontend)
    table = {}
    failures = 0
    for rec in wanted:
        path = _resolve(config.manifest, rec.path)
        try:
            clip = normalize(load_wav(path))
            vec = baseline_embed(frontend.transform_clip(clip), rec.subject_id, rec.modality)
        except (DataError, FileNotFoundError, OSError) as exc:
            warnings.warn(f"skipping {rec.subject_id}/{rec.modality}: {exc}", stacklevel=2)
            failures += 1
            continue
        table[(rec.subject_id, rec.modality)] = vec
    if table and failures == 0:
        write_embeddings(EmbeddingSet(vectors=list(table.values())), cache_path)
    return table


def _imported_embeddings(config: RunConfig) -> dict:
    per_modality_paths = dict(config.embeddings)
    if "all" in per_modality_paths:
        single = per_modality_paths.pop("all")
        for modality in config.modalities:
            per_modality_paths.setdefault(modality, single)
    table = {}
    for modality in config.modalities:
        if modality not in per_modality_paths:
            raise DataError(f"no embeddings file configured for modality {modality!r}")
        loaded = read_embeddings(per_modality_paths[modality])
        for vec in loaded:
            if vec.modality != modality:
                continue
            table[(vec.subject_id, vec.modality)] = vec
    return table


def _collect_matrix(table, subjects, modality, context) -> np.ndarray:
    rows = []
    for subject in subjects:
        vec = table.get((subject, modality))
        if vec is None:
            raise DataError(
                f"missing embedding for {subject}/{modality} ({context}); "
                "cannot train or evaluate on an incomplete matrix"
            )
        rows.append(vec.values)
    return np.vstack(rows)


@dataclass
class PipelineResult:
    report: object
    model: BoostedModel
    masks: dict
    scores: np.ndarray
    test_subjects: list
    stage_seeds: dict


def _assemble(config: RunConfig, records):
    """Split manifest rows into aligned dev/test matrices per modality."""
    dev_labels = {}
    test_labels = {}
    for rec in records:
        if rec.modality not in config.modalities:
            continue
        if rec.split == "dev":
            dev_labels[rec.subject_id] = 1 if rec.label == "p" else 0
        else:
            if rec.label == "":
                raise DataError(
                    f"test subject {rec.subject_id} is unlabeled; "
                    "evaluation needs test labels in the manifest"
                )
            test_labels[rec.subject_id] = 1 if rec.label == "p" else 0
    if not dev_labels or not test_labels:
        raise DataError("manifest must contain both dev and test rows")

    dev_subjects = sorted(dev_labels)
    test_subjects = sorted(test_labels)
    y_dev = np.array([dev_labels[s] for s in dev_subjects])
    y_test = np.array([test_labels[s] for s in test_subjects])
    if len(np.unique(y_dev)) < 2:
        raise DataError("dev split needs both classes")

    if config.embedder == "baseline":
        table = _baseline_embeddings(config, records)
    else:
        table = _imported_embeddings(config)

    X_dev, X_test = {}, {}
    for modality in config.modalities:
        X_dev[modality] = _collect_matrix(table, dev_subjects, modality, "dev")
        X_test[modality] = _collect_matrix(table, test_subjects, modality, "test")
    return dev_subjects, test_subjects, y_dev, y_test, X_dev, X_test


def _reduce_and_fuse(config: RunConfig, y_dev, X_dev, X_test):
    """Per-modality dev-fitted reduction masks, then canonical-order fusion."""
    masks = {}
    dev_parts, test_parts = [], []
    for modality in config.modalities:
        ranking = rank_dimensions(X_dev[modality], y_dev)
        reduced_dev, mask = apply_reduction(X_dev[modality], ranking, config.rho)
        masks[modality] = mask
        dev_parts.append(reduced_dev)
        test_parts.append(apply_mask(X_test[modality], mask))
    return np.hstack(dev_parts), np.hstack(test_parts), masks


class _stage:
    """Tags DataErrors with the pipeline stage they came from."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, DataError):
            raise type(exc)(f"[stage:{self.name}] {exc}") from exc
        return False


def run_pipeline(config: RunConfig, write_artifacts: bool = True) -> PipelineResult:
    with _stage("manifest"):
        records = load_manifest(config.manifest)
    stage_seeds = derive_stage_seeds(config.seed)

    with _stage("embed"):
        _, test_subjects, y_dev, y_test, X_dev, X_test = _assemble(config, records)
    with _stage("reduce"):
        fused_dev, fused_test, masks = _reduce_and_fuse(config, y_dev, X_dev, X_test)

    train_idx, valid_idx = stratified_split(
        y_dev, config.valid_fraction, seed=stage_seeds["split"]
    )
    X_train, y_train = fused_dev[train_idx], y_dev[train_idx]
    X_valid, y_valid = fused_dev[valid_idx], y_dev[valid_idx]

    if config.oversample_m is not None:
        with _stage("oversample"):
            n_pos = int(y_train.sum())
            sampler = SvmSmote(
                multiplier=config.oversample_m,
                k_neighbors=min(5, n_pos - 1),
                seed=stage_seeds["oversample"],
            )
            X_train, y_train = sampler.fit_resample(X_train, y_train)

    with _stage("train"):
        train_config = replace(config.train, seed=stage_seeds["train"])
        model = train(X_train, y_train, X_valid, y_valid, train_config)
    scores = predict_proba(model, fused_test)

    report = sen_at_spec(
        scores,
        y_test,
        min_spec=config.min_spec,
        metadata={
            "track": config.track,
            "frontend": config.frontend,
            "embedder": config.embedder,
            "rho": config.rho,
            "oversample_m": config.oversample_m,
            "best_iteration": model.best_iteration,
            "feature_dim": int(fused_dev.shape[1]),
        },
    )
    report.ci = confidence_interval(
        roc_auc, scores, y_test, n_runs=10, seed=stage_seeds["ci"]
    )

    result = PipelineResult(
        report=report,
        model=model,
        masks=masks,
        scores=scores,
        test_subjects=test_subjects,
        stage_seeds=stage_seeds,
    )
    if write_artifacts:
        _write_artifacts(config, result)
    return result


def _write_artifacts(config: RunConfig, result: PipelineResult) -> None:
    os.makedirs(config.out_dir, exist_ok=True)
    report = result.report
    with open(os.path.join(config.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(config.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    save_model(result.model, os.path.join(config.out_dir, "model.txt"))
    for modality, mask in result.masks.items():
        write_mask(mask, os.path.join(config.out_dir, f"mask_{modality}.csv"))
    scores_path = os.path.join(config.out_dir, "test_scores.csv")
    with open(scores_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "score"])
        for subject, score in zip(result.test_subjects, result.scores):
            writer.writerow([subject, repr(float(score))])
    record = {
        "version": __version__,
        "config": _config_dict(config),
        "stage_seeds": result.stage_seeds,
    }
    with open(os.path.join(config.out_dir, "run_record.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _config_dict(config: RunConfig) -> dict:
    payload = asdict(config)
    payload["train"] = asdict(config.train)
    return payload


def run_sweep(config: RunConfig, rho_grid, m_grid, out_path) -> list:
    """Cartesian (rho, oversample) sweep; one pipeline run per cell.

    Cell failures are recorded, not fatal. Rows are written sorted by AUC
    descending (ties: rho then multiplier ascending).
    """
    rows = []
    for rho in rho_grid:
        for m in m_grid:
            cell = replace(config, rho=float(rho), oversample_m=m)
            row = {
                "rho": float(rho),
                "oversample_m": "" if m is None else int(m),
            }
            try:
                result = run_pipeline(cell, write_artifacts=False)
                report = result.report
                row.update(
                    auc=report.auc,
                    sensitivity=report.sensitivity,
                    specificity=report.specificity,
                    threshold=report.threshold,
                    precision=report.precision,
                    f1=report.f1,
                    feasible=report.feasible,
                    error="",
                )
            except DataError as exc:
                row.update(
                    auc="", sensitivity="", specificity="", threshold="",
                    precision="", f1="", feasible="", error=str(exc),
                )
            rows.append(row)

    rows.sort(
        key=lambda r: (
            -(r["auc"] if r["auc"] != "" else -np.inf),
            r["rho"],
            r["oversample_m"] if r["oversample_m"] != "" else -1,
        )
    )
    fieldnames = [
        "rho", "oversample_m", "auc", "sensitivity", "specificity",
        "threshold", "precision", "f1", "feasible", "error",
    ]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows


def evaluate_saved_model(config: RunConfig, model_path: str, masks_dir: str):
    """Re-score the manifest's test rows with a persisted model and masks."""
    from .gbdt import load_model
    from .selection import read_mask

    model = load_model(model_path)
    records = load_manifest(config.manifest)
    _, test_subjects, _, y_test, _, X_test = _assemble(config, records)
    parts = []
    for modality in config.modalities:
        mask = read_mask(os.path.join(masks_dir, f"mask_{modality}.csv"))
        parts.append(apply_mask(X_test[modality], mask))
    scores = predict_proba(model, np.hstack(parts))
    report = sen_at_spec(
        scores,
        y_test,
        min_spec=config.min_spec,
        metadata={
            "track": config.track,
            "embedder": config.embedder,
            "model": os.path.basename(model_path),
        },
    )
    report.ci = confidence_interval(
        roc_auc, scores, y_test, n_runs=10, seed=derive_stage_seeds(config.seed)["ci"]
    )
    return report, scores, test_subjects


def extract_feature_dumps(manifest_path: str, frontend_kind: str, out_dir: str) -> dict:
    """One spectrogram dump per manifest record; resumable (skips existing).

    Returns counters: written / skipped / failed.
    """
    records = load_manifest(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    frontend = SpectrogramFrontend(kind=frontend_kind)
    counters = {"written": 0, "skipped": 0, "failed": 0}
    for rec in records:
        stem = f"{rec.subject_id}_{rec.modality}_{frontend_kind}"
        dump_path = os.path.join(out_dir, stem + ".f32")
        if os.path.exists(dump_path) and os.path.exists(dump_path + ".hdr"):
            counters["skipped"] += 1
            continue
        try:
            clip = normalize(load_wav(_resolve(manifest_path, rec.path)))
            spec = frontend.transform_clip(clip)
        except (DataError, FileNotFoundError, OSError) as exc:
            warnings.warn(f"skipping {rec.subject_id}/{rec.modality}: {exc}", stacklevel=2)
            counters["failed"] += 1
            continue
        write_spectrogram_dump(spec, dump_path)
        counters["written"] += 1
    return counters


def export_baseline_embeddings(manifest_path: str, frontend_kind: str, out_path: str) -> int:
    """Compute baseline embeddings for every manifest record into one CSV."""
    records = load_manifest(manifest_path)
    frontend = SpectrogramFrontend(kind=frontend_kind)
    vectors = []
    for rec in records:
        clip = normalize(load_wav(_resolve(manifest_path, rec.path)))
        vectors.append(
            baseline_embed(frontend.transform_clip(clip), rec.subject_id, rec.modality)
        )
    write_embeddings(EmbeddingSet(vectors=vectors), out_path)
    return len(vectors)
