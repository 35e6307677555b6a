"""Manifest-driven embedding extraction into the shared CSV format.

The CSV contract (header ``subject_id,modality,source,dim,v0..v{dim-1}``,
one row per subject/modality, repr-serialized floats) is the boundary to
the downstream screening pipeline; rows here must ingest there unchanged.
"""

import csv
import os

import numpy as np
import torch

from .audio import load_normalized
from .features import read_patch_dump
from .lenet import Lenet, lenet_embeddings, train_lenet
from .pretrained import embed_clip, load_embedder

MANIFEST_COLUMNS = ["subject_id", "modality", "path", "label", "split"]


def read_manifest(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if list(reader.fieldnames or []) != MANIFEST_COLUMNS:
            raise ValueError(
                f"{path}: manifest header must be {','.join(MANIFEST_COLUMNS)}"
            )
        return list(reader)


def _resolve(manifest_path, rel_path) -> str:
    if os.path.isabs(rel_path):
        return rel_path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rel_path)


def write_embedding_csv(rows: list, source: str, out_path) -> None:
    """rows: (subject_id, modality, vector) triples, one per recording."""
    if not rows:
        raise ValueError("no embeddings to write")
    dims = {len(vec) for _, _, vec in rows}
    if len(dims) != 1:
        raise ValueError(f"dim drift across rows: {sorted(dims)}")
    dim = dims.pop()
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "modality", "source", "dim"]
                        + [f"v{i}" for i in range(dim)])
        for subject_id, modality, vec in rows:
            writer.writerow([subject_id, modality, source, dim]
                            + [repr(float(v)) for v in vec])


def _load_patch(manifest_path, record, features_dir, frontend):
    if features_dir:
        stem = f"{record['subject_id']}_{record['modality']}_{frontend}"
        matrix, _ = read_patch_dump(os.path.join(features_dir, stem + ".f32"))
        return matrix
    from .features import logmel_patch

    return logmel_patch(load_normalized(_resolve(manifest_path, record["path"])))


def train_lenet_on_manifest(
    manifest_path,
    epochs: int = 20,
    seed: int = 0,
    features_dir: str | None = None,
    frontend: str = "logmel",
) -> Lenet:
    """Fit the compact CNN on the manifest's labeled dev rows."""
    records = [r for r in read_manifest(manifest_path) if r["split"] == "dev"]
    if not records:
        raise ValueError("manifest has no dev rows to train on")
    patches = np.stack(
        [_load_patch(manifest_path, r, features_dir, frontend) for r in records]
    )
    labels = np.array([1 if r["label"] == "p" else 0 for r in records])
    return train_lenet(patches, labels, epochs=epochs, seed=seed)


def extract_to_csv(
    source: str,
    manifest_path,
    out_path,
    weights: str | None = None,
    checkpoint: str | None = None,
    seed: int = 0,
    features_dir: str | None = None,
    frontend: str = "logmel",
) -> int:
    """Embed every manifest record with the chosen source; returns row count."""
    records = read_manifest(manifest_path)
    if not records:
        raise ValueError("empty manifest")
    rows = []
    if source == "lenet":
        if checkpoint is None or not os.path.exists(checkpoint):
            raise ValueError(
                "lenet extraction needs a trained checkpoint; run train-lenet first"
            )
        model = Lenet()
        model.load_state_dict(torch.load(checkpoint, map_location="cpu", weights_only=True))
        model.eval()
        patches = np.stack(
            [_load_patch(manifest_path, r, features_dir, frontend) for r in records]
        )
        vectors = lenet_embeddings(model, patches)
        rows = [
            (r["subject_id"], r["modality"], vec) for r, vec in zip(records, vectors)
        ]
    else:
        model = load_embedder(source, weights, seed=seed)
        for record in records:
            samples = load_normalized(_resolve(manifest_path, record["path"]))
            rows.append((record["subject_id"], record["modality"], embed_clip(model, samples)))
    write_embedding_csv(rows, source, out_path)
    return len(rows)
