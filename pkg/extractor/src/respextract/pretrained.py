"""Wrappers for the large pretrained audio embedders.

Each source is defined by its segmentation and feature tap:

  pann    10 s input, global-pool tap, 2048-dim
  openl3   1 s segments, global-pool tap, 512-dim
  trill    1 s segments, final-layer tap, 512-dim

Real checkpoints are never vendored. A wrapper loads a state dict from
``--weights PATH`` when the user has fetched one, or runs a deterministic
randomly initialized *surrogate* network (``--weights random``) that
preserves the interface contract (segmentation, tap, output dim) for
pipeline and format testing. Requesting a source without weights raises
``ModelUnavailableError`` carrying fetch instructions.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .features import logmel_patch

SEGMENT_RATE = 16000

FETCH_INSTRUCTIONS = {
    "pann": (
        "PANN (CNN14) weights are published on Zenodo "
        "(https://zenodo.org/record/3987831, Cnn14_mAP=0.431.pth); convert to a "
        "state dict for this wrapper or pass --weights random for a surrogate."
    ),
    "openl3": (
        "OpenL3 weights ship with the `openl3` package "
        "(https://github.com/marl/openl3); export the audio-embedding weights "
        "or pass --weights random for a surrogate."
    ),
    "trill": (
        "TRILL is distributed via TensorFlow Hub "
        "(https://tfhub.dev/google/nonsemantic-speech-benchmark/trill/3); "
        "export a state dict or pass --weights random for a surrogate."
    ),
}


class ModelUnavailableError(RuntimeError):
    """Raised when a pretrained source is requested without usable weights."""


@dataclass(frozen=True)
class ExtractorSpec:
    """Source name plus its fixed segmentation and tap contract."""

    source: str
    segment_seconds: int
    tap: str  # 'global_pool' or 'final_layer'
    dim: int

    def __post_init__(self):
        if self.tap not in ("global_pool", "final_layer"):
            raise ValueError(f"unknown tap {self.tap!r}")
        if self.source == "trill" and self.tap != "final_layer":
            raise ValueError("trill taps the final layer")
        if self.source in ("pann", "openl3", "lenet") and self.tap != "global_pool":
            raise ValueError(f"{self.source} taps the global pooling layer")


EXTRACTOR_SPECS = {
    "lenet": ExtractorSpec(source="lenet", segment_seconds=10, tap="global_pool", dim=256),
    "pann": ExtractorSpec(source="pann", segment_seconds=10, tap="global_pool", dim=2048),
    "openl3": ExtractorSpec(source="openl3", segment_seconds=1, tap="global_pool", dim=512),
    "trill": ExtractorSpec(source="trill", segment_seconds=1, tap="final_layer", dim=512),
}


class _ConvEncoder(nn.Module):
    """Shared conv trunk: stacked conv/BN/ReLU/pool blocks over a mel patch."""

    def __init__(self, channels):
        super().__init__()
        layers = []
        c_in = 1
        for c_out in channels:
            layers += [
                nn.Conv2d(c_in, c_out, kernel_size=3, padding=1),
                nn.BatchNorm2d(c_out),
                nn.ReLU(),
                nn.AvgPool2d(2),
            ]
            c_in = c_out
        self.trunk = nn.Sequential(*layers)
        self.gap = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return torch.flatten(self.gap(self.trunk(x)), 1)


class SurrogateEmbedder(nn.Module):
    """Interface-faithful stand-in for one pretrained source.

    The global-pool tap returns the pooled conv feature projected to the
    documented dim; the final-layer tap returns the activation of a last
    linear layer stacked on top of the pooled feature.
    """

    def __init__(self, spec: ExtractorSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        torch.manual_seed(seed)
        self.encoder = _ConvEncoder((32, 64, 128))
        self.pool_proj = nn.Linear(128, spec.dim)
        self.final = nn.Linear(spec.dim, spec.dim)
        self.eval()

    def forward(self, x):
        pooled = self.pool_proj(self.encoder(x))
        if self.spec.tap == "global_pool":
            return pooled
        return self.final(torch.relu(pooled))


def load_embedder(source: str, weights: str | None, seed: int = 0) -> SurrogateEmbedder:
    """Resolve a pretrained source to a usable network.

    weights='random' builds the deterministic surrogate; a path loads a
    state dict saved from this wrapper; None raises with fetch guidance.
    """
    if source not in FETCH_INSTRUCTIONS:
        raise ValueError(f"unknown pretrained source {source!r}")
    spec = EXTRACTOR_SPECS[source]
    if weights is None:
        raise ModelUnavailableError(
            f"no weights for {source!r}. {FETCH_INSTRUCTIONS[source]}"
        )
    model = SurrogateEmbedder(spec, seed=seed)
    if weights != "random":
        state = torch.load(weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        model.eval()
    return model


def segment_clip(samples: np.ndarray, segment_seconds: int) -> list:
    """Non-overlapping segments; a 10 s clip yields 10 one-second pieces."""
    seg_len = segment_seconds * SEGMENT_RATE
    n_segments = len(samples) // seg_len
    if n_segments == 0:
        raise ValueError("clip shorter than one segment")
    return [samples[i * seg_len : (i + 1) * seg_len] for i in range(n_segments)]


def embed_clip(model: SurrogateEmbedder, samples: np.ndarray) -> np.ndarray:
    """One vector per clip: segment, embed, average across time."""
    spec = model.spec
    segments = segment_clip(samples, spec.segment_seconds)
    n_frames = 154 if spec.segment_seconds == 10 else 14
    patches = np.stack([logmel_patch(seg, n_frames=n_frames) for seg in segments])
    model.eval()
    with torch.no_grad():
        out = model(torch.from_numpy(patches[:, None, :, :]).float()).numpy()
    return out.mean(axis=0).astype(np.float64)
