"""Network geometry and training sanity for the compact CNN."""

import numpy as np
import pytest
import torch

from respextract.lenet import Lenet, lenet_embeddings, train_lenet

TABLE_SHAPES = [
    (32, 64, 77),
    (64, 32, 38),
    (128, 16, 19),
    (256,),
    (1024,),
    (1024,),
    (2,),
]


def _toy_patches(n=32, seed=0):
    rng = np.random.default_rng(seed)
    patches = rng.normal(size=(n, 128, 154))
    labels = np.array([0, 1] * (n // 2))
    patches[labels == 1, 40:60, :] += 1.5  # class-dependent band offset
    return patches.astype(np.float64), labels


class TestGeometry:
    def test_stage_shapes_match_table(self):
        model = Lenet(seed=0)
        model.eval()
        with torch.no_grad():
            stages = model.stage_outputs(torch.zeros(3, 1, 128, 154))
        got = [tuple(s.shape[1:]) for s in stages]
        assert got == TABLE_SHAPES

    def test_untrained_softmax_normalized(self):
        model = Lenet(seed=1)
        model.eval()
        with torch.no_grad():
            probs = model.stage_outputs(torch.randn(4, 1, 128, 154))[-1]
        torch.testing.assert_close(probs.sum(dim=1), torch.ones(4))
        assert torch.all(probs >= 0)

    def test_embedding_dim_256_any_valid_input(self):
        model = Lenet(seed=2)
        embeddings = lenet_embeddings(model, np.random.default_rng(0).normal(size=(5, 128, 154)))
        assert embeddings.shape == (5, 256)

    def test_wrong_geometry_rejected(self):
        model = Lenet(seed=0)
        with pytest.raises(ValueError, match="128x154"):
            model(torch.zeros(1, 1, 64, 77))

    def test_weight_init_spread(self):
        model = Lenet(seed=3)
        weights = model.fc1.weight.detach().numpy().ravel()
        assert abs(weights.mean()) < 0.01
        assert abs(weights.std() - 0.1) < 0.01


class TestTraining:
    def test_overfits_toy_set(self):
        patches, labels = _toy_patches()
        model = train_lenet(patches, labels, epochs=4, seed=0)
        with torch.no_grad():
            logits = model(torch.from_numpy(patches[:, None]).float())
        accuracy = (logits.argmax(dim=1).numpy() == labels).mean()
        assert accuracy == 1.0

    def test_single_class_rejected(self):
        patches, labels = _toy_patches(n=8)
        with pytest.raises(ValueError):
            train_lenet(patches, np.zeros_like(labels), epochs=1)
