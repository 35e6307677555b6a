"""Compact trainable CNN over 128x154 spectrogram patches.

Four conv blocks (32/64/128/256 channels, each BN - Conv3x3 - ReLU - BN -
pool - dropout, the last pooling globally), then two 1024-unit fully
connected layers and a binary softmax head. The 256-dim global-pool
feature is the exported embedding.
"""

import numpy as np
import torch
from torch import nn

EMBED_DIM = 256
N_CLASSES = 2
INPUT_SHAPE = (128, 154)


def _check_patch_shape(x) -> None:
    if tuple(x.shape[-2:]) != INPUT_SHAPE:
        raise ValueError(
            f"expected {INPUT_SHAPE[0]}x{INPUT_SHAPE[1]} spectrogram patches, "
            f"got {tuple(x.shape[-2:])}"
        )


class _ConvBlock(nn.Module):
    def __init__(self, c_in, c_out, dropout, global_pool=False):
        super().__init__()
        self.pre_bn = nn.BatchNorm2d(c_in)
        self.conv = nn.Conv2d(c_in, c_out, kernel_size=3, padding=1)
        self.post_bn = nn.BatchNorm2d(c_out)
        self.global_pool = global_pool
        self.pool = nn.AdaptiveAvgPool2d(1) if global_pool else nn.AvgPool2d(2)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        x = self.post_bn(torch.relu(self.conv(self.pre_bn(x))))
        x = self.pool(x)
        if self.global_pool:
            x = torch.flatten(x, 1)
        return self.dropout(x)


class Lenet(nn.Module):
    """Channel progression 32 -> 64 -> 128 -> 256 with GAP embedding."""

    def __init__(self, seed: int = 0):
        super().__init__()
        self.blocks = nn.ModuleList(
            [
                _ConvBlock(1, 32, 0.20),
                _ConvBlock(32, 64, 0.25),
                _ConvBlock(64, 128, 0.30),
                _ConvBlock(128, 256, 0.35, global_pool=True),
            ]
        )
        self.fc1 = nn.Linear(EMBED_DIM, 1024)
        self.fc2 = nn.Linear(1024, 1024)
        self.head = nn.Linear(1024, N_CLASSES)
        self.fc_dropout = nn.Dropout(0.40)
        self._init_weights(seed)

    def _init_weights(self, seed: int):
        generator = torch.Generator().manual_seed(seed)
        for module in self.modules():
            if isinstance(module, (nn.Conv2d, nn.Linear)):
                with torch.no_grad():
                    module.weight.copy_(
                        torch.normal(0.0, 0.1, module.weight.shape, generator=generator)
                    )
                    module.bias.zero_()

    def stage_outputs(self, x):
        """Per-stage activations, for geometry checks and feature taps."""
        _check_patch_shape(x)
        stages = []
        for block in self.blocks:
            x = block(x)
            stages.append(x)
        x = self.fc_dropout(torch.relu(self.fc1(x)))
        stages.append(x)
        x = self.fc_dropout(torch.relu(self.fc2(x)))
        stages.append(x)
        stages.append(torch.softmax(self.head(x), dim=1))
        return stages

    def forward(self, x):
        _check_patch_shape(x)
        for block in self.blocks:
            x = block(x)
        x = self.fc_dropout(torch.relu(self.fc1(x)))
        x = self.fc_dropout(torch.relu(self.fc2(x)))
        return self.head(x)

    def embed(self, x) -> torch.Tensor:
        """256-dim global-pool feature (inference mode)."""
        _check_patch_shape(x)
        for block in self.blocks:
            x = block(x)
        return x


def _recalibrate_batchnorm(model: Lenet, X: torch.Tensor, batch_size: int) -> None:
    """Replace BN running stats with the training data's actual statistics.

    Short runs leave the exponential running averages far from the fitted
    batch statistics, so eval-mode predictions diverge from train-mode
    ones. One cumulative-average pass over the data repairs that.
    """
    bn_layers = [m for m in model.modules() if isinstance(m, nn.BatchNorm2d)]
    saved_momentum = [bn.momentum for bn in bn_layers]
    model.eval()  # dropout off: stats must match inference-time activations
    for bn in bn_layers:
        bn.reset_running_stats()
        bn.momentum = None  # cumulative moving average
        bn.train()
    with torch.no_grad():
        for start in range(0, len(X), batch_size):
            model(X[start : start + batch_size])
    for bn, momentum in zip(bn_layers, saved_momentum):
        bn.momentum = momentum


def train_lenet(
    patches: np.ndarray,
    labels: np.ndarray,
    epochs: int = 10,
    lr: float = 5e-3,
    batch_size: int = 32,
    seed: int = 0,
) -> Lenet:
    """Cross-entropy training with Adam on (N, 128, 154) patches.

    Finishes with a BatchNorm recalibration pass so inference-mode
    predictions reflect the fitted weights.
    """
    if len(set(labels.tolist())) < 2:
        raise ValueError("training labels must contain both classes")
    torch.manual_seed(seed)
    model = Lenet(seed=seed)
    X = torch.from_numpy(patches[:, None, :, :]).float()
    y = torch.from_numpy(labels).long()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(seed)
    model.train()
    for _ in range(epochs):
        order = order_rng.permutation(len(X))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(X[batch]), y[batch])
            loss.backward()
            optimizer.step()
    _recalibrate_batchnorm(model, X, batch_size)
    model.eval()
    return model


def lenet_embeddings(model: Lenet, patches: np.ndarray) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        X = torch.from_numpy(patches[:, None, :, :]).float()
        return model.embed(X).numpy().astype(np.float64)
