"""Noise-prediction training: sample a step, noise the image, regress z.

Noise is complex-standard per pixel (each channel N(0, 1/2)), matching the
sampler that will consume the weights.  All randomness flows through the
config seed; loss must stay finite or training aborts with the step index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .model import NoisePredictor


@dataclass
class TrainingConfig:
    n_samples: int = 1000
    size: int = 64
    epochs: int = 10
    lr: float = 1e-4
    batch_size: int = 8
    T: int = 1000
    beta_0: float = 1e-4
    beta_T: float = 0.02
    seed: int = 0
    channels: int = 32
    blocks: int = 4

    def __post_init__(self):
        if min(self.n_samples, self.epochs, self.batch_size, self.T) < 1:
            raise ValueError("hyperparameters must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if not 0 < self.beta_0 <= self.beta_T < 1:
            raise ValueError("betas must satisfy 0 < beta_0 <= beta_T < 1")


@dataclass
class TrainingResult:
    model: NoisePredictor
    losses: list[float] = field(default_factory=list)

    def smoothed(self, window: int = 50) -> np.ndarray:
        kernel = np.ones(min(window, len(self.losses))) / min(window, len(self.losses))
        return np.convolve(self.losses, kernel, mode="valid")


def train(config: TrainingConfig, data: np.ndarray) -> TrainingResult:
    """Adam on ||eps_hat(x_t, t) - z||^2 over the given (n, 2, H, W) data."""
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    model = NoisePredictor(channels=config.channels, blocks=config.blocks)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    betas = torch.linspace(config.beta_0, config.beta_T, config.T, dtype=torch.float64)
    abar = torch.cumprod(1.0 - betas, dim=0).float()  # abar[i] is step i+1

    images = torch.from_numpy(np.asarray(data, dtype=np.float32))
    n = images.shape[0]
    result = TrainingResult(model=model)
    step = 0
    for _ in range(config.epochs):
        order = torch.randperm(n, generator=gen)
        for lo in range(0, n, config.batch_size):
            batch = images[order[lo : lo + config.batch_size]]
            t = torch.randint(1, config.T + 1, (batch.shape[0],), generator=gen)
            ab = abar[t - 1].view(-1, 1, 1, 1)
            z = torch.randn(batch.shape, generator=gen) / np.sqrt(2.0)
            x_t = torch.sqrt(ab) * batch + torch.sqrt(1.0 - ab) * z
            eps = model(x_t, t)
            loss = torch.mean((eps - z) ** 2)
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            value = float(loss.detach())
            if not np.isfinite(value):
                raise RuntimeError(f"training loss diverged at step {step}")
            result.losses.append(value)
    model.eval()
    return result
