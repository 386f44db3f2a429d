"""Weight-manifest export plus the parity fixtures that gate the format.

The manifest layer table mirrors ``NoisePredictor.layer_table``; tensors
are concatenated into one float32 blob with byte offsets.  Five fixture
triples (noisy input, step index, network output) accompany every export
so any consumer can prove its forward pass matches this one.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .formats import write_array, write_weights
from .model import ARCHITECTURE, NoisePredictor, sinusoidal_embedding
from .train import TrainingConfig

N_FIXTURES = 5


def export_weights(
    model: NoisePredictor,
    config: TrainingConfig,
    out_dir,
    fixture_images: np.ndarray | None = None,
    extra_meta: dict | None = None,
) -> Path:
    """Write weights.smsw, fixture arrays, and fixtures.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    layers = []
    chunks = []
    offset = 0
    for name, kind, module in model.layer_table():
        tensors = [module.weight.detach(), module.bias.detach()]
        shapes, offsets = [], []
        for tensor in tensors:
            arr = tensor.numpy().astype("<f4")
            shapes.append(list(arr.shape))
            offsets.append(offset)
            chunks.append(arr.ravel())
            offset += arr.nbytes
        layers.append({"name": name, "kind": kind, "shapes": shapes, "offsets": offsets})
    blob = np.concatenate(chunks)
    path = out / "weights.smsw"
    write_weights(
        ARCHITECTURE,
        {"T": config.T, "beta_0": config.beta_0, "beta_T": config.beta_T},
        layers,
        blob,
        path,
    )

    meta: dict = {"architecture": ARCHITECTURE}
    if extra_meta:
        meta.update(extra_meta)
    if fixture_images is not None:
        rng = np.random.default_rng(config.seed + 5)
        betas = np.linspace(config.beta_0, config.beta_T, config.T)
        abar = np.cumprod(1.0 - betas)
        with torch.no_grad():
            for k in range(N_FIXTURES):
                img = fixture_images[k % len(fixture_images)]
                t = int(rng.integers(1, config.T + 1))
                ab = abar[t - 1]
                z = rng.standard_normal(img.shape).astype(np.float32) / np.sqrt(2.0)
                x_t = (np.sqrt(ab) * img + np.sqrt(1 - ab) * z).astype(np.float32)
                out_eps = model(torch.from_numpy(x_t[None]), torch.tensor([t])).numpy()[0]
                write_array(x_t.astype(np.complex64), out / f"fixture_{k}_input.smsc")
                write_array(out_eps.astype(np.complex64), out / f"fixture_{k}_output.smsc")
                meta[f"fixture_{k}"] = {"t": t}
    (out / "fixtures.json").write_text(json.dumps(meta, indent=2))
    return path


def load_into_model(header: dict, blob: np.ndarray) -> NoisePredictor:
    """Rebuild a NoisePredictor from a manifest (trainer-side round trip)."""
    names = {entry["name"] for entry in header["layers"]}
    blocks = sum(1 for n in names if n.endswith(".conv1"))
    conv_in = next(e for e in header["layers"] if e["name"] == "conv_in")
    channels = conv_in["shapes"][0][0]
    model = NoisePredictor(channels=channels, blocks=blocks)
    table = {name: module for name, _, module in model.layer_table()}
    with torch.no_grad():
        for entry in header["layers"]:
            module = table[entry["name"]]
            for tensor, shape, off in zip(
                (module.weight, module.bias), entry["shapes"], entry["offsets"]
            ):
                count = int(np.prod(shape))
                values = blob[off // 4 : off // 4 + count].reshape(shape)
                tensor.copy_(torch.from_numpy(values.copy()))
    model.eval()
    return model
