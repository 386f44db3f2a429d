"""Cross-implementation parity: the reconstruction core's forward pass must
reproduce this trainer's outputs from the exported manifest.

The shipped trainer only ever talks to the core through files; importing
the core package *here* is the test of exactly that file interface.
"""

import json

import numpy as np
import pytest
import torch

from sms_prior_trainer.export import export_weights
from sms_prior_trainer.model import NoisePredictor
from sms_prior_trainer.train import TrainingConfig

smsrecon_data_io = pytest.importorskip("smsrecon.data_io")
smsrecon_diffusion = pytest.importorskip("smsrecon.diffusion")


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out = tmp_path_factory.mktemp("export")
    torch.manual_seed(11)
    model = NoisePredictor().eval()
    rng = np.random.default_rng(1)
    imgs = rng.standard_normal((8, 2, 48, 48)).astype(np.float32) * 0.6
    config = TrainingConfig(n_samples=8, size=48, epochs=1, seed=11)
    export_weights(model, config, out, fixture_images=imgs)
    return out, model


def test_manifest_loads_in_core(exported):
    out, _ = exported
    manifest = smsrecon_data_io.load_weights(out / "weights.smsw")
    assert manifest.architecture == "rescnn-t64"
    assert manifest.schedule["T"] == 1000


def test_core_forward_matches_fixtures(exported):
    out, _ = exported
    den = smsrecon_diffusion.CnnDenoiser(smsrecon_data_io.load_weights(out / "weights.smsw"))
    meta = json.loads((out / "fixtures.json").read_text())
    worst = 0.0
    for k in range(5):
        x = smsrecon_data_io.read_array(out / f"fixture_{k}_input.smsc").real.astype(np.float32)
        want = smsrecon_data_io.read_array(out / f"fixture_{k}_output.smsc").real.astype(np.float32)
        got = den.predict(x, int(meta[f"fixture_{k}"]["t"]))
        worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst < 1e-4


def test_core_matches_trainer_on_fresh_inputs(exported):
    out, model = exported
    den = smsrecon_diffusion.CnnDenoiser(smsrecon_data_io.load_weights(out / "weights.smsw"))
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 2, 40, 40)).astype(np.float32)
    for t in (1, 137, 1000):
        with torch.no_grad():
            want = model(torch.from_numpy(x), torch.tensor([t] * 3)).numpy()
        got = den.predict(x, t)
        assert np.max(np.abs(got - want)) < 1e-4
