"""Training data: phantom slice images produced by the reconstruction CLI.

The simulator is driven as an external program (its public interface); the
ground-truth slice stacks it writes are collected into a two-channel
(real/imaginary) float tensor.  Deterministic given the seed.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import read_array

SIMULATE_MB = 4  # slices harvested per simulator call


@dataclass
class DatasetStats:
    mean: list[float]
    std: list[float]
    count: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "count": self.count}


def _run_simulate(config: dict, out_dir: Path) -> None:
    cfg_path = out_dir / "sim.json"
    cfg_path.write_text(json.dumps(config))
    cmd = [
        shutil.which("smsrecon") or sys.executable,
        *([] if shutil.which("smsrecon") else ["-m", "smsrecon.cli"]),
        "simulate",
        "--config",
        str(cfg_path),
        "--out-dir",
        str(out_dir),
    ]
    subprocess.run(cmd, check=True, capture_output=True)


def build_dataset(n: int, size: int, seed: int, workdir: Path | None = None) -> tuple[np.ndarray, DatasetStats]:
    """n two-channel slice images of side `size`, shape (n, 2, size, size).

    Slices come from repeated simulator invocations (SIMULATE_MB per call)
    with derived seeds; per-channel statistics are returned alongside.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    tmp = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="smsprior_data_"))
    tmp.mkdir(parents=True, exist_ok=True)
    calls = -(-n // SIMULATE_MB)
    slices = []
    for k in range(calls):
        out = tmp / f"batch{k}"
        out.mkdir(exist_ok=True)
        _run_simulate(
            {
                "h": size,
                "w": size,
                "c": 1,
                "mb": SIMULATE_MB,
                "r": 1,
                "calib_size": 16,
                "seed": seed * 100_003 + k,
            },
            out,
        )
        stack = read_array(out / "truth.smsc")
        slices.extend(stack)
    data = np.stack(
        [np.stack([s.real, s.imag]) for s in slices[:n]]
    ).astype(np.float32)
    stats = DatasetStats(
        mean=[float(data[:, 0].mean()), float(data[:, 1].mean())],
        std=[float(data[:, 0].std()), float(data[:, 1].std())],
        count=n,
    )
    return data, stats
