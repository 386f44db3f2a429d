"""Train-and-export entry point: builds the dataset through the
reconstruction CLI, trains the noise predictor, writes the manifest."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from .dataset import build_dataset
from .export import export_weights
from .train import TrainingConfig, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Train the slice-image noise prior.")
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="artifacts")
    args = parser.parse_args(argv)

    config = TrainingConfig(
        n_samples=args.samples,
        size=args.size,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    data, stats = build_dataset(config.n_samples, config.size, config.seed)
    result = train(config, data)
    out = Path(args.out_dir)
    export_weights(
        result.model,
        config,
        out,
        fixture_images=data[:8],
        extra_meta={"dataset_stats": stats.to_dict()},
    )
    (out / "training_log.json").write_text(
        json.dumps(
            {
                "losses": result.losses,
                "smoothed_first": float(result.smoothed()[0]),
                "smoothed_last": float(result.smoothed()[-1]),
                "config": vars(args),
            }
        )
    )
    print(f"exported weights and fixtures to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
