"""Shared benchmark-grade model for the pipeline demos.

The inversion / adaptation / editing demos need a fully trained model:
weakly trained ones reconstruct fine but their latent space is too
compressed for visible traversals. The first call trains the full
recipe (2000 images, 30 epochs; roughly 50 minutes on two CPU cores)
and caches the checkpoint and fitted directions next to the demos, so
every later demo starts instantly. Pass existing artifact paths to
reuse ones you already trained (e.g. from the README quick start).
"""

import argparse
from pathlib import Path

from latentshift import (TrainConfig, fit_attribute_directions, generate_dataset,
                         load_checkpoint, load_directions, save_checkpoint,
                         save_directions, train_toy)

DEFAULT_CKPT = Path("demo_model.ckpt")
DEFAULT_DIRS = Path("demo_directions.json")


def demo_model(argv=None):
    """Returns (model, directions), training and caching them if needed."""
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", type=Path, default=DEFAULT_CKPT)
    parser.add_argument("--directions", type=Path, default=DEFAULT_DIRS)
    args = parser.parse_args(argv)

    if args.checkpoint.exists():
        model = load_checkpoint(args.checkpoint)
        print(f"loaded model from {args.checkpoint}")
    else:
        print(f"{args.checkpoint} not found: training the full recipe "
              "(2000 images x 30 epochs, ~50 min on 2 CPU cores) ...")
        model = train_toy(generate_dataset(seed=11, n=2000, size=64),
                          TrainConfig(), seed=0)
        save_checkpoint(model, args.checkpoint)
        print(f"cached {args.checkpoint}")

    if args.directions.exists():
        directions = load_directions(args.directions)
        print(f"loaded directions from {args.directions}")
    else:
        print("fitting attribute directions on 500 encoded faces ...")
        directions = fit_attribute_directions(model,
                                              generate_dataset(seed=11, n=500, size=64))
        save_directions(args.directions, directions)
        print(f"cached {args.directions}")
    return model, directions
