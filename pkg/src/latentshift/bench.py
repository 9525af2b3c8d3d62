"""Benchmark harness: the five-algorithm comparison over a toy dataset.

Reconstruction and edit benches share the same variant definitions:

* ``vanilla``            encoder projection, no adaptation
* ``latent_opt``         encoder-initialized latent optimization only
* ``oneshot_random``     random prior projection + decoder adaptation
* ``oneshot_latent_opt`` latent optimization, then adaptation at the fixed result
* ``oneshot_encoder``    encoder projection + decoder adaptation

Results persist as one JSON-lines record per unit of work, so reruns
skip completed pairs and reproduce the identical final report. Every
report embeds the resolved config and code version. Single-worker runs
are byte-deterministic end to end.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adaptation import AdaptationConfig, PerceptualExtractor, adapt_decoder
from .checkpoint import load_checkpoint
from .editing import (DEFAULT_ALPHAS, EDIT_ATTRIBUTES, AttributeDirection,
                      EditTrajectory, edit_latent, load_directions)
from .errors import ConfigError, ValidationError
from .faces import load_dataset, measure_factors, IDENTITY_FACTORS
from .inversion import LatentOptConfig, project_latent_opt
from .metrics import ALGORITHM_ORDER, MetricsReport, aggregate, psnr, ssim, swd
from .model import GenerativeAutoencoder
from .pngio import load_image, save_image

ADAPTED_ALGORITHMS = ("oneshot_random", "oneshot_latent_opt", "oneshot_encoder")


@dataclass
class BenchConfig:
    checkpoint: str = ""
    dataset: str = ""
    out_dir: str = ""
    directions: str | None = None
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHM_ORDER))
    attributes: list[str] = field(default_factory=lambda: list(EDIT_ATTRIBUTES))
    n_images: int = 100
    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    seed: int = 0
    workers: int = 1
    deterministic: bool = True
    grid_images: int = 2
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    latent_opt: LatentOptConfig = field(default_factory=LatentOptConfig)

    def __post_init__(self):
        if self.n_images < 1:
            raise ConfigError(f"n_images must be >= 1, got {self.n_images}")
        unknown = set(self.algorithms) - set(ALGORITHM_ORDER)
        if unknown:
            raise ConfigError(f"unknown algorithms: {sorted(unknown)}")
        unknown = set(self.attributes) - set(EDIT_ATTRIBUTES)
        if unknown:
            raise ConfigError(f"unknown attributes: {sorted(unknown)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if isinstance(self.adaptation, dict):
            self.adaptation = AdaptationConfig(**self.adaptation)
        if isinstance(self.latent_opt, dict):
            self.latent_opt = LatentOptConfig(**self.latent_opt)

    @property
    def effective_workers(self) -> int:
        return 1 if self.deterministic else self.workers

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "BenchConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            return cls.from_dict(json.loads(p.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"missing {what} path")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _project_for(algorithm: str, model: GenerativeAutoencoder, image: np.ndarray,
                 index: int, config: BenchConfig,
                 extractor: PerceptualExtractor) -> np.ndarray:
    if algorithm in ("vanilla", "oneshot_encoder"):
        return model.encode(image)
    if algorithm == "oneshot_random":
        return model.sample_prior(config.seed + index)
    if algorithm in ("latent_opt", "oneshot_latent_opt"):
        cfg = dataclasses.replace(config.latent_opt, init="encoder",
                                  seed=config.seed + index)
        w, _ = project_latent_opt(model, image, cfg, extractor)
        return w
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def _run_variant(algorithm: str, model: GenerativeAutoencoder, image: np.ndarray,
                 index: int, config: BenchConfig, extractor: PerceptualExtractor
                 ) -> tuple[np.ndarray, GenerativeAutoencoder]:
    """Project, optionally adapt; returns (latent, model to decode with)."""
    w = _project_for(algorithm, model, image, index, config, extractor)
    if algorithm in ADAPTED_ALGORITHMS:
        result = adapt_decoder(model, w, image,
                               dataclasses.replace(config.adaptation,
                                                   seed=config.seed + index),
                               extractor)
        return result.fixed_latent, result.adapted_model
    return w, model


# -- record persistence -------------------------------------------------------

def _load_records(path: Path) -> dict[tuple, dict]:
    records = {}
    if path.exists():
        for line in path.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                records[tuple(rec["key"])] = rec
    return records


def _append_record(path: Path, rec: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _score(image: np.ndarray, output: np.ndarray, seed: int) -> dict:
    return {"ssim": ssim(image, output), "psnr": psnr(image, output),
            "swd": swd(image, output, seed)}


def _report_metadata(config: BenchConfig, kind: str, base_hash: str) -> dict:
    return {"kind": kind, "config": config.to_dict(), "code_version": __version__,
            "checkpoint_hash": base_hash, "swd_scale": 1e3}


def _write_report(report: MetricsReport, out: Path, stem: str) -> None:
    (out / f"{stem}.json").write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=1))
    (out / f"{stem}.txt").write_text(report.to_text() + "\n")


# -- reconstruction bench ------------------------------------------------------

def _recon_one(algorithm: str, index: int, image: np.ndarray, model, config,
               extractor) -> tuple[dict, np.ndarray]:
    w, used = _run_variant(algorithm, model, image, index, config, extractor)
    recon = used.decode(w)
    rec = {"key": [algorithm, index], "algorithm": algorithm, "image_index": index,
           **_score(image, recon, config.seed)}
    return rec, recon


_POOL_STATE: dict = {}


def _pool_init(checkpoint: str, config_dict: dict) -> None:
    _POOL_STATE["model"] = load_checkpoint(checkpoint)
    _POOL_STATE["config"] = BenchConfig.from_dict(config_dict)
    _POOL_STATE["extractor"] = PerceptualExtractor.default()


def _pool_recon(args) -> tuple[dict, np.ndarray]:
    algorithm, index, image = args
    return _recon_one(algorithm, index, image, _POOL_STATE["model"],
                      _POOL_STATE["config"], _POOL_STATE["extractor"])


def run_reconstruction_bench(config: BenchConfig) -> MetricsReport:
    """Project + optionally adapt + decode per (algorithm, image); score
    each reconstruction against its input; aggregate per algorithm."""
    ckpt = _require(config.checkpoint, "checkpoint")
    data_dir = _require(config.dataset, "dataset")
    out = Path(config.out_dir or ".")
    (out / "images").mkdir(parents=True, exist_ok=True)

    model = load_checkpoint(ckpt)
    base_hash = model.weight_hash()
    extractor = PerceptualExtractor.default()
    dataset = load_dataset(data_dir, limit=config.n_images)
    if len(dataset) < config.n_images:
        raise ConfigError(f"dataset has {len(dataset)} images, need {config.n_images}")

    records_path = out / "records_recon.jsonl"
    done = _load_records(records_path)
    todo = [(alg, i) for alg in config.algorithms for i in range(config.n_images)
            if (alg, i) not in done]

    if config.effective_workers > 1 and todo:
        jobs = [(alg, i, dataset.images[i]) for alg, i in todo]
        with ProcessPoolExecutor(max_workers=config.effective_workers,
                                 initializer=_pool_init,
                                 initargs=(str(ckpt), config.to_dict())) as pool:
            results = list(pool.map(_pool_recon, jobs))
        for (alg, i), (rec, recon) in zip(todo, results):
            save_image(out / "images" / f"recon_{alg}_{i:04d}.png", recon)
            _append_record(records_path, rec)
            done[(alg, i)] = rec
    else:
        for alg, i in todo:
            if model.weight_hash() != base_hash:
                raise ValidationError("base model mutated between variant runs")
            rec, recon = _recon_one(alg, i, dataset.images[i], model, config, extractor)
            save_image(out / "images" / f"recon_{alg}_{i:04d}.png", recon)
            _append_record(records_path, rec)
            done[(alg, i)] = rec

    wanted = [done[(alg, i)] for alg in config.algorithms
              for i in range(config.n_images)]
    report = aggregate([{k: v for k, v in r.items() if k != "key"} for r in wanted],
                       metadata=_report_metadata(config, "reconstruction", base_hash))
    _write_report(report, out, "report_recon")
    return report


# -- edit bench ----------------------------------------------------------------

def _edit_one(algorithm: str, index: int, image: np.ndarray, model, config,
              extractor, directions: list[AttributeDirection]) -> list[tuple[dict, np.ndarray | None]]:
    w, used = _run_variant(algorithm, model, image, index, config, extractor)
    input_factors = measure_factors(image).as_dict()
    out = []
    for direction in directions:
        for alpha in config.alphas:
            edited = used.decode(edit_latent(w, direction,
                                             alpha * direction.latent_sigma))
            key = [algorithm, index, direction.name, alpha]
            if alpha == 0.0:
                rec = {"key": key, "algorithm": algorithm, "image_index": index,
                       "attribute": direction.name, "alpha": alpha, "scored": False}
            else:
                edited_factors = measure_factors(edited).as_dict()
                oracle = {
                    "identity_error": float(np.mean(
                        [abs(edited_factors[k] - input_factors[k])
                         for k in IDENTITY_FACTORS])),
                    "attribute_change": abs(edited_factors[direction.name]
                                            - input_factors[direction.name]),
                    "edited_factors": edited_factors,
                    "input_factors": input_factors,
                }
                rec = {"key": key, "algorithm": algorithm, "image_index": index,
                       "attribute": direction.name, "alpha": alpha, "scored": True,
                       **_score(image, edited, config.seed), "oracle": oracle}
            out.append((rec, edited if index < config.grid_images else None))
    return out


def _pool_edit(args):
    algorithm, index, image = args
    recs = _edit_one(algorithm, index, image, _POOL_STATE["model"],
                     _POOL_STATE["config"], _POOL_STATE["extractor"],
                     _POOL_STATE["directions"])
    return recs


def _pool_init_edit(checkpoint: str, config_dict: dict, directions_path: str) -> None:
    _pool_init(checkpoint, config_dict)
    cfg = _POOL_STATE["config"]
    dirs = [d for d in load_directions(directions_path) if d.name in cfg.attributes]
    _POOL_STATE["directions"] = dirs


def _grid_tile_path(out: Path, alg: str, index: int, attr: str, alpha: float) -> Path:
    return out / "images" / f"edit_{alg}_{index:04d}_{attr}_a{alpha:+.2f}.png"


def run_edit_bench(config: BenchConfig) -> MetricsReport:
    """Score linear-traversal edits against the input image per
    (algorithm, attribute), with oracle disentanglement scores as a
    supplementary section."""
    ckpt = _require(config.checkpoint, "checkpoint")
    data_dir = _require(config.dataset, "dataset")
    dirs_path = _require(config.directions, "directions file")
    out = Path(config.out_dir or ".")
    (out / "images").mkdir(parents=True, exist_ok=True)

    model = load_checkpoint(ckpt)
    base_hash = model.weight_hash()
    extractor = PerceptualExtractor.default()
    directions = [d for d in load_directions(dirs_path) if d.name in config.attributes]
    if len(directions) < len(config.attributes):
        have = {d.name for d in directions}
        raise ConfigError(f"directions file lacks {sorted(set(config.attributes) - have)}")
    dataset = load_dataset(data_dir, limit=config.n_images)
    if len(dataset) < config.n_images:
        raise ConfigError(f"dataset has {len(dataset)} images, need {config.n_images}")

    records_path = out / "records_edit.jsonl"
    done = _load_records(records_path)

    def complete(alg, i):
        return all((alg, i, d.name, a) in done
                   for d in directions for a in config.alphas)

    todo = [(alg, i) for alg in config.algorithms for i in range(config.n_images)
            if not complete(alg, i)]

    def absorb(alg, i, results):
        for rec, tile in results:
            _, _, attr, alpha = rec["key"]
            if tile is not None:
                save_image(_grid_tile_path(out, alg, i, attr, alpha), tile)
            _append_record(records_path, rec)
            done[tuple(rec["key"])] = rec

    if config.effective_workers > 1 and todo:
        jobs = [(alg, i, dataset.images[i]) for alg, i in todo]
        with ProcessPoolExecutor(max_workers=config.effective_workers,
                                 initializer=_pool_init_edit,
                                 initargs=(str(ckpt), config.to_dict(), str(dirs_path))) as pool:
            for (alg, i), results in zip(todo, pool.map(_pool_edit, jobs)):
                absorb(alg, i, results)
    else:
        for alg, i in todo:
            results = _edit_one(alg, i, dataset.images[i], model, config,
                                extractor, directions)
            absorb(alg, i, results)

    scored = [done[(alg, i, d.name, a)] for alg in config.algorithms
              for i in range(config.n_images) for d in directions
              for a in config.alphas if a != 0.0]
    flat = [{k: v for k, v in r.items() if k not in ("key", "oracle", "scored")}
            for r in scored]
    metadata = _report_metadata(config, "edit", base_hash)
    metadata["oracle_rows"] = _oracle_rows(scored, config)
    report = aggregate(flat, metadata=metadata)
    _write_report(report, out, "report_edit")
    _emit_bench_grids(config, out, directions)
    return report


def _oracle_rows(scored: list[dict], config: BenchConfig) -> list[dict]:
    rows = []
    for alg in config.algorithms:
        for attr in config.attributes:
            recs = [r for r in scored
                    if r["algorithm"] == alg and r["attribute"] == attr]
            if not recs:
                continue
            rows.append({
                "algorithm": alg, "attribute": attr, "n": len(recs),
                "identity_error_mean": float(np.mean(
                    [r["oracle"]["identity_error"] for r in recs])),
                "attribute_change_mean": float(np.mean(
                    [r["oracle"]["attribute_change"] for r in recs])),
            })
    return rows


# -- contact sheets ------------------------------------------------------------

def emit_grids(trajectories: dict, out_dir: str | Path) -> None:
    """Write one labeled contact sheet per (image key, attribute).

    ``trajectories`` maps ``(image_key, attribute)`` to an ordered list
    of ``(algorithm_label, EditTrajectory)``; rows are algorithms,
    columns are the trajectory's alpha values.
    """
    if not trajectories:
        raise ValidationError("no trajectories to render")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (image_key, attribute), rows in trajectories.items():
        sheet = _compose_sheet(rows)
        save_image(out / f"grid_{image_key}_{attribute}.png", sheet)


def _compose_sheet(rows: list[tuple[str, EditTrajectory]]) -> np.ndarray:
    from PIL import Image, ImageDraw

    alphas = rows[0][1].alphas
    tile = rows[0][1].images[0].shape[0]
    label_w, header_h, gap = 72, 14, 2
    width = label_w + len(alphas) * (tile + gap)
    height = header_h + len(rows) * (tile + gap)
    canvas = Image.new("RGB", (width, height), (24, 24, 28))
    draw = ImageDraw.Draw(canvas)
    for j, a in enumerate(alphas):
        draw.text((label_w + j * (tile + gap) + 2, 2), f"a={a:+.1f}",
                  fill=(220, 220, 220))
    for i, (label, traj) in enumerate(rows):
        y = header_h + i * (tile + gap)
        draw.text((2, y + tile // 2 - 5), label[:12], fill=(220, 220, 220))
        for j, img in enumerate(traj.images):
            pil = Image.fromarray((np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8))
            canvas.paste(pil, (label_w + j * (tile + gap), y))
    return np.asarray(canvas).astype(np.float32) / 255.0


def _emit_bench_grids(config: BenchConfig, out: Path,
                      directions: list[AttributeDirection]) -> None:
    """Assemble contact sheets from tiles persisted during the edit bench."""
    trajectories = {}
    for i in range(min(config.grid_images, config.n_images)):
        for d in directions:
            rows = []
            for alg in config.algorithms:
                paths = [_grid_tile_path(out, alg, i, d.name, a) for a in config.alphas]
                if not all(p.exists() for p in paths):
                    continue
                images = [load_image(p) for p in paths]
                rows.append((alg, EditTrajectory(base_latent=np.zeros(1),
                                                 direction=d,
                                                 alphas=list(config.alphas),
                                                 images=images)))
            if rows:
                trajectories[(f"img{i:04d}", d.name)] = rows
    if trajectories:
        emit_grids(trajectories, out / "grids")
