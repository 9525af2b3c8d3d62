"""Command-line interface.

Subcommands cover the full pipeline: dataset generation, toy training,
direction fitting, single-image invert/adapt/edit, the two benchmark
protocols, report re-aggregation, and the HTTP service.

Exit codes: 0 success, 2 configuration error, 3 runtime or divergence
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adaptation import AdaptationConfig, adapt_decoder
from .bench import BenchConfig, run_edit_bench, run_reconstruction_bench
from .checkpoint import load_checkpoint, save_checkpoint
from .editing import edit_latent, fit_attribute_directions, load_directions, save_directions
from .errors import ConfigError, LatentShiftError
from .faces import generate_dataset, load_dataset, save_dataset
from .inversion import LatentOptConfig, project_latent_opt
from .metrics import aggregate
from .pngio import load_image, save_image
from .training import TrainConfig, train_toy


def _save_latent(path: Path, w: np.ndarray, method: str, seed: int | None) -> None:
    path.write_text(json.dumps({"w": [float(x) for x in w], "d_w": len(w),
                                "method": method, "seed": seed}))


def _load_latent(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"latent file not found: {p}")
    return np.asarray(json.loads(p.read_text())["w"], dtype=np.float32)


def _load_ckpt(path: str):
    if not path or not Path(path).exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def _user_config(cls, kwargs: dict):
    """Build a config dataclass from user-supplied values; bad keys or
    values are configuration errors (exit code 2), not runtime errors."""
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {cls.__name__} field: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad {cls.__name__} value: {exc}") from exc


def cmd_make_dataset(args) -> int:
    ds = generate_dataset(seed=args.seed, n=args.n, size=args.size)
    save_dataset(ds, args.out)
    print(f"wrote {args.n} images + factors.json to {args.out}")
    return 0


def cmd_train_toy(args) -> int:
    if not Path(args.dataset).exists():
        raise ConfigError(f"dataset not found: {args.dataset}")
    ds = load_dataset(args.dataset)
    kwargs = {}
    if args.config:
        if not Path(args.config).exists():
            raise ConfigError(f"config file not found: {args.config}")
        kwargs = json.loads(Path(args.config).read_text())
    if args.epochs is not None:
        kwargs["epochs"] = args.epochs
    config = _user_config(TrainConfig, kwargs)
    model = train_toy(ds, config, seed=args.seed)
    save_checkpoint(model, args.out)
    last = model.metadata["training_log"][-1]
    print(f"saved checkpoint to {args.out} "
          f"(holdout ssim {last.get('holdout_ssim', float('nan')):.3f})")
    return 0


def cmd_fit_directions(args) -> int:
    model = _load_ckpt(args.checkpoint)
    if not Path(args.dataset).exists():
        raise ConfigError(f"dataset not found: {args.dataset}")
    ds = load_dataset(args.dataset, limit=args.limit)
    directions = fit_attribute_directions(model, ds)
    save_directions(args.out, directions)
    for d in directions:
        print(f"{d.name}: train_accuracy={d.train_accuracy:.3f} sigma={d.latent_sigma:.3f}")
    return 0


def cmd_invert(args) -> int:
    model = _load_ckpt(args.checkpoint)
    if args.method == "random":
        w = model.sample_prior(args.seed)
    else:
        if not args.image or not Path(args.image).exists():
            raise ConfigError(f"image not found: {args.image}")
        image = load_image(args.image, size=model.image_size)
        if args.method == "encoder":
            w = model.encode(image)
        else:
            cfg = _user_config(LatentOptConfig, {"steps": args.steps, "seed": args.seed})
            w, curve = project_latent_opt(model, image, cfg)
            print(f"latent-opt loss {curve[0]:.4f} -> {min(curve):.4f}")
    _save_latent(Path(args.out), w, args.method, args.seed)
    print(f"wrote latent ({len(w)} dims) to {args.out}")
    return 0


def cmd_adapt(args) -> int:
    model = _load_ckpt(args.checkpoint)
    if not args.image or not Path(args.image).exists():
        raise ConfigError(f"image not found: {args.image}")
    image = load_image(args.image, size=model.image_size)
    w = _load_latent(args.latent) if args.latent else model.encode(image)
    config = _user_config(AdaptationConfig, {
        "steps": args.steps, "step_size": args.step_size,
        "lambda_mse": args.lambda_mse, "lambda_vgg": args.lambda_vgg,
        "seed": args.seed})
    result = adapt_decoder(model, w, image, config)
    save_checkpoint(result.adapted_model, args.out)
    if args.curve_out:
        Path(args.curve_out).write_text(json.dumps(result.loss_curve))
    print(f"adapted: loss {result.loss_curve[0]:.4f} -> {result.loss_curve[-1]:.4f}; "
          f"saved {args.out}")
    return 0


def cmd_edit(args) -> int:
    model = _load_ckpt(args.checkpoint)
    w = _load_latent(args.latent)
    if not Path(args.directions).exists():
        raise ConfigError(f"directions file not found: {args.directions}")
    directions = {d.name: d for d in load_directions(args.directions)}
    if args.attribute not in directions:
        raise ConfigError(f"no direction for attribute {args.attribute!r}")
    d = directions[args.attribute]
    alpha = args.alpha if args.raw_alpha else args.alpha * d.latent_sigma
    out_img = model.decode(edit_latent(w, d, alpha))
    save_image(args.out, out_img)
    print(f"wrote edit ({args.attribute}, alpha={args.alpha}) to {args.out}")
    return 0


def _bench_config(args) -> BenchConfig:
    if args.config:
        config = BenchConfig.from_json_file(args.config)
    else:
        config = BenchConfig()
    for name in ("checkpoint", "dataset", "out", "directions", "seed", "workers",
                 "n_images"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(config, name if name != "out" else "out_dir", val)
    if args.deterministic:
        config.deterministic = True
        config.workers = 1
    return config


def cmd_bench_recon(args) -> int:
    report = run_reconstruction_bench(_bench_config(args))
    print(report.to_text())
    return 0


def cmd_bench_edit(args) -> int:
    report = run_edit_bench(_bench_config(args))
    print(report.to_text())
    return 0


def cmd_report(args) -> int:
    src = Path(args.records)
    if not src.exists():
        raise ConfigError(f"records dir not found: {src}")
    stem = "records_edit.jsonl" if args.kind == "edit" else "records_recon.jsonl"
    path = src / stem
    if not path.exists():
        raise ConfigError(f"{path} not found")
    records = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    records = [{k: v for k, v in r.items() if k not in ("key", "oracle", "scored")}
               for r in records if r.get("scored", True)]
    report = aggregate(records, metadata={"rebuilt_from": str(path),
                                          "code_version": __version__})
    print(report.to_text())
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    serve(checkpoint=args.checkpoint, directions=args.directions,
          host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latentshift",
                                description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("make-dataset", help="generate a synthetic face dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=64)
    sp.set_defaults(func=cmd_make_dataset)

    sp = sub.add_parser("train-toy", help="train the toy autoencoder")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--config", help="JSON file with TrainConfig fields")
    sp.set_defaults(func=cmd_train_toy)

    sp = sub.add_parser("fit-directions", help="fit attribute hyperplanes")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--limit", type=int, default=500)
    sp.set_defaults(func=cmd_fit_directions)

    sp = sub.add_parser("invert", help="project an image to latent space")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--image")
    sp.add_argument("--method", choices=["encoder", "latent_opt", "random"],
                    default="encoder")
    sp.add_argument("--steps", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("adapt", help="one-shot fine-tune the decoder to an image")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--latent", help="latent JSON from invert; default: encoder projection")
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--step-size", type=float, default=1e-4)
    sp.add_argument("--lambda-mse", type=float, default=1.0)
    sp.add_argument("--lambda-vgg", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--curve-out")
    sp.set_defaults(func=cmd_adapt)

    sp = sub.add_parser("edit", help="decode a latent traversal step")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--latent", required=True)
    sp.add_argument("--directions", required=True)
    sp.add_argument("--attribute", required=True)
    sp.add_argument("--alpha", type=float, required=True,
                    help="step in latent-sigma units (see --raw-alpha)")
    sp.add_argument("--raw-alpha", action="store_true",
                    help="interpret --alpha in raw latent units")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_edit)

    for name, fn in (("bench-recon", cmd_bench_recon), ("bench-edit", cmd_bench_edit)):
        sp = sub.add_parser(name, help=f"run the {name.split('-')[1]} benchmark")
        sp.add_argument("--config", help="JSON file with BenchConfig fields")
        sp.add_argument("--checkpoint")
        sp.add_argument("--dataset")
        sp.add_argument("--directions")
        sp.add_argument("--out")
        sp.add_argument("--n-images", dest="n_images", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--deterministic", action="store_true")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("report", help="re-aggregate persisted bench records")
    sp.add_argument("--records", required=True, help="bench output directory")
    sp.add_argument("--kind", choices=["recon", "edit"], default="recon")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("serve", help="run the HTTP editing service")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--directions")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LatentShiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
