"""Desk-scale trainer for the toy autoencoder.

Losses follow the pretrained model's training principle in kind, not in
scale: a non-saturating adversarial loss on prior samples, a latent
reciprocity term pulling ``E(D(w))`` back to ``w``, and a pixel MSE
term on real reconstructions at full weight for the first few warm-up
epochs, then at a reduced floor (adversarial + reciprocity alone do not
anchor the encoder on real images at this scale). Reciprocity targets
are detached so the mapping network cannot chase its own tail.

Fully deterministic for a fixed seed: one generator drives shuffling,
noise draws and weight init, and no nondeterministic kernels exist in
the numpy path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import ValidationError
from .faces import SyntheticDataset
from .metrics import ssim
from .model import Discriminator, GenerativeAutoencoder, ModelConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    d_w: int = 128
    lr: float = 2e-3
    disc_lr: float = 2e-3
    # auxiliary weights are small so the pixel anchor stays dominant even
    # once reconstruction error gets tiny; larger values let adversarial
    # wobble stall held-out quality
    adv_weight: float = 0.002
    recip_weight: float = 0.01
    pixel_weight: float = 1.0
    pixel_warmup_epochs: int = 5
    # pixel-term weight after the warm-up epochs; a hard cut-off leaves
    # the encoder unanchored on real images at this scale
    pixel_floor: float = 1.0
    holdout_fraction: float = 0.05
    # step-decay the learning rates late in training to settle the
    # adversarial wobble
    lr_decay_at: float = 0.6
    lr_decay_factor: float = 0.3

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


def train_toy(dataset: SyntheticDataset, config: TrainConfig | None = None,
              seed: int = 0) -> GenerativeAutoencoder:
    """Train a fresh model on the dataset; returns it in eval mode.

    The per-epoch loss components and held-out reconstruction quality
    are logged and stored in ``model.metadata['training_log']``.
    """
    config = config or TrainConfig()
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    images = np.asarray(dataset.images, dtype=np.float32)
    size = images.shape[1]
    mconfig = ModelConfig(d_w=config.d_w, image_size=size)

    rng = np.random.default_rng(seed)
    model = GenerativeAutoencoder.build(mconfig, seed=seed)
    model.mode = "train"
    disc = Discriminator(mconfig, rng)

    n_hold = max(1, int(len(dataset) * config.holdout_fraction)) if len(dataset) > 1 else 0
    order = rng.permutation(len(dataset))
    hold_idx, train_idx = order[:n_hold], order[n_hold:]
    if len(train_idx) == 0:
        train_idx = order
    train_01 = images[train_idx].transpose(0, 3, 1, 2)
    hold_imgs = images[hold_idx]

    g_params = {}
    for net in (model.encoder, model.mapping, model.decoder):
        for k, v in net.params.items():
            g_params[f"{net.scope}/{k}"] = v
    d_params = {f"disc/{k}": v for k, v in disc.params.items()}
    g_opt = ad.Adam(g_params, lr=config.lr, betas=(0.5, 0.999))
    d_opt = ad.Adam(d_params, lr=config.disc_lr, betas=(0.5, 0.999))

    d_w = config.d_w
    training_log = []
    decay_epoch = int(config.epochs * config.lr_decay_at)
    for epoch in range(config.epochs):
        if epoch == decay_epoch and config.lr_decay_factor != 1.0:
            g_opt.lr = config.lr * config.lr_decay_factor
            d_opt.lr = config.disc_lr * config.lr_decay_factor
        perm = rng.permutation(len(train_01))
        sums = {"d": 0.0, "adv": 0.0, "recip": 0.0, "pixel": 0.0, "total": 0.0}
        nb = 0
        pixel_w = (config.pixel_weight if epoch < config.pixel_warmup_epochs
                   else config.pixel_floor * config.pixel_weight)
        for start in range(0, len(perm) - config.batch_size + 1, config.batch_size):
            idx = perm[start:start + config.batch_size]
            real01 = train_01[idx]
            real_pm = real01 * 2.0 - 1.0
            bs = len(idx)

            # discriminator step: real up, prior samples down
            z = rng.standard_normal((bs, d_w)).astype(np.float32)
            w_fake = model.mapping.forward(Var(z))
            fake01 = model.decoder.forward(Var(w_fake.data))
            tape_d = ad.ParamTape()
            d_real = disc.forward(Var(real_pm), tape_d)
            d_fake = disc.forward(Var(fake01.data * 2.0 - 1.0), tape_d)
            d_loss = ad.vmean(ad.softplus(-d_real)) + ad.vmean(ad.softplus(d_fake))
            d_loss.backward()
            d_opt.step(tape_d.grads())

            # generator / autoencoder step
            tape_g = ad.ParamTape()
            z2 = rng.standard_normal((bs, d_w)).astype(np.float32)
            w2 = model.mapping.forward(Var(z2), tape_g)
            fake2 = model.decoder.forward(w2, tape_g)
            adv = ad.vmean(ad.softplus(-disc.forward(fake2 * 2.0 - 1.0)))
            w_back = model.encoder.forward(fake2 * 2.0 - 1.0, tape_g)
            recip_d = w_back - Var(w2.data)    # detached target
            recip = ad.vmean(recip_d * recip_d)
            g_loss = adv * config.adv_weight + recip * config.recip_weight
            pix_val = 0.0
            if pixel_w > 0.0:
                w_enc = model.encoder.forward(Var(real_pm), tape_g)
                recon = model.decoder.forward(w_enc, tape_g)
                diff = recon - Var(real01)
                pix = ad.vmean(diff * diff)
                g_loss = g_loss + pix * pixel_w
                pix_val = pix.item()
            g_loss.backward()
            g_opt.step(tape_g.grads())

            sums["d"] += d_loss.item()
            sums["adv"] += adv.item()
            sums["recip"] += recip.item()
            sums["pixel"] += pix_val
            sums["total"] += g_loss.item()
            nb += 1

        entry = {"epoch": epoch, **{k: v / max(nb, 1) for k, v in sums.items()}}
        if len(hold_imgs):
            recon_mse, recon_ssim = _holdout_eval(model, hold_imgs)
            entry["holdout_mse"] = recon_mse
            entry["holdout_ssim"] = recon_ssim
        training_log.append(entry)
        log.info("epoch %d: %s", epoch,
                 " ".join(f"{k}={v:.4f}" for k, v in entry.items() if k != "epoch"))

    model.mode = "eval"
    model.metadata.update({
        "training_seed": seed,
        "dataset": {"n": len(dataset), "seed": dataset.seed, "size": size},
        "train_config": asdict(config),
        "training_log": training_log,
    })
    return model


def _holdout_eval(model: GenerativeAutoencoder, images: np.ndarray) -> tuple[float, float]:
    mses, ssims = [], []
    for img in images:
        recon = model.decode(model.encode(img))
        mses.append(float(np.mean((recon - img) ** 2)))
        ssims.append(ssim(img, recon))
    return float(np.mean(mses)), float(np.mean(ssims))
