"""Latent projection strategies: encoder pass, iterative optimization,
and random prior sampling.

All three leave the model untouched; latent optimization owns only its
private latent iterate and returns the best-seen one, since plain
last-iterate is noisier and no stopping rule is prescribed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .adaptation import PerceptualExtractor, _total_loss_var
from .errors import DivergenceError, ValidationError
from .model import GenerativeAutoencoder


@dataclass
class LatentOptConfig:
    steps: int = 500
    step_size: float = 5e-3
    seed: int = 0
    init: str = "encoder"        # "encoder" or "prior"
    record_curve: bool = True
    lambda_mse: float = 1.0
    lambda_vgg: float = 1.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.step_size <= 0:
            raise ValidationError(f"step_size must be > 0, got {self.step_size}")
        if self.init not in ("encoder", "prior"):
            raise ValidationError(f"init must be 'encoder' or 'prior', got {self.init!r}")


def project_encoder(model: GenerativeAutoencoder, image: np.ndarray) -> np.ndarray:
    """Project with the pretrained encoder; identical to ``model.encode``."""
    return model.encode(image)


def project_random(model: GenerativeAutoencoder, seed: int) -> np.ndarray:
    """Ignore the image entirely and draw a latent from the prior."""
    return model.sample_prior(seed)


def project_latent_opt(model: GenerativeAutoencoder, image: np.ndarray,
                       config: LatentOptConfig | None = None,
                       extractor: PerceptualExtractor | None = None,
                       progress=None) -> tuple[np.ndarray, list[float]]:
    """Gradient-descend a latent toward ``image`` with the decoder frozen.

    Minimizes the same weighted pixel+perceptual loss used for decoder
    adaptation, but with respect to the latent only. Returns the
    best-seen iterate and the loss curve (length steps+1 when
    ``record_curve``; first and last entries otherwise).
    """
    config = config or LatentOptConfig()
    extractor = extractor or PerceptualExtractor.default()
    image = model._check_image(image)

    if config.init == "encoder":
        w0 = model.encode(image)
    else:
        w0 = model.sample_prior(config.seed)

    target = image.transpose(2, 0, 1)[None].astype(model.dtype)
    target_feats = [t.astype(model.dtype) for t in extractor.features_arrays(image)]

    params = {"w": w0[None].copy()}
    opt = ad.Adam(params, lr=config.step_size)
    curve: list[float] = []
    best_loss = np.inf
    best_w = params["w"].copy()

    def evaluate(tape=None):
        w_var = tape.leaf("w", params["w"]) if tape is not None else ad.Var(params["w"])
        recon = model.decoder.forward(w_var)
        return _total_loss_var(recon, target, extractor, target_feats,
                               config.lambda_mse, config.lambda_vgg)

    for step in range(config.steps):
        tape = ad.ParamTape()
        loss = evaluate(tape)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"latent optimization diverged at step {step}", step)
        curve.append(value)
        if value < best_loss:
            best_loss = value
            best_w = params["w"].copy()
        loss.backward()
        opt.step(tape.grads())
        if progress is not None:
            progress(step + 1, config.steps, value)

    final = evaluate().item()
    if not np.isfinite(final):
        raise DivergenceError(f"latent optimization diverged at step {config.steps}",
                              config.steps)
    curve.append(final)
    if final < best_loss:
        best_w = params["w"].copy()
    if not config.record_curve:
        curve = [curve[0], curve[-1]]
    return best_w[0].copy(), curve
