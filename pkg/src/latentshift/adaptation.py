"""One-shot decoder fine-tuning toward a single target image.

The decoder of a cloned model is optimized to reproduce one image while
the projected latent stays fixed, using a weighted sum of pixel MSE and
a feature-space perceptual loss with smooth-L1 branch structure. The
feature extractor is a small fixed convolutional stack with four taps
at decreasing resolution; it is seeded, never trained, and pluggable so
a pretrained backbone could be substituted for real-photo runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import DimensionMismatchError, DivergenceError, ValidationError
from .model import GenerativeAutoencoder, _Net, _conv_init, _LRELU_SLOPE

_SQRT_EPS = 1e-24   # keeps the norm differentiable at exactly zero distance


class PerceptualExtractor(_Net):
    """Fixed random 8-layer conv stack with taps after layers 1, 2, 5, 7.

    Tap depths mirror the shallow-to-mid taps used for perceptual
    feature matching: two at full resolution, one at quarter, one at
    eighth. Weights are frozen; the hash of the weight map never
    changes across calls.
    """

    scope = "extractor"
    channels = (8, 12, 16, 16, 24, 24, 32, 32)
    strides = (1, 1, 2, 1, 2, 1, 2, 1)
    taps = (1, 2, 5, 7)   # 1-indexed layer numbers

    def __init__(self, seed: int = 0):
        super().__init__()
        self.seed = seed
        rng = np.random.default_rng(seed)
        cin = 3
        for i, (cout, _) in enumerate(zip(self.channels, self.strides)):
            self.params[f"conv{i}/w"] = _conv_init(rng, cout, cin, 3)
            self.params[f"conv{i}/b"] = np.zeros(cout, dtype=np.float32)
            cin = cout

    @classmethod
    @lru_cache(maxsize=4)
    def default(cls, seed: int = 0) -> "PerceptualExtractor":
        return cls(seed)

    def features(self, x: Var) -> list[Var]:
        """Tap activations for (N, 3, H, W) input in [0, 1]."""
        h = x * 2.0 - 1.0
        out = []
        for i, stride in enumerate(self.strides):
            h = ad.conv2d(h, self._v(None, f"conv{i}/w"), self._v(None, f"conv{i}/b"),
                          stride=stride, pad=1)
            h = ad.leaky_relu(h, _LRELU_SLOPE)
            if (i + 1) in self.taps:
                out.append(h)
        return out

    def features_arrays(self, image_hwc: np.ndarray) -> list[np.ndarray]:
        """Non-differentiable tap features for an (H, W, 3) image."""
        x = np.asarray(image_hwc).transpose(2, 0, 1)[None]
        return [t.data for t in self.features(Var(x))]


def smooth_l1(r: float) -> float:
    """Piecewise smooth-L1 value: 0.5*r^2 below 1, r - 0.5 above."""
    r = float(r)
    return 0.5 * r * r if r < 1.0 else r - 0.5


def _smooth_l1_var(r: Var) -> Var:
    # both branches meet at r=1 with value 0.5 and slope 1
    if float(r.data) < 1.0:
        return r * r * 0.5
    return r - 0.5


def _normalized_distance(fa: Var, fb_const: np.ndarray) -> Var:
    """RMS feature distance: the tensor L2 norm over sqrt(element count).

    Normalizing by layer size keeps the smooth-L1 quadratic branch
    reachable and makes differently sized taps comparable.
    """
    d = fa - Var(fb_const)
    return ad.sqrt(ad.vmean(d * d) + _SQRT_EPS)


def perceptual_terms(extractor: PerceptualExtractor, recon: Var,
                     target_feats: list[np.ndarray]) -> Var:
    """Differentiable sum of smooth-L1 terms over the four taps."""
    feats = extractor.features(recon)
    total = None
    for fa, fb in zip(feats, target_feats):
        z = _smooth_l1_var(_normalized_distance(fa, fb))
        total = z if total is None else total + z
    return total


def feature_distances(extractor: PerceptualExtractor, img_a: np.ndarray,
                      img_b: np.ndarray) -> list[float]:
    """Per-tap normalized feature distances r_j between two images."""
    img_a, img_b = _check_images(img_a, img_b)
    fa = extractor.features_arrays(img_a)
    fb = extractor.features_arrays(img_b)
    return [float(np.sqrt(np.mean((x - y) ** 2))) for x, y in zip(fa, fb)]


def _check_images(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 3 or a.shape[2] != 3:
        raise DimensionMismatchError(f"image shapes differ or invalid: {a.shape} vs {b.shape}")
    return a, b


def perceptual_loss(extractor: PerceptualExtractor, img_a: np.ndarray,
                    img_b: np.ndarray) -> float:
    """Sum of smooth-L1 terms over normalized per-tap feature distances."""
    return float(sum(smooth_l1(r) for r in feature_distances(extractor, img_a, img_b)))


def total_loss(image: np.ndarray, recon: np.ndarray,
               extractor: PerceptualExtractor | None = None,
               lambda_mse: float = 1.0, lambda_vgg: float = 1.0) -> float:
    """Weighted pixel MSE plus perceptual loss between an image and its
    reconstruction. Zero exactly when the images are identical."""
    image, recon = _check_images(image, recon)
    if lambda_mse < 0 or lambda_vgg < 0:
        raise ValidationError("loss weights must be non-negative")
    extractor = extractor or PerceptualExtractor.default()
    mse = float(np.mean((np.asarray(image, np.float64) - np.asarray(recon, np.float64)) ** 2))
    return lambda_mse * mse + lambda_vgg * perceptual_loss(extractor, image, recon)


def _total_loss_var(recon: Var, target_nchw: np.ndarray,
                    extractor: PerceptualExtractor, target_feats: list[np.ndarray],
                    lambda_mse: float, lambda_vgg: float) -> Var:
    d = recon - Var(target_nchw)
    loss = ad.vmean(d * d) * lambda_mse
    if lambda_vgg != 0.0:
        loss = loss + perceptual_terms(extractor, recon, target_feats) * lambda_vgg
    return loss


@dataclass
class AdaptationConfig:
    lambda_mse: float = 1.0
    lambda_vgg: float = 1.0
    steps: int = 200
    step_size: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.lambda_mse < 0 or self.lambda_vgg < 0:
            raise ValidationError("lambdas must be >= 0")
        if self.lambda_mse == 0 and self.lambda_vgg == 0:
            raise ValidationError("at least one lambda must be positive")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.step_size <= 0:
            raise ValidationError(f"step_size must be > 0, got {self.step_size}")


@dataclass
class AdaptationResult:
    adapted_model: GenerativeAutoencoder
    fixed_latent: np.ndarray
    loss_curve: list[float]
    config: AdaptationConfig


def adapt_decoder(model: GenerativeAutoencoder, w: np.ndarray, image: np.ndarray,
                  config: AdaptationConfig | None = None,
                  extractor: PerceptualExtractor | None = None,
                  progress=None) -> AdaptationResult:
    """Fine-tune a cloned decoder toward ``image`` with ``w`` held fixed.

    Only the clone's decoder weights move; the source model, its
    encoder, the latent and the extractor are untouched. ``progress``
    (optional) is called as ``progress(step, steps, loss)`` after each
    step, which the service uses for job reporting.
    """
    config = config or AdaptationConfig()
    extractor = extractor or PerceptualExtractor.default()
    w_fixed = model._check_latent(w).copy()
    image = model._check_image(image)

    adapted = model.clone()
    adapted.mode = "eval"
    target = image.transpose(2, 0, 1)[None].astype(adapted.dtype)
    target_feats = [t.astype(adapted.dtype) for t in extractor.features_arrays(image)]

    params = {f"decoder/{k}": v for k, v in adapted.decoder.params.items()}
    opt = ad.Adam(params, lr=config.step_size)
    w_in = Var(w_fixed[None])

    curve: list[float] = []
    for step in range(config.steps):
        tape = ad.ParamTape()
        recon = adapted.decoder.forward(w_in, tape)
        loss = _total_loss_var(recon, target, extractor, target_feats,
                               config.lambda_mse, config.lambda_vgg)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"adaptation loss became non-finite at step {step}", step)
        curve.append(value)
        loss.backward()
        opt.step(tape.grads())
        if progress is not None:
            progress(step + 1, config.steps, value)

    final = _total_loss_var(adapted.decoder.forward(w_in), target, extractor,
                            target_feats, config.lambda_mse, config.lambda_vgg).item()
    if not np.isfinite(final):
        raise DivergenceError(
            f"adaptation loss became non-finite at step {config.steps}", config.steps)
    curve.append(final)
    return AdaptationResult(adapted_model=adapted, fixed_latent=w_fixed,
                            loss_curve=curve, config=config)
