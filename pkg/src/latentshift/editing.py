"""Semantic editing by linear traversal along attribute hyperplanes.

A direction is the unit normal of a linear classifier separating
latents of opposite attribute labels; editing adds a multiple of that
normal to a latent. Directions carry the standard deviation of the
training latents along the normal so callers can express step sizes in
latent-sigma units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatchError, ValidationError
from .faces import SyntheticDataset
from .model import GenerativeAutoencoder

# positive-class thresholds on ground-truth factors (balanced under the
# uniform factor prior)
LABEL_THRESHOLDS = {"age": 0.5, "smile": 0.0, "hair": 0.5}
EDIT_ATTRIBUTES = ("age", "smile", "hair")
DEFAULT_ALPHAS = (-3.0, -1.5, 0.0, 1.5, 3.0)   # in latent-sigma units


@dataclass
class AttributeDirection:
    name: str
    normal: np.ndarray          # unit vector, length d_w
    bias: float
    train_accuracy: float
    latent_sigma: float = 1.0   # std of training latents projected on the normal

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        n = float(np.linalg.norm(self.normal))
        if not (abs(n - 1.0) <= 1e-6):
            raise ValidationError(f"direction normal must be unit length, |n|={n}")
        if not (0.0 <= self.train_accuracy <= 1.0):
            raise ValidationError(f"train_accuracy must be in [0,1]")

    def as_dict(self) -> dict:
        return {"name": self.name, "normal": self.normal.tolist(),
                "bias": float(self.bias), "train_accuracy": float(self.train_accuracy),
                "latent_sigma": float(self.latent_sigma), "d_w": len(self.normal)}


def fit_direction(latents, labels, name: str) -> AttributeDirection:
    """Fit an L2-regularized logistic separator and return its unit normal.

    The normal is oriented so positively labeled latents have positive
    mean signed distance.
    """
    x = np.asarray(latents, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if x.ndim != 2:
        raise DimensionMismatchError(f"latents must be 2-D, got shape {x.shape}")
    if len(x) != len(y):
        raise ValidationError("latents and labels must have equal length")
    npos, nneg = int(y.sum()), int((~y).sum())
    if npos < 2 or nneg < 2:
        raise ValidationError(
            f"need at least 2 samples per class, got {npos} positive / {nneg} negative")

    t = np.where(y, 1.0, -1.0)
    d = x.shape[1]
    reg = 1e-4

    def objective(theta):
        wvec, b = theta[:d], theta[d]
        m = t * (x @ wvec + b)
        # log(1 + exp(-m)) stably, plus L2 on the weights
        loss = np.logaddexp(0.0, -m).mean() + 0.5 * reg * wvec @ wvec
        s = -t / (1.0 + np.exp(m))
        gw = (x * s[:, None]).mean(axis=0) + reg * wvec
        gb = s.mean()
        return loss, np.concatenate([gw, [gb]])

    res = minimize(objective, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 500})
    wvec, b = res.x[:d], float(res.x[d])
    norm = float(np.linalg.norm(wvec))
    if norm < 1e-12:
        raise ValidationError("degenerate fit: zero weight vector")
    normal = wvec / norm
    bias = b / norm
    signed = x @ normal + bias
    if signed[y].mean() < signed[~y].mean():
        normal, bias, signed = -normal, -bias, -signed
    accuracy = float(((signed > 0) == y).mean())
    sigma = float((x @ normal).std())
    return AttributeDirection(name=name, normal=normal, bias=bias,
                              train_accuracy=accuracy, latent_sigma=max(sigma, 1e-12))


def edit_latent(w: np.ndarray, direction: AttributeDirection, alpha: float) -> np.ndarray:
    """Return ``w + alpha * normal`` without touching the input latent."""
    w = np.asarray(w)
    if w.shape != direction.normal.shape:
        raise DimensionMismatchError(
            f"latent length {w.shape} does not match direction {direction.normal.shape}")
    if not np.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha}")
    return w + np.asarray(alpha * direction.normal, dtype=w.dtype)


@dataclass
class EditTrajectory:
    base_latent: np.ndarray
    direction: AttributeDirection
    alphas: list[float]
    images: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.images and len(self.images) != len(self.alphas):
            raise ValidationError("one image per alpha required")


def make_trajectory(model: GenerativeAutoencoder, w: np.ndarray,
                    direction: AttributeDirection, alphas) -> EditTrajectory:
    """Decode the latent at each traversal step (alphas in raw latent units)."""
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValidationError("alphas must be nonempty")
    images = [model.decode(edit_latent(w, direction, a)) for a in alphas]
    return EditTrajectory(base_latent=np.asarray(w).copy(), direction=direction,
                          alphas=alphas, images=images)


def label_factors(factors) -> dict[str, bool]:
    return {attr: bool(getattr(factors, attr) > thr)
            for attr, thr in LABEL_THRESHOLDS.items()}


def fit_attribute_directions(model: GenerativeAutoencoder, dataset: SyntheticDataset,
                             attributes=EDIT_ATTRIBUTES) -> list[AttributeDirection]:
    """Encode the dataset and fit one direction per attribute from
    ground-truth factor labels."""
    latents = np.stack([model.encode(img) for img in dataset.images])
    out = []
    for attr in attributes:
        labels = [getattr(f, attr) > LABEL_THRESHOLDS[attr] for f in dataset.factors]
        out.append(fit_direction(latents, labels, attr))
    return out


def save_directions(path: str | Path, directions: list[AttributeDirection]) -> None:
    Path(path).write_text(json.dumps([d.as_dict() for d in directions], indent=1))


def load_directions(path: str | Path) -> list[AttributeDirection]:
    records = json.loads(Path(path).read_text())
    out = []
    for rec in records:
        out.append(AttributeDirection(
            name=rec["name"], normal=np.asarray(rec["normal"], dtype=np.float64),
            bias=float(rec["bias"]), train_accuracy=float(rec["train_accuracy"]),
            latent_sigma=float(rec.get("latent_sigma", 1.0))))
    return out
