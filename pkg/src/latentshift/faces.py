"""Procedural face-like images with recoverable ground-truth factors.

Each image is drawn from six factors. Three are "identity" factors
(face hue, face aspect ratio, eye spacing) and three are editable
attributes (age as wrinkle contrast, smile as mouth curvature, hair as
hair-band height). The factor split is what makes "identity preserved
while attribute edited" a measurable statement.

Rendering is deterministic: shapes are rasterized on a 4x supersampled
grid and box-downsampled, so region integrals survive anti-aliasing and
:func:`measure_factors` can invert the rendering analytically. All
measured regions are placed with safety margins so no feature bleeds
into another feature's region for any factor combination in range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ValidationError

SUPERSAMPLE = 4

# palette (RGB in [0,1])
BG_RGB = np.array([0.12, 0.14, 0.17])
HAIR_RGB = np.array([0.26, 0.16, 0.09])
EYE_RGB = np.array([0.06, 0.06, 0.09])
MOUTH_RGB = np.array([0.55, 0.10, 0.10])
FACE_SAT, FACE_VAL = 0.45, 0.85
HUE_SPAN = 0.8  # factor in [0,1] maps to hue angle in [0, 0.8] to avoid wraparound

# geometry (unit coordinates, y increases downward)
FACE_CX, FACE_CY, FACE_R = 0.50, 0.60, 0.30
EYE_Y, EYE_RADIUS = 0.53, 0.030
EYE_DX_MIN, EYE_DX_GAIN = 0.07, 0.425   # half-offset = 0.07 + 0.425*(spacing-0.2)
WRINKLE_YS = (0.40, 0.45)
WRINKLE_TH, WRINKLE_HALFW, WRINKLE_DARKEN = 0.032, 0.12, 0.55
MOUTH_Y, MOUTH_HALFW, MOUTH_TH, MOUTH_BEND = 0.73, 0.12, 0.035, 0.04
HAIR_MIN, HAIR_SPAN = 0.04, 0.16

FACTOR_RANGES = {
    "identity_hue": (0.0, 1.0),
    "identity_aspect": (0.7, 1.3),
    "identity_eye_spacing": (0.2, 0.4),
    "age": (0.0, 1.0),
    "smile": (-1.0, 1.0),
    "hair": (0.0, 1.0),
}
IDENTITY_FACTORS = ("identity_hue", "identity_aspect", "identity_eye_spacing")
ATTRIBUTE_FACTORS = ("age", "smile", "hair")


@dataclass
class FaceFactors:
    identity_hue: float
    identity_aspect: float
    identity_eye_spacing: float
    age: float
    smile: float
    hair: float

    def __post_init__(self):
        for name, (lo, hi) in FACTOR_RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValidationError(f"{name}={v} outside [{lo}, {hi}]")

    def as_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def replace(self, **kwargs) -> "FaceFactors":
        d = self.as_dict()
        d.update(kwargs)
        return FaceFactors(**d)


def sample_factors(seed: int, n: int) -> list[FaceFactors]:
    """Draw ``n`` factor sets uniformly from their ranges, deterministically."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=(n, len(FACTOR_RANGES)))
    out = []
    for row in u:
        vals = {name: lo + (hi - lo) * x
                for x, (name, (lo, hi)) in zip(row, FACTOR_RANGES.items())}
        out.append(FaceFactors(**vals))
    return out


def _hsv_to_rgb(h: float, s: float, v: float) -> np.ndarray:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return np.array([(v, t, p), (q, v, p), (p, v, t),
                     (p, q, v), (t, p, v), (v, p, q)][i])


def _rgb_to_hue(rgb: np.ndarray) -> float:
    r, g, b = float(rgb[0]), float(rgb[1]), float(rgb[2])
    mx, mn = max(r, g, b), min(r, g, b)
    c = mx - mn
    if c < 1e-9:
        return 0.0
    if mx == r:
        h = ((g - b) / c) % 6.0
    elif mx == g:
        h = (b - r) / c + 2.0
    else:
        h = (r - g) / c + 4.0
    return h / 6.0


def face_color(identity_hue: float) -> np.ndarray:
    return _hsv_to_rgb(identity_hue * HUE_SPAN, FACE_SAT, FACE_VAL)


def render(factors: FaceFactors, size: int = 64) -> np.ndarray:
    """Rasterize one face; returns (size, size, 3) float32 in [0, 1]."""
    if size < 16:
        raise ValidationError(f"size must be >= 16, got {size}")
    n = size * SUPERSAMPLE
    grid = (np.arange(n) + 0.5) / n
    x = grid[None, :]
    y = grid[:, None]
    img = np.empty((n, n, 3))
    img[:] = BG_RGB

    rx = FACE_R * np.sqrt(factors.identity_aspect)
    ry = FACE_R / np.sqrt(factors.identity_aspect)
    fc = face_color(factors.identity_hue)
    face = ((x - FACE_CX) / rx) ** 2 + ((y - FACE_CY) / ry) ** 2 <= 1.0
    img[face] = fc

    wrinkle_rgb = fc * (1.0 - WRINKLE_DARKEN * factors.age)
    for yc in WRINKLE_YS:
        mask = (np.abs(y - yc) <= WRINKLE_TH / 2) & (np.abs(x - FACE_CX) <= WRINKLE_HALFW)
        img[mask] = wrinkle_rgb

    hx = EYE_DX_MIN + EYE_DX_GAIN * (factors.identity_eye_spacing - 0.2)
    for sx in (-1.0, 1.0):
        mask = (x - (FACE_CX + sx * hx)) ** 2 + (y - EYE_Y) ** 2 <= EYE_RADIUS ** 2
        img[mask] = EYE_RGB

    # mouth: quadratic Bezier with constant vertical thickness, so the
    # coverage-weighted y-centroid is exactly MOUTH_Y + (2/3)*bend.
    # Vertical coverage is computed analytically per supersample cell:
    # a flat mouth would otherwise quantize identically in every column
    # and the bias would not average out.
    bend = MOUTH_BEND * factors.smile
    t = (x - (FACE_CX - MOUTH_HALFW)) / (2 * MOUTH_HALFW)
    curve_y = MOUTH_Y + 4.0 * bend * t * (1.0 - t)
    s = 1.0 / n
    ycov = np.clip((np.minimum(curve_y + MOUTH_TH / 2, y + s / 2)
                    - np.maximum(curve_y - MOUTH_TH / 2, y - s / 2)) / s, 0.0, 1.0)
    xcov = np.clip((np.minimum(FACE_CX + MOUTH_HALFW, x + s / 2)
                    - np.maximum(FACE_CX - MOUTH_HALFW, x - s / 2)) / s, 0.0, 1.0)
    cov = (ycov * xcov)[:, :, None]
    img = img * (1.0 - cov) + MOUTH_RGB * cov

    hair_bottom = HAIR_MIN + HAIR_SPAN * factors.hair
    img[np.broadcast_to(y <= hair_bottom, (n, n))] = HAIR_RGB

    out = img.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE, 3).mean(axis=(1, 3))
    return out.astype(np.float32)


# measurement regions (unit coords); all verified to stay clear of other
# features for every factor combination in range
_HUE_ROWS, _HUE_COLS_L, _HUE_COLS_R = (0.59, 0.66), (0.32, 0.40), (0.60, 0.68)
_HAIR_ROWS, _HAIR_COLS = (0.0, 0.22), (0.0, 0.10)
_EYE_ROWS, _EYE_COLS = (0.49, 0.57), (0.275, 0.725)
_MOUTH_ROWS, _MOUTH_COLS = (0.64, 0.82), (0.34, 0.66)
_AGE_ROWS, _AGE_COLS = (0.37, 0.48), (0.35, 0.65)
_ASPECT_TOP = 0.22
# interior boxes whose pixels are known to lie inside the face; coverage is
# forced to 1 there so eyes/mouth/wrinkles do not punch holes in the mask
_INTERIOR_BOXES = (((0.47, 0.59), (0.30, 0.70)),
                   ((0.665, 0.80), (0.36, 0.64)),
                   ((0.37, 0.48), (0.35, 0.65)))


def _sl(bounds: tuple[float, float], n: int) -> slice:
    return slice(int(round(bounds[0] * n)), int(round(bounds[1] * n)))


def mouth_bbox(size: int) -> tuple[int, int, int, int]:
    """(row0, row1, col0, col1) half-open pixel bounds containing every mouth."""
    y0 = MOUTH_Y - MOUTH_BEND - MOUTH_TH / 2
    y1 = MOUTH_Y + MOUTH_BEND + MOUTH_TH / 2
    x0, x1 = FACE_CX - MOUTH_HALFW, FACE_CX + MOUTH_HALFW
    return (int(np.floor(y0 * size)) - 1, int(np.ceil(y1 * size)) + 1,
            int(np.floor(x0 * size)) - 1, int(np.ceil(x1 * size)) + 1)


def eye_bbox(size: int) -> tuple[int, int, int, int]:
    """Pixel bounds containing both eyes for every spacing in range."""
    y0, y1 = EYE_Y - EYE_RADIUS, EYE_Y + EYE_RADIUS
    xmax = EYE_DX_MIN + EYE_DX_GAIN * 0.2 + EYE_RADIUS
    return (int(np.floor(y0 * size)) - 1, int(np.ceil(y1 * size)) + 1,
            int(np.floor((FACE_CX - xmax) * size)) - 1,
            int(np.ceil((FACE_CX + xmax) * size)) + 1)


def measure_factors(image: np.ndarray) -> FaceFactors:
    """Analytically recover the six factors from a rendered image.

    On arbitrary (e.g. model-generated) images this degrades gracefully
    to best-effort estimates; every returned value is finite and clipped
    to its factor range.
    """
    img = np.asarray(image, dtype=np.float64)
    h = img.shape[0]
    grid = (np.arange(h) + 0.5) / h

    # face color and hue from two cheek patches (pure interior pixels)
    rows = _sl(_HUE_ROWS, h)
    cheek = np.concatenate([img[rows, _sl(_HUE_COLS_L, h)].reshape(-1, 3),
                            img[rows, _sl(_HUE_COLS_R, h)].reshape(-1, 3)])
    face_rgb = cheek.mean(axis=0)
    hue_angle = _rgb_to_hue(face_rgb)
    if hue_angle > (HUE_SPAN + 1.0) / 2:   # numeric wrap just below 1.0 means "red"
        hue_angle -= 1.0
    hue = float(np.clip(hue_angle / HUE_SPAN, 0.0, 1.0))

    # hair height by integrating hair-likeness down the left edge
    hdir = HAIR_RGB - BG_RGB
    strip = img[_sl(_HAIR_ROWS, h), _sl(_HAIR_COLS, h)].mean(axis=1)
    cov = np.clip((strip - BG_RGB) @ hdir / (hdir @ hdir), 0.0, 1.0)
    hair_height = cov.sum() / h
    hair = float(np.clip((hair_height - HAIR_MIN) / HAIR_SPAN, 0.0, 1.0))

    face_g = max(float(face_rgb[1]), 1e-6)

    # eye spacing from darkness-weighted centroids in the eye band
    band = img[_sl(_EYE_ROWS, h), _sl(_EYE_COLS, h), 1]
    cols = grid[_sl(_EYE_COLS, h)]
    wts = np.clip((face_g - band) / max(face_g - EYE_RGB[1], 1e-6), 0.0, 1.0)
    left = cols < FACE_CX
    centers = []
    for side in (left, ~left):
        wsum = wts[:, side].sum()
        centers.append((wts[:, side] * cols[side]).sum() / max(wsum, 1e-9))
    spacing = centers[1] - centers[0]
    eye_spacing = float(np.clip(0.2 + (spacing - 2 * EYE_DX_MIN) / (2 * EYE_DX_GAIN),
                                0.2, 0.4))

    # smile from the mouth's coverage-weighted y-centroid
    band = img[_sl(_MOUTH_ROWS, h), _sl(_MOUTH_COLS, h), 1]
    rows_y = grid[_sl(_MOUTH_ROWS, h)]
    wts = np.clip((face_g - band) / max(face_g - MOUTH_RGB[1], 1e-6), 0.0, 1.0)
    wsum = wts.sum()
    cy = (wts.sum(axis=1) * rows_y).sum() / max(wsum, 1e-9) if wsum > 1e-9 else MOUTH_Y
    smile = float(np.clip((cy - MOUTH_Y) * 1.5 / MOUTH_BEND, -1.0, 1.0))

    # age from the integrated darkening over the wrinkle band
    band = img[_sl(_AGE_ROWS, h), _sl(_AGE_COLS, h), 1]
    deficit = np.clip(face_g - band, 0.0, None).sum() / (WRINKLE_DARKEN * face_g)
    stroke_area = len(WRINKLE_YS) * (2 * WRINKLE_HALFW) * WRINKLE_TH * h * h
    age = float(np.clip(deficit / stroke_area, 0.0, 1.0))

    # aspect from second moments of face coverage below the hair zone
    sub = img[_sl((_ASPECT_TOP, 1.0), h)]
    fdir = face_rgb - BG_RGB
    covm = np.clip(np.linalg.norm(sub - BG_RGB, axis=2)
                   / max(float(np.linalg.norm(fdir)), 1e-6), 0.0, 1.0)
    ys = grid[_sl((_ASPECT_TOP, 1.0), h)]
    off = int(round(_ASPECT_TOP * h))
    for (rb, cb) in _INTERIOR_BOXES:
        r = slice(max(int(round(rb[0] * h)) - off, 0), max(int(round(rb[1] * h)) - off, 0))
        covm[r, _sl(cb, h)] = 1.0
    total = covm.sum()
    if total > 1e-9:
        mx = (covm.sum(axis=0) * grid).sum() / total
        my = (covm.sum(axis=1) * ys).sum() / total
        vx = (covm.sum(axis=0) * (grid - mx) ** 2).sum() / total
        vy = (covm.sum(axis=1) * (ys - my) ** 2).sum() / total
        aspect = float(np.clip(np.sqrt(vx / max(vy, 1e-12)), 0.7, 1.3))
    else:
        aspect = 1.0

    return FaceFactors(identity_hue=hue, identity_aspect=aspect,
                       identity_eye_spacing=eye_spacing,
                       age=age, smile=smile, hair=hair)


# -- dataset -----------------------------------------------------------------

@dataclass
class SyntheticDataset:
    images: np.ndarray          # (N, H, W, 3) float32 in [0,1]
    factors: list[FaceFactors]
    seed: int

    def __post_init__(self):
        if len(self.images) != len(self.factors):
            raise ValidationError("images and factors must have equal length")

    def __len__(self) -> int:
        return len(self.factors)


def generate_dataset(seed: int, n: int, size: int = 64) -> SyntheticDataset:
    factors = sample_factors(seed, n)
    images = np.stack([render(f, size) for f in factors])
    return SyntheticDataset(images=images, factors=factors, seed=seed)


def save_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> None:
    """Write PNGs plus a factors.json sidecar (array of factor records)."""
    from .pngio import save_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(dataset.images):
        save_image(out / f"face_{i:05d}.png", img)
    (out / "factors.json").write_text(
        json.dumps([f.as_dict() for f in dataset.factors], indent=1))
    (out / "dataset.json").write_text(json.dumps(
        {"seed": dataset.seed, "n": len(dataset), "size": int(dataset.images.shape[1])}))


def load_dataset(in_dir: str | Path, limit: int | None = None) -> SyntheticDataset:
    from .pngio import load_image

    src = Path(in_dir)
    factors_path = src / "factors.json"
    if not factors_path.exists():
        raise ValidationError(f"{src} does not contain factors.json")
    factors = [FaceFactors(**rec) for rec in json.loads(factors_path.read_text())]
    if limit is not None:
        factors = factors[:limit]
    images = np.stack([load_image(src / f"face_{i:05d}.png")
                       for i in range(len(factors))])
    meta_path = src / "dataset.json"
    seed = json.loads(meta_path.read_text())["seed"] if meta_path.exists() else -1
    return SyntheticDataset(images=images, factors=factors, seed=seed)
