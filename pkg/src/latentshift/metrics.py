"""Full-reference image quality metrics and report aggregation.

Provides SSIM, PSNR and a patch-based sliced Wasserstein distance, plus
oracle factor scores on synthetic faces, and mean/std aggregation into
benchmark report rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from . import faces

ALGORITHM_ORDER = ("vanilla", "latent_opt", "oneshot_random",
                   "oneshot_latent_opt", "oneshot_encoder")
ATTRIBUTE_ORDER = ("age", "hair", "smile")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03

SWD_PATCH = 7
SWD_STRIDE = 4
SWD_LEVELS = 2
SWD_DIRECTIONS = 128
SWD_EPS = 1e-8
SWD_SCALE = 1e3   # cosmetic factor so toy values land in the hundreds-to-thousands range


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _gaussian_window(k: int, sigma: float) -> np.ndarray:
    r = np.arange(k) - (k - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _windowed(channel: np.ndarray, win: np.ndarray) -> np.ndarray:
    k = win.shape[0]
    view = np.lib.stride_tricks.sliding_window_view(channel, (k, k))
    return np.tensordot(view, win, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM over a Gaussian window, averaged across channels.

    Uses an 11x11 window (sigma 1.5) with K1=0.01, K2=0.03 and dynamic
    range 1.0; for images smaller than 11 pixels the window shrinks to
    the largest odd size that fits.
    """
    a, b = _check_pair(a, b)
    h, w = a.shape[:2]
    k = min(SSIM_WINDOW, h, w)
    if k % 2 == 0:
        k -= 1
    win = _gaussian_window(k, SSIM_SIGMA)
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = _windowed(x, win)
        my = _windowed(y, win)
        mxx = _windowed(x * x, win)
        myy = _windowed(y * y, win)
        mxy = _windowed(x * y, win)
        vx = mxx - mx * mx
        vy = myy - my * my
        cxy = mxy - mx * my
        smap = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        vals.append(smap.mean())
    return float(np.mean(vals))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit dynamic range.

    Identical images return ``math.inf``.
    """
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _box_downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    h2, w2 = (h // 2) * 2, (w // 2) * 2
    x = img[:h2, :w2]
    return x.reshape(h2 // 2, 2, w2 // 2, 2, img.shape[2]).mean(axis=(1, 3))


def _patches(img: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, (SWD_PATCH, SWD_PATCH, 3))
    sub = view[::SWD_STRIDE, ::SWD_STRIDE, 0]
    return sub.reshape(-1, SWD_PATCH * SWD_PATCH * 3)


def _standardize(p: np.ndarray) -> np.ndarray:
    mu = p.mean(axis=1, keepdims=True)
    sd = p.std(axis=1, keepdims=True)
    return (p - mu) / (sd + SWD_EPS)


def swd(a: np.ndarray, b: np.ndarray, seed: int) -> float:
    """Sliced Wasserstein distance between the images' patch sets.

    Procedure (pinned so an independent implementation can reproduce
    it): extract all 7x7x3 patches at stride 4 at two pyramid levels
    (full resolution and one 2x box-downsample; a level smaller than one
    patch is skipped); standardize each patch to zero mean / unit
    variance (eps 1e-8); project onto 128 random unit directions drawn
    sequentially per level from ``default_rng(seed)``; take the mean
    absolute difference of sorted projections per direction (the exact
    1-D Wasserstein-1 distance for equal counts); average over
    directions and levels and scale by 1e3.
    """
    a, b = _check_pair(a, b)
    rng = np.random.default_rng(seed)
    level_a, level_b = a, b
    dists = []
    for _ in range(SWD_LEVELS):
        if min(level_a.shape[0], level_a.shape[1]) >= SWD_PATCH:
            pa = _standardize(_patches(level_a))
            pb = _standardize(_patches(level_b))
            dirs = rng.standard_normal((pa.shape[1], SWD_DIRECTIONS))
            dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
            proj_a = np.sort(pa @ dirs, axis=0)
            proj_b = np.sort(pb @ dirs, axis=0)
            dists.append(float(np.mean(np.abs(proj_a - proj_b))))
        level_a = _box_downsample(level_a)
        level_b = _box_downsample(level_b)
    if not dists:
        raise ValidationError(
            f"images of shape {a.shape} are too small for one {SWD_PATCH}x{SWD_PATCH} patch")
    return float(np.mean(dists) * SWD_SCALE)


def factor_scores(input_img: np.ndarray, output_img: np.ndarray) -> dict:
    """Oracle comparison of two face images via recovered factors.

    Returns ``identity_error`` (mean absolute difference over the three
    identity factors) and per-attribute absolute differences.
    """
    fa = faces.measure_factors(input_img)
    fb = faces.measure_factors(output_img)
    ident = [abs(getattr(fa, k) - getattr(fb, k)) for k in faces.IDENTITY_FACTORS]
    return {
        "identity_error": float(np.mean(ident)),
        "attribute_errors": {k: abs(getattr(fa, k) - getattr(fb, k))
                             for k in faces.ATTRIBUTE_FACTORS},
    }


# -- aggregation -------------------------------------------------------------

@dataclass
class MetricsReport:
    """Aggregated mean/std rows per (algorithm, attribute) group."""

    rows: list[dict]
    per_image: list[dict] | None = None
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return _jsonable({"rows": self.rows, "metadata": self.metadata,
                          "per_image": self.per_image})

    def to_text(self) -> str:
        has_attr = any(r.get("attribute") for r in self.rows)
        headers = (["Type"] if has_attr else []) + \
            ["Algorithm", "SSIM ↑", "PSNR ↑", "SWD ↓"]
        lines = []
        for r in self.rows:
            cells = [r.get("attribute") or ""] if has_attr else []
            cells.append(r["algorithm"])
            for m in ("ssim", "psnr", "swd"):
                cells.append(f"{_fmt(r[m + '_mean'])} / {_fmt(r[m + '_std'])}")
            lines.append(cells)
        widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
                  for i, h in enumerate(headers)]
        def fmt_row(cells):
            return " | ".join(c.ljust(w) for c, w in zip(cells, widths))
        sep = "-+-".join("-" * w for w in widths)
        return "\n".join([fmt_row(headers), sep] + [fmt_row(c) for c in lines])


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.3f}"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _sort_key(group_key: tuple[str, str | None]):
    alg, attr = group_key
    ai = ALGORITHM_ORDER.index(alg) if alg in ALGORITHM_ORDER else len(ALGORITHM_ORDER)
    if attr is None:
        ti = -1
    elif attr in ATTRIBUTE_ORDER:
        ti = ATTRIBUTE_ORDER.index(attr)
    else:
        ti = len(ATTRIBUTE_ORDER)
    return (ti, attr or "", ai, alg)


def aggregate(records: list[dict], metadata: dict | None = None,
              keep_per_image: bool = True) -> MetricsReport:
    """Aggregate per-image metric records into mean/std report rows.

    Records need ``algorithm``, optional ``attribute``, and the metric
    values. Standard deviation is the population form. Non-finite PSNR
    values are excluded from the mean/std and counted per row.
    """
    if not records:
        raise ValidationError("no records to aggregate")
    groups: dict[tuple[str, str | None], list[dict]] = {}
    for rec in records:
        key = (rec["algorithm"], rec.get("attribute"))
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups, key=_sort_key):
        alg, attr = key
        recs = groups[key]
        row: dict = {"algorithm": alg, "attribute": attr, "n": len(recs)}
        for m in ("ssim", "psnr", "swd"):
            vals = np.array([r[m] for r in recs], dtype=np.float64)
            finite = vals[np.isfinite(vals)]
            if m == "psnr":
                row["psnr_inf_count"] = int(len(vals) - len(finite))
            if len(finite) == 0:
                row[m + "_mean"], row[m + "_std"] = math.inf, 0.0
            else:
                row[m + "_mean"] = float(finite.mean())
                row[m + "_std"] = float(finite.std())
        rows.append(row)
    return MetricsReport(rows=rows, per_image=records if keep_per_image else None,
                         metadata=metadata or {})
