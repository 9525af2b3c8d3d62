"""Metric behavior on a controlled degradation ladder.

SSIM and PSNR fall, SWD rises as an image degrades; identical images
sit at the exact fixed points (1.0, +inf, 0.0).

Run: python demos/06_metrics.py
"""

import numpy as np

from latentshift import psnr, render, sample_factors, ssim, swd

img = render(sample_factors(3, 1)[0], 64).astype(np.float64)


def blur(x, n):
    out = x.copy()
    for _ in range(n):
        p = np.pad(out, ((1, 1), (1, 1), (0, 0)), mode="edge")
        out = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
               + p[1:-1, 1:-1]) / 5.0
    return out


rng = np.random.default_rng(0)
ladder = [
    ("identical", img),
    ("light blur", blur(img, 1)),
    ("heavy blur", blur(img, 6)),
    ("noise 0.05", np.clip(img + 0.05 * rng.standard_normal(img.shape), 0, 1)),
    ("noise 0.15", np.clip(img + 0.15 * rng.standard_normal(img.shape), 0, 1)),
]
print(f"{'variant':12s} {'SSIM':>7s} {'PSNR':>8s} {'SWD':>9s}")
for name, other in ladder:
    print(f"{name:12s} {ssim(img, other):7.4f} {psnr(img, other):8.2f} "
          f"{swd(img, other, seed=0):9.2f}")
