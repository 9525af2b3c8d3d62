"""Compare the three projection strategies on one image.

The encoder pass is instant and lands near the learned manifold; latent
optimization polishes it further; a random prior draw ignores the image
entirely (it only becomes useful after decoder adaptation).

Run: python demos/03_inversion_strategies.py [--checkpoint model.ckpt]
(first run without a checkpoint trains the shared demo model, ~50 min)
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from _shared import demo_model

from latentshift import (LatentOptConfig, generate_dataset, project_encoder,
                         project_latent_opt, project_random, ssim, total_loss)

model, _ = demo_model()
image = generate_dataset(seed=42, n=1, size=64).images[0]

w_enc = project_encoder(model, image)
w_rand = project_random(model, seed=5)
w_opt, curve = project_latent_opt(model, image,
                                  LatentOptConfig(steps=300, init="encoder"))
print(f"latent optimization: loss {curve[0]:.4f} -> {min(curve):.4f} "
      f"over {len(curve) - 1} steps")

for name, w in (("encoder", w_enc), ("latent_opt", w_opt), ("random", w_rand)):
    recon = model.decode(w)
    print(f"{name:12s} total_loss={total_loss(image, recon):.4f} "
          f"ssim={ssim(image, recon):.3f}")
