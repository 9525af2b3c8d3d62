"""Train a small model and watch reconstruction quality emerge.

Uses a reduced dataset and epoch count so the demo finishes in a few
minutes; the benchmark-grade recipe is 2000 images / 30 epochs (see
README).

Run: python demos/02_train_and_reconstruct.py
"""

import numpy as np

from latentshift import TrainConfig, generate_dataset, ssim, train_toy
from latentshift.pngio import save_image

dataset = generate_dataset(seed=11, n=400, size=64)
config = TrainConfig(epochs=8, batch_size=64)
print(f"training on {len(dataset)} faces, {config.epochs} epochs ...")
model = train_toy(dataset, config, seed=0)

for entry in model.metadata["training_log"]:
    print(f"  epoch {entry['epoch']}: total={entry['total']:.4f} "
          f"holdout_ssim={entry.get('holdout_ssim', float('nan')):.3f}")

held_out = generate_dataset(seed=99, n=16, size=64)
scores = [ssim(img, model.decode(model.encode(img))) for img in held_out.images]
print(f"held-out reconstruction SSIM: mean {np.mean(scores):.3f} "
      f"(min {min(scores):.3f}, max {max(scores):.3f})")

img = held_out.images[0]
save_image("demo_input.png", img)
save_image("demo_recon.png", model.decode(model.encode(img)))
print("wrote demo_input.png / demo_recon.png")
