"""latentshift: identity-preserving semantic editing on a toy
style-based autoencoder.

Pipeline: project an image to latent space (encoder pass, iterative
latent optimization, or a random prior draw), one-shot fine-tune a
cloned decoder toward that image with the latent held fixed, then edit
by adding multiples of attribute hyperplane normals to the latent.
Includes a procedural face dataset with recoverable ground-truth
factors, SSIM/PSNR/SWD metrics, a five-algorithm benchmark harness and
an HTTP service for interactive use.
"""

__version__ = "0.1.0"

from .errors import (LatentShiftError, DimensionMismatchError, ValidationError,
                     DivergenceError, CheckpointError, CheckpointFormatError,
                     CheckpointTruncationError, CheckpointVersionError, ConfigError)
from .model import GenerativeAutoencoder, ModelConfig
from .checkpoint import save_checkpoint, load_checkpoint
from .faces import (FaceFactors, SyntheticDataset, sample_factors, render,
                    measure_factors, generate_dataset, save_dataset, load_dataset)
from .training import TrainConfig, train_toy
from .inversion import (LatentOptConfig, project_encoder, project_latent_opt,
                        project_random)
from .adaptation import (AdaptationConfig, AdaptationResult, PerceptualExtractor,
                         adapt_decoder, feature_distances, perceptual_loss,
                         smooth_l1, total_loss)
from .editing import (AttributeDirection, EditTrajectory, edit_latent,
                      fit_direction, fit_attribute_directions, label_factors,
                      load_directions, make_trajectory, save_directions)
from .metrics import (MetricsReport, aggregate, factor_scores, psnr, ssim, swd)
from .bench import (BenchConfig, emit_grids, run_edit_bench,
                    run_reconstruction_bench)

__all__ = [
    "__version__",
    "LatentShiftError", "DimensionMismatchError", "ValidationError",
    "DivergenceError", "CheckpointError", "CheckpointFormatError",
    "CheckpointTruncationError", "CheckpointVersionError", "ConfigError",
    "GenerativeAutoencoder", "ModelConfig", "save_checkpoint", "load_checkpoint",
    "FaceFactors", "SyntheticDataset", "sample_factors", "render",
    "measure_factors", "generate_dataset", "save_dataset", "load_dataset",
    "TrainConfig", "train_toy",
    "LatentOptConfig", "project_encoder", "project_latent_opt", "project_random",
    "AdaptationConfig", "AdaptationResult", "PerceptualExtractor",
    "adapt_decoder", "feature_distances", "perceptual_loss", "smooth_l1",
    "total_loss",
    "AttributeDirection", "EditTrajectory", "edit_latent", "fit_direction",
    "fit_attribute_directions", "label_factors", "load_directions",
    "make_trajectory", "save_directions",
    "MetricsReport", "aggregate", "factor_scores", "psnr", "ssim", "swd",
    "BenchConfig", "emit_grids", "run_edit_bench", "run_reconstruction_bench",
]
