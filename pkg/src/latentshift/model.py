"""Toy style-based generative autoencoder.

Paired encoder/decoder with a shared latent space: a convolutional
encoder maps an image to a single latent vector ``w``, a mapping network
turns prior noise into ``w``, and the decoder grows a learned 4x4
constant through upsampling blocks whose channels are modulated by a
per-block affine function of the same ``w``. A small convolutional
discriminator exists for training only and is never checkpointed.

All weights are plain numpy arrays; forward passes run on the autodiff
tape so encoder, decoder and latent gradients come from one mechanism.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import DimensionMismatchError, ValidationError

_LRELU_SLOPE = 0.2


@dataclass(frozen=True)
class ModelConfig:
    d_w: int = 128
    image_size: int = 64

    def __post_init__(self):
        s = self.image_size
        if s < 16 or s & (s - 1) != 0:
            raise ValidationError(f"image_size must be a power of two >= 16, got {s}")
        if self.d_w < 1:
            raise ValidationError(f"d_w must be positive, got {self.d_w}")

    @property
    def num_style_layers(self) -> int:
        # one upsampling block per doubling from the 4x4 constant
        return int(np.log2(self.image_size // 4))


# channel schedules, outermost resolution last; kept slim so desk-scale
# per-image fine-tuning stays fast on a CPU
_ENC_CHANNELS = [12, 24, 48, 64, 64]
_DEC_CHANNELS = [64, 48, 32, 16, 8, 8]


def _enc_channels(n_down: int) -> list[int]:
    return _ENC_CHANNELS[:n_down]


def _dec_channels(n_up: int) -> list[int]:
    return _DEC_CHANNELS[: n_up + 1]


class _Net:
    """Base for weight-holding submodules; weights are named numpy arrays."""

    scope = "net"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    def _v(self, tape: ad.ParamTape | None, name: str) -> Var:
        arr = self.params[name]
        if tape is None:
            return Var(arr)
        return tape.leaf(f"{self.scope}/{name}", arr)

    def clone(self):
        dup = object.__new__(type(self))
        dup.__dict__.update({k: v for k, v in self.__dict__.items() if k != "params"})
        dup.params = {k: v.copy() for k, v in self.params.items()}
        return dup

    def astype(self, dtype):
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)
        return self


def _conv_init(rng, f, c, k, gain=2.0, dtype=np.float32):
    std = np.sqrt(gain / (c * k * k))
    return (rng.standard_normal((f, c, k, k)) * std).astype(dtype)


def _linear_init(rng, dout, din, gain=1.0, dtype=np.float32):
    std = np.sqrt(gain / din)
    return (rng.standard_normal((dout, din)) * std).astype(dtype)


class Encoder(_Net):
    scope = "encoder"

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        n_down = int(np.log2(config.image_size // 4))
        chans = _enc_channels(n_down)
        cin = 3
        for i, cout in enumerate(chans):
            self.params[f"conv{i}/w"] = _conv_init(rng, cout, cin, 3)
            self.params[f"conv{i}/b"] = np.zeros(cout, dtype=np.float32)
            cin = cout
        self.n_down = n_down
        flat = cin * 4 * 4
        self.params["head/w"] = _linear_init(rng, config.d_w, flat)
        self.params["head/b"] = np.zeros(config.d_w, dtype=np.float32)

    def forward(self, x: Var, tape: ad.ParamTape | None = None) -> Var:
        """(N, 3, S, S) in [-1, 1] -> (N, d_w)."""
        h = x
        for i in range(self.n_down):
            h = ad.conv2d(h, self._v(tape, f"conv{i}/w"), self._v(tape, f"conv{i}/b"),
                          stride=2, pad=1)
            h = ad.leaky_relu(h, _LRELU_SLOPE)
        n = h.data.shape[0]
        h = h.reshape(n, -1)
        return ad.linear(h, self._v(tape, "head/w"), self._v(tape, "head/b"))


class MappingNetwork(_Net):
    """Three affine+nonlinearity layers taking prior noise to latent space."""

    scope = "mapping"
    n_layers = 3

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        d = config.d_w
        for i in range(self.n_layers):
            self.params[f"fc{i}/w"] = _linear_init(rng, d, d, gain=2.0)
            self.params[f"fc{i}/b"] = np.zeros(d, dtype=np.float32)

    def forward(self, z: Var, tape: ad.ParamTape | None = None) -> Var:
        h = z
        for i in range(self.n_layers):
            h = ad.linear(h, self._v(tape, f"fc{i}/w"), self._v(tape, f"fc{i}/b"))
            h = ad.leaky_relu(h, _LRELU_SLOPE)
        return h


class Decoder(_Net):
    """Upsampling style blocks; every block is modulated by the same w."""

    scope = "decoder"

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        n_up = config.num_style_layers
        chans = _dec_channels(n_up)
        self.n_up = n_up
        self.params["const"] = (rng.standard_normal((chans[0], 4, 4)) * 0.1).astype(np.float32)
        for i in range(n_up):
            cin, cout = chans[i], chans[i + 1]
            self.params[f"block{i}/conv/w"] = _conv_init(rng, cout, cin, 3)
            self.params[f"block{i}/conv/b"] = np.zeros(cout, dtype=np.float32)
            # style affines start near identity modulation
            self.params[f"block{i}/scale/w"] = _linear_init(rng, cout, config.d_w, gain=0.01)
            self.params[f"block{i}/scale/b"] = np.zeros(cout, dtype=np.float32)
            self.params[f"block{i}/shift/w"] = _linear_init(rng, cout, config.d_w, gain=0.01)
            self.params[f"block{i}/shift/b"] = np.zeros(cout, dtype=np.float32)
        self.params["rgb/w"] = _conv_init(rng, 3, chans[-1], 1, gain=1.0)
        self.params["rgb/b"] = np.zeros(3, dtype=np.float32)

    def forward(self, w: Var, tape: ad.ParamTape | None = None) -> Var:
        """(N, d_w) -> (N, 3, S, S) with values in (0, 1)."""
        n = w.data.shape[0]
        h = ad.tile_batch(self._v(tape, "const"), n)
        for i in range(self.n_up):
            h = ad.upsample2x(h)
            h = ad.conv2d(h, self._v(tape, f"block{i}/conv/w"),
                          self._v(tape, f"block{i}/conv/b"), stride=1, pad=1)
            cout = h.data.shape[1]
            s = ad.linear(w, self._v(tape, f"block{i}/scale/w"),
                          self._v(tape, f"block{i}/scale/b"))
            t = ad.linear(w, self._v(tape, f"block{i}/shift/w"),
                          self._v(tape, f"block{i}/shift/b"))
            h = h * (s + 1.0).reshape(n, cout, 1, 1) + t.reshape(n, cout, 1, 1)
            h = ad.leaky_relu(h, _LRELU_SLOPE)
        h = ad.conv2d(h, self._v(tape, "rgb/w"), self._v(tape, "rgb/b"), stride=1, pad=0)
        return ad.sigmoid(h)


class Discriminator(_Net):
    scope = "disc"

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        n_down = int(np.log2(config.image_size // 4))
        chans = _enc_channels(n_down)
        cin = 3
        for i, cout in enumerate(chans):
            self.params[f"conv{i}/w"] = _conv_init(rng, cout, cin, 3)
            self.params[f"conv{i}/b"] = np.zeros(cout, dtype=np.float32)
            cin = cout
        self.n_down = n_down
        self.params["head/w"] = _linear_init(rng, 1, cin * 4 * 4)
        self.params["head/b"] = np.zeros(1, dtype=np.float32)

    def forward(self, x: Var, tape: ad.ParamTape | None = None) -> Var:
        h = x
        for i in range(self.n_down):
            h = ad.conv2d(h, self._v(tape, f"conv{i}/w"), self._v(tape, f"conv{i}/b"),
                          stride=2, pad=1)
            h = ad.leaky_relu(h, _LRELU_SLOPE)
        n = h.data.shape[0]
        h = h.reshape(n, -1)
        return ad.linear(h, self._v(tape, "head/w"), self._v(tape, "head/b"))


@dataclass
class GenerativeAutoencoder:
    """Paired encoder E and decoder D with checkpointable weights.

    Inference (``encode`` / ``decode`` / ``sample_prior``) is pure: it
    never mutates weights, so concurrent calls on an eval-mode instance
    are safe. Training and fine-tuning require exclusive ownership.
    """

    config: ModelConfig
    encoder: Encoder
    mapping: MappingNetwork
    decoder: Decoder
    mode: str = "eval"
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config: ModelConfig | None = None, seed: int = 0) -> "GenerativeAutoencoder":
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        return cls(config=config,
                   encoder=Encoder(config, rng),
                   mapping=MappingNetwork(config, rng),
                   decoder=Decoder(config, rng),
                   metadata={"init_seed": seed})

    @property
    def d_w(self) -> int:
        return self.config.d_w

    @property
    def image_size(self) -> int:
        return self.config.image_size

    @property
    def dtype(self):
        return self.decoder.params["const"].dtype

    # -- validation ----------------------------------------------------------

    def _check_image(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image)
        s = self.config.image_size
        if image.shape != (s, s, 3):
            raise DimensionMismatchError(
                f"expected image of shape {(s, s, 3)}, got {image.shape}")
        if not np.isfinite(image).all():
            raise ValidationError("image contains non-finite pixels")
        return image.astype(self.dtype, copy=False)

    def _check_latent(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        if w.shape != (self.config.d_w,):
            raise DimensionMismatchError(
                f"expected latent of length {self.config.d_w}, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise ValidationError("latent contains non-finite values")
        return w.astype(self.dtype, copy=False)

    # -- inference -----------------------------------------------------------

    def encode(self, image: np.ndarray) -> np.ndarray:
        """Project an (S, S, 3) image in [0, 1] to a latent vector of length d_w."""
        image = self._check_image(image)
        x = image.transpose(2, 0, 1)[None] * 2.0 - 1.0
        w = self.encoder.forward(Var(x))
        return w.data[0].copy()

    def decode(self, w: np.ndarray) -> np.ndarray:
        """Decode a latent vector to an (S, S, 3) image with values in [0, 1]."""
        w = self._check_latent(w)
        out = self.decoder.forward(Var(w[None]))
        return out.data[0].transpose(1, 2, 0).copy()

    def sample_prior(self, seed: int) -> np.ndarray:
        """Draw standard-normal noise and push it through the mapping network."""
        z = np.random.default_rng(seed).standard_normal(self.config.d_w)
        z = z.astype(self.dtype)
        w = self.mapping.forward(Var(z[None]))
        return w.data[0].copy()

    # -- structure -----------------------------------------------------------

    def weights(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for net in (self.encoder, self.mapping, self.decoder):
            for name, arr in net.params.items():
                out[f"{net.scope}/{name}"] = arr
        return out

    def weight_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(w := self.weights()):
            h.update(name.encode())
            h.update(str(w[name].dtype).encode())
            h.update(np.ascontiguousarray(w[name]).tobytes())
        return h.hexdigest()

    def clone(self) -> "GenerativeAutoencoder":
        return GenerativeAutoencoder(config=self.config,
                                     encoder=self.encoder.clone(),
                                     mapping=self.mapping.clone(),
                                     decoder=self.decoder.clone(),
                                     mode=self.mode,
                                     metadata=dict(self.metadata))

    def astype(self, dtype) -> "GenerativeAutoencoder":
        dup = self.clone()
        dup.encoder.astype(dtype)
        dup.mapping.astype(dtype)
        dup.decoder.astype(dtype)
        return dup
