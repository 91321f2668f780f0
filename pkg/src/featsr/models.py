"""Model builders and forward passes.

Three networks share one layer vocabulary:

  * generator  — SRResNet-style: 9x9 head conv + PReLU, residual blocks
    (conv3-BN-PReLU-conv3-BN + identity skip), a post-block conv3-BN with a
    global skip, two sub-pixel upsampling stages (x4 total), 9x9 tail conv,
    tanh.
  * discriminator — first conv block (3->64, stride 1, LeakyReLU 0.2, no BN)
    followed by seven conv-BN-LeakyReLU blocks doubling channels up to 512
    with stride 2 on every second one, then two dense layers and a sigmoid.
  * autoencoder — the same conv trunk as the encoder plus a symmetric
    decoder that upsamples with pixel shuffle back to the input shape, tanh.

The feature extractor is the output of the first conv block (conv +
activation, full resolution, 64 channels); parameters under the "phi."
prefix. Heads live under "psi1." (discriminator), "psi2." (decoder +
encoder remainder) and "psic." (classifier), so a discriminator and an
autoencoder can share one trunk by merging parameter sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .nn import ConfigurationError, DimensionError, ParameterSet, Tensor
from .nn import init as winit
from .nn.ops import batch_norm, conv2d, dense, leaky_relu, pixel_shuffle, prelu

PRELU_INIT = 0.25
DISC_CHANNELS = (64, 64, 128, 128, 256, 256, 512, 512)
DISC_STRIDES = (1, 2, 1, 2, 1, 2, 1, 2)


@dataclass
class GeneratorSpec:
    residual_blocks: int = 10
    base_channels: int = 64
    upsample_stages: int = 2
    edge_kernel: int = 9
    image_channels: int = 3

    def scale(self) -> int:
        return 2**self.upsample_stages


@dataclass
class DiscriminatorSpec:
    input_hw: int = 32
    dense_hidden: int = 1024
    leaky_alpha: float = 0.2

    def __post_init__(self):
        if self.input_hw % 16 != 0 or self.input_hw <= 0:
            raise ConfigurationError(f"discriminator input_hw must be a positive multiple of 16, got {self.input_hw}")


@dataclass
class AutoencoderSpec:
    input_hw: int = 32

    def __post_init__(self):
        if self.input_hw % 16 != 0 or self.input_hw <= 0:
            raise ConfigurationError(f"autoencoder input_hw must be a positive multiple of 16, got {self.input_hw}")


@dataclass
class FeatureTap:
    """Designates the source of extractor features.

    network: identity | random | discriminator | autoencoder | external
    layer:   tap index for external nets (built-ins expose one tap: the
             first conv block's activation).
    """

    network: str = "discriminator"
    layer: int = 0
    seed: int = 0  # frozen-weight draw for network == "random"


# ---------------------------------------------------------------------------
# builders


def _add_conv(params: ParameterSet, rng, prefix: str, cin: int, cout: int, k: int):
    params.add(f"{prefix}.weight", winit.conv_weight(rng, cout, cin, k))
    params.add(f"{prefix}.bias", np.zeros(cout, dtype=np.float32))


def _add_bn(params: ParameterSet, prefix: str, c: int):
    params.add(f"{prefix}.gamma", np.ones(c, dtype=np.float32))
    params.add(f"{prefix}.beta", np.zeros(c, dtype=np.float32))
    params.add(f"{prefix}.running_mean", np.zeros(c, dtype=np.float32), trainable=False)
    params.add(f"{prefix}.running_var", np.ones(c, dtype=np.float32), trainable=False)


def _add_dense(params: ParameterSet, rng, prefix: str, d: int, m: int):
    params.add(f"{prefix}.weight", winit.dense_weight(rng, d, m))
    params.add(f"{prefix}.bias", np.zeros(m, dtype=np.float32))


def build_generator(spec: GeneratorSpec, seed: int) -> ParameterSet:
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    c = spec.base_channels
    _add_conv(p, rng, "head.conv", spec.image_channels, c, spec.edge_kernel)
    p.add("head.prelu.slope", np.full(c, PRELU_INIT, dtype=np.float32))
    for i in range(spec.residual_blocks):
        _add_conv(p, rng, f"res{i}.conv1", c, c, 3)
        _add_bn(p, f"res{i}.bn1", c)
        p.add(f"res{i}.prelu.slope", np.full(c, PRELU_INIT, dtype=np.float32))
        _add_conv(p, rng, f"res{i}.conv2", c, c, 3)
        _add_bn(p, f"res{i}.bn2", c)
    _add_conv(p, rng, "post.conv", c, c, 3)
    _add_bn(p, "post.bn", c)
    for j in range(spec.upsample_stages):
        _add_conv(p, rng, f"up{j}.conv", c, 4 * c, 3)
        p.add(f"up{j}.prelu.slope", np.full(c, PRELU_INIT, dtype=np.float32))
    _add_conv(p, rng, "tail.conv", c, spec.image_channels, spec.edge_kernel)
    return p


def _add_trunk(p: ParameterSet, rng):
    """The shared first conv block: this is phi, the feature extractor."""
    _add_conv(p, rng, "phi.conv", 3, DISC_CHANNELS[0], 3)


def _add_tail_blocks(p: ParameterSet, rng, prefix: str):
    cin = DISC_CHANNELS[0]
    for i in range(1, len(DISC_CHANNELS)):
        cout = DISC_CHANNELS[i]
        _add_conv(p, rng, f"{prefix}.block{i}.conv", cin, cout, 3)
        _add_bn(p, f"{prefix}.block{i}.bn", cout)
        cin = cout


def build_discriminator(spec: DiscriminatorSpec, seed: int) -> ParameterSet:
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    _add_trunk(p, rng)
    _add_tail_blocks(p, rng, "psi1")
    feat = DISC_CHANNELS[-1] * (spec.input_hw // 16) ** 2
    _add_dense(p, rng, "psi1.fc1", feat, spec.dense_hidden)
    _add_dense(p, rng, "psi1.fc2", spec.dense_hidden, 1)
    return p


def build_autoencoder(spec: AutoencoderSpec, seed: int) -> ParameterSet:
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    _add_trunk(p, rng)
    _add_encoder_decoder(p, rng)
    return p


def _add_encoder_decoder(p: ParameterSet, rng):
    _add_tail_blocks(p, rng, "psi2.enc")
    # decoder mirrors the encoder; stride-2 blocks become sub-pixel upsamplings
    enc_io = list(zip(DISC_CHANNELS[:-1], DISC_CHANNELS[1:], DISC_STRIDES[1:]))
    for d, (cin, cout, stride) in enumerate(reversed(enc_io)):
        up = stride == 2
        out_ch = 4 * cin if up else cin
        _add_conv(p, rng, f"psi2.dec.block{d}.conv", cout, out_ch, 3)
        _add_bn(p, f"psi2.dec.block{d}.bn", cin)
    _add_conv(p, rng, "psi2.dec.out", DISC_CHANNELS[0], 3, 3)


def build_classifier(spec: DiscriminatorSpec, num_classes: int, seed: int) -> ParameterSet:
    """Trunk + dense head emitting class logits (for label-supervised
    extractor pretraining)."""
    if num_classes < 2:
        raise ConfigurationError("classifier needs at least 2 classes")
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    _add_trunk(p, rng)
    _add_tail_blocks(p, rng, "psic")
    feat = DISC_CHANNELS[-1] * (spec.input_hw // 16) ** 2
    _add_dense(p, rng, "psic.fc1", feat, spec.dense_hidden)
    _add_dense(p, rng, "psic.fc2", spec.dense_hidden, num_classes)
    return p


def build_shared_extractor(disc_spec: DiscriminatorSpec, seed: int) -> ParameterSet:
    """One parameter set carrying phi.* + psi1.* (discriminator head) +
    psi2.* (autoencoder head) over a single shared trunk."""
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    _add_trunk(p, rng)
    _add_tail_blocks(p, rng, "psi1")
    feat = DISC_CHANNELS[-1] * (disc_spec.input_hw // 16) ** 2
    _add_dense(p, rng, "psi1.fc1", feat, disc_spec.dense_hidden)
    _add_dense(p, rng, "psi1.fc2", disc_spec.dense_hidden, 1)
    _add_encoder_decoder(p, rng)
    return p


def build_random_extractor(seed: int) -> ParameterSet:
    """Frozen first-conv-block extractor with He-normal weights."""
    rng = np.random.default_rng(seed)
    p = ParameterSet()
    p.add("phi.conv.weight", winit.conv_weight(rng, DISC_CHANNELS[0], 3, 3), trainable=False)
    p.add("phi.conv.bias", np.zeros(DISC_CHANNELS[0], dtype=np.float32), trainable=False)
    return p


# ---------------------------------------------------------------------------
# forward passes


def _conv(p: ParameterSet, prefix: str, x: Tensor, stride=1, pad=1) -> Tensor:
    return conv2d(x, p[f"{prefix}.weight"], p[f"{prefix}.bias"], stride=stride, pad=pad)


def _bn(p: ParameterSet, prefix: str, x: Tensor, training: bool) -> Tensor:
    return batch_norm(
        x,
        p[f"{prefix}.gamma"],
        p[f"{prefix}.beta"],
        p.array(f"{prefix}.running_mean"),
        p.array(f"{prefix}.running_var"),
        training,
    )


def generator_forward(params: ParameterSet, spec: GeneratorSpec, lr_batch: Tensor, training: bool = False) -> Tensor:
    x = lr_batch
    if x.data.ndim != 4 or x.data.shape[1] != spec.image_channels:
        raise DimensionError(
            f"generator expects (N,{spec.image_channels},h,w) input, got {tuple(x.data.shape)}"
        )
    ek = spec.edge_kernel
    h = prelu(_conv(params, "head.conv", x, pad=ek // 2), params["head.prelu.slope"])
    y = h
    for i in range(spec.residual_blocks):
        r = _conv(params, f"res{i}.conv1", y)
        r = _bn(params, f"res{i}.bn1", r, training)
        r = prelu(r, params[f"res{i}.prelu.slope"])
        r = _conv(params, f"res{i}.conv2", r)
        r = _bn(params, f"res{i}.bn2", r, training)
        y = y + r
    y = _bn(params, "post.bn", _conv(params, "post.conv", y), training)
    y = y + h
    for j in range(spec.upsample_stages):
        y = pixel_shuffle(_conv(params, f"up{j}.conv", y), 2)
        y = prelu(y, params[f"up{j}.prelu.slope"])
    y = _conv(params, "tail.conv", y, pad=ek // 2)
    return y.tanh()


def phi_forward(params: ParameterSet, image: Tensor, alpha: float = 0.2) -> Tensor:
    """The feature extractor: first conv block, conv + LeakyReLU, stride 1,
    no BN — 64 channels at full input resolution."""
    return leaky_relu(_conv(params, "phi.conv", image), alpha)


def _trunk_forward(params: ParameterSet, prefix: str, tap: Tensor, training: bool, alpha: float) -> Tensor:
    y = tap
    for i in range(1, len(DISC_CHANNELS)):
        y = _conv(params, f"{prefix}.block{i}.conv", y, stride=DISC_STRIDES[i])
        y = _bn(params, f"{prefix}.block{i}.bn", y, training)
        y = leaky_relu(y, alpha)
    return y


def _check_hw(image: Tensor, input_hw: int, what: str):
    if image.data.ndim != 4 or image.data.shape[1] != 3:
        raise DimensionError(f"{what} expects (N,3,H,W) input, got {tuple(image.data.shape)}")
    n, _, h, w = image.data.shape
    if h != input_hw or w != input_hw:
        raise DimensionError(f"{what} expects {input_hw}x{input_hw} input, got {h}x{w}")


def discriminator_forward(
    params: ParameterSet, spec: DiscriminatorSpec, image: Tensor, training: bool = False
) -> tuple[Tensor, dict[str, Tensor]]:
    _check_hw(image, spec.input_hw, "discriminator")
    tap = phi_forward(params, image, spec.leaky_alpha)
    y = _trunk_forward(params, "psi1", tap, training, spec.leaky_alpha)
    n = y.data.shape[0]
    y = y.reshape(n, -1)
    y = leaky_relu(dense(y, params["psi1.fc1.weight"], params["psi1.fc1.bias"]), spec.leaky_alpha)
    logits = dense(y, params["psi1.fc2.weight"], params["psi1.fc2.bias"])
    return logits.sigmoid(), {"default": tap}


def autoencoder_forward(
    params: ParameterSet, spec: AutoencoderSpec, image: Tensor, training: bool = False, alpha: float = 0.2
) -> tuple[Tensor, dict[str, Tensor]]:
    _check_hw(image, spec.input_hw, "autoencoder")
    tap = phi_forward(params, image, alpha)
    y = _trunk_forward(params, "psi2.enc", tap, training, alpha)
    enc_io = list(zip(DISC_CHANNELS[:-1], DISC_CHANNELS[1:], DISC_STRIDES[1:]))
    for d, (cin, _cout, stride) in enumerate(reversed(enc_io)):
        y = _conv(params, f"psi2.dec.block{d}.conv", y)
        if stride == 2:
            y = pixel_shuffle(y, 2)
        y = _bn(params, f"psi2.dec.block{d}.bn", y, training)
        y = leaky_relu(y, alpha)
    y = _conv(params, "psi2.dec.out", y)
    return y.tanh(), {"default": tap}


def classifier_forward(
    params: ParameterSet, spec: DiscriminatorSpec, image: Tensor, training: bool = False
) -> tuple[Tensor, dict[str, Tensor]]:
    _check_hw(image, spec.input_hw, "classifier")
    tap = phi_forward(params, image, spec.leaky_alpha)
    y = _trunk_forward(params, "psic", tap, training, spec.leaky_alpha)
    n = y.data.shape[0]
    y = y.reshape(n, -1)
    y = leaky_relu(dense(y, params["psic.fc1.weight"], params["psic.fc1.bias"]), spec.leaky_alpha)
    logits = dense(y, params["psic.fc2.weight"], params["psic.fc2.bias"])
    return logits, {"default": tap}


def extract_features(tap: FeatureTap, params: ParameterSet | None, image: Tensor) -> Tensor:
    """Feature map used by the content loss (and by d_phi single-tap nets)."""
    if tap.network == "identity":
        return image
    if tap.network in ("discriminator", "autoencoder", "random"):
        if params is None or "phi.conv.weight" not in params:
            raise ConfigurationError(f"{tap.network} tap requires a parameter set carrying phi.*")
        return phi_forward(params, image)
    if tap.network == "external":
        if params is None:
            raise ConfigurationError("external tap requires an imported feature network")
        return external_forward(params, image, upto=tap.layer)[-1]
    raise ConfigurationError(f"unknown tap network {tap.network!r}")


def external_forward(params: ParameterSet, image: Tensor, upto: int | None = None) -> list[Tensor]:
    """Run an imported conv stack (records conv{i}.weight / conv{i}.bias);
    returns the activation after every conv + LeakyReLU layer."""
    outs = []
    y = image
    i = 0
    while f"conv{i}.weight" in params:
        y = leaky_relu(conv2d(y, params[f"conv{i}.weight"], params[f"conv{i}.bias"], stride=1, pad=params.array(f"conv{i}.weight").shape[2] // 2))
        outs.append(y)
        if upto is not None and i == upto:
            return outs
        i += 1
    if not outs:
        raise ConfigurationError("external feature network has no conv0.weight record")
    return outs
