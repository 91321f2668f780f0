"""Objectives and the strategy registry.

A strategy names how the feature extractor is obtained and which terms the
generator objective carries:

  mse      — identity extractor; plain pixel MSE.
  ran      — frozen random extractor; feature-space MSE.
  rec      — extractor pretrained as an autoencoder encoder, then frozen.
  cla      — extractor pretrained as a classifier trunk, then frozen.
  dis      — extractor is the discriminator's first block, trained
             adversarially alongside the generator; no adversarial term in
             the generator loss.
  dis_rec  — as dis, with the trunk simultaneously trained for
             reconstruction through a decoder head.
  adv      — dis plus lambda2 * adversarial term in the generator loss.
  adv_mse  — pixel MSE content plus lambda2 * adversarial term.
  adv_rec  — dis_rec plus lambda2 * adversarial term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .models import FeatureTap
from .nn import ConfigurationError, DimensionError, Tensor

PROB_CLAMP = 1e-7

VARIANTS = ("mse", "ran", "rec", "cla", "dis", "dis_rec", "adv", "adv_mse", "adv_rec")
ADVERSARIAL_VARIANTS = ("adv", "adv_mse", "adv_rec")


@dataclass
class StrategyConfig:
    variant: str = "adv_rec"
    lambda1: float = 1.0
    lambda2: float = 1e-3
    adv_formulation: str = "non_saturating"  # or "saturating"
    random_seed: int = 0  # frozen-weight draw for the ran variant
    rec_weight: float = 1.0  # reconstruction weight inside dis_rec/adv_rec extractor loss

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown strategy variant {self.variant!r}; expected one of {VARIANTS}")
        if self.adv_formulation not in ("saturating", "non_saturating"):
            raise ConfigurationError(f"unknown adversarial formulation {self.adv_formulation!r}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("lambda1/lambda2 must be non-negative")
        if self.variant in ADVERSARIAL_VARIANTS and self.lambda2 <= 0:
            raise ConfigurationError(f"variant {self.variant!r} requires lambda2 > 0")


@dataclass
class LossReport:
    iteration: int = 0
    content: float = 0.0
    adversarial: float = 0.0
    reconstruction: float = 0.0
    discriminator: float = 0.0
    total_generator: float = 0.0

    FIELDS = ("iteration", "content", "adversarial", "reconstruction", "discriminator", "total_generator")


def _check_same_shape(a: Tensor, b: Tensor, what: str):
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{what}: shape mismatch {a.data.shape} vs {b.data.shape}")


def feature_content_loss(phi_y: Tensor, phi_fx: Tensor) -> Tensor:
    """Mean over batch and all feature coordinates of the squared
    difference. With the identity extractor this is exactly pixel MSE."""
    _check_same_shape(phi_y, phi_fx, "feature_content_loss")
    return (phi_y - phi_fx).square().mean()


def reconstruction_loss(y: Tensor, y_hat: Tensor) -> Tensor:
    _check_same_shape(y, y_hat, "reconstruction_loss")
    return (y - y_hat).square().mean()


def classification_loss(logits: Tensor, labels) -> Tensor:
    from .nn.ops import cross_entropy

    return cross_entropy(logits, labels)


def discriminator_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-E[log D(y)] - E[log(1 - D(F(x)))], probabilities clamped away from
    the boundaries so the logs stay finite."""
    r = d_real.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    f = d_fake.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(r.log().mean()) - ((1.0 - f).log().mean())


def generator_adversarial_term(d_fake: Tensor, formulation: str = "non_saturating") -> Tensor:
    f = d_fake.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    if formulation == "non_saturating":
        return -(f.log().mean())
    if formulation == "saturating":
        return (1.0 - f).log().mean()
    raise ConfigurationError(f"unknown adversarial formulation {formulation!r}")


@dataclass
class StrategyPlan:
    """Wiring resolved from a StrategyConfig.

    pretrain:   'rec' | 'cla' | None — disjoint extractor pretraining.
    joint:      'disc' | 'disc_rec' | None — per-iteration extractor update.
    content:    'pixel' | 'feature' — generator content term.
    tap:        feature source for the content term.
    lambda2:    effective adversarial weight in the generator loss (0 unless
                the variant is adversarial).
    """

    variant: str
    pretrain: str | None
    joint: str | None
    content: str
    tap: FeatureTap
    lambda1: float
    lambda2: float
    adv_formulation: str
    rec_weight: float = 1.0

    @property
    def trains_extractor(self) -> bool:
        return self.joint is not None

    @property
    def needs_discriminator(self) -> bool:
        return self.joint is not None

    @property
    def frozen_extractor(self) -> bool:
        return self.variant in ("mse", "ran", "rec", "cla")


def resolve_strategy(config: StrategyConfig, has_labels: bool = True) -> StrategyPlan:
    v = config.variant
    adversarial = v in ADVERSARIAL_VARIANTS
    lambda2 = config.lambda2 if adversarial else 0.0
    common = dict(
        variant=v,
        lambda1=config.lambda1,
        lambda2=lambda2,
        adv_formulation=config.adv_formulation,
        rec_weight=config.rec_weight,
    )
    if v == "mse":
        return StrategyPlan(pretrain=None, joint=None, content="pixel", tap=FeatureTap("identity"), **common)
    if v == "ran":
        return StrategyPlan(
            pretrain=None, joint=None, content="feature", tap=FeatureTap("random", seed=config.random_seed), **common
        )
    if v == "rec":
        return StrategyPlan(pretrain="rec", joint=None, content="feature", tap=FeatureTap("autoencoder"), **common)
    if v == "cla":
        if not has_labels:
            raise ConfigurationError("variant 'cla' requires a labeled dataset")
        return StrategyPlan(pretrain="cla", joint=None, content="feature", tap=FeatureTap("discriminator"), **common)
    if v in ("dis", "adv"):
        return StrategyPlan(pretrain=None, joint="disc", content="feature", tap=FeatureTap("discriminator"), **common)
    if v == "adv_mse":
        return StrategyPlan(pretrain=None, joint="disc", content="pixel", tap=FeatureTap("identity"), **common)
    if v in ("dis_rec", "adv_rec"):
        return StrategyPlan(
            pretrain=None, joint="disc_rec", content="feature", tap=FeatureTap("discriminator"), **common
        )
    raise ConfigurationError(f"unknown strategy variant {v!r}")
