"""The alternating optimization loop: for joint strategies one extractor
update (adversarial, plus reconstruction for the shared-trunk variants)
followed by one generator update per iteration; disjoint strategies
pretrain the extractor once, freeze it and update only the generator.
"""

from __future__ import annotations

import csv
import dataclasses
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import losses, models
from .data import BatchIterator, PairDataset, make_batches
from .losses import LossReport, StrategyConfig, StrategyPlan
from .models import AutoencoderSpec, DiscriminatorSpec, GeneratorSpec
from .nn import AdamConfig, ConfigurationError, ParameterSet, Tensor, adam_step


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 5000
    batch_size: int = 10
    seed: int = 0
    pretrain_iterations: int = 2000
    log_every: int = 100
    checkpoint_every: int = 1000
    adam: AdamConfig = field(default_factory=AdamConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)

    def validate(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be non-negative")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.pretrain_iterations < 1:
            raise ConfigurationError("pretrain_iterations must be positive")
        self.adam.validate()


def config_to_dict(config: TrainConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    kwargs = {}
    for sub, cls in (("adam", AdamConfig), ("strategy", StrategyConfig), ("generator", GeneratorSpec)):
        if sub in d:
            sd = d.pop(sub)
            _reject_unknown(sd, cls, sub)
            kwargs[sub] = cls(**sd)
    _reject_unknown(d, TrainConfig, "config")
    return TrainConfig(**d, **kwargs)


def _reject_unknown(d: dict, cls, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass
class TrainState:
    config: TrainConfig
    plan: StrategyPlan
    hr_size: int
    generator: ParameterSet
    extractor: ParameterSet | None  # discriminator / shared trunk / frozen pretrained net
    batches: BatchIterator
    iteration: int = 0
    history: list[LossReport] = field(default_factory=list)

    @property
    def disc_spec(self) -> DiscriminatorSpec:
        return DiscriminatorSpec(input_hw=self.hr_size)

    @property
    def ae_spec(self) -> AutoencoderSpec:
        return AutoencoderSpec(input_hw=self.hr_size)


# ---------------------------------------------------------------------------
# extractor pretraining (disjoint strategies)


def pretrain_extractor(strategy: str, dataset: PairDataset, config: TrainConfig) -> ParameterSet:
    """Train an autoencoder (rec) or classifier (cla) on HR crops, then
    return its parameters with every entry frozen."""
    hr_size = dataset.pairs[0][1].shape[1]
    batches = make_batches(dataset, min(config.batch_size, len(dataset)), seed=config.seed + 1)
    if strategy == "rec":
        spec = AutoencoderSpec(input_hw=hr_size)
        params = models.build_autoencoder(spec, seed=config.seed + 101)
        for _ in range(config.pretrain_iterations):
            _, hr_np = batches.next_batch()
            hr = Tensor._make(hr_np)
            rec, _ = models.autoencoder_forward(params, spec, hr, training=True)
            loss = losses.reconstruction_loss(hr, rec)
            _require_finite(loss, "pretrain reconstruction loss")
            loss.backward()
            adam_step(params, config.adam)
    elif strategy == "cla":
        if not dataset.has_labels:
            raise ConfigurationError("variant 'cla' requires a labeled dataset")
        spec = DiscriminatorSpec(input_hw=hr_size)
        m = len(dataset.class_names)
        params = models.build_classifier(spec, m, seed=config.seed + 101)
        for _ in range(config.pretrain_iterations):
            idx = batches.next_indices()
            _, hr_np = dataset.batch(idx)
            labels = dataset.batch_labels(idx)
            logits, _ = models.classifier_forward(params, spec, Tensor._make(hr_np), training=True)
            loss = losses.classification_loss(logits, labels)
            _require_finite(loss, "pretrain classification loss")
            loss.backward()
            adam_step(params, config.adam)
    else:
        raise ConfigurationError(f"pretraining undefined for strategy {strategy!r}")
    for p in params.entries.values():
        p.trainable = False
        p.value.requires_grad = False
    return params


def _require_finite(loss: Tensor, what: str):
    if not np.all(np.isfinite(loss.data)):
        raise TrainingError(f"non-finite {what}")


# ---------------------------------------------------------------------------
# state construction


def init_state(config: TrainConfig, dataset: PairDataset) -> TrainState:
    config.validate()
    plan = losses.resolve_strategy(config.strategy, has_labels=dataset.has_labels)
    hr_size = dataset.pairs[0][1].shape[1]
    if hr_size % 16:
        raise ConfigurationError(f"HR crop size {hr_size} must be divisible by 16")
    if hr_size // 4 * config.generator.scale() != hr_size:
        raise ConfigurationError("generator upsample_stages must realize the x4 scale")
    generator = models.build_generator(config.generator, seed=config.seed)

    extractor = None
    if plan.pretrain is not None:
        extractor = pretrain_extractor(plan.pretrain, dataset, config)
    elif plan.joint == "disc":
        extractor = models.build_discriminator(DiscriminatorSpec(input_hw=hr_size), seed=config.seed + 1)
    elif plan.joint == "disc_rec":
        extractor = models.build_shared_extractor(DiscriminatorSpec(input_hw=hr_size), seed=config.seed + 1)
    elif plan.tap.network == "random":
        extractor = models.build_random_extractor(plan.tap.seed)

    batch_size = min(config.batch_size, len(dataset))
    batches = make_batches(dataset, batch_size, seed=config.seed)
    return TrainState(config, plan, hr_size, generator, extractor, batches)


# ---------------------------------------------------------------------------
# the step


def train_step(state: TrainState, batch) -> LossReport:
    config, plan = state.config, state.plan
    lr_np, hr_np = batch
    lr = Tensor._make(np.ascontiguousarray(lr_np))
    hr = Tensor._make(np.ascontiguousarray(hr_np))
    report = LossReport(iteration=state.iteration + 1)

    fake = models.generator_forward(state.generator, config.generator, lr, training=True)

    # extractor update first (joint strategies only)
    if plan.joint is not None:
        ext = state.extractor
        d_real, _ = models.discriminator_forward(ext, state.disc_spec, hr, training=True)
        d_fake, _ = models.discriminator_forward(ext, state.disc_spec, fake.detach(), training=True)
        d_loss = losses.discriminator_loss(d_real, d_fake)
        ext_loss = d_loss
        if plan.joint == "disc_rec":
            rec, _ = models.autoencoder_forward(ext, state.ae_spec, hr, training=True)
            r_loss = losses.reconstruction_loss(hr, rec)
            ext_loss = ext_loss + plan.rec_weight * r_loss
            report.reconstruction = float(r_loss.data)
        report.discriminator = float(d_loss.data)
        _abort_check(state, ext_loss, "extractor loss")
        ext_loss.backward()
        adam_step(ext, config.adam)

    # generator update; extractor parameter grads would be discarded anyway,
    # so mark them non-differentiable for this half-step and skip the work
    with _param_grads_disabled(state.extractor):
        if plan.content == "pixel":
            content = losses.feature_content_loss(hr, fake)
        else:
            phi_y = models.extract_features(plan.tap, state.extractor, hr)
            phi_f = models.extract_features(plan.tap, state.extractor, fake)
            content = losses.feature_content_loss(phi_y, phi_f)
        report.content = float(content.data)
        gen_loss = plan.lambda1 * content
        if plan.lambda2 > 0:
            d_fake2, _ = models.discriminator_forward(state.extractor, state.disc_spec, fake, training=True)
            adv = losses.generator_adversarial_term(d_fake2, plan.adv_formulation)
            report.adversarial = float(adv.data)
            gen_loss = gen_loss + plan.lambda2 * adv
        report.total_generator = float(gen_loss.data)
        _abort_check(state, gen_loss, "generator loss")
        gen_loss.backward()
    adam_step(state.generator, config.adam)

    state.iteration += 1
    state.history.append(report)
    return report


@contextmanager
def _param_grads_disabled(params: ParameterSet | None):
    flipped = []
    if params is not None:
        flipped = [p.value for p in params.entries.values() if p.value.requires_grad]
    for t in flipped:
        t.requires_grad = False
    try:
        yield
    finally:
        for t in flipped:
            t.requires_grad = True


def _abort_check(state: TrainState, loss: Tensor, what: str):
    if np.all(np.isfinite(loss.data)):
        return
    dump = Path(f"abort_iter{state.iteration}.ckpt")
    try:
        save_checkpoint(dump, state)
    except Exception:
        dump = None
    raise TrainingError(f"non-finite {what} at iteration {state.iteration + 1}" + (f"; state dumped to {dump}" if dump else ""))


# ---------------------------------------------------------------------------
# loop + persistence


def train(
    config: TrainConfig,
    dataset: PairDataset,
    out_dir=None,
    state: TrainState | None = None,
    on_log=None,
) -> TrainState:
    """Run (or resume) the full loop; returns the final state. When out_dir
    is given, writes periodic checkpoints and a loss CSV. on_log(state) is
    invoked every log_every iterations."""
    if state is None:
        state = init_state(config, dataset)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    while state.iteration < config.iterations:
        train_step(state, state.batches.next_batch())
        if out is not None and config.checkpoint_every > 0 and state.iteration % config.checkpoint_every == 0:
            save_checkpoint(out / f"iter{state.iteration}.ckpt", state)
        if on_log is not None and config.log_every > 0 and state.iteration % config.log_every == 0:
            on_log(state)
    if out is not None:
        save_checkpoint(out / "final.ckpt", state)
        write_loss_log(out / "losses.csv", state.history)
    return state


def write_loss_log(path, history: list[LossReport]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LossReport.FIELDS)
        for rep in history:
            w.writerow([getattr(rep, f) for f in LossReport.FIELDS])


def save_checkpoint(path, state: TrainState):
    records = ckpt.paramset_records("generator", state.generator)
    sets = {"generator": ckpt.paramset_meta(state.generator)}
    if state.extractor is not None:
        records.update(ckpt.paramset_records("extractor", state.extractor))
        sets["extractor"] = ckpt.paramset_meta(state.extractor)
    meta = {
        "kind": "train_checkpoint",
        "config": config_to_dict(state.config),
        "hr_size": state.hr_size,
        "iteration": state.iteration,
        "sets": sets,
        "batch_state": state.batches.state(),
        "history": [[getattr(r, f) for f in LossReport.FIELDS] for r in state.history],
    }
    ckpt.write_archive(path, records, meta)


def load_checkpoint(path, dataset: PairDataset) -> TrainState:
    records, meta = ckpt.read_archive(path)
    config = config_from_dict(meta["config"])
    plan = losses.resolve_strategy(config.strategy, has_labels=dataset.has_labels)
    generator = ckpt.restore_paramset("generator", records, meta["sets"]["generator"])
    extractor = None
    if "extractor" in meta["sets"]:
        extractor = ckpt.restore_paramset("extractor", records, meta["sets"]["extractor"])
    batches = make_batches(dataset, int(meta["batch_state"]["batch_size"]), seed=config.seed)
    batches.restore(meta["batch_state"])
    state = TrainState(
        config,
        plan,
        int(meta["hr_size"]),
        generator,
        extractor,
        batches,
        iteration=int(meta["iteration"]),
        history=[LossReport(int(row[0]), *map(float, row[1:])) for row in meta["history"]],
    )
    return state


def load_generator(path) -> tuple[ParameterSet, GeneratorSpec]:
    """Generator-only view of a checkpoint, for inference and evaluation."""
    records, meta = ckpt.read_archive(path)
    config = config_from_dict(meta["config"])
    generator = ckpt.restore_paramset("generator", records, meta["sets"]["generator"])
    return generator, config.generator


def sr_image(generator: ParameterSet, spec: GeneratorSpec, lr: np.ndarray) -> np.ndarray:
    """(3,h,w) in [-1,1] -> (3,4h,4w) in [-1,1], eval-mode forward."""
    out = models.generator_forward(generator, spec, Tensor._make(np.asarray(lr, np.float32)[None]), training=False)
    return out.data[0]
