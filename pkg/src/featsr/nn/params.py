"""Named parameter storage with paired Adam state, plus the Adam step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ConfigurationError, Tensor


@dataclass
class AdamConfig:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.0  # learning-rate decay: lr_t = lr / (1 + decay * (t - 1))

    def lr_at(self, t: int) -> float:
        return self.lr / (1.0 + self.decay * (t - 1))

    def validate(self):
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("betas must lie in (0,1)")
        if self.eps <= 0:
            raise ConfigurationError("eps must be positive")
        if self.decay < 0:
            raise ConfigurationError("decay must be non-negative")


class Param:
    __slots__ = ("value", "adam_m", "adam_v", "trainable")

    def __init__(self, value: np.ndarray, trainable: bool = True):
        self.value = Tensor(value, requires_grad=trainable)
        self.adam_m = np.zeros_like(self.value.data)
        self.adam_v = np.zeros_like(self.value.data)
        self.trainable = trainable


class ParameterSet:
    """Map name -> (value, grad slot, Adam moments). Non-trainable entries
    hold state like batch-norm running statistics."""

    def __init__(self):
        self.entries: dict[str, Param] = {}
        self.step_count: int = 0

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self.entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        self.entries[name] = Param(np.array(value), trainable)
        return self.entries[name].value

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def array(self, name: str) -> np.ndarray:
        """Raw ndarray of an entry (used for in-place state like BN stats)."""
        return self.entries[name].value.data

    def names(self) -> list[str]:
        return list(self.entries)

    def zero_grad(self):
        for p in self.entries.values():
            p.value.grad = None

    def merged(self, *others: "ParameterSet") -> "ParameterSet":
        """A view-like set sharing Param objects with the originals."""
        out = ParameterSet()
        for src in (self, *others):
            for name, p in src.entries.items():
                if name in out.entries:
                    raise ValueError(f"parameter name collision on merge: {name!r}")
                out.entries[name] = p
        return out


def adam_step(params: ParameterSet, config: AdamConfig):
    """One bias-corrected Adam update over every trainable entry with a
    populated gradient; zeroes all gradients afterward."""
    t = params.step_count + 1
    lr_t = config.lr_at(t)
    c1 = 1.0 - config.beta1**t
    c2 = 1.0 - config.beta2**t
    # m_hat / (sqrt(v_hat) + eps) == scale * m / (sqrt(v) + eps_hat); the
    # rewrite keeps the whole update in-place in the working dtype
    sqrt_c2 = float(np.sqrt(c2))
    scale = lr_t * sqrt_c2 / c1
    eps_hat = config.eps * sqrt_c2
    for name, p in params.entries.items():
        g = p.value.grad
        if not p.trainable or g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        g = g.astype(p.value.data.dtype, copy=False)
        p.adam_m *= config.beta1
        p.adam_m += (1.0 - config.beta1) * g
        p.adam_v *= config.beta2
        p.adam_v += (1.0 - config.beta2) * np.square(g)
        step = np.empty_like(p.adam_v)
        np.sqrt(p.adam_v, out=step)
        step += eps_hat
        np.divide(p.adam_m, step, out=step)
        step *= scale
        p.value.data -= step
    params.step_count = t
    params.zero_grad()
