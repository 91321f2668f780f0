"""Weight initializers. He-normal for conv/dense, constants elsewhere."""

import numpy as np


def he_normal(rng: np.random.Generator, shape: tuple, fan_in: int, dtype=np.float32) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(dtype)


def conv_weight(rng: np.random.Generator, cout: int, cin: int, k: int, dtype=np.float32) -> np.ndarray:
    return he_normal(rng, (cout, cin, k, k), cin * k * k, dtype)


def dense_weight(rng: np.random.Generator, d: int, m: int, dtype=np.float32) -> np.ndarray:
    return he_normal(rng, (d, m), d, dtype)
