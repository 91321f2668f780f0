"""Evaluation metrics: L2, PSNR, SSIM, the deep-feature distance and the
perceptual error of a generator over a test set, plus CSV report assembly.

Images are (C,H,W) in [-1,1]; the dynamic range L is 2 throughout.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import models
from .nn import DimensionError, ParameterSet, Tensor

DYNAMIC_RANGE = 2.0
SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
NORM_EPS = 1e-10


@dataclass
class FeatureNet:
    """A named feature network for d_phi: a FeatureTap plus its parameters
    (None for the identity tap). External nets expose every conv layer as a
    tap layer; built-ins expose one."""

    name: str
    tap: models.FeatureTap
    params: ParameterSet | None = None

    def layers(self, image: np.ndarray) -> list[np.ndarray]:
        t = Tensor._make(np.asarray(image, dtype=np.float32)[None])
        if self.tap.network == "external":
            outs = models.external_forward(self.params, t)
            return [o.data[0] for o in outs]
        return [models.extract_features(self.tap, self.params, t).data[0]]


@dataclass
class MetricConfig:
    feature_nets: list[FeatureNet] = field(default_factory=list)
    layer_weights: dict[str, list[np.ndarray]] = field(default_factory=dict)  # per net name
    norm_eps: float = NORM_EPS
    ssim_window: int = SSIM_WINDOW


def l2_error(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise DimensionError(f"l2_error shape mismatch {x.shape} vs {y.shape}")
    return float(np.mean((np.asarray(x, np.float64) - np.asarray(y, np.float64)) ** 2))


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    mse = l2_error(x, y)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(DYNAMIC_RANGE**2 / mse))


def _window_means(a: np.ndarray, k: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(a, (k, k))
    return win.mean(axis=(2, 3))


def ssim(x: np.ndarray, y: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean local SSIM over sliding uniform windows on the luminance
    (channel-mean) plane. Constants: K1=0.01, K2=0.03, L=2."""
    if x.shape != y.shape:
        raise DimensionError(f"ssim shape mismatch {x.shape} vs {y.shape}")
    lx = np.asarray(x, np.float64).mean(axis=0)
    ly = np.asarray(y, np.float64).mean(axis=0)
    if lx.shape[0] < window or lx.shape[1] < window:
        raise DimensionError(f"image {lx.shape} smaller than ssim window {window}")
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    mx = _window_means(lx, window)
    my = _window_means(ly, window)
    mxx = _window_means(lx * lx, window)
    myy = _window_means(ly * ly, window)
    mxy = _window_means(lx * ly, window)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    s = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


def _unit_normalize(f: np.ndarray, eps: float) -> np.ndarray:
    norm = np.sqrt((f.astype(np.float64) ** 2).sum(axis=0, keepdims=True))
    return f / (norm + eps)


def d_phi(x: np.ndarray, y: np.ndarray, net: FeatureNet, config: MetricConfig | None = None) -> float:
    """Deep-feature distance: per layer, channel-unit-normalize at every
    spatial location, scale channels by w_l, sum squared differences over
    channels, average over H*W, sum over layers."""
    config = config or MetricConfig()
    if x.shape != y.shape:
        raise DimensionError(f"d_phi shape mismatch {x.shape} vs {y.shape}")
    fx_layers = net.layers(x)
    fy_layers = net.layers(y)
    weights = config.layer_weights.get(net.name)
    total = 0.0
    for l, (fx, fy) in enumerate(zip(fx_layers, fy_layers)):
        w = np.ones(fx.shape[0]) if weights is None else np.asarray(weights[l], np.float64)
        diff = w[:, None, None] * (_unit_normalize(fx, config.norm_eps) - _unit_normalize(fy, config.norm_eps))
        _, hl, wl = diff.shape
        total += float((diff.astype(np.float64) ** 2).sum() / (hl * wl))
    return total


def perceptual_error(generate, test_set, net: FeatureNet, config: MetricConfig | None = None) -> float:
    """Mean d_phi between generated and ground-truth images. `generate`
    maps an LR array (3,h,w) to an SR array (3,4h,4w)."""
    if len(test_set) == 0:
        raise ValueError("perceptual_error: empty test set")
    total = 0.0
    for lr, hr in test_set.pairs:
        total += d_phi(generate(lr), hr, net, config)
    return total / len(test_set)


@dataclass
class MetricsReport:
    dataset: str
    sample_count: int
    net_names: list[str]
    rows: list[dict]  # {"method", "L2", "SSIM", "PSNR", "PE_<net>"...}

    def columns(self) -> list[str]:
        return ["method", "L2", "SSIM", "PSNR"] + [f"PE_{n}" for n in self.net_names]

    def to_csv(self) -> str:
        lines = [",".join(self.columns())]
        for row in self.rows:
            cells = [str(row["method"])]
            for col in self.columns()[1:]:
                v = row[col]
                cells.append("inf" if np.isinf(v) else f"{v:.4f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, out_dir, timestamp: int | None = None) -> Path:
        ts = int(time.time()) if timestamp is None else timestamp
        path = Path(out_dir) / f"report_{self.dataset}_{ts}.csv"
        path.write_text(self.to_csv())
        return path


def parse_report(csv_text: str, dataset: str = "", sample_count: int = 0) -> MetricsReport:
    lines = [ln for ln in csv_text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    net_names = [c[3:] for c in header if c.startswith("PE_")]
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = {"method": cells[0]}
        for col, cell in zip(header[1:], cells[1:]):
            row[col] = float(cell)
        rows.append(row)
    return MetricsReport(dataset, sample_count, net_names, rows)


def evaluate_method(name: str, generate, test_set, nets: list[FeatureNet], config: MetricConfig | None = None) -> dict:
    """One report row: pixel metrics averaged over the set plus PE per net."""
    if len(test_set) == 0:
        raise ValueError("evaluate_method: empty test set")
    l2s, ssims, psnrs = [], [], []
    pes = {net.name: 0.0 for net in nets}
    for lr, hr in test_set.pairs:
        sr = generate(lr)
        l2s.append(l2_error(sr, hr))
        ssims.append(ssim(sr, hr))
        psnrs.append(psnr(sr, hr))
        for net in nets:
            pes[net.name] += d_phi(sr, hr, net, config)
    row = {
        "method": name,
        "L2": float(np.mean(l2s)),
        "SSIM": float(np.mean(ssims)),
        "PSNR": float(np.mean(psnrs)),
    }
    for net in nets:
        row[f"PE_{net.name}"] = pes[net.name] / len(test_set)
    return row


def build_report(method_rows: list[dict], dataset: str, sample_count: int, net_names: list[str]) -> MetricsReport:
    return MetricsReport(dataset, sample_count, net_names, method_rows)


def reference_nets(rec_extractor: ParameterSet | None = None, random_seed: int = 0) -> list[FeatureNet]:
    """Desk-scale d_phi reference networks: identity tap, a frozen random
    net, and (when provided) an extractor pretrained for reconstruction."""
    nets = [
        FeatureNet("identity", models.FeatureTap("identity")),
        FeatureNet("random", models.FeatureTap("random", seed=random_seed), models.build_random_extractor(random_seed)),
    ]
    if rec_extractor is not None:
        nets.append(FeatureNet("rec", models.FeatureTap("autoencoder"), rec_extractor))
    return nets
