"""Blur-augmentation mixing math and the Dirichlet cascade gates.

Each image is convolved with a uniformly drawn bank kernel and blended
with the original by a Beta(alpha, alpha) weight, then normalized to the
dataset channel statistics.  Draws are keyed by (seed, image index), so a
fixed seed reproduces batches bit-identically at any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrupt import per_item_rng
from .imageops import apply_kernel
from .psf import Psf
from .severity import SeverityBank, kernel_id


@dataclass
class AugmentConfig:
    kernels: list[tuple[str, Psf]]
    alpha: float = 1.0
    channel_means: tuple[float, float, float] = (0.485, 0.456, 0.406)
    channel_stds: tuple[float, float, float] = (0.229, 0.224, 0.225)
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.kernels:
            raise ValueError("augmentation requires a non-empty kernel bank")
        if not self.alpha > 0:
            raise ValueError("beta shape alpha must be positive")
        if any(s <= 0 for s in self.channel_stds):
            raise ValueError("channel stds must be positive")

    @classmethod
    def from_bank(cls, bank: SeverityBank, max_severity: int = 3, **kwargs) -> "AugmentConfig":
        kernels = [
            (kernel_id(e.family, e.severity, e.pair_member), e.kernel)
            for e in sorted(
                bank.entries, key=lambda e: (e.family, e.severity, e.pair_member)
            )
            if e.severity <= max_severity
        ]
        return cls(kernels=kernels, **kwargs)


@dataclass(frozen=True)
class CascadeConfig:
    """Flat Dirichlet over four augmentation gates."""

    dimensions: int = 4
    concentration: float = 1.0

    def __post_init__(self) -> None:
        if self.dimensions != 4 or self.concentration != 1.0:
            raise ValueError("the cascade uses a fixed flat 4D Dirichlet")


def draw_for_index(config: AugmentConfig, index: int) -> tuple[int, float]:
    """The (kernel index, mixing weight) pair image `index` will use."""
    rng = per_item_rng(config.seed, index)
    kernel_idx = int(rng.integers(len(config.kernels)))
    mix = float(rng.beta(config.alpha, config.alpha))
    return kernel_idx, mix


def augment_image(
    image: np.ndarray,
    config: AugmentConfig,
    index: int,
    draw: tuple[int, float] | None = None,
) -> np.ndarray:
    """Blend one image with its blurred copy; no normalization applied.

    `draw` replays or forces a specific (kernel index, mix) pair, e.g. for
    audits; by default the keyed per-index draw is used.
    """
    kernel_idx, mix = draw if draw is not None else draw_for_index(config, index)
    _, kernel = config.kernels[kernel_idx]
    blurred = apply_kernel(image, kernel, boundary="reflect")
    return mix * blurred + (1.0 - mix) * np.asarray(image, dtype=np.float64)


def normalize_batch(batch: np.ndarray, config: AugmentConfig) -> np.ndarray:
    means = np.asarray(config.channel_means)
    stds = np.asarray(config.channel_stds)
    return (batch - means) / stds


def augment_batch(batch: np.ndarray, config: AugmentConfig, start_index: int = 0) -> np.ndarray:
    """Augment a (B, H, W, 3) float batch; image k draws at index start+k.

    Output is channel-normalized; blending happens in linear float space
    and is never clamped here.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[0] == 0:
        raise ValueError(f"batch must be non-empty (B, H, W, 3), got {batch.shape}")
    blended = np.stack(
        [augment_image(batch[k], config, start_index + k) for k in range(batch.shape[0])]
    )
    return normalize_batch(blended, config)


def cascade_gates(
    cascade: CascadeConfig, seed: int, index: int
) -> tuple[float, float]:
    """Per-image gate probabilities (p_external, p_optics).

    One flat-Dirichlet draw; the first two components gate the external
    augmentation hook and the optics branch, the rest are auxiliary mass
    keeping each marginal Beta(1, 3).
    """
    rng = per_item_rng(seed, index)
    probs = rng.dirichlet(np.full(cascade.dimensions, cascade.concentration))
    return float(probs[0]), float(probs[1])


def apply_cascade(
    image: np.ndarray,
    config: AugmentConfig,
    cascade: CascadeConfig,
    index: int,
    external_hook=None,
) -> np.ndarray:
    """Gate the external augmentation and the optics branch independently.

    `external_hook(image) -> image` stands in for a third-party
    augmentation; each branch fires with its Dirichlet-drawn probability
    for this image.  Output is not normalized.
    """
    p_external, p_optics = cascade_gates(cascade, config.seed, index)
    rng = per_item_rng(config.seed ^ 0x5CADE, index)
    out = np.asarray(image, dtype=np.float64)
    if external_hook is not None and rng.random() < p_external:
        out = external_hook(out)
    if rng.random() < p_optics:
        out = augment_image(out, config, index)
    return out
