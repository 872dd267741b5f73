"""Image comparison metrics used for kernel matching and trend checks."""

from __future__ import annotations

import numpy as np

_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5  # 11x11 window


def _gaussian_taps(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Separable "valid" correlation; keeps SSIM statistics unbiased at borders.
    win = np.lib.stride_tricks.sliding_window_view(img, taps.size, axis=0)
    img = np.einsum("...k,k->...", win, taps)
    win = np.lib.stride_tricks.sliding_window_view(img, taps.size, axis=1)
    return np.einsum("...k,k->...", win, taps)


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean structural similarity with the standard 11x11 Gaussian window.

    Multi-channel inputs (H, W, C) are averaged over channels.  K1=0.01 and
    K2=0.03 on the given dynamic range.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., c], b[..., c], data_range) for c in range(a.shape[2])]))
    if min(a.shape) < 2 * _SSIM_RADIUS + 1:
        raise ValueError("image smaller than the 11x11 SSIM window")
    taps = _gaussian_taps(_SSIM_SIGMA, _SSIM_RADIUS)
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    aa = _filter_valid(a * a, taps) - mu_a * mu_a
    bb = _filter_valid(b * b, taps) - mu_b * mu_b
    ab = _filter_valid(a * b, taps) - mu_a * mu_b
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (aa + bb + c2)
    return float(np.mean(num / den))


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / mse))
