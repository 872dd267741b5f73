"""Image-side primitives: kernel convolution and deterministic resizing.

Both convolution paths (direct sliding window and FFT) implement the same
true convolution with identical boundary handling, so they can cross-check
each other to float precision.
"""

from __future__ import annotations

import numpy as np

from .psf import Psf, resample_matrix

BOUNDARY_MODES = ("zero", "reflect")

# Direct path cost grows with kernel area; beyond this the FFT path wins.
_FFT_KERNEL_AREA = 81


def _pad_image(image: np.ndarray, pad_r: int, pad_c: int, boundary: str) -> np.ndarray:
    if boundary == "zero":
        return np.pad(image, ((pad_r, pad_r), (pad_c, pad_c), (0, 0)))
    if boundary == "reflect":
        return np.pad(image, ((pad_r, pad_r), (pad_c, pad_c), (0, 0)), mode="reflect")
    raise ValueError(f"unknown boundary mode {boundary!r}")


def _convolve_direct(padded: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape[1:]
    out = np.empty(
        (padded.shape[0] - kh + 1, padded.shape[1] - kw + 1, padded.shape[2])
    )
    for c in range(padded.shape[2]):
        windows = np.lib.stride_tricks.sliding_window_view(padded[..., c], (kh, kw))
        out[..., c] = np.einsum(
            "hwij,ij->hw", windows, kernel[c, ::-1, ::-1], optimize=True
        )
    return out


def _convolve_fft(padded: np.ndarray, kernel: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    kh, kw = kernel.shape[1:]
    full_h = padded.shape[0] + kh - 1
    full_w = padded.shape[1] + kw - 1
    out = np.empty((out_h, out_w, padded.shape[2]))
    for c in range(padded.shape[2]):
        fa = np.fft.rfft2(padded[..., c], s=(full_h, full_w))
        fb = np.fft.rfft2(kernel[c], s=(full_h, full_w))
        full = np.fft.irfft2(fa * fb, s=(full_h, full_w))
        out[..., c] = full[kh - 1 : kh - 1 + out_h, kw - 1 : kw - 1 + out_w]
    return out


def apply_kernel(
    image: np.ndarray,
    kernel: Psf,
    boundary: str = "zero",
    method: str = "auto",
) -> np.ndarray:
    """Convolve an (H, W, 3) float image with a 3-channel kernel.

    Each image channel is convolved (true convolution, not correlation)
    with the matching kernel channel.  Output is clamped to [0, 1].
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got {image.shape}")
    if kernel.data.shape[0] != image.shape[2]:
        raise ValueError(
            f"kernel has {kernel.data.shape[0]} channels, image has {image.shape[2]}"
        )
    kh, kw = kernel.shape
    padded = _pad_image(image, kh // 2, kw // 2, boundary)
    if method == "auto":
        method = "fft" if kh * kw > _FFT_KERNEL_AREA else "direct"
    if method == "direct":
        out = _convolve_direct(padded, kernel.data)
    elif method == "fft":
        out = _convolve_fft(padded, kernel.data, image.shape[0], image.shape[1])
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.clip(out, 0.0, 1.0)


def resize_image(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic resize (anti-aliased when shrinking) of an (H, W, C) image."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    a = resample_matrix(h, out_h, h / out_h)
    b = resample_matrix(w, out_w, w / out_w)
    out = np.einsum("oi,ijc,pj->opc", a, image, b, optimize=True)
    return np.clip(out, 0.0, 1.0)


def resize_shorter_side(image: np.ndarray, target: int) -> np.ndarray:
    """Resize so the shorter side equals `target`, preserving aspect ratio."""
    h, w = image.shape[:2]
    if h <= w:
        return resize_image(image, target, int(round(w * target / h)))
    return resize_image(image, int(round(h * target / w)), target)


def center_crop_image(image: np.ndarray, size: int) -> np.ndarray:
    h, w = image.shape[:2]
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop {size}")
    top = (h - size) // 2
    left = (w - size) // 2
    return image[top : top + size, left : left + size]
