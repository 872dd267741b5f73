"""Pupil-plane wavefronts and their propagation to intensity PSF kernels.

The pipeline is: sum Fringe terms into a wavefront W (in waves) on a
circular pupil, form the pupil function Circ * exp(-2j*pi*W), FFT to the
image plane and take the squared magnitude.  Coefficients are interpreted
directly in waves (phase scale fixed to 1), so the per-channel wavelength
is carried as metadata only.

Kernels are immutable-by-convention ``Psf`` values: 3 channels, non-negative,
l1-normalized per channel, odd-sided once aligned or cropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import zernike
from .errors import DegenerateKernelError

CHANNELS = ("red", "green", "blue")

#: Fraunhofer C / d / F lines in micrometers.
DEFAULT_WAVELENGTHS_UM = (0.6563, 0.5876, 0.4861)


@dataclass(frozen=True)
class WavelengthTriple:
    red: float = DEFAULT_WAVELENGTHS_UM[0]
    green: float = DEFAULT_WAVELENGTHS_UM[1]
    blue: float = DEFAULT_WAVELENGTHS_UM[2]

    def __post_init__(self) -> None:
        for name in CHANNELS:
            if not getattr(self, name) > 0:
                raise ValueError(f"wavelength {name} must be positive")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.red, self.green, self.blue)


def _clean_channel(values: Mapping[int, float] | None) -> dict[int, float]:
    out: dict[int, float] = {}
    for key, val in (values or {}).items():
        fringe = int(key)
        zernike.fringe_index(fringe)  # range check
        val = float(val)
        if not math.isfinite(val):
            raise ValueError(f"coefficient for Fringe {fringe} is not finite")
        if val != 0.0:
            out[fringe] = val
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class CoefficientSet:
    """Per-channel Fringe coefficients in waves; absent indices are zero."""

    red: Mapping[int, float] = field(default_factory=dict)
    green: Mapping[int, float] = field(default_factory=dict)
    blue: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in CHANNELS:
            object.__setattr__(self, name, _clean_channel(getattr(self, name)))

    def channel(self, name: str) -> dict[int, float]:
        if name not in CHANNELS:
            raise ValueError(f"unknown channel {name!r}")
        return dict(getattr(self, name))

    def added(self, fringe: int, value: float) -> "CoefficientSet":
        """New set with `value` added at one index on every channel."""
        chans = {}
        for name in CHANNELS:
            ch = self.channel(name)
            ch[fringe] = ch.get(fringe, 0.0) + value
            chans[name] = ch
        return CoefficientSet(**chans)

    def is_empty(self) -> bool:
        return not (self.red or self.green or self.blue)

    def to_jsonable(self) -> dict:
        return {
            name: {str(k): v for k, v in self.channel(name).items()}
            for name in CHANNELS
        }

    @classmethod
    def from_jsonable(cls, data: Mapping) -> "CoefficientSet":
        """Accepts {"red": {...}, ...} or {"all": {...}} applied to each channel."""
        if "all" in data:
            common = {int(k): float(v) for k, v in data["all"].items()}
            return cls(red=common, green=common, blue=common)
        return cls(
            red={int(k): float(v) for k, v in data.get("red", {}).items()},
            green={int(k): float(v) for k, v in data.get("green", {}).items()},
            blue={int(k): float(v) for k, v in data.get("blue", {}).items()},
        )

    @classmethod
    def uniform(cls, values: Mapping[int, float]) -> "CoefficientSet":
        """Same coefficients on all three channels."""
        return cls(red=dict(values), green=dict(values), blue=dict(values))


def baseline_chromatic_coeffs() -> CoefficientSet:
    """The chromatic base wavefront shared by all synthesized bank kernels.

    Small defocus/spherical terms that differ per color channel; every
    optical kernel starts from these so that even a single dominant
    aberration shows chromatic variation.
    """
    return CoefficientSet(
        red={4: 0.32671, 9: 0.088223, 15: -0.061867, 16: -4.7631e-06},
        green={4: 0.11273, 9: 0.095923, 15: -0.069497, 16: -5.3967e-06},
        blue={4: -0.41772, 9: 0.10825, 15: -0.085119, 16: -6.7436e-06},
    )


class PupilGrid:
    """Square sampling grid with the inscribed circle mapped to the unit disk."""

    def __init__(self, n: int):
        if n < 64 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 64, got {n}")
        self.n = int(n)
        center = (n - 1) / 2.0
        coords = np.arange(n, dtype=float) - center
        yy, xx = np.meshgrid(coords, coords, indexing="ij")
        radius = n / 2.0
        self.rho = np.hypot(yy, xx) / radius
        self.phi = np.arctan2(yy, xx)
        self.mask = self.rho <= 1.0


@lru_cache(maxsize=8)
def _pupil_grid(n: int) -> PupilGrid:
    return PupilGrid(n)


@dataclass(frozen=True)
class PsfSynthesisConfig:
    grid_size: int = 256
    pad_factor: int = 2
    phase_scale: float = 1.0
    crop_size: int = 25

    def __post_init__(self) -> None:
        if self.pad_factor < 1:
            raise ValueError("pad factor must be >= 1")
        if self.crop_size % 2 == 0 or self.crop_size < 1:
            raise ValueError("crop size must be odd and positive")
        if self.crop_size > self.fft_size:
            raise ValueError(
                f"crop size {self.crop_size} exceeds FFT output {self.fft_size}"
            )

    @property
    def fft_size(self) -> int:
        return self.grid_size * self.pad_factor

    @property
    def diffraction_cutoff_cpp(self) -> float:
        # Pupil diameter over FFT size, in cycles per PSF pixel.
        return 1.0 / self.pad_factor


@dataclass
class Psf:
    """3 x H x W non-negative kernel with pitch and provenance metadata.

    `pitch_um` is None for normalized (synthetic, pitch-free) kernels.
    Treat instances as immutable values.
    """

    data: np.ndarray
    pitch_um: float | None = None
    normalized: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise ValueError(f"PSF data must be (3, H, W), got {self.data.shape}")
        if self.data.min() < 0:
            raise ValueError("PSF samples must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def channel_sums(self) -> np.ndarray:
        return self.data.sum(axis=(1, 2))

    def replaced(self, data: np.ndarray, **meta) -> "Psf":
        kwargs = {
            "pitch_um": self.pitch_um,
            "normalized": self.normalized,
            "provenance": dict(self.provenance),
        }
        kwargs.update(meta)
        return Psf(data=data, **kwargs)


def l1_normalize(psf: Psf) -> Psf:
    sums = psf.channel_sums()
    if np.any(sums <= 0):
        raise DegenerateKernelError("cannot normalize a channel with zero energy")
    return psf.replaced(psf.data / sums[:, None, None], normalized=True)


def build_wavefront(
    coeffs: CoefficientSet, grid: PupilGrid, channel: str
) -> np.ndarray:
    """Evaluate W = sum_i A_i Z_i (in waves) on the masked pupil grid.

    Returns a full (n, n) array that is zero outside the mask.
    """
    values = coeffs.channel(channel)
    w = np.zeros((grid.n, grid.n), dtype=np.float64)
    if not values:
        return w
    rho = grid.rho[grid.mask]
    phi = grid.phi[grid.mask]
    acc = np.zeros_like(rho)
    for fringe, amp in values.items():
        acc += amp * zernike.zernike_field(fringe, rho, phi)
    w[grid.mask] = acc
    return w


def _center_crop_2d(arr: np.ndarray, size: int, center: int) -> np.ndarray:
    half = (size - 1) // 2
    return arr[center - half : center + half + 1, center - half : center + half + 1]


def synthesize_psf(
    coeffs: CoefficientSet,
    wavelengths: WavelengthTriple | None = None,
    config: PsfSynthesisConfig | None = None,
) -> Psf:
    """Propagate a coefficient set to a 3-channel intensity PSF.

    Per channel: |FFT(Circ * exp(-2j*pi*W))|^2, FFT-shifted so the optical
    axis lands on the array center bin, center-cropped and l1-normalized.
    Deterministic for fixed inputs.
    """
    wavelengths = wavelengths or WavelengthTriple()
    config = config or PsfSynthesisConfig()
    grid = _pupil_grid(config.grid_size)
    m = config.fft_size
    lo = (m - grid.n) // 2
    channels = []
    for name in CHANNELS:
        w = build_wavefront(coeffs, grid, name)
        if not np.isfinite(w).all():
            raise ValueError(f"wavefront for channel {name} contains NaN/inf")
        pupil = np.where(
            grid.mask,
            np.exp(-2j * np.pi * config.phase_scale * w),
            0.0,
        )
        embedded = np.zeros((m, m), dtype=np.complex128)
        embedded[lo : lo + grid.n, lo : lo + grid.n] = pupil
        amp = np.fft.fftshift(np.fft.fft2(embedded))
        intensity = (amp.real**2 + amp.imag**2) / (m * m)
        channels.append(_center_crop_2d(intensity, config.crop_size, m // 2))
    data = np.stack(channels)
    psf = Psf(
        data=data,
        pitch_um=None,
        provenance={
            "kind": "synthesized",
            "coefficients": coeffs.to_jsonable(),
            "wavelengths_um": list(wavelengths.as_tuple()),
            "grid_size": config.grid_size,
            "pad_factor": config.pad_factor,
            "phase_scale": config.phase_scale,
            "crop_size": config.crop_size,
        },
    )
    return l1_normalize(psf)


def synthesize_psf_uncropped(
    coeffs: CoefficientSet,
    config: PsfSynthesisConfig | None = None,
) -> np.ndarray:
    """Full pre-crop, pre-normalization intensity stack (3, M, M).

    Useful for energy checks: total intensity equals the pupil-mask pixel
    count for the FFT normalization used here.
    """
    config = config or PsfSynthesisConfig()
    grid = _pupil_grid(config.grid_size)
    m = config.fft_size
    lo = (m - grid.n) // 2
    out = np.empty((3, m, m))
    for k, name in enumerate(CHANNELS):
        w = build_wavefront(coeffs, grid, name)
        pupil = np.where(grid.mask, np.exp(-2j * np.pi * config.phase_scale * w), 0.0)
        embedded = np.zeros((m, m), dtype=np.complex128)
        embedded[lo : lo + grid.n, lo : lo + grid.n] = pupil
        amp = np.fft.fftshift(np.fft.fft2(embedded))
        out[k] = (amp.real**2 + amp.imag**2) / (m * m)
    return out


def center_of_mass(psf: Psf) -> tuple[float, float]:
    """Intensity centroid (row, col) over the summed channels."""
    weights = psf.data.sum(axis=0)
    total = weights.sum()
    if total <= 0:
        raise DegenerateKernelError("all-zero kernel has no center of mass")
    h, w = weights.shape
    rows = np.arange(h, dtype=float)
    cols = np.arange(w, dtype=float)
    com_r = float((weights.sum(axis=1) * rows).sum() / total)
    com_c = float((weights.sum(axis=0) * cols).sum() / total)
    return com_r, com_c


def _shift_zero_fill(data: np.ndarray, dr: int, dc: int) -> np.ndarray:
    out = np.zeros_like(data)
    h, w = data.shape[1], data.shape[2]
    src_r = slice(max(0, -dr), h - max(0, dr))
    dst_r = slice(max(0, dr), h - max(0, -dr))
    src_c = slice(max(0, -dc), w - max(0, dc))
    dst_c = slice(max(0, dc), w - max(0, -dc))
    out[:, dst_r, dst_c] = data[:, src_r, src_c]
    return out


def align_com(psf: Psf, max_loss: float = 1e-4) -> Psf:
    """Integer-pixel shift of all channels so the centroid hits the center.

    The residual offset is at most 0.5 px per axis.  If the shift would
    push more than `max_loss` of the total energy off the edge, the kernel
    is zero-padded first (keeping odd dimensions).
    """
    com_r, com_c = center_of_mass(psf)
    h, w = psf.shape
    dr = int(np.rint((h - 1) / 2.0 - com_r))
    dc = int(np.rint((w - 1) / 2.0 - com_c))
    if dr == 0 and dc == 0:
        return psf
    data = psf.data
    total = data.sum()
    kept = _shift_zero_fill(data, dr, dc).sum()
    if total - kept > max_loss * total:
        pad_r, pad_c = abs(dr), abs(dc)
        data = np.pad(data, ((0, 0), (pad_r, pad_r), (pad_c, pad_c)))
    shifted = _shift_zero_fill(data, dr, dc)
    out = psf.replaced(shifted)
    return l1_normalize(out) if psf.normalized else out


def crop_encircled(psf: Psf, fraction: float = 0.995) -> Psf:
    """Smallest centered odd-sided crop keeping `fraction` of the energy.

    Crops are centered squares, clipped per axis for non-square kernels;
    channels are re-normalized afterwards.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    weights = psf.data.sum(axis=0)
    total = weights.sum()
    if total <= 0:
        raise DegenerateKernelError("all-zero kernel cannot be cropped")
    h, w = weights.shape
    c_r, c_c = (h - 1) // 2, (w - 1) // 2
    k_max = max(c_r, h - 1 - c_r, c_c, w - 1 - c_c)
    for k in range(k_max + 1):
        rs = slice(max(0, c_r - k), min(h, c_r + k + 1))
        cs = slice(max(0, c_c - k), min(w, c_c + k + 1))
        if weights[rs, cs].sum() >= fraction * total:
            break
    if (rs.stop - rs.start, cs.stop - cs.start) == (h, w):
        return psf
    return l1_normalize(psf.replaced(psf.data[:, rs, cs]))


def center_crop(psf: Psf, size: int) -> Psf:
    """Odd-sided centered crop to a fixed footprint, then re-normalize."""
    if size % 2 == 0:
        raise ValueError("crop size must be odd")
    h, w = psf.shape
    if size > min(h, w):
        raise ValueError(f"crop size {size} exceeds kernel {h}x{w}")
    half = (size - 1) // 2
    c_r, c_c = (h - 1) // 2, (w - 1) // 2
    cropped = psf.data[:, c_r - half : c_r + half + 1, c_c - half : c_c + half + 1]
    return l1_normalize(psf.replaced(cropped))


def _cubic_weight(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom cubic, a = -0.5.
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inner = ax <= 1.0
    outer = (ax > 1.0) & (ax < 2.0)
    out[inner] = (1.5 * ax[inner] - 2.5) * ax[inner] ** 2 + 1.0
    out[outer] = ((-0.5 * ax[outer] + 2.5) * ax[outer] - 4.0) * ax[outer] + 2.0
    return out


def resample_matrix(in_size: int, out_size: int, scale: float) -> np.ndarray:
    """Dense (out, in) cubic resampling matrix with centers aligned.

    When downsampling (scale > 1) the kernel support is widened by the
    scale factor (anti-aliasing); rows are normalized to sum to one, so
    flat fields are preserved exactly.
    """
    x = (np.arange(out_size, dtype=float) - (out_size - 1) / 2.0) * scale
    x += (in_size - 1) / 2.0
    support = max(scale, 1.0)
    idx = np.arange(in_size, dtype=float)
    offsets = (x[:, None] - idx[None, :]) / support
    weights = _cubic_weight(offsets)
    row_sums = weights.sum(axis=1, keepdims=True)
    if np.any(row_sums <= 0):
        raise ValueError("resampling window left an output sample uncovered")
    return weights / row_sums


def _resampled_size(in_size: int, scale: float) -> int:
    out = max(1, int(round(in_size / scale)))
    if out % 2 == 0:
        out += 1
    return out


def resample(psf: Psf, target_pitch_um: float) -> Psf:
    """Anti-aliased bicubic downsampling of a kernel to a coarser pitch."""
    if psf.pitch_um is None:
        raise ValueError("source kernel has no physical pitch")
    scale = target_pitch_um / psf.pitch_um
    if scale < 1.0 - 1e-9:
        raise ValueError(
            f"upsampling rejected: target pitch {target_pitch_um} um is finer "
            f"than source {psf.pitch_um} um"
        )
    if abs(scale - 1.0) <= 1e-12:
        return psf.replaced(psf.data.copy(), pitch_um=float(target_pitch_um))
    h, w = psf.shape
    a = resample_matrix(h, _resampled_size(h, scale), scale)
    b = resample_matrix(w, _resampled_size(w, scale), scale)
    out = np.einsum("oi,cij,pj->cop", a, psf.data, b, optimize=True)
    out = np.clip(out, 0.0, None)
    resampled = psf.replaced(out, pitch_um=float(target_pitch_um))
    return l1_normalize(resampled) if psf.normalized else resampled
