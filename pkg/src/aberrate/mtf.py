"""Modulation transfer functions: slices, summary metrics and pitch derivation.

The MTF is the magnitude of the kernel's 2D Fourier transform normalized to
one at DC.  Directional slices sample the nearest FFT bins along the 0, 45,
90 and 135 degree rays, with frequency measured as the Euclidean bin radius
in cycles/px, up to the Nyquist frequency 0.5.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .psf import CHANNELS, Psf

NYQUIST_CPP = 0.5
ORIENTATIONS_DEG = (0, 45, 90, 135)

#: Relative field heights; the outermost one is the "edge" field.
FIELD_HEIGHTS = (0.0, 0.3, 0.5, 0.7, 0.9)
EDGE_FIELD = 0.9

#: Sensor pitch range common to CMOS/CCD parts; values outside only warn.
PITCH_RANGE_UM = (1.0, 20.0)


@dataclass
class MtfCurve:
    orientation_deg: int
    frequencies: np.ndarray  # cycles/px, strictly increasing, <= 0.5
    modulation: np.ndarray

    def __post_init__(self) -> None:
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.modulation = np.asarray(self.modulation, dtype=float)
        if self.frequencies.size == 0:
            raise ValueError("empty MTF curve")
        if self.frequencies.size != self.modulation.size:
            raise ValueError("frequency/modulation length mismatch")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")


@dataclass
class MtfSummary:
    mtf50: float  # cycles/px
    mtf20: float  # cycles/px
    auc: float
    mtf50_saturated: bool = False
    mtf20_saturated: bool = False

    @property
    def saturated(self) -> bool:
        return self.mtf50_saturated or self.mtf20_saturated

    def to_jsonable(self) -> dict:
        return {
            "mtf50_cpp": self.mtf50,
            "mtf20_cpp": self.mtf20,
            "auc": self.auc,
            "mtf50_saturated": self.mtf50_saturated,
            "mtf20_saturated": self.mtf20_saturated,
        }


@dataclass
class MtfMap:
    """FFT-shifted 2D MTF plus the four directional slices."""

    array: np.ndarray
    curves: dict[int, MtfCurve]


def _channel_index(channel: str | int) -> int:
    if isinstance(channel, str):
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}")
        return CHANNELS.index(channel)
    if channel not in (0, 1, 2):
        raise ValueError(f"channel index out of range: {channel}")
    return int(channel)


def mtf_from_psf(psf: Psf, channel: str | int = "green", pad_to: int | None = None) -> MtfMap:
    """2D MTF and four orientation slices of one kernel channel.

    `pad_to` zero-pads the kernel before the FFT for a finer frequency
    axis; padding a compactly supported kernel only interpolates the MTF.
    """
    k = psf.data[_channel_index(channel)]
    total = k.sum()
    if abs(total - 1.0) > 1e-3:
        raise ValueError(
            f"kernel channel is not l1-normalized (sum={total:.6f}); "
            "normalize before computing the MTF"
        )
    size = max(k.shape)
    if pad_to is not None:
        if pad_to < size:
            raise ValueError(f"pad_to={pad_to} smaller than kernel {k.shape}")
        size = pad_to
    embedded = np.zeros((size, size))
    embedded[: k.shape[0], : k.shape[1]] = k
    mag = np.abs(np.fft.fft2(embedded))
    mtf2d = mag / mag[0, 0]

    curves: dict[int, MtfCurve] = {}
    n_axis = size // 2 + 1
    axis_freqs = np.arange(n_axis) / size
    axis_freqs = axis_freqs[axis_freqs <= NYQUIST_CPP + 1e-12]
    qa = np.arange(axis_freqs.size)
    curves[0] = MtfCurve(0, axis_freqs, mtf2d[0, qa])
    curves[90] = MtfCurve(90, axis_freqs, mtf2d[qa, 0])
    n_diag = int(np.floor(NYQUIST_CPP * size / np.sqrt(2.0) + 1e-9)) + 1
    qd = np.arange(n_diag)
    diag_freqs = qd * np.sqrt(2.0) / size
    curves[45] = MtfCurve(45, diag_freqs, mtf2d[qd, qd])
    curves[135] = MtfCurve(135, diag_freqs, mtf2d[qd, (size - qd) % size])
    return MtfMap(array=np.fft.fftshift(mtf2d), curves=curves)


def _first_downward_crossing(freqs: np.ndarray, mod: np.ndarray, level: float):
    below = np.nonzero(mod < level)[0]
    start = below[0] if below.size else None
    if start is None or start == 0:
        # Never crosses downward (or starts below, which a normalized DC
        # sample prevents): saturated at Nyquist.
        return NYQUIST_CPP, True
    i = start - 1
    f = freqs[i] + (mod[i] - level) / (mod[i] - mod[start]) * (freqs[start] - freqs[i])
    return float(f), False


def summarize(curve: MtfCurve) -> MtfSummary:
    """MTF50/MTF20 as first downward crossings, plus trapezoidal AUC."""
    f, m = curve.frequencies, curve.modulation
    mtf50, sat50 = _first_downward_crossing(f, m, 0.5)
    mtf20, sat20 = _first_downward_crossing(f, m, 0.2)
    auc = float(np.trapezoid(m, f))
    return MtfSummary(mtf50, mtf20, auc, sat50, sat20)


def orientation_summaries(psf: Psf, channel: str | int = "green", pad_to: int | None = None) -> dict[int, MtfSummary]:
    curves = mtf_from_psf(psf, channel=channel, pad_to=pad_to).curves
    return {deg: summarize(curves[deg]) for deg in ORIENTATIONS_DEG}


def orientation_averaged_mtf50(psf: Psf, channel: str | int = "green", pad_to: int | None = None) -> float:
    summaries = orientation_summaries(psf, channel=channel, pad_to=pad_to)
    return float(np.mean([s.mtf50 for s in summaries.values()]))


def analytic_diffraction_mtf(freq_cpp, cutoff_cpp: float):
    """Aberration-free circular-aperture MTF at the given frequencies."""
    nu = np.clip(np.asarray(freq_cpp, dtype=float) / cutoff_cpp, 0.0, 1.0)
    return (2.0 / np.pi) * (np.arccos(nu) - nu * np.sqrt(1.0 - nu * nu))


def derive_pixel_pitch(
    field_stacks: dict[float, list[Psf]],
    exclude_edge: bool = True,
    pad_to: int | None = None,
) -> float:
    """Virtual sensor pitch from the average MTF20 of hi-res kernels.

    `field_stacks` maps a relative field height to that field's kernels
    (one per azimuth) sampled at a uniform fine pitch.  MTF20 is averaged
    over orientations, channels, azimuths and the retained fields (the
    edge field is dropped when `exclude_edge`), taken as the sensor
    Nyquist frequency, and inverted to a pitch.
    """
    if not field_stacks:
        raise ValueError("no field stacks given")
    pitches = {p.pitch_um for stack in field_stacks.values() for p in stack}
    if len(pitches) != 1 or None in pitches:
        raise ValueError(f"kernels must share one physical pitch, got {pitches}")
    source_pitch = pitches.pop()
    retained = {
        fh: stack
        for fh, stack in field_stacks.items()
        if not (exclude_edge and fh >= EDGE_FIELD)
    }
    if not retained:
        raise ValueError("all fields excluded from pitch derivation")
    per_field = []
    for stack in retained.values():
        values = []
        for kernel in stack:
            pad = pad_to if pad_to is not None else max(256, *kernel.shape)
            for channel in CHANNELS:
                summaries = orientation_summaries(kernel, channel=channel, pad_to=pad)
                values.append(np.mean([s.mtf20 for s in summaries.values()]))
        per_field.append(np.mean(values))
    f_nyquist = float(np.mean(per_field)) / source_pitch  # cycles/um
    if f_nyquist <= 0:
        raise ValueError("zero MTF20; cannot derive a pitch")
    pitch = 1.0 / (2.0 * f_nyquist)
    if not PITCH_RANGE_UM[0] <= pitch <= PITCH_RANGE_UM[1]:
        warnings.warn(
            f"derived pitch {pitch:.2f} um outside the common sensor range "
            f"{PITCH_RANGE_UM}",
            stacklevel=2,
        )
    return pitch
