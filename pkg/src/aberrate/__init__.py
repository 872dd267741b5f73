"""Optical-aberration blur kernels: synthesis, calibration and application."""

from .psf import (
    CoefficientSet,
    Psf,
    PsfSynthesisConfig,
    WavelengthTriple,
    align_com,
    baseline_chromatic_coeffs,
    crop_encircled,
    resample,
    synthesize_psf,
)
from .psfpack import read_psfpack, write_psfpack

__version__ = "0.1.0"

__all__ = [
    "CoefficientSet",
    "Psf",
    "PsfSynthesisConfig",
    "WavelengthTriple",
    "align_com",
    "baseline_chromatic_coeffs",
    "crop_encircled",
    "resample",
    "synthesize_psf",
    "read_psfpack",
    "write_psfpack",
    "__version__",
]
