"""Shared fixtures: toy image datasets, mini kernel banks, virtual lenses."""

import numpy as np
import pytest
from PIL import Image

from aberrate import severity
from aberrate.imageops import resize_image
from aberrate.lensdb import (
    AZIMUTH_LABELS,
    FIELD_HEIGHTS,
    ON_AXIS_AZIMUTH,
    VirtualLens,
)
from aberrate.psf import CoefficientSet


def toy_image(seed: int, size: int = 96) -> np.ndarray:
    """Smooth random RGB image in [0, 1] with enough structure for SSIM."""
    rng = np.random.default_rng(seed)
    coarse = rng.random((6, 6, 3))
    img = resize_image(coarse, size, size)
    img = 0.85 * img + 0.15 * rng.random((size, size, 3))
    return np.clip(img, 0.0, 1.0)


def write_toy_dataset(root, count: int, size: int = 96, seed: int = 0) -> list:
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        arr = (toy_image(seed * 1000 + k, size) * 255).round().astype(np.uint8)
        path = root / f"img_{k:03d}.png"
        Image.fromarray(arr).save(path)
        paths.append(path)
    return paths


def field_scaled_lens(lens_id: str, scale: float = 1.0) -> VirtualLens:
    """Virtual lens whose aberrations grow with field height."""
    coeffs = {}
    for fh in FIELD_HEIGHTS:
        azimuths = (ON_AXIS_AZIMUTH,) if fh == 0.0 else AZIMUTH_LABELS
        for az in azimuths:
            coeffs[(fh, az)] = CoefficientSet.uniform(
                {4: scale * (0.2 + 1.2 * fh), 5: scale * 0.5 * fh}
            )
    return VirtualLens(lens_id=lens_id, coefficients=coeffs)


def edge_degraded_lens(lens_id: str, edge_mag: float) -> VirtualLens:
    """Lenses identical at inner fields, degrading only at the edge field."""
    coeffs = {}
    for fh in FIELD_HEIGHTS:
        azimuths = (ON_AXIS_AZIMUTH,) if fh == 0.0 else AZIMUTH_LABELS
        for az in azimuths:
            c = {4: 0.15 + 0.3 * fh, 7: 0.1 * fh}
            if fh >= 0.9:
                c = {4: c[4] + edge_mag, 7: c[7] + 0.3 * edge_mag}
            coeffs[(fh, az)] = CoefficientSet.uniform(c)
    return VirtualLens(lens_id=lens_id, coefficients=coeffs)


@pytest.fixture(scope="session")
def disk_specs():
    return [
        severity.DiskKernelSpec(3, 0.1),
        severity.DiskKernelSpec(4, 0.5),
        severity.DiskKernelSpec(6, 0.5),
        severity.DiskKernelSpec(8, 0.5),
        severity.DiskKernelSpec(10, 0.5),
    ]


@pytest.fixture(scope="session")
def init_magnitudes():
    from aberrate.config import DEFAULT_CONFIG

    return DEFAULT_CONFIG["init_magnitudes"]


@pytest.fixture(scope="session")
def mini_bank(disk_specs, init_magnitudes):
    """One-family bank: fast enough for unit tests of bank consumers."""
    return severity.build_severity_bank(
        disk_specs, init_magnitudes, families=["defocus_spherical"]
    )


@pytest.fixture(scope="session")
def mini_bank_dir(mini_bank, tmp_path_factory):
    bank_dir = tmp_path_factory.mktemp("mini_bank")
    severity.write_bank(mini_bank, bank_dir, config_echo={"note": "mini"})
    return bank_dir
