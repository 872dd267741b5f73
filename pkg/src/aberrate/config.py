"""Tool configuration: one JSON file holding every numeric default.

Paper-unstated numbers (disk baseline radii per severity, matching
thresholds, the precomputed magnitude lookup that seeds each descent)
live here rather than inline in code, and the parsed config is echoed
into every manifest the tool writes.  The ABERRATE_CONFIG environment
variable overrides the --config flag.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

DEFAULT_CONFIG: dict = {
    "synthesis": {
        "grid_size": 256,
        "pad_factor": 2,
        "phase_scale": 1.0,
        "crop_size": 25,
        "bank_work_crop": 31,
    },
    "wavelengths_um": [0.6563, 0.5876, 0.4861],
    "mtf_pad": 256,
    # Disk-blur baseline parameters per severity 1..5 (radius px, Gaussian
    # pre-smoothing sigma px), following the public common-corruptions
    # defocus-blur defaults.
    "disk_severities": [
        {"radius": 3, "alias_sigma": 0.1},
        {"radius": 4, "alias_sigma": 0.5},
        {"radius": 6, "alias_sigma": 0.5},
        {"radius": 8, "alias_sigma": 0.5},
        {"radius": 10, "alias_sigma": 0.5},
    ],
    "match": {
        "step_waves": 0.1,
        "max_steps": 50,
        "mtf50_relative_tolerance": 0.05,
        "weights": {"mtf50": 1.0, "auc": 0.25, "ssim": 0.1, "psnr": 0.0},
        "psnr_floor_db": 35.0,
        "chart_size": 224,
    },
    # Magnitude (waves) seeding each coordinate descent, per family and
    # severity; produced by a one-time sweep against the disk baselines
    # above (`aberrate gen-bank --calibrate-init` regenerates them).
    "init_magnitudes": {
        "astigmatism": [0.2887, 0.4518, 0.7552, 1.037, 1.3701],
        "coma": [0.2449, 0.3664, 0.5766, 0.816, 1.2971],
        "defocus_spherical": [0.0751, 0.1383, 0.2635, 0.3998, 0.5773],
        "trefoil": [0.2727, 0.4199, 0.6759, 0.9383, 1.338],
    },
    "lens": {
        "hires_grid": 256,
        "hires_crop": 255,
        "hires_pitch_um": 1.0,
        "exclude_edge_field": True,
        "encircled_fraction": 0.995,
    },
    "corrupt": {
        "boundary": "zero",
        "jpeg_quality": 0.9,
        "workers": 4,
    },
    "augment": {
        "max_severity": 3,
        "alpha": 1.0,
        "channel_means": [0.485, 0.456, 0.406],
        "channel_stds": [0.229, 0.224, 0.225],
    },
}

ENV_VAR = "ABERRATE_CONFIG"


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Defaults merged with an optional JSON file; env var wins over `path`."""
    env_path = os.environ.get(ENV_VAR)
    if env_path:
        path = env_path
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return _merge(DEFAULT_CONFIG, data)
