"""Seeded, order-independent application of kernel banks or lenses to datasets.

Per-image randomness comes from a counter-keyed generator seeded by
(master seed, image index in sorted-path order), so manifests and
pre-encode hashes are identical regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AberrateError
from .imageops import BOUNDARY_MODES, apply_kernel, center_crop_image, resize_shorter_side
from .lensdb import load_lens_record
from .psf import Psf
from .severity import kernel_id, load_bank

TASKS = ("classification", "detection")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

RESIZE_TARGET = 256
CROP_TARGET = 224
MIN_INPUT_SIDE = 224

JPEG_ENCODER = "pillow"


def per_item_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for one item, stable across worker layouts."""
    return np.random.default_rng((int(master_seed), int(index)))


def preprocess_classification(image: np.ndarray) -> np.ndarray:
    """Shorter side to 256 (bicubic, aspect preserved), center crop 224."""
    h, w = image.shape[:2]
    if min(h, w) < MIN_INPUT_SIDE:
        raise ValueError(
            f"image {h}x{w} too small for classification preprocessing "
            f"(shorter side must be >= {MIN_INPUT_SIDE})"
        )
    return center_crop_image(resize_shorter_side(image, RESIZE_TARGET), CROP_TARGET)


@dataclass(frozen=True)
class BankSource:
    bank_dir: str
    family: str
    severity: int


@dataclass(frozen=True)
class LensSource:
    lens_dir: str
    lens_id: str
    field_height: float


def parse_source(spec: str, bank_dir: str | None = None, lens_dir: str | None = None):
    """Parse "bank:FAMILY:SEV" or "lens:ID:FIELD" source specs."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"source must be bank:FAMILY:SEV or lens:ID:FIELD, got {spec!r}")
    kind, a, b = parts
    if kind == "bank":
        if bank_dir is None:
            raise ValueError("bank source requires --bank-dir")
        return BankSource(bank_dir=str(bank_dir), family=a, severity=int(b))
    if kind == "lens":
        if lens_dir is None:
            raise ValueError("lens source requires --lens-dir")
        return LensSource(lens_dir=str(lens_dir), lens_id=a, field_height=float(b))
    raise ValueError(f"unknown source kind {kind!r}")


@dataclass
class CorruptionJob:
    input_root: str
    output_root: str
    task: str
    source: BankSource | LensSource
    master_seed: int
    boundary: str = "zero"
    jpeg_quality: float = 0.9
    workers: int = 1
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}")
        if not 0.0 < self.jpeg_quality <= 1.0:
            raise ValueError("jpeg_quality must be in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _resolve_kernels(source) -> list[tuple[str, Psf]]:
    if isinstance(source, BankSource):
        bank = load_bank(source.bank_dir)
        return [
            (kernel_id(source.family, source.severity, member),
             bank.kernel(source.family, source.severity, member))
            for member in (0, 1)
        ]
    record = load_lens_record(Path(source.lens_dir))
    if record.lens_id != source.lens_id:
        raise AberrateError(
            f"lens directory holds {record.lens_id!r}, job wants {source.lens_id!r}"
        )
    fh = source.field_height
    azimuths = record.azimuths(fh)
    if not azimuths:
        raise AberrateError(f"lens {record.lens_id} has no field {fh}")
    return [
        (f"{record.lens_id}_f{fh:.1f}_{az}", record.kernels[(fh, az)])
        for az in sorted(azimuths)
    ]


def list_dataset(input_root: str | Path) -> list[str]:
    root = Path(input_root)
    paths = [
        p.relative_to(root).as_posix()
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(paths)


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def _quantize(image: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def _process_one(job: CorruptionJob, kernels, index: int, rel_path: str) -> dict:
    try:
        image = load_image(Path(job.input_root) / rel_path)
        if job.task == "classification":
            image = preprocess_classification(image)
        rng = per_item_rng(job.master_seed, index)
        choice = int(rng.integers(len(kernels)))
        kid, kernel = kernels[choice]
        blurred = apply_kernel(image, kernel, boundary=job.boundary)
        quantized = _quantize(blurred)
        digest = hashlib.sha256(quantized.tobytes()).hexdigest()
        out_path = Path(job.output_root) / Path(rel_path).with_suffix(".jpg")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(quantized).save(
            out_path, format="JPEG", quality=int(round(job.jpeg_quality * 100))
        )
        return {
            "path": rel_path,
            "kernel_id": kid,
            "pre_encode_sha256": digest,
            "status": "ok",
        }
    except (OSError, ValueError) as exc:
        return {"path": rel_path, "status": "failed", "error": str(exc)}


def corrupt_dataset(job: CorruptionJob) -> dict:
    """Run one corruption job; returns (and writes) the manifest."""
    kernels = _resolve_kernels(job.source)
    paths = list_dataset(job.input_root)
    if not paths:
        raise AberrateError(f"no images found under {job.input_root}")
    Path(job.output_root).mkdir(parents=True, exist_ok=True)
    if job.workers == 1:
        rows = [_process_one(job, kernels, i, p) for i, p in enumerate(paths)]
    else:
        with ThreadPoolExecutor(max_workers=job.workers) as pool:
            rows = list(
                pool.map(lambda ip: _process_one(job, kernels, *ip), enumerate(paths))
            )
    rows.sort(key=lambda r: r["path"])
    manifest = {
        "master_seed": job.master_seed,
        "job": {
            "task": job.task,
            "source": vars(job.source),
            "boundary": job.boundary,
            "jpeg_quality": job.jpeg_quality,
            "jpeg_encoder": JPEG_ENCODER,
            "input_root": str(job.input_root),
        },
        "config": job.config_echo,
        "records": rows,
    }
    manifest_path = Path(job.output_root) / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
