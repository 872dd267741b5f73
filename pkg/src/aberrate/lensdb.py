"""Lens ingestion, quality scoring, subset selection and category projection.

A lens is a set of 3-channel PSF stacks sampled on a 5-field x 3-azimuth
grid (single azimuth on axis).  Sources are either pre-rendered PSFPACK
bundles at a uniform fine pitch, or "virtual lenses": per-(field, azimuth)
coefficient sets rendered through the synthesis pipeline.  Ingestion
derives the virtual sensor pitch from the average MTF20, downsamples,
crops to 99.5% encircled energy, aligns and normalizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import mtf
from .errors import LensIngestError
from .psf import (
    CoefficientSet,
    Psf,
    PsfSynthesisConfig,
    align_com,
    crop_encircled,
    l1_normalize,
    resample,
    synthesize_psf,
)
from .psfpack import read_psfpack, write_psfpack

FIELD_HEIGHTS = mtf.FIELD_HEIGHTS
AZIMUTH_DEGREES = {"r": 0.0, "x": 45.0, "y": 90.0}
AZIMUTH_LABELS = tuple(AZIMUTH_DEGREES)
ON_AXIS_AZIMUTH = "r"

#: Aberration-category axes and the Fringe pair reduced onto each.
CATEGORY_AXES = ("defocus_spherical", "astigmatism", "coma")
CATEGORY_PAIRS = ((4, 9), (5, 6), (7, 8))


def required_keys() -> list[tuple[float, str]]:
    keys = [(0.0, ON_AXIS_AZIMUTH)]
    for fh in FIELD_HEIGHTS[1:]:
        keys.extend((fh, az) for az in AZIMUTH_LABELS)
    return keys


def _field_tag(fh: float) -> str:
    return f"{int(round(fh * 100)):02d}"


@dataclass
class VirtualLens:
    """Coefficient-defined lens rendered through the synthesis pipeline."""

    lens_id: str
    coefficients: Mapping[tuple[float, str], CoefficientSet]
    metadata: dict = field(default_factory=dict)


@dataclass
class LensRecord:
    lens_id: str
    metadata: dict
    pitch_um: float
    quality: float
    kernels: dict[tuple[float, str], Psf]
    coefficients: dict[tuple[float, str], CoefficientSet] | None = None

    def fields(self) -> list[float]:
        return sorted({fh for fh, _ in self.kernels})

    def azimuths(self, field_height: float) -> list[str]:
        return [az for fh, az in self.kernels if fh == field_height]


@dataclass
class CategoryVector:
    """Unit 3-vector over the aberration-category axes plus its raw norm."""

    vector: np.ndarray
    magnitude: float
    azimuth: str

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=float)
        if self.vector.shape != (3,):
            raise ValueError("category vector must have 3 components")


def _validate_key_set(keys) -> None:
    missing = [k for k in required_keys() if k not in keys]
    if missing:
        raise LensIngestError(f"lens source is missing field/azimuth keys: {missing}")


def _hires_stacks_from_virtual(lens: VirtualLens, cfg: dict) -> dict[tuple[float, str], Psf]:
    synth = PsfSynthesisConfig(
        grid_size=cfg["hires_grid"],
        pad_factor=2,
        crop_size=cfg["hires_crop"],
    )
    stacks = {}
    for key, coeffs in lens.coefficients.items():
        kernel = synthesize_psf(coeffs, config=synth)
        stacks[key] = kernel.replaced(kernel.data, pitch_um=float(cfg["hires_pitch_um"]))
    return stacks


def _hires_stacks_from_dir(bundle_dir: Path) -> tuple[dict, dict]:
    meta_path = bundle_dir / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    stacks = {}
    for fh in FIELD_HEIGHTS:
        azimuths = (ON_AXIS_AZIMUTH,) if fh == 0.0 else AZIMUTH_LABELS
        for az in azimuths:
            path = bundle_dir / f"field_{_field_tag(fh)}_az_{az}.psfk"
            if path.exists():
                stacks[(fh, az)] = read_psfpack(path)
    return stacks, meta


def _to_odd(psf: Psf) -> Psf:
    h, w = psf.shape
    pad_r, pad_c = h % 2 == 0, w % 2 == 0
    if not (pad_r or pad_c):
        return psf
    data = np.pad(psf.data, ((0, 0), (0, int(pad_r)), (0, int(pad_c))))
    return psf.replaced(data)


def ingest_lens(
    source: VirtualLens | str | Path,
    lens_config: dict | None = None,
) -> LensRecord:
    """Build a processed LensRecord from a bundle directory or virtual lens."""
    from .config import DEFAULT_CONFIG

    cfg = dict(DEFAULT_CONFIG["lens"])
    cfg.update(lens_config or {})

    coefficients = None
    if isinstance(source, VirtualLens):
        _validate_key_set(source.coefficients)
        hires = _hires_stacks_from_virtual(source, cfg)
        lens_id, metadata = source.lens_id, dict(source.metadata)
        coefficients = dict(source.coefficients)
    else:
        bundle_dir = Path(source)
        if not bundle_dir.is_dir():
            raise LensIngestError(f"lens bundle {bundle_dir} is not a directory")
        hires, meta = _hires_stacks_from_dir(bundle_dir)
        _validate_key_set(hires)
        lens_id = str(meta.get("id", bundle_dir.name))
        metadata = {k: v for k, v in meta.items() if k != "id"}
        coeff_path = bundle_dir / "coefficients.json"
        if coeff_path.exists():
            coefficients = {
                _parse_key(k): CoefficientSet.from_jsonable(v)
                for k, v in json.loads(coeff_path.read_text()).items()
            }

    pitches = {p.pitch_um for p in hires.values()}
    if len(pitches) != 1 or None in pitches:
        raise LensIngestError(f"hi-res stacks must share one pitch, got {pitches}")
    source_pitch = pitches.pop()

    aligned: dict[tuple[float, str], Psf] = {}
    for key, kernel in hires.items():
        if kernel.data.sum() <= 0 or not np.isfinite(kernel.data).all():
            raise LensIngestError(f"degenerate PSF at field/azimuth {key}")
        aligned[key] = align_com(l1_normalize(_to_odd(kernel)))

    fraction = cfg["encircled_fraction"]
    if all(
        k.provenance.get("processed", {}).get("encircled_fraction") == fraction
        for k in aligned.values()
    ):
        # Already-processed stacks (e.g. a saved record) pass through; the
        # recorded stages are not reapplied, so ingestion is idempotent.
        record = LensRecord(
            lens_id=lens_id,
            metadata=metadata,
            pitch_um=source_pitch,
            quality=0.0,
            kernels=aligned,
            coefficients=coefficients,
        )
        record.quality = quality(record)
        return record

    field_stacks: dict[float, list[Psf]] = {}
    for (fh, _), kernel in sorted(aligned.items()):
        field_stacks.setdefault(fh, []).append(kernel)
    pitch = mtf.derive_pixel_pitch(field_stacks, exclude_edge=cfg["exclude_edge_field"])

    processed = {}
    for key, kernel in aligned.items():
        small = resample(kernel, max(pitch, source_pitch))
        small = crop_encircled(small, fraction)
        small = align_com(small)
        small.provenance["processed"] = {
            "encircled_fraction": fraction,
            "source_pitch_um": source_pitch,
        }
        processed[key] = small

    record = LensRecord(
        lens_id=lens_id,
        metadata=metadata,
        pitch_um=pitch,
        quality=0.0,
        kernels=processed,
        coefficients=coefficients,
    )
    record.quality = quality(record)
    return record


def _mtf_pad(kernel: Psf) -> int:
    return max(256, *kernel.shape)


def quality(record: LensRecord) -> float:
    """Normalized field-averaged MTF50 of the processed kernels, in [0, 1].

    Azimuths, channels and slice orientations are averaged uniformly
    within each field; the field mean is divided by the Nyquist frequency.
    """
    per_field = []
    for fh in record.fields():
        values = []
        for az in record.azimuths(fh):
            kernel = record.kernels[(fh, az)]
            for channel in range(3):
                values.append(
                    mtf.orientation_averaged_mtf50(
                        kernel, channel=channel, pad_to=_mtf_pad(kernel)
                    )
                )
        per_field.append(np.mean(values))
    return float(np.mean(per_field) / mtf.NYQUIST_CPP)


def select_subset(records, n: int) -> list[str]:
    """Ids of `n` lenses sampled equidistantly over the quality range.

    Records are sorted by quality; each of n equidistant target qualities
    spanning [min, max] picks the nearest remaining record (ties to the
    lower id), constrained so later targets keep enough candidates above.
    """
    if n <= 0:
        raise ValueError("subset size must be positive")
    items = sorted(
        ((float(r.quality), str(r.lens_id)) for r in records),
        key=lambda t: (t[0], t[1]),
    )
    if n > len(items):
        raise ValueError(f"requested {n} lenses from {len(items)} records")
    targets = np.linspace(items[0][0], items[-1][0], n)
    chosen: list[str] = []
    prev = -1
    for k, target in enumerate(targets):
        remaining_after = n - k - 1
        lo, hi = prev + 1, len(items) - remaining_after
        best = min(
            range(lo, hi),
            key=lambda i: (abs(items[i][0] - target), items[i][1]),
        )
        chosen.append(items[best][1])
        prev = best
    return chosen


def project_category(record: LensRecord, field_height: float) -> CategoryVector:
    """Reduce a lens's coefficients at one field to the 3D category space.

    Channel-averaged coefficients are collapsed pairwise by absolute
    maximum; the azimuth with the largest reduced norm wins and the vector
    is returned unit-normalized with its norm as `magnitude`.
    """
    if record.coefficients is None:
        raise LensIngestError(
            f"lens {record.lens_id} has no coefficient data; category "
            "projection is unsupported for this source"
        )
    azimuths = [az for fh, az in record.coefficients if fh == field_height]
    if not azimuths:
        raise ValueError(f"field {field_height} not present for lens {record.lens_id}")
    best_vec, best_norm, best_az = None, -1.0, None
    for az in sorted(azimuths, key=AZIMUTH_LABELS.index):
        coeffs = record.coefficients[(field_height, az)]
        merged: dict[int, float] = {}
        for name in ("red", "green", "blue"):
            for k, v in coeffs.channel(name).items():
                merged[k] = merged.get(k, 0.0) + v / 3.0
        vec = np.array(
            [max(abs(merged.get(a, 0.0)), abs(merged.get(b, 0.0))) for a, b in CATEGORY_PAIRS]
        )
        norm = float(np.linalg.norm(vec))
        if norm > best_norm:
            best_vec, best_norm, best_az = vec, norm, az
    if best_norm <= 0.0:
        raise ValueError(
            f"lens {record.lens_id} has all-zero category coefficients at "
            f"field {field_height}"
        )
    return CategoryVector(vector=best_vec / best_norm, magnitude=best_norm, azimuth=best_az)


def _key_tag(key: tuple[float, str]) -> str:
    return f"{key[0]:.1f}/{key[1]}"


def _parse_key(tag: str) -> tuple[float, str]:
    fh, az = tag.split("/")
    return float(fh), az


def save_lens_record(record: LensRecord, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for (fh, az), kernel in sorted(record.kernels.items()):
        write_psfpack(kernel, out_dir / f"field_{_field_tag(fh)}_az_{az}.psfk")
    info = {
        "id": record.lens_id,
        "metadata": record.metadata,
        "pitch_um": record.pitch_um,
        "quality": record.quality,
    }
    if record.coefficients is not None:
        info["coefficients"] = {
            _key_tag(k): v.to_jsonable() for k, v in sorted(record.coefficients.items())
        }
    (out_dir / "lens.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def load_lens_record(lens_dir: str | Path) -> LensRecord:
    lens_dir = Path(lens_dir)
    info = json.loads((lens_dir / "lens.json").read_text())
    kernels = {}
    for fh in FIELD_HEIGHTS:
        azimuths = (ON_AXIS_AZIMUTH,) if fh == 0.0 else AZIMUTH_LABELS
        for az in azimuths:
            path = lens_dir / f"field_{_field_tag(fh)}_az_{az}.psfk"
            if path.exists():
                kernels[(fh, az)] = read_psfpack(path)
    coefficients = None
    if "coefficients" in info:
        coefficients = {
            _parse_key(k): CoefficientSet.from_jsonable(v)
            for k, v in info["coefficients"].items()
        }
    return LensRecord(
        lens_id=info["id"],
        metadata=info.get("metadata", {}),
        pitch_um=info["pitch_um"],
        quality=info["quality"],
        kernels=kernels,
        coefficients=coefficients,
    )
