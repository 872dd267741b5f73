"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the suite takes a few minutes (dominated by the kernel-bank build).
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from conftest import edge_degraded_lens, field_scaled_lens, write_toy_dataset

from aberrate import augment, corrupt, lensdb, mtf, severity, zernike
from aberrate.analysis import kendall_tau_b
from aberrate.cli import main as cli_main
from aberrate.imageops import apply_kernel
from aberrate.psf import (
    CoefficientSet,
    Psf,
    PsfSynthesisConfig,
    baseline_chromatic_coeffs,
    center_of_mass,
    l1_normalize,
    resample,
    synthesize_psf,
)
from aberrate.psfpack import psfpack_bytes, read_psfpack, write_psfpack
from aberrate.quality import ssim
from test_analysis import oracle_tau_b


@pytest.fixture(scope="module")
def built_bank(tmp_path_factory):
    """Full 40-kernel bank built through the CLI, with its build time."""
    bank_dir = tmp_path_factory.mktemp("bank")
    start = time.perf_counter()
    code = cli_main(["gen-bank", "--bank-dir", str(bank_dir)])
    elapsed = time.perf_counter() - start
    assert code == 0
    return bank_dir, elapsed


@pytest.fixture(scope="module")
def toy50(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy50")
    write_toy_dataset(root, count=50, size=96, seed=11)
    return root


def test_c01_zernike_correctness():
    start = time.perf_counter()
    for fringe in range(1, zernike.MAX_FRINGE + 1):
        n, m, _ = zernike.fringe_to_nm(fringe)
        assert zernike.radial(n, m, 1.0) == 1.0

    n_grid = 512
    rho = (np.arange(n_grid) + 0.5) / n_grid
    phi = (np.arange(n_grid) + 0.5) * 2 * math.pi / n_grid
    rr, pp = np.meshgrid(rho, phi, indexing="ij")
    weight = rr * (1.0 / n_grid) * (2 * math.pi / n_grid)
    fields = {fr: zernike.zernike_field(fr, rr, pp) for fr in range(4, 12)}
    norms = {fr: math.sqrt(float((f * f * weight).sum())) for fr, f in fields.items()}
    worst = 0.0
    for i, j in itertools.combinations(fields, 2):
        inner = abs(float((fields[i] * fields[j] * weight).sum()))
        worst = max(worst, inner / (norms[i] * norms[j]))
    elapsed = time.perf_counter() - start
    assert worst < 1e-3
    assert elapsed < 10.0
    print(
        f"PASS criterion 1: R_n^m(1)=1 exact for all 37 indices; worst "
        f"orthogonality residual {worst:.2e} < 1e-3 ({elapsed:.1f}s)"
    )


def test_c02_diffraction_oracle():
    start = time.perf_counter()
    cfg = PsfSynthesisConfig(grid_size=256, pad_factor=2, crop_size=511)
    p = synthesize_psf(CoefficientSet(), config=cfg)
    curve = mtf.mtf_from_psf(p, channel="green").curves[0]
    cutoff = cfg.diffraction_cutoff_cpp
    sel = curve.frequencies <= 0.9 * cutoff
    expected = mtf.analytic_diffraction_mtf(curve.frequencies[sel], cutoff)
    rms = float(np.sqrt(np.mean((curve.modulation[sel] - expected) ** 2)))

    # Independent oracle: bisection on the closed-form MTF at level 0.5.
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = (lo + hi) / 2
        val = (2 / np.pi) * (np.arccos(mid) - mid * np.sqrt(1 - mid * mid))
        lo, hi = (mid, hi) if val > 0.5 else (lo, mid)
    analytic_ratio = (lo + hi) / 2

    ratio = mtf.summarize(curve).mtf50 / cutoff
    elapsed = time.perf_counter() - start
    assert rms < 0.02
    assert abs(analytic_ratio - 0.404) < 1e-3  # the solved crossing itself
    assert abs(ratio - 0.404) < 0.01
    assert elapsed < 5.0
    print(
        f"PASS criterion 2: diffraction MTF RMS {rms:.2e} < 2%; "
        f"MTF50/cutoff {ratio:.4f} within 0.404 +- 0.01 ({elapsed:.1f}s)"
    )


def test_c03_baseline_table_fidelity():
    cs = baseline_chromatic_coeffs()
    expected = {
        "red": {4: 0.32671, 9: 0.088223, 15: -0.061867, 16: -4.7631e-06},
        "green": {4: 0.11273, 9: 0.095923, 15: -0.069497, 16: -5.3967e-06},
        "blue": {4: -0.41772, 9: 0.10825, 15: -0.085119, 16: -6.7436e-06},
    }
    for channel, values in expected.items():
        got = cs.channel(channel)
        assert got == values, f"{channel}: {got} != {values}"
        for fringe, value in values.items():
            assert got[fringe] == value  # bit-exact
    print("PASS criterion 3: all 12 baseline wavefront values bit-exact")


def test_c04_bank_shape(built_bank):
    bank_dir, elapsed = built_bank
    files = sorted(bank_dir.glob("*.psfk"))
    assert len(files) == 40
    bank = severity.load_bank(bank_dir)
    for entry in bank.entries:
        assert entry.kernel.data.shape == (3, 25, 25)
        np.testing.assert_allclose(entry.kernel.channel_sums(), 1.0, atol=1e-6)
        com_r, com_c = center_of_mass(entry.kernel)
        assert abs(com_r - 12.0) <= 0.5 and abs(com_c - 12.0) <= 0.5
    for family in severity.FAMILIES:
        m50 = [
            np.mean(
                [
                    mtf.orientation_averaged_mtf50(
                        bank.kernel(family, s, member), pad_to=256
                    )
                    for member in (0, 1)
                ]
            )
            for s in severity.SEVERITIES
        ]
        assert all(a >= b - 1e-12 for a, b in zip(m50, m50[1:])), family
    assert elapsed < 300.0
    print(
        f"PASS criterion 4: 40 kernels, 25x25x3, l1 within 1e-6, COM <= 0.5 px, "
        f"MTF50 non-increasing per family (build {elapsed:.0f}s < 300s)"
    )


def test_c05_matching_quality(built_bank, disk_specs):
    bank_dir, _ = built_bank
    bank = severity.load_bank(bank_dir)
    tolerance = 0.05
    worst = 0.0
    for family in severity.FAMILIES:
        for s, spec in zip(severity.SEVERITIES, disk_specs):
            base50 = mtf.orientation_averaged_mtf50(
                severity.disk_kernel(spec), pad_to=256
            )
            cand50 = np.mean(
                [
                    mtf.orientation_averaged_mtf50(
                        bank.kernel(family, s, member), pad_to=256
                    )
                    for member in (0, 1)
                ]
            )
            worst = max(worst, abs(cand50 - base50) / base50)
    assert worst <= tolerance
    manifest = json.loads((bank_dir / "bank_manifest.json").read_text())
    for entry in manifest["entries"]:
        trace = entry["descent_trace"]
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    print(
        f"PASS criterion 5: orientation-averaged MTF50 within 5% of baseline "
        f"for all 40 kernels (worst {worst:.1%}); descent traces monotone"
    )


def test_c06_convolution_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        image = rng.random((64, 64, 3))
        k = int(rng.integers(1, 13)) * 2 + 1  # odd, <= 25
        kernel = l1_normalize(Psf(data=rng.random((3, k, k))))
        boundary = "zero" if rng.integers(2) else "reflect"
        direct = apply_kernel(image, kernel, boundary, method="direct")
        fft = apply_kernel(image, kernel, boundary, method="fft")
        worst = max(worst, float(np.abs(direct - fft).max()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6
    assert elapsed < 30.0
    print(
        f"PASS criterion 6: FFT vs direct convolution agree within "
        f"{worst:.1e} on 200 pairs ({elapsed:.1f}s)"
    )


def test_c07_reproducibility(built_bank, toy50, tmp_path):
    bank_dir, _ = built_bank
    manifests = []
    for workers, tag in ((1, "w1"), (8, "w8")):
        job = corrupt.CorruptionJob(
            input_root=str(toy50),
            output_root=str(tmp_path / tag),
            task="detection",
            source=corrupt.BankSource(str(bank_dir), "coma", 3),
            master_seed=2024,
            workers=workers,
        )
        corrupt.corrupt_dataset(job)
        manifests.append((tmp_path / tag / "manifest.json").read_bytes())
    assert manifests[0] == manifests[1]
    rows = json.loads(manifests[0])["records"]
    assert len(rows) == 50 and all(r["status"] == "ok" for r in rows)
    hashes_1 = [r["pre_encode_sha256"] for r in rows]
    hashes_8 = [r["pre_encode_sha256"] for r in json.loads(manifests[1])["records"]]
    assert hashes_1 == hashes_8
    print(
        "PASS criterion 7: 1-worker and 8-worker runs yield byte-identical "
        "manifests and identical pre-encode hashes (50 images)"
    )


def test_c08_lens_pipeline(tmp_path):
    # 20 virtual lenses ordered by increasing edge-field aberration.
    edge_mags = np.round(np.linspace(0.0, 1.9, 20), 4)
    records = [
        lensdb.ingest_lens(edge_degraded_lens(f"lens{k:02d}", float(m)))
        for k, m in enumerate(edge_mags)
    ]
    qualities = [r.quality for r in records]
    assert all(a > b for a, b in zip(qualities, qualities[1:])), qualities
    construction_order = [r.lens_id for r in records]
    quality_order = [
        r.lens_id for r in sorted(records, key=lambda r: r.quality, reverse=True)
    ]
    assert quality_order == construction_order

    # Subset selection vs the exhaustive monotone-assignment oracle.
    got = lensdb.select_subset(records, 5)
    items = sorted((r.quality, r.lens_id) for r in records)
    targets = np.linspace(items[0][0], items[-1][0], 5)
    oracle = min(
        itertools.combinations(range(len(items)), 5),
        key=lambda tup: tuple(
            (abs(items[i][0] - t), items[i][1]) for i, t in zip(tup, targets)
        ),
    )
    assert got == [items[i][1] for i in oracle]

    # Encircled-energy cropping: direct summation on pre-crop kernels.
    from aberrate.psf import crop_encircled

    for mag in (0.2, 0.9):
        raw = synthesize_psf(
            baseline_chromatic_coeffs().added(4, mag),
            config=PsfSynthesisConfig(crop_size=255),
        )
        hi = raw.replaced(raw.data, pitch_um=1.0)
        small = resample(hi, 2.5)
        cropped = crop_encircled(small, 0.995)
        h, w = cropped.shape
        hh, ww = small.shape
        rs = slice((hh - h) // 2, (hh - h) // 2 + h)
        cs = slice((ww - w) // 2, (ww - w) // 2 + w)
        retained = small.data[:, rs, cs].sum() / small.data.sum()
        assert retained >= 0.995

    # Impulse lens: derived pitch exactly 1 um.
    def impulse_stack(fh, az):
        data = np.zeros((3, 255, 255))
        data[:, 127, 127] = 1.0
        return Psf(data=data, pitch_um=1.0, normalized=True)

    bundle = tmp_path / "impulse"
    bundle.mkdir()
    for fh in lensdb.FIELD_HEIGHTS:
        azimuths = ("r",) if fh == 0.0 else lensdb.AZIMUTH_LABELS
        for az in azimuths:
            tag = f"{int(round(fh * 100)):02d}"
            write_psfpack(impulse_stack(fh, az), bundle / f"field_{tag}_az_{az}.psfk")
    impulse_record = lensdb.ingest_lens(bundle)
    assert impulse_record.pitch_um == pytest.approx(1.0, abs=1e-12)
    print(
        "PASS criterion 8: quality ordering exact over 20 lenses; subset "
        "selection matches the exhaustive oracle; crops retain >= 99.5% "
        "energy; impulse lens pitch = 1 um"
    )


def test_c09_field_difficulty_trend(toy50, tmp_path):
    record = lensdb.ingest_lens(field_scaled_lens("degrading", scale=1.0))
    lens_dir = tmp_path / "degrading"
    lensdb.save_lens_record(record, lens_dir)
    originals = {
        rel: corrupt.load_image(toy50 / rel) for rel in corrupt.list_dataset(toy50)
    }
    mean_ssim = []
    for fh in lensdb.FIELD_HEIGHTS:
        out = tmp_path / f"field_{int(fh * 100):02d}"
        job = corrupt.CorruptionJob(
            input_root=str(toy50),
            output_root=str(out),
            task="detection",
            source=corrupt.LensSource(str(lens_dir), "degrading", fh),
            master_seed=7,
            workers=4,
        )
        corrupt.corrupt_dataset(job)
        values = []
        for rel, original in originals.items():
            corrupted = corrupt.load_image(out / (rel[: rel.rfind(".")] + ".jpg"))
            values.append(ssim(original, corrupted))
        mean_ssim.append(float(np.mean(values)))
    assert all(a > b for a, b in zip(mean_ssim, mean_ssim[1:])), mean_ssim
    print(
        "PASS criterion 9: mean SSIM strictly decreasing across fields "
        f"0.0 -> 0.9: {[round(v, 4) for v in mean_ssim]}"
    )


def test_c10_statistics():
    # Kendall tau_b equals the O(n^2) oracle on 1000 random inputs.
    rng = np.random.default_rng(55)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(2, 13))
        x = [int(v) for v in rng.integers(0, 8, n)]
        y = [int(v) for v in rng.integers(0, 8, n)]
        n0 = n * (n - 1) / 2
        if sum(c * (c - 1) / 2 for c in (x.count(v) for v in set(x))) == n0:
            continue
        if sum(c * (c - 1) / 2 for c in (y.count(v) for v in set(y))) == n0:
            continue
        assert kendall_tau_b(x, y).tau_b == pytest.approx(oracle_tau_b(x, y), abs=1e-12)
        checked += 1

    # Beta(1,1) mixing draws are uniform by a KS test at the 1% level.
    identity = np.zeros((3, 1, 1))
    identity[:, 0, 0] = 1.0
    cfg = augment.AugmentConfig(
        kernels=[("id", Psf(data=identity, normalized=True))], alpha=1.0, seed=2718
    )
    draws = np.sort([augment.draw_for_index(cfg, k)[1] for k in range(100_000)])
    n = draws.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    d_stat = max(np.max(ecdf_hi - draws), np.max(draws - ecdf_lo))
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * d_stat
    p_ks = 2.0 * sum((-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam) for k in range(1, 101))
    assert p_ks > 0.01

    # Dirichlet gate marginal mean 0.25 +- 0.01.
    cascade = augment.CascadeConfig()
    gates = np.array(
        [augment.cascade_gates(cascade, 31415, k) for k in range(100_000)]
    )
    mean_p1 = float(gates[:, 0].mean())
    assert abs(mean_p1 - 0.25) < 0.01
    print(
        f"PASS criterion 10: tau_b == oracle on 1000 inputs; KS p={p_ks:.3f} > 0.01 "
        f"for Beta(1,1); Dirichlet marginal mean {mean_p1:.4f} within 0.25 +- 0.01"
    )


def test_c11_psfpack_round_trip(tmp_path):
    rng = np.random.default_rng(77)
    for k in range(100):
        h = int(rng.integers(1, 40)) * 2 + 1
        w = int(rng.integers(1, 40)) * 2 + 1
        data = rng.random((3, h, w))
        data /= data.sum(axis=(1, 2), keepdims=True)
        psf = Psf(
            data=data,
            pitch_um=None if k % 3 == 0 else float(rng.uniform(1, 20)),
            normalized=True,
            provenance={"kind": "random", "k": k},
        )
        first = tmp_path / f"a{k}.psfk"
        write_psfpack(psf, first)
        loaded = read_psfpack(first)
        assert psfpack_bytes(loaded) == first.read_bytes()
    print("PASS criterion 11: PSFPACK write->read->write byte-identical for 100 kernels")
