"""Command-line entry point wiring the modules into user workflows."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, augment, corrupt, lensdb, mtf, severity
from .config import load_config
from .errors import AberrateError
from .psf import CoefficientSet, PsfSynthesisConfig, WavelengthTriple, synthesize_psf
from .psfpack import read_psfpack, write_psfpack


def _synth_config(cfg: dict, crop_key: str = "crop_size") -> PsfSynthesisConfig:
    s = cfg["synthesis"]
    return PsfSynthesisConfig(
        grid_size=s["grid_size"],
        pad_factor=s["pad_factor"],
        phase_scale=s["phase_scale"],
        crop_size=s[crop_key],
    )


def _objective(cfg: dict) -> severity.MatchObjective:
    m = cfg["match"]
    return severity.MatchObjective(
        w_mtf50=m["weights"]["mtf50"],
        w_auc=m["weights"]["auc"],
        w_ssim=m["weights"]["ssim"],
        w_psnr=m["weights"]["psnr"],
        psnr_floor_db=m["psnr_floor_db"],
        chart_size=m["chart_size"],
    )


def _disk_specs(cfg: dict) -> list[severity.DiskKernelSpec]:
    return [
        severity.DiskKernelSpec(d["radius"], d["alias_sigma"])
        for d in cfg["disk_severities"]
    ]


def _cmd_gen_bank(args) -> int:
    cfg = load_config(args.config)
    init = cfg["init_magnitudes"]
    if args.calibrate_init:
        init = {}
        for family in severity.FAMILIES:
            init[family] = [
                round(
                    severity.initial_magnitude(
                        severity.disk_kernel(spec),
                        family,
                        synth_config=_synth_config(cfg, "bank_work_crop"),
                        mtf_pad=cfg["mtf_pad"],
                    ),
                    4,
                )
                for spec in _disk_specs(cfg)
            ]
    bank = severity.build_severity_bank(
        _disk_specs(cfg),
        init,
        objective=_objective(cfg),
        synth_config=_synth_config(cfg, "bank_work_crop"),
        mtf50_tolerance=cfg["match"]["mtf50_relative_tolerance"],
        step=cfg["match"]["step_waves"],
        mtf_pad=cfg["mtf_pad"],
    )
    echo = dict(cfg)
    echo["init_magnitudes"] = init
    severity.write_bank(bank, args.bank_dir, config_echo=echo)
    print(f"wrote {len(bank.entries)} kernels to {args.bank_dir}")
    return 0


def _cmd_gen_kernel(args) -> int:
    cfg = load_config(args.config)
    coeffs = CoefficientSet.from_jsonable(json.loads(Path(args.coeffs).read_text()))
    kernel = synthesize_psf(
        coeffs,
        wavelengths=WavelengthTriple(*cfg["wavelengths_um"]),
        config=_synth_config(cfg),
    )
    write_psfpack(kernel, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_mtf(args) -> int:
    cfg = load_config(args.config)
    kernel = read_psfpack(args.kernel)
    result = mtf.mtf_from_psf(kernel, channel=args.channel, pad_to=cfg["mtf_pad"])
    out_csv = Path(args.out_csv)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["orientation", "frequency_cpp", "modulation"])
        for deg in mtf.ORIENTATIONS_DEG:
            curve = result.curves[deg]
            for f, m in zip(curve.frequencies, curve.modulation):
                writer.writerow([deg, f"{f:.6f}", f"{m:.6f}"])
    summaries = {
        str(deg): mtf.summarize(result.curves[deg]).to_jsonable()
        for deg in mtf.ORIENTATIONS_DEG
    }
    summaries["orientation_averaged_mtf50_cpp"] = float(
        np.mean([s["mtf50_cpp"] for s in summaries.values()])
    )
    Path(args.out_json).write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out_csv} and {args.out_json}")
    return 0


def _cmd_match(args) -> int:
    cfg = load_config(args.config)
    spec = _disk_specs(cfg)[args.severity - 1]
    baseline = severity.disk_kernel(spec)
    result = severity.match_kernel(
        baseline,
        args.family,
        severity.baseline_chromatic_coeffs(),
        objective=_objective(cfg),
        init_magnitude=cfg["init_magnitudes"][args.family][args.severity - 1],
        step=cfg["match"]["step_waves"],
        max_steps=cfg["match"]["max_steps"],
        synth_config=_synth_config(cfg, "bank_work_crop"),
        mtf_pad=cfg["mtf_pad"],
    )
    print(
        json.dumps(
            {
                "family": args.family,
                "severity": args.severity,
                "magnitude_waves": result.magnitude,
                "objective_value": result.objective_value,
                "mtf50_relative_error": result.mtf50_relative_error,
                "descent_trace": result.trace,
                "no_progress": result.no_progress,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_lens_ingest(args) -> int:
    cfg = load_config(args.config)
    record = lensdb.ingest_lens(args.source, lens_config=cfg["lens"])
    lensdb.save_lens_record(record, args.out)
    print(
        f"lens {record.lens_id}: pitch {record.pitch_um:.3f} um, "
        f"quality {record.quality:.4f} -> {args.out}"
    )
    return 0


def _cmd_lens_select(args) -> int:
    records = [lensdb.load_lens_record(d) for d in sorted(Path(args.lens_root).iterdir()) if d.is_dir()]
    ids = lensdb.select_subset(records, args.n)
    by_id = {r.lens_id: r for r in records}
    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "lens_id", "quality"])
        for rank, lens_id in enumerate(ids):
            writer.writerow([rank, lens_id, f"{by_id[lens_id].quality:.6f}"])
    print(f"selected {len(ids)} lenses -> {args.out_csv}")
    return 0


def _cmd_lens_project(args) -> int:
    record = lensdb.load_lens_record(args.lens_dir)
    vec = lensdb.project_category(record, args.field)
    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lens_id", "field", "azimuth", *lensdb.CATEGORY_AXES, "magnitude"])
        writer.writerow(
            [record.lens_id, args.field, vec.azimuth]
            + [f"{v:.6f}" for v in vec.vector]
            + [f"{vec.magnitude:.6f}"]
        )
    print(f"wrote {args.out_csv}")
    return 0


def _cmd_corrupt(args) -> int:
    cfg = load_config(args.config)
    source = corrupt.parse_source(args.source, bank_dir=args.bank_dir, lens_dir=args.lens_dir)
    task = {"cls": "classification", "det": "detection"}[args.task]
    job = corrupt.CorruptionJob(
        input_root=args.input,
        output_root=args.output,
        task=task,
        source=source,
        master_seed=args.seed,
        boundary=args.boundary,
        jpeg_quality=args.jpeg_q,
        workers=args.workers,
        config_echo=cfg,
    )
    manifest = corrupt.corrupt_dataset(job)
    failed = sum(1 for r in manifest["records"] if r["status"] != "ok")
    print(f"corrupted {len(manifest['records']) - failed} images ({failed} failed)")
    return 0


def _cmd_augment_preview(args) -> int:
    from PIL import Image

    bank = severity.load_bank(args.bank)
    config = augment.AugmentConfig.from_bank(
        bank, max_severity=args.severity, alpha=args.alpha, seed=args.seed
    )
    paths = corrupt.list_dataset(args.input)
    if not paths:
        raise AberrateError(f"no images found under {args.input}")
    out_root = Path(args.output)
    out_root.mkdir(parents=True, exist_ok=True)
    audit = []
    for index, rel in enumerate(paths):
        image = corrupt.load_image(Path(args.input) / rel)
        kernel_idx, mix = augment.draw_for_index(config, index)
        blended = augment.augment_image(image, config, index)
        out_path = out_root / Path(rel).with_suffix(".png")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        arr = np.rint(np.clip(blended, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(arr).save(out_path)
        audit.append(
            {"path": rel, "kernel_id": config.kernels[kernel_idx][0], "mix": mix}
        )
    (out_root / "augment_audit.json").write_text(
        json.dumps({"seed": args.seed, "draws": audit}, indent=2, sort_keys=True) + "\n"
    )
    print(f"previewed {len(audit)} images -> {args.output}")
    return 0


def _cmd_analyze(args) -> int:
    table = analysis.ResultTable.from_csv(args.results)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grouped = analysis.aggregate(table, args.group_by.split(",") if args.group_by else [])
    (out_dir / "aggregate.json").write_text(json.dumps(grouped, indent=2) + "\n")
    with open(out_dir / "aggregate.csv", "w", newline="") as fh:
        keys = list(grouped[0].keys())
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(grouped)
    if args.clean:
        deltas = analysis.robustness_delta(table, analysis.read_clean_csv(args.clean))
        (out_dir / "deltas.json").write_text(json.dumps(deltas, indent=2) + "\n")
        _write_csv(out_dir / "deltas.csv", deltas["rows"])
    if args.tau_baseline:
        taus = analysis.rank_correlations(table, args.tau_baseline, metric=args.metric)
        (out_dir / "rank_correlation.json").write_text(json.dumps(taus, indent=2) + "\n")
        if taus:
            _write_csv(out_dir / "rank_correlation.csv", taus)
    print(f"wrote analysis outputs to {out_dir}")
    return 0


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aberrate")
    parser.add_argument("--json", action="store_true", help="machine-readable errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-bank", help="build the 40-kernel severity bank")
    p.add_argument("--config")
    p.add_argument("--bank-dir", required=True)
    p.add_argument("--calibrate-init", action="store_true",
                   help="re-run the one-time magnitude sweep instead of using the config table")
    p.set_defaults(func=_cmd_gen_bank)

    p = sub.add_parser("gen-kernel", help="synthesize one kernel from a coefficient JSON")
    p.add_argument("--config")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_kernel)

    p = sub.add_parser("mtf", help="MTF slices and summary of a kernel file")
    p.add_argument("--config")
    p.add_argument("--kernel", required=True)
    p.add_argument("--channel", default="green")
    p.add_argument("--out-csv", default="mtf.csv")
    p.add_argument("--out-json", default="mtf.json")
    p.set_defaults(func=_cmd_mtf)

    p = sub.add_parser("match", help="match one family/severity against its disk baseline")
    p.add_argument("--config")
    p.add_argument("--family", required=True, choices=sorted(severity.FAMILIES))
    p.add_argument("--severity", required=True, type=int, choices=severity.SEVERITIES)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("lens-ingest", help="process a lens bundle directory")
    p.add_argument("--config")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_lens_ingest)

    p = sub.add_parser("lens-select", help="quality-spanning subset of ingested lenses")
    p.add_argument("--lens-root", required=True)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--out-csv", default="lens_subset.csv")
    p.set_defaults(func=_cmd_lens_select)

    p = sub.add_parser("lens-project", help="project a lens into the category space")
    p.add_argument("--lens-dir", required=True)
    p.add_argument("--field", required=True, type=float)
    p.add_argument("--out-csv", default="lens_category.csv")
    p.set_defaults(func=_cmd_lens_project)

    p = sub.add_parser("corrupt", help="apply a kernel source to an image dataset")
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--task", required=True, choices=("cls", "det"))
    p.add_argument("--source", required=True, help="bank:FAMILY:SEV or lens:ID:FIELD")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--boundary", default="zero", choices=("zero", "reflect"))
    p.add_argument("--jpeg-q", type=float, default=0.9)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--bank-dir")
    p.add_argument("--lens-dir")
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("augment-preview", help="emit augmented previews plus a draw audit")
    p.add_argument("--bank", required=True)
    p.add_argument("--severity", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_augment_preview)

    p = sub.add_parser("analyze", help="aggregate result tables, deltas, rank correlations")
    p.add_argument("--results", required=True)
    p.add_argument("--clean")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--group-by", default="")
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--tau-baseline")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AberrateError, ValueError, KeyError, OSError) as exc:
        if args.json:
            print(
                json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                file=sys.stderr,
            )
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
