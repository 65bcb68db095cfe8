"""Command-line surface: morph generation, evaluation, quality reporting.

Exit codes are a stable scripting contract: 0 success, 2 input/schema
error, 3 numeric degeneracy (zero-norm or antipodal slerp row), 4
configuration gap (missing threshold coverage). Reports are JSON with
sorted keys; two runs over identical inputs are byte-identical apart
from the timestamp, which --no-timestamp suppresses.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

from . import manifest as manifest_mod, metrics as metrics_mod, morph as morph_mod, quality as quality_mod
from .errors import (
    CoverageError,
    DegenerateGeometryError,
    LatentFormatError,
    LatentShapeError,
    SchemaError,
)
from .latent import LatentDirection, load_latent, load_latent_code, save_latent

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_COVERAGE = 4

METRIC_CHOICES = ("gmap", "mmpmr", "fmmpmr", "all")


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _config_hash(settings: dict) -> str:
    canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _thread_count() -> int:
    raw = os.environ.get("MORPHLAB_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise SchemaError(f"MORPHLAB_THREADS must be an integer, got {raw!r}") from None


def _write_json(path, document: dict) -> None:
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".json.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(document: dict, report_path) -> None:
    if report_path:
        _write_json(report_path, document)
    else:
        json.dump(document, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")


def _load_config_file(path) -> dict[str, str]:
    settings: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise SchemaError(f"{path}: line {line_no}: expected key=value")
                key, value = line.split("=", 1)
                settings[key.strip()] = value.strip()
    except OSError as exc:
        raise SchemaError(f"cannot read config file {path}: {exc}") from exc
    return settings


def _merge_config(args: argparse.Namespace, keys: dict[str, type]) -> None:
    """Fill argparse values that are None from --config; flags win."""
    if not getattr(args, "config", None):
        return
    settings = _load_config_file(args.config)
    unknown = set(settings) - set(keys)
    if unknown:
        raise SchemaError(f"{args.config}: unknown config keys {sorted(unknown)}")
    for key, caster in keys.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and key in settings:
            raw = settings[key]
            try:
                setattr(args, attr, caster(raw))
            except ValueError as exc:
                raise SchemaError(f"{args.config}: bad value for {key}: {exc}") from exc


def _frac_entry(value: Fraction | None) -> dict | None:
    if value is None:
        return None
    result = {"value": float(value), "exact": f"{value.numerator}/{value.denominator}"}
    assert 0.0 <= result["value"] <= 1.0
    return result


@dataclass
class EvaluationReport:
    """Machine-readable evaluation result; serialized with sorted keys."""

    config_hash: str
    mode: str
    metrics_requested: tuple[str, ...]
    thresholds: dict
    slices: dict
    quality: dict | None = None
    timestamp: str | None = None

    def to_json(self) -> dict:
        document = {
            "command": "evaluate",
            "config_hash": self.config_hash,
            "mode": self.mode,
            "metrics_requested": sorted(self.metrics_requested),
            "thresholds": self.thresholds,
            "slices": self.slices,
        }
        if self.quality is not None:
            document["quality"] = self.quality
        if self.timestamp is not None:
            document["timestamp"] = self.timestamp
        return document


def _threshold_json(th: metrics_mod.Threshold, source: str) -> dict:
    return {
        "tau": th.tau,
        "target_fmr": th.target_fmr,
        "achieved_fmr": None if th.achieved_fmr is None else float(th.achieved_fmr),
        "source": source,
    }


def _slice_metrics(
    sliced: metrics_mod.ScoreTable,
    thresholds: dict[str, metrics_mod.Threshold],
    ftar: metrics_mod.FtarTable,
    mode: str,
    wanted: set[str],
) -> dict:
    out: dict = {
        "morph_count": len(sliced.morph_ids()),
        "generators": list(sliced.generators()),
    }
    if sliced.is_empty():
        for name in ("gmap", "mmpmr", "fmmpmr"):
            if name in wanted:
                out[name] = None
        return out

    if "gmap" in wanted:
        per_generator = {}
        for generator in sliced.generators():
            gen_table = sliced.restrict(generators=[generator])
            entry = _frac_entry(metrics_mod.gmap(gen_table, thresholds, ftar, mode))
            if mode == metrics_mod.MODE_EQ5_MIN:
                entry["per_frs"] = {
                    frs: _frac_entry(
                        metrics_mod.gmap(
                            gen_table.restrict(frs=[frs]), thresholds, ftar, mode
                        )
                    )
                    for frs in sliced.frs_ids
                }
            per_generator[generator] = entry
        total = _frac_entry(metrics_mod.gmap(sliced, thresholds, ftar, mode))
        total["mode"] = mode
        total["per_generator"] = per_generator
        out["gmap"] = total

    for name, fn in (("mmpmr", metrics_mod.mmpmr), ("fmmpmr", metrics_mod.fmmpmr)):
        if name not in wanted:
            continue
        cells: dict = {}
        for generator in sliced.generators():
            cells[generator] = {}
            for frs in sliced.frs_ids:
                cell = sliced.restrict(generators=[generator], frs=[frs])
                cells[generator][frs] = _frac_entry(fn(cell, thresholds[frs]))
        out[name] = cells
    return out


def _quality_document(pairs_path) -> dict:
    base = os.path.dirname(os.path.abspath(os.fspath(pairs_path)))
    jobs: list[tuple[str, str]] = []
    with open(pairs_path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SchemaError(f"{pairs_path}: line {line_no}: expected 'ref_path,test_path'")
            jobs.append((parts[0].strip(), parts[1].strip()))
    if not jobs:
        raise SchemaError(f"{pairs_path}: no image pairs listed")

    def one(pair: tuple[str, str]) -> float:
        ref = quality_mod.load_image(os.path.join(base, pair[0]))
        test = quality_mod.load_image(os.path.join(base, pair[1]))
        return quality_mod.psnr(ref, test)

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, jobs))
    else:
        values = [one(job) for job in jobs]

    finite = [v for v in values if math.isfinite(v)]
    return {
        "pairs": [
            {"ref": ref, "test": test, "psnr": ("inf" if math.isinf(v) else v)}
            for (ref, test), v in zip(jobs, values)
        ],
        "identical_pairs": len(values) - len(finite),
        "finite_pairs": len(finite),
        "stats": quality_mod.boxplot_stats(finite).to_json() if finite else None,
    }


def cmd_morph(args: argparse.Namespace) -> int:
    _merge_config(
        args,
        {
            "s1": str, "s2": str, "out": str, "direction": str, "alpha": float,
            "k": int, "identity-mode": str, "attribute-mode": str, "epsilon": float,
        },
    )
    for name in ("s1", "s2", "out"):
        if getattr(args, name) is None:
            raise SchemaError(f"missing required --{name}")
    w1 = load_latent_code(args.s1)
    w2 = load_latent_code(args.s2)
    direction = None
    if args.direction:
        direction = LatentDirection(load_latent(args.direction))
    recipe = morph_mod.MorphRecipe(
        alpha=args.alpha if args.alpha is not None else 0.5,
        k=args.k if args.k is not None else 7,
        identity_mode=args.identity_mode or morph_mod.SPHERICAL,
        attribute_mode=args.attribute_mode or morph_mod.SPHERICAL,
        direction=direction,
        epsilon=args.epsilon if args.epsilon is not None else morph_mod.DEFAULT_EPSILON,
    )
    morphed = morph_mod.build_morph_latent(w1, w2, recipe)
    save_latent(morphed.data, args.out)
    print(
        f"morph: s1={tuple(w1.data.shape)} s2={tuple(w2.data.shape)} "
        f"alpha={recipe.alpha} k={recipe.k} identity={recipe.identity_mode} "
        f"attributes={recipe.attribute_mode} direction={'yes' if direction else 'no'} "
        f"-> {args.out}"
    )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    _merge_config(
        args,
        {
            "manifest": str, "scores": str, "thresholds": str, "calibrate": str,
            "fmr": float, "ftar": str, "metric": str, "mode": str,
            "report": str, "quality-pairs": str,
        },
    )
    for name in ("manifest", "scores"):
        if getattr(args, name) is None:
            raise SchemaError(f"missing required --{name}")
    if args.metric is not None and args.metric not in METRIC_CHOICES:
        raise SchemaError(f"--metric must be one of {METRIC_CHOICES}")
    if args.mode is not None and args.mode not in metrics_mod.MODES:
        raise SchemaError(f"--mode must be one of {metrics_mod.MODES}")
    metric = args.metric or "all"
    mode = args.mode or metrics_mod.MODE_EQ5_MIN

    man = manifest_mod.load_manifest(args.manifest)
    report = manifest_mod.validate_manifest(man)
    if not report.ok:
        for violation in report.violations:
            print(f"manifest violation: {violation}", file=sys.stderr)
        return EXIT_INPUT

    scores = metrics_mod.ScoreTable.from_csv(args.scores)
    declared = set(man.frs)
    if declared:
        extra = set(scores.frs_ids) - declared
        if extra:
            raise SchemaError(f"score table names FRS absent from manifest: {sorted(extra)}")
    pair_index = man.pair_by_id()
    unknown_morphs = sorted(scores.morph_ids() - set(pair_index))
    if unknown_morphs:
        raise SchemaError(f"score table references unknown morph ids: {unknown_morphs}")
    for generator in scores.generators():
        for morph_id in scores.morphs(generator):
            expected = pair_index[morph_id].generator
            if expected != generator:
                raise SchemaError(
                    f"morph {morph_id!r} belongs to generator {expected!r} in the manifest "
                    f"but appears under {generator!r} in the score table"
                )

    if args.thresholds and args.calibrate:
        raise SchemaError("--thresholds and --calibrate are mutually exclusive")
    if args.thresholds:
        thresholds = metrics_mod.load_threshold_csv(args.thresholds)
        threshold_source = "file"
    elif args.calibrate:
        if args.fmr is None:
            raise SchemaError("--calibrate requires --fmr")
        impostors = metrics_mod.load_impostor_csv(args.calibrate)
        thresholds = {
            frs: metrics_mod.calibrate_threshold(values, args.fmr, frs_id=frs)
            for frs, values in impostors.items()
        }
        threshold_source = "calibrated"
    else:
        raise SchemaError("thresholds are never defaulted: pass --thresholds or --calibrate with --fmr")

    missing = [f for f in scores.frs_ids if f not in thresholds]
    if missing:
        raise CoverageError(f"no threshold for FRS: {missing}")

    ftar = metrics_mod.load_ftar_csv(args.ftar) if args.ftar else metrics_mod.FtarTable()
    wanted = {"gmap", "mmpmr", "fmmpmr"} if metric == "all" else {metric}

    slices = {}
    for gender_slice in manifest_mod.SLICES:
        sliced = manifest_mod.slice_scores(scores, man, gender_slice)
        slices[gender_slice] = _slice_metrics(sliced, thresholds, ftar, mode, wanted)

    settings = {
        "command": "evaluate",
        "manifest": args.manifest,
        "scores": args.scores,
        "thresholds": args.thresholds,
        "calibrate": args.calibrate,
        "fmr": args.fmr,
        "ftar": args.ftar,
        "metric": metric,
        "mode": mode,
        "quality_pairs": args.quality_pairs,
    }
    evaluation = EvaluationReport(
        config_hash=_config_hash(settings),
        mode=mode,
        metrics_requested=tuple(sorted(wanted)),
        thresholds={
            frs: _threshold_json(th, threshold_source) for frs, th in sorted(thresholds.items())
        },
        slices=slices,
        quality=_quality_document(args.quality_pairs) if args.quality_pairs else None,
        timestamp=None if args.no_timestamp else _utc_now(),
    )
    _emit(evaluation.to_json(), args.report)
    if args.report:
        print(
            f"evaluate: generators={len(scores.generators())} frs={len(scores.frs_ids)} "
            f"mode={mode} -> {args.report}"
        )
    return EXIT_OK


def cmd_quality(args: argparse.Namespace) -> int:
    _merge_config(args, {"pairs": str, "report": str})
    if args.pairs is None:
        raise SchemaError("missing required --pairs")
    document = _quality_document(args.pairs)
    document["command"] = "quality"
    settings = {"command": "quality", "pairs": args.pairs}
    document["config_hash"] = _config_hash(settings)
    if not args.no_timestamp:
        document["timestamp"] = _utc_now()
    _emit(document, args.report)
    if args.report:
        print(
            f"quality: pairs={len(document['pairs'])} identical={document['identical_pairs']} "
            f"-> {args.report}"
        )
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    arr = load_latent(args.file)
    norms = [float(x) for x in (arr.astype("float64") ** 2).sum(axis=1) ** 0.5]
    print(
        f"{args.file}: shape={tuple(arr.shape)} dtype=float32 "
        f"min={float(arr.min())!r} max={float(arr.max())!r} "
        f"row_norm_min={min(norms)!r} row_norm_max={max(norms)!r}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphlab",
        description="Latent-space morph generation and FRS vulnerability evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    morph_p = sub.add_parser("morph", help="build a morph latent from two subject latents")
    morph_p.add_argument("--s1", help="subject-1 latent (LTF, 18x512)")
    morph_p.add_argument("--s2", help="subject-2 latent (LTF, 18x512)")
    morph_p.add_argument("--out", help="output morph latent (LTF)")
    morph_p.add_argument("--direction", help="identity-transfer direction (LTF, kx512)")
    morph_p.add_argument("--alpha", type=float, help="interpolation factor in [0,1] (default 0.5)")
    morph_p.add_argument("--k", type=int, help="identity row count (default 7)")
    morph_p.add_argument("--identity-mode", choices=(morph_mod.SPHERICAL, morph_mod.LINEAR))
    morph_p.add_argument("--attribute-mode", choices=(morph_mod.SPHERICAL, morph_mod.LINEAR))
    morph_p.add_argument("--epsilon", type=float, help="degenerate-angle threshold (radians)")
    morph_p.add_argument("--config", help="key=value config file; flags override")
    morph_p.set_defaults(func=cmd_morph)

    eval_p = sub.add_parser("evaluate", help="compute vulnerability metrics from score tables")
    eval_p.add_argument("--manifest", help="dataset manifest JSON")
    eval_p.add_argument("--scores", help="score CSV (generator,frs,morph_id,attempt,slot,score)")
    eval_p.add_argument("--thresholds", help="threshold CSV (frs,tau)")
    eval_p.add_argument("--calibrate", help="impostor score CSV (frs,score) for calibration")
    eval_p.add_argument("--fmr", type=float, help="target FMR for --calibrate, in (0,1]")
    eval_p.add_argument("--ftar", help="FTAR CSV (frs,attempt,ftar); default 0 everywhere")
    eval_p.add_argument("--metric", choices=METRIC_CHOICES, default=None)
    eval_p.add_argument("--mode", choices=metrics_mod.MODES, default=None)
    eval_p.add_argument("--quality-pairs", help="optional pair list to embed PSNR stats")
    eval_p.add_argument("--report", help="write the JSON report here (default: stdout)")
    eval_p.add_argument("--no-timestamp", action="store_true")
    eval_p.add_argument("--config", help="key=value config file; flags override")
    eval_p.set_defaults(func=cmd_evaluate)

    quality_p = sub.add_parser("quality", help="PSNR + box-plot stats over image pairs")
    quality_p.add_argument("--pairs", help="file of lines 'ref_path,test_path'")
    quality_p.add_argument("--report", help="write the JSON report here (default: stdout)")
    quality_p.add_argument("--no-timestamp", action="store_true")
    quality_p.add_argument("--config", help="key=value config file; flags override")
    quality_p.set_defaults(func=cmd_quality)

    inspect_p = sub.add_parser("inspect", help="print header and row stats of an LTF file")
    inspect_p.add_argument("file")
    inspect_p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateGeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (SchemaError, LatentFormatError, LatentShapeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
