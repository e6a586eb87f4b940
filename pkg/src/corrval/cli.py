"""Batch command-line front-end.

Commands compose through an output directory: generate writes subject
variant trees, map/score/degrade/evaluate-* consume them and add derived
artefacts, report summarises whatever the earlier commands produced. All
outputs are plain CSV/JSON with fixed number formatting, so a rerun with
the same seed overwrites every file with identical bytes.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 failed acceptance check (report --check).
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import datagen, discrim, stats
from .distances import DISTANCE_KEYS, NumericalDistanceError, get_distance
from .indices import INDEX_NAMES, evaluate_indices, jaccard_index
from .mapping import assign_patterns, write_assignments_csv
from .model import (
    read_segmented_clustering_json,
    read_timeseries_csv,
    segment_correlations,
    write_segmented_clustering_json,
    write_timeseries_csv,
)
from .patterns import enumerate_patterns, export_pattern_table

SCHEMA_VERSION = 1
DEFAULT_SUBJECTS = 5
DEFAULT_SEED = 6
DEFAULT_SEGMENTS = 100
DEFAULT_SEGMENT_LENGTH = (300, 3000)
DEFAULT_VARIANTS = (
    "raw:complete",
    "normal:complete", "normal:partial", "normal:sparse",
    "non_normal:complete",
    "downsampled:complete",
)
INTERNAL_INDICES = ("swc", "dbi", "vrc", "pbm")


class ConfigError(click.ClickException):
    exit_code = 2


def _fmt(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def _emit_error(kind, message):
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")


def _parse_variant(token):
    parts = token.split(":")
    if len(parts) != 2 or parts[0] not in datagen.STAGES or parts[1] not in datagen.COMPLETENESS:
        raise ConfigError(
            f"bad variant {token!r}; expected <stage>:<completeness> with stage in "
            f"{datagen.STAGES} and completeness in {tuple(datagen.COMPLETENESS)}"
        )
    return parts[0], parts[1]


def _variant_dirname(variant):
    return variant.replace(":", "_")


class RunConfig:
    """Resolved settings: flags beat the config file, which beats defaults."""

    def __init__(self, output, config_file, **flags):
        file_values = {}
        if config_file:
            try:
                with open(config_file) as f:
                    file_values = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config file: {exc}")
        defaults = {
            "subjects": DEFAULT_SUBJECTS,
            "seed": None,
            "variants": list(DEFAULT_VARIANTS),
            "distances": list(DISTANCE_KEYS),
            "indices": list(INDEX_NAMES),
            "segments": DEFAULT_SEGMENTS,
            "segment_length": list(DEFAULT_SEGMENT_LENGTH),
            "threads": 1,
            "format": "csv",
        }
        for key, fallback in defaults.items():
            flag = flags.get(key)
            if flag is not None and flag != ():
                value = list(flag) if isinstance(flag, tuple) else flag
            elif key in file_values:
                value = file_values[key]
            else:
                value = fallback
            setattr(self, key, value)
        if self.seed is None:
            env = os.environ.get("CORRVAL_SEED")
            if env is not None:
                try:
                    self.seed = int(env)
                except ValueError:
                    raise ConfigError(f"CORRVAL_SEED must be an integer, got {env!r}")
            else:
                self.seed = DEFAULT_SEED
        self.output = Path(output)
        for key in self.distances:
            if key not in DISTANCE_KEYS:
                raise ConfigError(f"unknown distance key {key!r}")
        for name in self.indices:
            if name not in INDEX_NAMES:
                raise ConfigError(f"unknown index {name!r}")
        for v in self.variants:
            _parse_variant(v)
        if self.subjects < 1 or self.segments < 2 or self.threads < 1:
            raise ConfigError("subjects, segments and threads must be positive")
        lo, hi = self.segment_length
        if not 2 <= lo <= hi:
            raise ConfigError("segment length range must satisfy 2 <= lo <= hi")

    def subject_specs(self):
        return [
            datagen.SubjectSpec(
                seed=self.seed + i,
                n_segments=self.segments,
                segment_length_range=tuple(self.segment_length),
            )
            for i in range(self.subjects)
        ]


def _common_options(fn):
    for option in reversed([
        click.option("--subjects", type=int, default=None, help="Number of subjects."),
        click.option("--seed", type=int, default=None,
                      help="Master seed (falls back to CORRVAL_SEED, then 6)."),
        click.option("--variants", multiple=True, help="Variants as <stage>:<completeness>."),
        click.option("--distances", multiple=True, help="Distance function keys."),
        click.option("--indices", multiple=True, help="Validity index names."),
        click.option("--segments", type=int, default=None, help="Segments per subject."),
        click.option("--segment-length", type=int, nargs=2, default=None,
                      help="Min and max segment length."),
        click.option("--output", type=click.Path(), default="out", show_default=True,
                      help="Output directory."),
        click.option("--threads", type=int, default=None, help="Worker threads."),
        click.option("--format", "format_", type=click.Choice(["csv", "json"]), default=None),
        click.option("--config", "config_file", type=click.Path(exists=False), default=None,
                      help="JSON config file (flags take precedence)."),
    ]):
        fn = option(fn)
    return fn


def _build_config(output, config_file, **flags):
    flags["format"] = flags.pop("format_", None)
    return RunConfig(output, config_file, **flags)


def _subject_dir(cfg, subject_id):
    return cfg.output / "subjects" / subject_id


def _load_subject(cfg, spec, variant):
    """Rehydrate a generated subject variant from its on-disk artefacts."""
    stage, completeness = _parse_variant(variant)
    vdir = _subject_dir(cfg, spec.subject_id) / _variant_dirname(variant)
    data = vdir / "data.csv"
    truth_path = vdir / "truth.json"
    if not data.exists() or not truth_path.exists():
        raise ConfigError(f"missing generated artefacts under {vdir}; run generate first")
    meta = json.loads((vdir / "meta.json").read_text())
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema version mismatch in {vdir / 'meta.json'}")
    ts = read_timeseries_csv(data, sample_interval=meta["sample_interval"])
    truth = read_segmented_clustering_json(truth_path)
    return datagen.Subject(
        subject_id=spec.subject_id,
        ts=ts,
        truth=truth,
        labels=tuple(truth.clustering.labels().tolist()),
        stage=stage,
        completeness=completeness,
        spec=spec,
    )


def _run_per_subject(cfg, work):
    """Run work(spec) per subject, serialising result handling in order."""
    specs = cfg.subject_specs()
    if cfg.threads <= 1:
        return [work(s) for s in specs]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(work, specs))


@click.group()
def main():
    """Correlation-pattern validation pipeline."""


def _guarded(fn):
    """Translate module failures into the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError:
            raise
        except (NumericalDistanceError, datagen.GenerationError, np.linalg.LinAlgError) as exc:
            _emit_error(type(exc).__name__, str(exc))
            sys.exit(3)

    wrapper.__name__ = fn.__name__
    return wrapper


@main.command()
@_common_options
@_guarded
def generate(output, config_file, **flags):
    """Generate subject variants with ground truth."""
    cfg = _build_config(output, config_file, **flags)
    for spec in cfg.subject_specs():
        sdir = _subject_dir(cfg, spec.subject_id)
        for variant in cfg.variants:
            stage, completeness = _parse_variant(variant)
            subject = datagen.generate_variant(spec, stage, completeness)
            vdir = sdir / _variant_dirname(variant)
            vdir.mkdir(parents=True, exist_ok=True)
            write_timeseries_csv(subject.ts, vdir / "data.csv")
            write_segmented_clustering_json(subject.truth, vdir / "truth.json")
            _write_json(vdir / "meta.json", {
                "schema_version": SCHEMA_VERSION,
                "seed": spec.seed,
                "stage": stage,
                "completeness": completeness,
                "sample_interval": subject.ts.sample_interval,
                "n_segments": spec.n_segments,
                "segment_length_range": list(spec.segment_length_range),
            })
    export_pattern_table(enumerate_patterns(3), cfg.output / "patterns.json")
    _write_json(cfg.output / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "subjects": cfg.subjects,
        "segments": cfg.segments,
        "segment_length": list(cfg.segment_length),
        "variants": list(cfg.variants),
    })


@main.command("map")
@_common_options
@_guarded
def map_cmd(output, config_file, **flags):
    """Map segment correlation matrices to canonical patterns."""
    cfg = _build_config(output, config_file, **flags)
    patterns = enumerate_patterns(3)
    for spec in cfg.subject_specs():
        for variant in cfg.variants:
            subject = _load_subject(cfg, spec, variant)
            corrs = segment_correlations(subject.ts, subject.truth.segmentation)
            vdir = _subject_dir(cfg, spec.subject_id) / _variant_dirname(variant)
            for key in cfg.distances:
                assignments = assign_patterns(corrs, patterns, get_distance(key))
                write_assignments_csv(assignments, vdir / f"assignments_{key}.csv")


@main.command()
@_common_options
@_guarded
def score(output, config_file, **flags):
    """Score ground-truth clusterings with the internal validity indices."""
    cfg = _build_config(output, config_file, **flags)
    internal = [n for n in cfg.indices if n != "jaccard"]
    rows = []
    for spec in cfg.subject_specs():
        for variant in cfg.variants:
            subject = _load_subject(cfg, spec, variant)
            corrs = segment_correlations(subject.ts, subject.truth.segmentation)
            for key in cfg.distances:
                values = evaluate_indices(
                    subject.ts, subject.truth, get_distance(key),
                    index_names=internal, seg_corrs=corrs,
                )
                for name in internal:
                    rows.append((spec.subject_id, variant, key, name, values[name]))
    _write_csv(cfg.output / "scores.csv",
               ["subject_id", "variant", "distance", "index", "value"], rows)


@main.command()
@_common_options
@_guarded
def degrade(output, config_file, **flags):
    """Emit the 66 degraded clusterings per subject plus their Jaccard values."""
    cfg = _build_config(output, config_file, **flags)
    rows = []
    for spec in cfg.subject_specs():
        subject = _load_subject(cfg, spec, "normal:complete")
        ddir = _subject_dir(cfg, spec.subject_id) / "degraded"
        ddir.mkdir(parents=True, exist_ok=True)
        for (strategy, level), sc in sorted(datagen.degraded_clusterings(subject).items()):
            write_segmented_clustering_json(sc, ddir / f"{strategy}_{level:02d}.json")
            j = jaccard_index(subject.truth, sc, subject.ts.n_observations)
            rows.append((spec.subject_id, strategy, level, j))
    _write_csv(cfg.output / "jaccard.csv",
               ["subject_id", "strategy", "level", "jaccard"], rows)


@main.command("evaluate-distances")
@_common_options
@_guarded
def evaluate_distances(output, config_file, **flags):
    """Six-criterion discriminative-power evaluation of the distance functions."""
    cfg = _build_config(output, config_file, **flags)
    variants = [v for v in cfg.variants if v == "normal:complete"] or ["normal:complete"]
    patterns = enumerate_patterns(3)

    def work(spec):
        subject = _load_subject(cfg, spec, variants[0])
        corrs = segment_correlations(subject.ts, subject.truth.segmentation)
        out = []
        for key in cfg.distances:
            samples = discrim.collect_samples(subject, get_distance(key), patterns, corrs)
            out.append(discrim.evaluate_distance(samples))
        return out

    per_subject = _run_per_subject(cfg, work)
    rows = [
        (c.subject_id, c.distance_key, *(c.value(name) for name in discrim.CRITERION_NAMES))
        for result in per_subject for c in result
    ]
    _write_csv(cfg.output / "criteria.csv",
               ["subject_id", "distance", *discrim.CRITERION_NAMES], rows)
    aggregated = [
        discrim.aggregate_criteria([result[i] for result in per_subject])
        for i in range(len(cfg.distances))
    ]
    rankings = discrim.rank_distance_functions(aggregated)
    _write_csv(
        cfg.output / "ranking.csv",
        ["distance", *(f"rank_{n}" for n in discrim.CRITERION_NAMES), "average_rank"],
        [
            (r.distance_key, *(r.criterion_ranks[n] for n in discrim.CRITERION_NAMES),
             r.average_rank)
            for r in rankings
        ],
    )


@main.command("evaluate-indices")
@_common_options
@_guarded
def evaluate_indices_cmd(output, config_file, **flags):
    """Quality sweep: indices over truth plus all degraded clusterings."""
    cfg = _build_config(output, config_file, **flags)
    internal = [n for n in cfg.indices if n != "jaccard"]
    keys = [k for k in cfg.distances]
    sweep_rows, corr_rows = [], []

    def work(spec):
        subject = _load_subject(cfg, spec, "normal:complete")
        corrs = segment_correlations(subject.ts, subject.truth.segmentation)
        clusterings = [("truth", 0, subject.truth)]
        clusterings += [
            (strategy, level, sc)
            for (strategy, level), sc in sorted(datagen.degraded_clusterings(subject).items())
        ]
        out = []
        for key in keys:
            d = get_distance(key)
            for strategy, level, sc in clusterings:
                shared = corrs if sc.segmentation == subject.truth.segmentation else None
                values = evaluate_indices(subject.ts, sc, d, index_names=internal,
                                          seg_corrs=shared)
                j = jaccard_index(subject.truth, sc, subject.ts.n_observations)
                out.append((spec.subject_id, key, strategy, level, j, values))
        return out

    for result in _run_per_subject(cfg, work):
        by_key = {}
        for subject_id, key, strategy, level, j, values in result:
            sweep_rows.append((subject_id, key, strategy, level, j,
                               *(values[n] for n in internal)))
            by_key.setdefault(key, []).append((j, values))
        for key, pairs in by_key.items():
            jaccards = [p[0] for p in pairs]
            for name in internal:
                finite = [(j, v[name]) for j, v in pairs if math.isfinite(v[name])]
                r, p = stats.pearson_correlation([f[0] for f in finite],
                                                 [f[1] for f in finite])
                corr_rows.append((result[0][0], key, name, r, p, len(finite)))
    _write_csv(cfg.output / "sweep.csv",
               ["subject_id", "distance", "strategy", "level", "jaccard", *internal],
               sweep_rows)
    _write_csv(cfg.output / "correlations.csv",
               ["subject_id", "distance", "index", "pearson_r", "p_value", "n"], corr_rows)


@main.command()
@click.option("--check", is_flag=True, help="Exit 4 unless the quality banding holds.")
@_common_options
@_guarded
def report(check, output, config_file, **flags):
    """Summarise prior outputs: quality banding, rank matrix, scatter data."""
    cfg = _build_config(output, config_file, **flags)
    report_dir = cfg.output / "report"
    scores = cfg.output / "scores.csv"
    if not scores.exists():
        raise ConfigError("scores.csv not found; run score before report")
    with open(scores, newline="") as f:
        score_rows = list(csv.DictReader(f))

    banding = {}
    for row in score_rows:
        if row["distance"] != "l5" or row["index"] not in ("swc", "dbi"):
            continue
        banding.setdefault((row["subject_id"], row["variant"]), {})[row["index"]] = float(row["value"])
    threshold_rows = []
    for (subject_id, variant), vals in sorted(banding.items()):
        good = vals.get("swc", -1.0) > 0.8 and vals.get("dbi", math.inf) < 0.2
        threshold_rows.append((subject_id, variant, vals.get("swc", math.nan),
                               vals.get("dbi", math.nan), "good" if good else "poor"))
    _write_csv(report_dir / "thresholds.csv",
               ["subject_id", "variant", "swc_l5", "dbi_l5", "band"], threshold_rows)

    ranking = cfg.output / "ranking.csv"
    if ranking.exists():
        (report_dir / "rank_matrix.csv").write_bytes(ranking.read_bytes())
    sweep = cfg.output / "sweep.csv"
    if sweep.exists():
        (report_dir / "index_jaccard_scatter.csv").write_bytes(sweep.read_bytes())
    correlations = cfg.output / "correlations.csv"
    if correlations.exists():
        with open(correlations, newline="") as f:
            corr_rows = list(csv.DictReader(f))
        ci_rows = []
        for row in corr_rows:
            r, n = float(row["pearson_r"]), int(row["n"])
            if n > 3 and abs(r) < 1:
                half = 2.5758293035489004 / math.sqrt(n - 3)
                lo, hi = math.tanh(math.atanh(r) - half), math.tanh(math.atanh(r) + half)
            else:
                lo = hi = r
            ci_rows.append((row["subject_id"], row["distance"], row["index"], r, lo, hi))
        _write_csv(report_dir / "correlation_ci.csv",
                   ["subject_id", "distance", "index", "pearson_r", "ci_low", "ci_high"],
                   ci_rows)

    if check:
        failures = []
        for subject_id, variant, swc_v, dbi_v, band in threshold_rows:
            if variant == "normal:complete" and band != "good":
                failures.append(f"{subject_id} {variant} outside the good band")
            if variant == "downsampled:complete" and band == "good":
                failures.append(f"{subject_id} {variant} unexpectedly in the good band")
        if failures:
            _emit_error("AcceptanceCheckFailure", "; ".join(failures))
            sys.exit(4)


if __name__ == "__main__":
    main()
