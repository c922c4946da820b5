"""Audit orchestration and report rendering.

``run_audit`` drives the three stages (probe, perturb, ablate) for each
configured bundle and writes one result directory whose numeric files are
a pure function of the corpus, bundles and master seed; wall-clock
metadata goes to a separate ``run_meta.json`` so result files stay
byte-reproducible. ``render_report`` reformats those files into plain-text
tables and per-figure numeric files without recomputing anything.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import ablate as ablate_mod
from . import perturb as perturb_mod
from . import probing as probing_mod
from .ablate import CONDITION_LABELS, COMPLETE_LABEL
from .corpus import (
    AnnotatedCaseSet,
    CaseSet,
    ELEMENT_KINDS,
    load_annotations,
    load_cases,
)
from .errors import ConfigError, DataError, PipelineError
from .models import ModelBundle, load_bundle
from .seeds import derive_seed
from .synth import SynthSpec

STAGES = ("probe", "perturb", "ablate")
MANIFEST_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditConfig:
    seed: int
    out: Path
    cases_path: Path
    annotations_path: Path
    bundle_paths: tuple[Path, ...]
    synth_spec_path: Path | None = None
    stages: tuple[str, ...] = STAGES
    probe_k: int = 5
    probe_na_mode: str = "empty_set"
    probe_iters: int = 300
    baseline_trials: int = 20
    perturb_rules: str = "builtin:synthetic"
    perturb_n: int = 200

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        seed: int | None = None,
        out: str | Path | None = None,
        bundles: Sequence[str | Path] = (),
        stages: Sequence[str] = (),
    ) -> "AuditConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})")
        base = path.parent

        def resolve(p) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        corpus = data.get("corpus", {})
        if "cases" not in corpus or "annotations" not in corpus:
            raise ConfigError(f"{path}: corpus.cases and corpus.annotations are required")
        if seed is None:
            seed = data.get("seed")
        if seed is None:
            raise ConfigError("an explicit master seed is required (config key 'seed' or --seed)")
        out_value = out if out is not None else data.get("out")
        if out_value is None:
            raise ConfigError("an output directory is required (config key 'out' or --out)")
        bundle_paths = [resolve(b) for b in bundles] or [
            resolve(b) for b in data.get("bundles", ())
        ]
        if not bundle_paths:
            raise ConfigError("at least one model bundle is required")
        chosen_stages = tuple(stages) or tuple(data.get("stages", STAGES))
        for stage in chosen_stages:
            if stage not in STAGES:
                raise ConfigError(f"unknown stage {stage!r} (valid: {', '.join(STAGES)})")
        probe = data.get("probe", {})
        perturb = data.get("perturb", {})
        return cls(
            seed=int(seed),
            out=Path(out_value),
            cases_path=resolve(corpus["cases"]),
            annotations_path=resolve(corpus["annotations"]),
            synth_spec_path=resolve(corpus["synth_spec"]) if "synth_spec" in corpus else None,
            bundle_paths=tuple(bundle_paths),
            stages=chosen_stages,
            probe_k=int(probe.get("k", 5)),
            probe_na_mode=str(probe.get("na_mode", "empty_set")),
            probe_iters=int(probe.get("iters", 300)),
            baseline_trials=int(probe.get("baseline_trials", 20)),
            perturb_rules=str(perturb.get("rules", "builtin:synthetic")),
            perturb_n=int(perturb.get("n", 200)),
        )


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _probe_report_dict(report: probing_mod.ProbeReport) -> dict:
    return {
        "k": report.k,
        "seed": report.seed,
        "na_mode": report.na_mode,
        "macro": {
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        },
        "per_charge": {
            m.charge: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "per_fold": [list(fold) for fold in m.per_fold],
            }
            for m in report.per_charge
        },
    }


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _load_rules(config: AuditConfig) -> list[perturb_mod.PerturbationRule]:
    if config.perturb_rules == "builtin:synthetic":
        if config.synth_spec_path is None:
            raise ConfigError(
                "builtin:synthetic rules need corpus.synth_spec in the audit config"
            )
        spec = SynthSpec.from_json_file(config.synth_spec_path)
        return perturb_mod.builtin_rules("synthetic", spec)
    if config.perturb_rules == "builtin:real":
        return perturb_mod.builtin_rules("real")
    return perturb_mod.load_rules(Path(config.perturb_rules))


def _stage_probe(
    out_dir: Path,
    bundle: ModelBundle,
    annotated: AnnotatedCaseSet,
    config: AuditConfig,
    seed: int,
) -> None:
    report = probing_mod.run_probing(
        bundle,
        annotated,
        k=config.probe_k,
        seed=seed,
        na_mode=config.probe_na_mode,
        iters=config.probe_iters,
    )
    baseline = probing_mod.random_baseline(
        annotated,
        seed=derive_seed(seed, "baseline"),
        trials=config.baseline_trials,
        na_mode=config.probe_na_mode,
    )
    _write_json(out_dir / "probe_metrics.json", _probe_report_dict(report))
    _write_json(out_dir / "baseline_metrics.json", _probe_report_dict(baseline))
    _write_csv(
        out_dir / "probe_counts.csv",
        ("charge", "fold", "element", "tp", "fp", "fn"),
        [
            (r["charge"], r["fold"], r["element"], r["tp"], r["fp"], r["fn"])
            for r in report.count_rows
        ],
    )
    aggregated = [
        (m.charge, repr(m.precision), repr(m.recall), repr(m.f1))
        for m in report.per_charge
    ]
    aggregated.append(
        ("MACRO", repr(report.macro_precision), repr(report.macro_recall), repr(report.macro_f1))
    )
    _write_csv(
        out_dir / "probe_aggregate.csv",
        ("charge", "precision", "recall", "f1"),
        aggregated,
    )


def _stage_perturb(
    out_dir: Path,
    bundle: ModelBundle,
    caseset: CaseSet,
    annotated: AnnotatedCaseSet,
    config: AuditConfig,
    seed: int,
) -> None:
    rules = _load_rules(config)
    results = []
    for i, rule in enumerate(rules):
        results.append(
            perturb_mod.run_perturbation(
                bundle,
                caseset,
                rule,
                n=config.perturb_n,
                seed=derive_seed(seed, f"rule:{rule.rule_id}"),
                annotations=annotated,
            )
        )
    _write_csv(
        out_dir / "retention.csv",
        (
            "rule_id",
            "source",
            "target",
            "commonality",
            "sample",
            "eligible",
            "retained",
            "ratio_filtered",
            "ratio_raw",
        ),
        [
            (
                r.rule.rule_id,
                r.rule.source,
                r.rule.target,
                r.rule.commonality,
                r.sample_size,
                r.eligible,
                r.retained,
                "" if r.ratio is None else repr(r.ratio),
                "" if r.ratio_raw is None else repr(r.ratio_raw),
            )
            for r in results
        ],
    )
    _write_json(
        out_dir / "retention.json",
        [
            {
                "rule_id": r.rule.rule_id,
                "source": r.rule.source,
                "target": r.rule.target,
                "knowledge": r.rule.knowledge,
                "commonality": r.rule.commonality,
                "sample": r.sample_size,
                "eligible": r.eligible,
                "retained": r.retained,
                "raw_retained": r.raw_retained,
                "ratio_filtered": r.ratio,
                "ratio_raw": r.ratio_raw,
                "undefined": r.undefined,
            }
            for r in results
        ],
    )


def _stage_ablate(
    out_dir: Path,
    bundle: ModelBundle,
    annotated: AnnotatedCaseSet,
    config: AuditConfig,
    seed: int,
) -> None:
    results = [ablate_mod.run_ablation(bundle, annotated, kind) for kind in ELEMENT_KINDS]
    rows = []
    for result in results:
        for p in result.pairs:
            rows.append(
                (
                    p.case_id,
                    result.element.value,
                    p.pred_before,
                    p.pred_after,
                    repr(p.p_orig_before),
                    repr(p.p_orig_after),
                    repr(p.p_innocent_before),
                    repr(p.p_innocent_after),
                )
            )
    _write_csv(
        out_dir / "ablation_cases.csv",
        (
            "case_id",
            "element",
            "pred_before",
            "pred_after",
            "p_orig_before",
            "p_orig_after",
            "p_innocent_before",
            "p_innocent_after",
        ),
        rows,
    )
    summary = ablate_mod.confidence_summary(results)
    _write_json(
        out_dir / "ablation_summary.json",
        {
            "per_element": {
                r.element.value: {
                    "evaluated": r.evaluated,
                    "skipped": r.skipped,
                    "consistency": r.consistency,
                    "consistency_vs_gold": r.consistency_vs_gold,
                    "consistency_correct_subset": r.consistency_correct_subset,
                    "mean_innocent_before": r.mean_innocent_before,
                    "mean_innocent_after": r.mean_innocent_after,
                }
                for r in results
            },
            "conditions": {
                c.condition: {
                    "count": c.count,
                    "confidence_hist": {
                        "edges": list(c.confidence.histogram.edges),
                        "counts": list(c.confidence.histogram.counts),
                    },
                    "confidence_five_number": list(c.confidence.five_number.as_tuple()),
                    "innocent_five_number": list(c.innocent.five_number.as_tuple()),
                    "innocent_hist": {
                        "edges": list(c.innocent.histogram.edges),
                        "counts": list(c.innocent.histogram.counts),
                    },
                }
                for c in summary.conditions
            },
        },
    )


def run_audit(config: AuditConfig) -> Path:
    """Run the configured stages for every bundle; returns the report dir.

    On a stage failure the manifest of completed stages is still written
    before the error propagates, so partial results remain usable.
    """
    caseset = load_cases(config.cases_path)
    annotated = load_annotations(config.annotations_path, caseset)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "format_version": MANIFEST_VERSION,
        "seed": config.seed,
        "stages_requested": list(config.stages),
        "bundles": {},
    }
    started = time.time()
    failure: Exception | None = None
    for bundle_path in config.bundle_paths:
        name = Path(bundle_path).stem
        bundle = load_bundle(bundle_path)
        bundle_dir = out / name
        bundle_dir.mkdir(parents=True, exist_ok=True)
        completed: list[str] = []
        manifest["bundles"][name] = {
            "path": str(bundle_path),
            "architecture": bundle.architecture,
            "stages_completed": completed,
        }
        for stage in config.stages:
            stage_seed = derive_seed(config.seed, f"{name}:{stage}")
            try:
                if stage == "probe":
                    _stage_probe(bundle_dir, bundle, annotated, config, stage_seed)
                elif stage == "perturb":
                    _stage_perturb(bundle_dir, bundle, caseset, annotated, config, stage_seed)
                elif stage == "ablate":
                    _stage_ablate(bundle_dir, bundle, annotated, config, stage_seed)
            except Exception as exc:
                failure = PipelineError(f"stage {stage!r} failed for bundle {name!r}: {exc}")
                manifest["bundles"][name]["failed_stage"] = stage
                break
            completed.append(stage)
        if failure is not None:
            break
    _write_json(out / "manifest.json", manifest)
    import numpy

    from . import __version__

    _write_json(
        out / "run_meta.json",
        {
            "started_unix": started,
            "elapsed_seconds": time.time() - started,
            "config_file_seed": config.seed,
            "fetaudit_version": __version__,
            "numpy_version": numpy.__version__,
        },
    )
    if failure is not None:
        raise failure
    return out


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _fmt_pct(x: float | None) -> str:
    return "-" if x is None else f"{100.0 * x:.1f}"


def _probe_table(bundles: Mapping[str, dict], baseline: dict | None) -> str:
    charges: list[str] = []
    for data in bundles.values():
        for charge in data["per_charge"]:
            if charge not in charges:
                charges.append(charge)
    width = max([len(c) for c in charges] + [18])
    lines = ["Probe micro P/R/F1 (%) per charge, averaged over folds"]
    header = "model".ljust(18) + "".join(c.rjust(width + 2) for c in charges)
    lines.append(header)
    rows = []
    if baseline is not None:
        rows.append(("Random", baseline))
    rows.extend(bundles.items())
    for name, data in rows:
        cells = []
        for charge in charges:
            m = data["per_charge"].get(charge)
            if m is None:
                cells.append("-".rjust(width + 2))
            else:
                cells.append(
                    f"{_fmt_pct(m['precision'])}/{_fmt_pct(m['recall'])}/{_fmt_pct(m['f1'])}".rjust(
                        width + 2
                    )
                )
        lines.append(name.ljust(18) + "".join(cells))
    return "\n".join(lines)


def _retention_table(bundles: Mapping[str, list[dict]]) -> str:
    columns: list[tuple[str, str]] = []  # (pair, commonality), uncommon first
    for rows in bundles.values():
        for row in rows:
            pair = f"{row['source']}->{row['target']}"
            for commonality in ("uncommon", "common"):
                if (pair, commonality) not in columns:
                    columns.append((pair, commonality))
    columns.sort(key=lambda c: (c[0], c[1] == "common"))

    def cell_for(rows: list[dict], pair: str, commonality: str) -> str:
        for r in rows:
            if f"{r['source']}->{r['target']}" == pair and r["commonality"] == commonality:
                return f"{_fmt_pct(r['ratio_filtered'])} | {_fmt_pct(r['ratio_raw'])}"
        return "-"

    headers = [f"{pair} ({commonality})" for pair, commonality in columns]
    widths = []
    for header, (pair, commonality) in zip(headers, columns):
        cells = [cell_for(rows, pair, commonality) for rows in bundles.values()]
        widths.append(max(len(header), *(len(c) for c in cells)) + 2)
    lines = ["Retention of the original charge after perturbation (%, filtered | raw)"]
    lines.append(
        "model".ljust(18) + "".join(h.rjust(w) for h, w in zip(headers, widths))
    )
    for name, rows in bundles.items():
        line = name.ljust(18)
        for (pair, commonality), width in zip(columns, widths):
            line += cell_for(rows, pair, commonality).rjust(width)
        lines.append(line)
    return "\n".join(lines)


def _consistency_table(bundles: Mapping[str, dict]) -> str:
    lines = ["Prediction consistency after removing one element's sentences"]
    header = "model".ljust(18) + "".join(
        k.value.rjust(14) for k in ELEMENT_KINDS
    )
    lines.append(header)
    for name, data in bundles.items():
        line = name.ljust(18)
        for kind in ELEMENT_KINDS:
            entry = data["per_element"].get(kind.value)
            line += ("-" if entry is None else f"{entry['consistency']:.3f}").rjust(14)
        lines.append(line)
    return "\n".join(lines)


def _ascii_hist(counts: Sequence[int], width: int = 30) -> list[str]:
    peak = max(counts) or 1
    lines = []
    for i, count in enumerate(counts):
        bar = "#" * int(round(width * count / peak))
        lines.append(f"  bin {i:02d} [{i/20:.2f},{(i+1)/20:.2f}] {count:6d} {bar}")
    return lines


def render_report(report_dir: str | Path) -> str:
    """Re-format stage outputs into text tables and figure data files.

    Pure: reads the result files, never recomputes or alters any number.
    Returns the rendered table text (also written to render/tables.txt).
    """
    report_dir = Path(report_dir)
    manifest_path = report_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{report_dir}: no manifest.json (not an audit report directory)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    render_dir = report_dir / "render"
    render_dir.mkdir(exist_ok=True)
    probe_data: dict[str, dict] = {}
    baseline_data: dict | None = None
    retention_data: dict[str, list[dict]] = {}
    ablation_data: dict[str, dict] = {}
    for name, info in manifest["bundles"].items():
        bundle_dir = report_dir / name
        for stage in info["stages_completed"]:
            if stage == "probe":
                path = bundle_dir / "probe_metrics.json"
                if not path.exists():
                    raise PipelineError(f"stage 'probe' of bundle {name!r}: missing {path.name}")
                probe_data[name] = json.loads(path.read_text(encoding="utf-8"))
                base_path = bundle_dir / "baseline_metrics.json"
                if base_path.exists() and baseline_data is None:
                    baseline_data = json.loads(base_path.read_text(encoding="utf-8"))
            elif stage == "perturb":
                path = bundle_dir / "retention.json"
                if not path.exists():
                    raise PipelineError(f"stage 'perturb' of bundle {name!r}: missing {path.name}")
                retention_data[name] = json.loads(path.read_text(encoding="utf-8"))
            elif stage == "ablate":
                path = bundle_dir / "ablation_summary.json"
                if not path.exists():
                    raise PipelineError(f"stage 'ablate' of bundle {name!r}: missing {path.name}")
                ablation_data[name] = json.loads(path.read_text(encoding="utf-8"))
    if not (probe_data or retention_data or ablation_data):
        raise DataError(f"{report_dir}: no completed stage results to render")

    sections: list[str] = []
    if probe_data:
        sections.append(_probe_table(probe_data, baseline_data))
    if retention_data:
        sections.append(_retention_table(retention_data))
    if ablation_data:
        sections.append(_consistency_table(ablation_data))

    condition_order = [COMPLETE_LABEL] + [CONDITION_LABELS[k] for k in ELEMENT_KINDS]
    for name, data in ablation_data.items():
        hist_rows = []
        box_rows = []
        lines = [f"Own-charge confidence histograms ({name})"]
        for condition in condition_order:
            entry = data["conditions"].get(condition)
            if entry is None:
                continue
            edges = entry["confidence_hist"]["edges"]
            counts = entry["confidence_hist"]["counts"]
            for i, count in enumerate(counts):
                hist_rows.append((condition, repr(edges[i]), repr(edges[i + 1]), count))
            box_rows.append((condition, *[repr(v) for v in entry["innocent_five_number"]]))
            lines.append(f"{condition} (n={entry['count']})")
            lines.extend(_ascii_hist(counts))
        _write_csv(
            render_dir / f"{name}_confidence_hist.csv",
            ("condition", "bin_lo", "bin_hi", "count"),
            hist_rows,
        )
        _write_csv(
            render_dir / f"{name}_innocent_box.csv",
            ("condition", "min", "q1", "median", "q3", "max"),
            box_rows,
        )
        sections.append("\n".join(lines))

    text = ("\n\n".join(sections)) + "\n"
    (render_dir / "tables.txt").write_text(text, encoding="utf-8")
    return text
