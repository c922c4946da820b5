"""Command-line front end: synth, train, audit, render.

All state flows through flags and config files; every command demands an
explicit seed. Exit codes: 0 success, 2 configuration error, 3 data error,
4 pipeline error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import ELEMENT_KINDS, load_cases, save_annotations, save_cases, segment_check
from .errors import AuditError, ConfigError, DataError
from .models import (
    TRAINABLE_TAGS,
    TrainConfig,
    build_oracle_bundle,
    evaluate,
    save_bundle,
    train,
)
from .report import AuditConfig, render_report, run_audit
from .synth import SynthSpec, default_synth_spec, generate_synthetic

TRAIN_TAGS = TRAINABLE_TAGS + ("fet_oracle",)


def _read_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})")


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def cmd_synth(args) -> int:
    data = _read_config(args.config)
    out = args.out or data.get("out")
    if not out:
        raise ConfigError("synth needs an output directory (config key 'out' or --out)")
    if "builtin" in data:
        overrides = dict(data["builtin"] or {})
        if args.seed is not None:
            overrides["seed"] = args.seed
        if "seed" not in overrides:
            raise ConfigError("an explicit seed is required (builtin.seed or --seed)")
        spec = default_synth_spec(
            cases_per_charge=int(overrides.get("cases_per_charge", 50)),
            innocent_fraction=float(overrides.get("innocent_fraction", 0.25)),
            noise_rate=float(overrides.get("noise_rate", 0.15)),
            seed=int(overrides["seed"]),
        )
    else:
        if args.seed is not None:
            data = {**data, "seed": args.seed}
        if "seed" not in data:
            raise ConfigError("an explicit seed is required (config key 'seed' or --seed)")
        spec = SynthSpec.from_json_dict(data)
    caseset, annotated = generate_synthetic(spec)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_cases(caseset, out_dir / "cases.jsonl")
    save_annotations(annotated, out_dir / "annotations.jsonl")
    spec.save_json(out_dir / "synth_spec.json")
    report = segment_check(caseset, annotated)
    print(f"wrote {report.case_count} cases to {out_dir}")
    header = "charge".ljust(22) + "".join(k.short.rjust(7) for k in ELEMENT_KINDS)
    print(header + "NA".rjust(7) + "cases".rjust(8))
    for charge, row in sorted((report.element_sentence_counts or {}).items()):
        line = charge.ljust(22)
        for kind in ELEMENT_KINDS:
            line += str(row[kind.short]).rjust(7)
        line += str(row["NA"]).rjust(7)
        line += str(report.cases_per_charge.get(charge, 0)).rjust(8)
        print(line)
    print(
        "splits: "
        + ", ".join(f"{s}={n}" for s, n in report.cases_per_split.items())
    )
    return 0


def cmd_train(args) -> int:
    data = _read_config(args.config)
    base = Path(args.config).parent
    architecture = data.get("architecture")
    if architecture not in TRAIN_TAGS:
        raise ConfigError(
            f"invalid architecture {architecture!r}; valid tags: {', '.join(TRAIN_TAGS)}"
        )
    corpus_cfg = data.get("corpus", {})
    if "cases" not in corpus_cfg:
        raise ConfigError("train config needs corpus.cases")
    out = args.out or data.get("out")
    if not out:
        raise ConfigError("train needs an output directory (config key 'out' or --out)")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    caseset = load_cases(_resolve(base, corpus_cfg["cases"]))

    if architecture == "fet_oracle":
        if "synth_spec" not in corpus_cfg:
            raise ConfigError("a fet_oracle bundle is built from corpus.synth_spec")
        spec = SynthSpec.from_json_file(_resolve(base, corpus_cfg["synth_spec"]))
        bundle = build_oracle_bundle(spec=spec)
    else:
        if args.seed is not None:
            data = {**data, "seed": args.seed}
        if "seed" not in data:
            raise ConfigError("an explicit seed is required (config key 'seed' or --seed)")
        config = TrainConfig.from_dict(data)
        trainset = caseset.by_split("train")
        validset = caseset.by_split("valid")
        bundle = train(architecture, trainset, validset, config)

    eval_split = caseset.by_split("test")
    if len(eval_split) == 0:
        eval_split = caseset.by_split("valid")
    metrics = evaluate(bundle, eval_split)
    bundle_path = out_dir / f"{architecture}.bundle"
    save_bundle(bundle, bundle_path)
    metrics_payload = {
        "architecture": architecture,
        "accuracy": metrics.accuracy,
        "macro_f1": metrics.macro_f1,
        "macro_precision": metrics.macro_precision,
        "macro_recall": metrics.macro_recall,
        "evaluated_cases": len(eval_split),
    }
    (out_dir / f"{architecture}.metrics.json").write_text(
        json.dumps(metrics_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print("model".ljust(18) + "Acc".rjust(7) + "F1".rjust(7) + "P".rjust(7) + "R".rjust(7))
    acc, f1, p, r = metrics.as_row()
    print(
        architecture.ljust(18)
        + f"{100*acc:.1f}".rjust(7)
        + f"{100*f1:.1f}".rjust(7)
        + f"{100*p:.1f}".rjust(7)
        + f"{100*r:.1f}".rjust(7)
    )
    print(f"bundle written to {bundle_path}")
    return 0


def cmd_audit(args) -> int:
    config = AuditConfig.from_file(
        args.config,
        seed=args.seed,
        out=args.out,
        bundles=args.bundle or (),
        stages=args.stage or (),
    )
    out = run_audit(config)
    print(f"audit results written to {out}")
    return 0


def cmd_render(args) -> int:
    target = args.report_dir or args.out
    if not target:
        raise ConfigError("render needs the report directory (positional or --out)")
    text = render_report(target)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fetaudit",
        description=(
            "Audit charge-prediction classifiers against the Four Elements "
            "Theory: probing (selective), confusing-charge perturbation "
            "(sensitive) and element ablation (presumption of innocence)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p_synth.add_argument("--config", required=True, help="SynthSpec JSON (or {'builtin': {...}})")
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train one classifier and write its bundle")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.set_defaults(func=cmd_train)

    p_audit = sub.add_parser("audit", help="run probe/perturb/ablate for each bundle")
    p_audit.add_argument("--config", required=True)
    p_audit.add_argument("--seed", type=int, default=None)
    p_audit.add_argument("--out", default=None)
    p_audit.add_argument("--bundle", action="append", default=None, help="repeatable bundle path")
    p_audit.add_argument(
        "--stage",
        action="append",
        choices=["probe", "perturb", "ablate"],
        default=None,
        help="run a subset of stages (repeatable)",
    )
    p_audit.set_defaults(func=cmd_audit)

    p_render = sub.add_parser("render", help="render tables and figure data from a report dir")
    p_render.add_argument("report_dir", nargs="?", default=None)
    p_render.add_argument("--out", default=None)
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except AuditError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
