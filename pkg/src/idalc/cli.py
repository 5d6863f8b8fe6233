"""Command-line front end: inspect, run, sweep, render.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 bad
configuration. Logging verbosity comes from the IDALC_LOG environment
variable (error, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from .config import RunConfig, load_run_config
from .corpus import load_corpus, make_split
from .errors import ConfigError, IdalcError
from .pipeline import RunReport, _fmt, render_report, run_idalc

logger = logging.getLogger("idalc.cli")

SWEEP_AXES = {
    "detector": ("msp", "doc", "lof"),
    "strategy": ("km", "mv", "cl"),
    "quorum": ("none", "3", "4", "5"),
}


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("IDALC_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idalc", description="Intent discovery and label correction runs.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_flags(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (section.key=value, repeatable)")

    p_inspect = sub.add_parser("inspect", help="print dataset and split statistics")
    add_config_flags(p_inspect)

    p_run = sub.add_parser("run", help="execute one full run and write its reports")
    add_config_flags(p_run)
    p_run.add_argument("--out", default=".", help="output directory for report files")

    p_sweep = sub.add_parser("sweep", help="run one axis of variants and compare them")
    add_config_flags(p_sweep)
    p_sweep.add_argument("--out", default=".", help="output directory for report files")
    p_sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))

    p_render = sub.add_parser("render", help="re-render a stored JSON report as markdown")
    p_render.add_argument("report", help="path to a report JSON file")
    p_render.add_argument("--out", default=None, help="write the markdown here instead of stdout")

    return parser


def _cmd_inspect(args) -> int:
    config = load_run_config(args.config, args.set)
    corpus = load_corpus(config.dataset_path, config.dataset_format)
    pool = make_split(corpus, config.split)
    counts = corpus.label_counts()

    print(f"dataset {config.dataset_path}: {len(corpus)} utterances, {len(counts)} intents")
    print(f"labeled {len(pool.labeled)} | unlabeled {len(pool.unlabeled_ids)} | test {len(pool.test_ids)}")
    labeled_counts: dict[str, int] = {}
    for _, lab in pool.labeled:
        labeled_counts[lab] = labeled_counts.get(lab, 0) + 1
    for intent in sorted(counts):
        role = "known" if intent in config.split.known_intents else "novel"
        seeded = f", labeled {labeled_counts[intent]}" if intent in labeled_counts else ""
        print(f"  {intent}: {counts[intent]} ({role}{seeded})")
    return 0


def _write(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(content)


def _cmd_run(args) -> int:
    config = load_run_config(args.config, args.set)
    report = run_idalc(config)
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "report.json")
    md_path = os.path.join(args.out, "report.md")
    _write(json_path, render_report(report, "json"))
    _write(md_path, render_report(report, "markdown"))
    print(render_report(report, "markdown"))
    print(f"wrote {json_path} and {md_path}")
    return 0


def _sweep_variant(config: RunConfig, axis: str, value: str) -> RunConfig:
    if axis == "detector":
        return replace(config, detector=replace(config.detector, kind=value))
    if axis == "strategy":
        return replace(config, labeling=replace(config.labeling, strategy=value))
    quorum = None if value == "none" else int(value)
    return replace(config, alc=replace(config.alc, quorum=quorum))


def _cmd_sweep(args) -> int:
    config = load_run_config(args.config, args.set)
    os.makedirs(args.out, exist_ok=True)

    rows = []
    for value in SWEEP_AXES[args.axis]:
        variant = _sweep_variant(config, args.axis, value)
        logger.info("sweep %s=%s", args.axis, value)
        report = run_idalc(variant)
        cell_path = os.path.join(args.out, f"run_{args.axis}_{value}.json")
        _write(cell_path, render_report(report, "json"))
        rows.append((value, report))

    lines = [f"# Sweep over {args.axis}", ""]
    lines.append("| Value | Final accuracy | Final macro F1 | OOD accuracy | OOD macro F1 | #ID | #ALC | #Total | % |")
    lines.append("| --- | --- | --- | --- | --- | --- | --- | --- | --- |")
    for value, report in rows:
        final = report.phases[-1]
        led = report.ledger
        det_eval = report.detection["evaluation"] or {}
        lines.append(
            f"| {value} | {_fmt(final.accuracy)} | {_fmt(final.macro_f1)}"
            f" | {_fmt(det_eval.get('accuracy'))} | {_fmt(det_eval.get('macro_f1'))}"
            f" | {led['id_calls']} | {led['alc_calls']} | {led['total_calls']}"
            f" | {_fmt(led['percentage'])} |"
        )
    table = "\n".join(lines) + "\n"
    table_path = os.path.join(args.out, f"sweep_{args.axis}.md")
    _write(table_path, table)
    print(table)
    print(f"wrote {table_path}")
    return 0


def _cmd_render(args) -> int:
    with open(args.report, encoding="utf-8") as handle:
        report = RunReport.from_dict(json.load(handle))
    document = render_report(report, "markdown")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "report.md")
        _write(out_path, document)
        print(f"wrote {out_path}")
    else:
        print(document)
    return 0


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    commands = {
        "inspect": _cmd_inspect,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "render": _cmd_render,
    }
    try:
        return commands[args.verb](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except IdalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
