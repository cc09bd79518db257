import argparse
import asyncio
import csv
import json
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from core.analysis_orchestrator import AnalysisOrchestrator, metrics_row
from core.bench import bench, sink_family, size_family
from core.config_manager import AnalyzerConfig, ConfigManager
from core.corpusgen import LINKAGES, VALUE_TEMPLATES, GenSpec, generate
from core.detectors import load_sink_specs
from core.errors import TargetVetError
from core.fixtures import replay_all
from core.persistence.repository import MetricsRepository
from core.report import AppReport
from core.sbc.parser import MANIFEST_NAME, parse_app
from core.search_index import build_index
from core.session_logger import SessionLogger

ROOT = Path(__file__).resolve().parent
DEFAULT_SINKS = ROOT / "sinks.json"
DEFAULT_FIXTURES = ROOT / "fixtures"

EXIT_OK, EXIT_FAILED, EXIT_VULNERABLE = 0, 1, 2

console = Console()
logger = logging.getLogger("main")

STATUS_STYLES = {
    "Vulnerable": "bold red",
    "Safe": "green",
    "Unreachable": "dim",
    "Unknown": "yellow",
    "LowConfidence": "magenta",
}


# --- Logging Setup ---
def setup_logging(log_dir, verbose: bool = False):
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        handlers=[
            RotatingFileHandler(
                log_dir / "targetvet.log",
                maxBytes=10 * 1024 * 1024,  # 10 MB
                backupCount=5,
                encoding="utf-8",
            ),
            logging.StreamHandler(),
        ],
        force=True,
    )


def expand_app_dirs(paths: Sequence[str]) -> List[Path]:
    """App directories as given, or every app directory one level below a batch directory."""
    out = []
    for p in map(Path, paths):
        if (p / MANIFEST_NAME).is_file() or not p.is_dir():
            out.append(p)
            continue
        children = sorted(c for c in p.iterdir() if c.is_dir())
        apps = [c if (c / MANIFEST_NAME).is_file() else c / "app" for c in children]
        apps = [a for a in apps if (a / MANIFEST_NAME).is_file()]
        out.extend(apps or [p])
    return out


def load_config(args) -> AnalyzerConfig:
    """Config file (or defaults) with command-line run overrides; the file itself is never rewritten."""
    config = ConfigManager(args.config).analyzer_config()
    overrides = {}
    if getattr(args, "jobs", None):
        overrides["jobs"] = max(1, args.jobs)
    if getattr(args, "timeout", None):
        overrides["timeout_s"] = max(0.001, args.timeout)
    if getattr(args, "db", None):
        overrides["db"] = args.db
    if overrides:
        config.run = config.run.model_copy(update=overrides)
    return config


def write_metrics_csv(path, rows: List[dict]):
    if not rows:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def print_reports(reports: List[AppReport]):
    table = Table(title="Sink verdicts")
    table.add_column("App", style="cyan", no_wrap=True)
    table.add_column("Site")
    table.add_column("Status")
    table.add_column("Values")
    for report in reports:
        if report.status != "ok":
            table.add_row(report.app, "-", f"[bold red]{report.status.upper()}[/]", report.error)
            continue
        if not report.verdicts:
            table.add_row(report.app, "-", "[dim]no sinks[/]", "")
        for v in report.verdicts:
            values = sorted({str(x) for f in v.flows for fact in f.facts for x in fact.values})
            style = STATUS_STYLES.get(v.status, "white")
            table.add_row(report.app, v.site, f"[{style}]{v.status}[/]", ", ".join(values[:4]))
    console.print(table)


# --- Subcommands ---
async def _run_batch(args, analyzer: str) -> List[AppReport]:
    config = load_config(args)
    specs = load_sink_specs(args.sinks)
    session = SessionLogger(config.run.log_dir, command=analyzer)
    session.log_config(config.model_dump())
    repository = None
    if config.run.db:
        repository = MetricsRepository(config.run.db)
        await repository.initialize()
        await repository.start_run(session.run_id, analyzer, config.model_dump())
    try:
        orchestrator = AnalysisOrchestrator(config, specs, analyzer, session, args.out,
                                            getattr(args, "emit_ssg", None), repository)
        reports = await orchestrator.run(expand_app_dirs(args.apps))
        status = orchestrator.get_status()
        session.end_session(f"{status['apps']} app(s), {status['failed']} failed")
        if repository is not None:
            await repository.finish_run(session.run_id, status["apps"], status["failed"])
    finally:
        if repository is not None:
            await repository.close()
    return reports


def cmd_vet(args, analyzer: str = "targetvet") -> int:
    if getattr(args, "dump_index", False):
        config = load_config(args)
        for app in expand_app_dirs(args.apps):
            stats = build_index(parse_app(app, config.framework_prefixes)).stats_json()
            console.print_json(json.dumps(stats))
    reports = asyncio.run(_run_batch(args, analyzer))
    print_reports(reports)
    if args.metrics:
        write_metrics_csv(args.metrics, [metrics_row(r) for r in reports])
    if any(r.status != "ok" for r in reports):
        return EXIT_FAILED
    if args.fail_on_vuln and any(r.vulnerable for r in reports):
        return EXIT_VULNERABLE
    return EXIT_OK


def cmd_oracle(args) -> int:
    return cmd_vet(args, analyzer="oracle")


def cmd_gen(args) -> int:
    out = Path(args.out)
    for n in range(args.count):
        spec = GenSpec(
            seed=args.seed + n,
            classes=args.classes,
            methods_per_class=args.methods_per_class,
            linkages=args.linkages.split(","),
            sinks=args.sinks,
            unreachable_fraction=args.unreachable,
            value_templates=args.templates.split(","),
        )
        target = out if args.count == 1 else out / f"seed_{spec.seed}"
        app_dir, truth = generate(spec, target)
        console.print(f"[green]Generated[/] {app_dir}  ({truth.classes} classes, {truth.methods} methods, "
                      f"{len(truth.sinks)} sinks)")
    return EXIT_OK


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_bench(args) -> int:
    config = load_config(args)
    family = size_family(_int_list(args.sizes), sinks=args.sinks, seed=args.seed) if args.sizes else []
    if args.sink_sweep:
        family += sink_family(_int_list(args.sink_sweep), methods=args.sweep_methods, seed=args.seed)
    rows = bench(family, args.work, config)
    table = Table(title="Targeted vs whole-app")
    for col in ("Methods", "Sinks", "targetvet ms", "oracle ms", "visited (tv/oracle)", "ratio", "agree"):
        table.add_column(col, justify="right")
    for r in rows:
        table.add_row(str(r.methods), str(r.sinks), f"{r.targetvet_ms:.1f}", f"{r.oracle_ms:.1f}",
                      f"{r.targetvet_visited}/{r.oracle_visited}", f"{r.visited_ratio:.3f}",
                      "yes" if r.agree else "[bold red]no[/]")
    console.print(table)
    if args.metrics:
        write_metrics_csv(args.metrics, [r.as_dict() for r in rows])
    if config.run.db and rows:
        asyncio.run(_store_bench(config.run.db, rows))
    return EXIT_OK


async def _store_bench(db: str, rows):
    session = SessionLogger(os.getenv("TARGETVET_LOG_DIR", "logs"), command="bench")
    async with MetricsRepository(db) as repository:
        await repository.start_run(session.run_id, "bench", {})
        for row in rows:
            await repository.upsert_bench_row(session.run_id, row.as_dict())
        await repository.finish_run(session.run_id, len(rows), 0)


def cmd_replay(args) -> int:
    config = load_config(args)
    results = replay_all(args.fixtures, config, load_sink_specs(args.sinks))
    table = Table(title="Fixture replay")
    table.add_column("Fixture", style="cyan")
    table.add_column("Result")
    table.add_column("Problems")
    for r in results:
        table.add_row(r.name, "[green]pass[/]" if r.passed else "[bold red]FAIL[/]", "\n".join(r.problems))
    console.print(table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="targetvet",
                                     description="Targeted backward dataflow analysis of SBC apps")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--verbose", action="store_true")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in (("vet", cmd_vet, "Targeted analysis of one or more apps"),
                                ("oracle", cmd_oracle, "Whole-app baseline analysis")):
        p = subparsers.add_parser(name, help=help_text)
        p.add_argument("apps", nargs="+", help="App directories or batch directories")
        p.add_argument("--sinks", default=str(DEFAULT_SINKS), help="Sink spec JSON")
        p.add_argument("--out", help="Report directory")
        p.add_argument("--metrics", help="Per-app metrics CSV")
        p.add_argument("--jobs", type=int, help="Apps analyzed in parallel")
        p.add_argument("--timeout", type=float, help="Per-app timeout in seconds")
        p.add_argument("--db", help="sqlite file for metrics")
        p.add_argument("--fail-on-vuln", action="store_true", help="Exit 2 when a sink is Vulnerable")
        p.add_argument("--dump-index", action="store_true", help="Print search index statistics")
        if name == "vet":
            p.add_argument("--emit-ssg", help="Directory for per-sink SSG JSON")
        p.set_defaults(func=fn)

    p = subparsers.add_parser("gen", help="Generate synthetic apps with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--classes", type=int, default=50)
    p.add_argument("--methods-per-class", type=int, default=10)
    p.add_argument("--linkages", default=",".join(LINKAGES))
    p.add_argument("--sinks", type=int, default=10)
    p.add_argument("--unreachable", type=float, default=0.0)
    p.add_argument("--templates", default=",".join(VALUE_TEMPLATES))
    p.set_defaults(func=cmd_gen)

    p = subparsers.add_parser("bench", help="Scaling table over generated apps")
    p.add_argument("--work", required=True, help="Directory for generated apps")
    p.add_argument("--sizes", default="1000,5000,10000", help="Method counts at fixed sink count")
    p.add_argument("--sinks", type=int, default=5)
    p.add_argument("--sink-sweep", default="", help="Sink counts at fixed size")
    p.add_argument("--sweep-methods", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--metrics", help="Bench rows CSV")
    p.add_argument("--db", help="sqlite file for bench rows")
    p.set_defaults(func=cmd_bench)

    p = subparsers.add_parser("replay-fixtures", help="Check fixture apps against expected.json")
    p.add_argument("fixtures", nargs="?", default=str(DEFAULT_FIXTURES))
    p.add_argument("--sinks", default=str(DEFAULT_SINKS))
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_dir = os.getenv("TARGETVET_LOG_DIR", "logs")
    setup_logging(log_dir, args.verbose)
    logger.info("=" * 60)
    logger.info(f"targetvet {args.command}")
    logger.info("=" * 60)
    try:
        return args.func(args)
    except TargetVetError as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"[bold red]Error:[/] {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
