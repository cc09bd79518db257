"""
Scaling comparison between the targeted analyzer and the whole-app oracle
over a family of generated apps.
"""

import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import median
from typing import Dict, Iterable, List, Optional, Sequence

from core.config_manager import AnalyzerConfig
from core.corpusgen import GenSpec, generate, sink_specs
from core.detectors import SinkSpec
from core.engine.app_analyzer import AppAnalyzer
from core.oracle import analyze_app_dir

logger = logging.getLogger("bench")

BENCH_LINKAGES = ["Static", "Interface", "Callback", "IccExplicit", "Clinit"]


@dataclass
class BenchRow:
    seed: int
    classes: int
    methods: int
    sinks: int
    targetvet_ms: float
    oracle_ms: float
    targetvet_visited: int
    oracle_visited: int
    visited_ratio: float
    per_sink_ms: float
    agree: bool

    def as_dict(self) -> Dict:
        return asdict(self)


def size_family(method_counts: Iterable[int], sinks: int = 5, methods_per_class: int = 10,
                seed: int = 1, linkages: Optional[List[str]] = None) -> List[GenSpec]:
    """Fixed sink count, growing app size."""
    linkages = linkages or BENCH_LINKAGES[:sinks]
    return [GenSpec(seed=seed, classes=max(1, m // methods_per_class), methods_per_class=methods_per_class,
                    linkages=linkages, sinks=sinks) for m in method_counts]


def sink_family(sink_counts: Iterable[int], methods: int = 1000, methods_per_class: int = 10,
                seed: int = 1) -> List[GenSpec]:
    """Fixed app size, growing sink count."""
    return [GenSpec(seed=seed, classes=max(1, methods // methods_per_class), methods_per_class=methods_per_class,
                    linkages=BENCH_LINKAGES[:max(1, min(n, len(BENCH_LINKAGES)))], sinks=n)
            for n in sink_counts]


def bench(family: Sequence[GenSpec], work_dir, config: Optional[AnalyzerConfig] = None,
          specs: Optional[Sequence[SinkSpec]] = None) -> List[BenchRow]:
    config = config or AnalyzerConfig()
    specs = list(specs or sink_specs())
    rows = []
    for i, spec in enumerate(family):
        out = Path(work_dir) / f"bench_{i:03d}_s{spec.seed}_c{spec.classes}_k{spec.sinks}"
        app_dir, truth = generate(spec, out)

        start = time.perf_counter()
        targeted = AppAnalyzer(config, specs).analyze(app_dir)
        targetvet_ms = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        oracle = analyze_app_dir(app_dir, specs, config.framework_prefixes, config.lifecycle(),
                                 config.forward_eval.k)
        oracle_ms = (time.perf_counter() - start) * 1000.0

        ours = {v.site: v.status for v in targeted.report.verdicts}
        theirs = {v.site: v.status for v in oracle.report.verdicts}
        tv_visited = targeted.report.metrics.visited_methods
        or_visited = oracle.report.metrics.visited_methods
        sink_ms = list(targeted.report.metrics.sink_ms.values())
        row = BenchRow(
            seed=spec.seed,
            classes=truth.classes,
            methods=truth.methods,
            sinks=len(truth.sinks),
            targetvet_ms=round(targetvet_ms, 3),
            oracle_ms=round(oracle_ms, 3),
            targetvet_visited=tv_visited,
            oracle_visited=or_visited,
            visited_ratio=round(tv_visited / or_visited, 4) if or_visited else 0.0,
            per_sink_ms=round(median(sink_ms), 3) if sink_ms else 0.0,
            agree=ours == theirs,
        )
        logger.info(f"bench {i}: {row.methods} methods, {row.sinks} sinks, targetvet {row.targetvet_ms:.1f} ms "
                    f"({tv_visited} visited), oracle {row.oracle_ms:.1f} ms ({or_visited} visited)")
        rows.append(row)
    return rows
