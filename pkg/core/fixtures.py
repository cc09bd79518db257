"""
Replay of hand-written fixture apps against their `expected.json`.

expected.json:
{
  "sinks": "optional path to a sink spec file, relative to the fixture",
  "verdicts": [
    {"method": "<analysis signature of the sink's method>", "status": "Vulnerable",
     "values": [...], "chain": [...], "line": 12}
  ],
  "min_loops": 1,
  "min_cache_hits": 1
}
`values` is the exact union of tracked values over all flows; `chain` must
appear in order inside one flow's chain.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from core.config_manager import AnalyzerConfig
from core.detectors import SinkSpec, load_sink_specs
from core.engine.app_analyzer import AppAnalysis, AppAnalyzer
from core.report import SinkReport

logger = logging.getLogger("fixtures")

EXPECTED_NAME = "expected.json"


@dataclass
class FixtureResult:
    name: str
    passed: bool
    problems: List[str] = field(default_factory=list)
    analysis: Optional[AppAnalysis] = None


def discover(fixtures_dir) -> List[Path]:
    root = Path(fixtures_dir)
    return sorted(p.parent for p in root.glob(f"*/{EXPECTED_NAME}"))


def _in_order(needle: Sequence[str], hay: Sequence[str]) -> bool:
    it = iter(hay)
    return all(any(x == h for h in it) for x in needle)


def _values(report: SinkReport) -> List:
    out = set()
    for flow in report.flows:
        for fact in flow.facts:
            out.update(fact.values)
    return sorted(out, key=lambda v: (str(type(v)), str(v)))


def check(expected: Dict, analysis: AppAnalysis) -> List[str]:
    problems = []
    report = analysis.report
    remaining = list(report.verdicts)
    for exp in expected.get("verdicts", []):
        candidates = [v for v in remaining if v.method == exp["method"]
                      and ("line" not in exp or v.line == exp["line"])]
        if not candidates:
            problems.append(f"no sink site in {exp['method']}")
            continue
        got = candidates[0]
        remaining.remove(got)
        if got.status != exp["status"]:
            problems.append(f"{got.site}: status {got.status}, expected {exp['status']}")
        if "values" in exp:
            values = _values(got)
            if sorted(exp["values"], key=lambda v: (str(type(v)), str(v))) != values:
                problems.append(f"{got.site}: values {values}, expected {exp['values']}")
        if "chain" in exp:
            chains = [f.chain for f in got.flows] + [got.witness]
            if not any(_in_order(exp["chain"], c) for c in chains):
                problems.append(f"{got.site}: no flow contains chain {exp['chain']}")
    if expected.get("exact", True) and remaining:
        problems.append(f"unexpected sink sites: {[v.site for v in remaining]}")
    metrics = report.metrics
    if "min_loops" in expected and sum(metrics.loops.values()) < expected["min_loops"]:
        problems.append(f"loop detections {metrics.loops}, expected at least {expected['min_loops']}")
    if "min_cache_hits" in expected and metrics.cache.get("hits", 0) < expected["min_cache_hits"]:
        problems.append(f"cache hits {metrics.cache}, expected at least {expected['min_cache_hits']}")
    return problems


def replay(fixture_dir, config: AnalyzerConfig, default_specs: Sequence[SinkSpec]) -> FixtureResult:
    fixture_dir = Path(fixture_dir)
    expected = json.loads((fixture_dir / EXPECTED_NAME).read_text(encoding="utf-8"))
    specs = load_sink_specs(fixture_dir / expected["sinks"]) if expected.get("sinks") else list(default_specs)
    analysis = AppAnalyzer(config, specs, keep_ssgs=True).analyze(fixture_dir / "app")
    problems = check(expected, analysis)
    for p in problems:
        logger.warning(f"fixture {fixture_dir.name}: {p}")
    return FixtureResult(fixture_dir.name, not problems, problems, analysis)


def replay_all(fixtures_dir, config: AnalyzerConfig, default_specs: Sequence[SinkSpec]) -> List[FixtureResult]:
    return [replay(d, config, default_specs) for d in discover(fixtures_dir)]
