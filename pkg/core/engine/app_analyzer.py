"""
Per-app targeted analysis.

parse -> index -> initial sink search -> per-site backtracking into an SSG
-> forward evaluation -> detector verdicts. Only code on the backward slice
of a sink site is ever visited.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from core.backtracker import Backtracker
from core.config_manager import AnalyzerConfig
from core.detectors import SinkSpec, Status, Verdict, judge_site
from core.engine.activity_logger import ActivityLogger
from core.errors import TargetVetError
from core.forward_eval import evaluate
from core.report import AppReport, RunMetrics, sink_report
from core.sbc.hierarchy import ClassHierarchy, build_hierarchy
from core.sbc.model import AppModel, MethodSig, app_name
from core.sbc.parser import parse_app
from core.search_index import CallHit, SearchIndex, build_index
from core.ssg import SSG, SSGBuilder, unit_id

logger = logging.getLogger("analyzer")


def sink_targets(sig: MethodSig, hierarchy: ClassHierarchy) -> List[MethodSig]:
    """The sink signature plus the same sub-signature on app classes that inherit it unchanged."""
    out = [sig]
    if sig.is_constructor or sig.is_clinit:
        return out
    for child in sorted(hierarchy.subclasses(sig.cls)):
        if hierarchy.resolve(child, sig.sub_signature) is None:
            out.append(sig.with_class(child))
    return out


def find_sink_sites(index: SearchIndex, hierarchy: ClassHierarchy,
                    specs: Sequence[SinkSpec]) -> List[Tuple[SinkSpec, CallHit]]:
    """Initial search: every call site of every sink, first matching spec wins per site."""
    seen: Dict[Tuple[MethodSig, int], SinkSpec] = {}
    out = []
    for spec in specs:
        for target in sink_targets(spec.sig, hierarchy):
            for hit in index.search_invocations(target.search):
                key = (hit.containing_method, hit.line)
                if key in seen:
                    continue
                seen[key] = spec
                out.append((spec, hit))
    out.sort(key=lambda p: (p[1].containing_method.search, p[1].line))
    return out


@dataclass
class AppAnalysis:
    report: AppReport
    ssgs: Dict[str, SSG] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)


class AppAnalyzer:
    """Runs the targeted pipeline over one app directory."""

    def __init__(self, config: AnalyzerConfig, specs: Sequence[SinkSpec],
                 activity_dir: Optional[str] = None, session_logger=None, keep_ssgs: bool = False):
        self.config = config
        self.specs = list(specs)
        self.activity_dir = activity_dir
        self.session_logger = session_logger
        self.keep_ssgs = keep_ssgs

    def analyze(self, app_dir) -> AppAnalysis:
        start = time.perf_counter()
        app_dir = Path(app_dir)
        name = app_name(app_dir)
        activity = (ActivityLogger(name, self.activity_dir, self.session_logger)
                    if self.activity_dir else None)

        try:
            model = parse_app(app_dir, self.config.framework_prefixes)
            hierarchy = build_hierarchy(model)
        except TargetVetError as e:
            if activity:
                activity.log_error(str(e))
            raise
        if activity:
            activity.log_start(model.class_count, model.method_count)
        index = build_index(model)
        sites = find_sink_sites(index, hierarchy, self.specs)
        if activity:
            for spec in self.specs:
                activity.log_sink_search(spec.name, sum(1 for s, _ in sites if s is spec))

        metrics = RunMetrics(classes=model.class_count, methods=model.method_count)
        analysis = AppAnalysis(AppReport(app=name, metrics=metrics))
        if not sites:
            logger.info(f"{name}: no sink call sites")
            metrics.wall_ms = _ms(start)
            metrics.searches = index.scan_count
            metrics.cache = index.stats.as_dict()
            if activity:
                activity.log_stop(0, metrics.wall_ms)
            return analysis

        bt = self.config.backtracker
        tracker = Backtracker(model, hierarchy, index, self.config.lifecycle(),
                              bt.max_advanced_depth, bt.max_field_hops)
        builder = SSGBuilder(model, index, tracker, self.config.forward_eval.max_contained_depth)

        for spec, hit in sites:
            site_start = time.perf_counter()
            verdict, ssg = self._analyze_site(model, tracker, builder, spec, hit, activity)
            site = verdict.site
            metrics.sink_ms[site] = _ms(site_start)
            analysis.verdicts.append(verdict)
            if ssg is not None and self.keep_ssgs:
                analysis.ssgs[site] = ssg
            if activity:
                values = [str(v) for r in verdict.evidence for f in r.facts.values() for v in f.render()]
                activity.log_verdict(site, verdict.status.value, sorted(set(values)))

        analysis.report.verdicts = [sink_report(v) for v in analysis.verdicts]
        metrics.sink_count = len(sites)
        metrics.searches = index.scan_count
        metrics.cache = index.stats.as_dict()
        metrics.loops = tracker.loop_log.as_dict()
        metrics.visited_methods = len(tracker.visited_methods)
        metrics.sink_cache_hits = tracker.sink_cache_hits
        metrics.wall_ms = max(_ms(start), sum(metrics.sink_ms.values()))
        if activity:
            activity.log_stop(len(sites), metrics.wall_ms)
        logger.info(f"{name}: {len(sites)} sink site(s), {analysis.report.tally()}, "
                    f"{metrics.wall_ms:.1f} ms")
        return analysis

    def _analyze_site(self, model: AppModel, tracker: Backtracker, builder: SSGBuilder, spec: SinkSpec,
                      hit: CallHit, activity: Optional[ActivityLogger]) -> Tuple[Verdict, Optional[SSG]]:
        method = hit.containing_method
        site = unit_id(method, hit.line)
        if activity:
            activity.log_sink_site(site)

        cached = tracker.sink_method_cache(method)
        if cached is not None and not cached[0]:
            if activity:
                activity.log_cached(method.analysis, False)
            return judge_site(site, [], spec), None

        ssg = builder.generate(hit, spec.tracked(hit.instruction.expr))
        tracker.remember_sink_method(method, ssg.reachable)
        if activity:
            for m in sorted(ssg.methods(), key=lambda s: s.search):
                vias = sorted({e.via for e in ssg.cross_edges() if ssg.units[e.dst].method == m})
                if vias:
                    activity.log_callers(m.analysis, vias)
            activity.log_ssg(len(ssg.units), len(ssg.edges), len(ssg.tails), ssg.reachable)

        fe = self.config.forward_eval
        results = evaluate(ssg, fe.k, fe.max_flows, fe.max_contained_depth, model.is_framework, spec.sink)
        verdict = judge_site(site, results, spec)
        if verdict.status == Status.VULNERABLE:
            logger.warning(f"{model.name}: {spec.name} vulnerable at {site}")
        return verdict, ssg


def write_ssgs(analysis: AppAnalysis, out_dir) -> Dict[str, str]:
    """One JSON file per sink site; returns site -> file name and records it in the report."""
    out = Path(out_dir) / analysis.report.app
    out.mkdir(parents=True, exist_ok=True)
    names = {}
    for i, (site, ssg) in enumerate(sorted(analysis.ssgs.items())):
        name = f"ssg_{i:03d}.json"
        (out / name).write_text(json.dumps(ssg.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        names[site] = str(Path(analysis.report.app) / name)
    for sr in analysis.report.verdicts:
        sr.ssg_file = names.get(sr.site)
    return names


def analyze_app(app_dir, config: AnalyzerConfig, specs: Sequence[SinkSpec], **kwargs) -> AppAnalysis:
    return AppAnalyzer(config, specs, **kwargs).analyze(app_dir)


def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)
