import asyncio
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from core.config_manager import AnalyzerConfig
from core.detectors import SinkSpec
from core.engine.app_analyzer import AppAnalyzer, write_ssgs
from core.errors import TargetVetError
from core.oracle import analyze_app_dir
from core.report import AppReport, RunMetrics, write_report
from core.sbc.model import app_name
from core.session_logger import SessionLogger

logger = logging.getLogger("orchestrator")


class AnalysisOrchestrator:
    """
    Batch driver: one analysis per app directory, run on worker threads.
    A failing or timed-out app marks only its own report.
    """

    def __init__(self, config: AnalyzerConfig, specs: Sequence[SinkSpec], analyzer: str = "targetvet",
                 session_logger: Optional[SessionLogger] = None, out_dir: Optional[str] = None,
                 emit_ssg: Optional[str] = None, repository=None):
        self.config = config
        self.specs = list(specs)
        self.analyzer = analyzer
        self.session_logger = session_logger
        self.out_dir = out_dir
        self.emit_ssg = emit_ssg
        self.repository = repository
        self.reports: Dict[str, AppReport] = {}

    def _analyze_sync(self, app_dir: Path) -> AppReport:
        if self.analyzer == "oracle":
            fe = self.config.forward_eval
            return analyze_app_dir(app_dir, self.specs, self.config.framework_prefixes,
                                   self.config.lifecycle(), fe.k).report
        activity_dir = self.session_logger.log_dir if self.session_logger else None
        analysis = AppAnalyzer(self.config, self.specs, activity_dir=activity_dir,
                               session_logger=self.session_logger,
                               keep_ssgs=self.emit_ssg is not None).analyze(app_dir)
        if self.emit_ssg is not None:
            write_ssgs(analysis, self.emit_ssg)
        return analysis.report

    async def analyze_app(self, app_dir: Path, semaphore: asyncio.Semaphore) -> AppReport:
        """Safe wrapper: never raises."""
        async with semaphore:
            start = time.perf_counter()
            timeout = self.config.run.timeout_s
            try:
                work = asyncio.to_thread(self._analyze_sync, app_dir)
                report = await (asyncio.wait_for(work, timeout) if timeout else work)
            except asyncio.TimeoutError:
                logger.error(f"{app_name(app_dir)}: timed out after {timeout}s")
                report = self._failed(app_dir, "timeout", f"timed out after {timeout}s", start)
            except TargetVetError as e:
                logger.error(f"{app_name(app_dir)}: {type(e).__name__}: {e}")
                report = self._failed(app_dir, "failed", f"{type(e).__name__}: {e}", start)
            except Exception as e:
                logger.exception(f"{app_name(app_dir)}: unexpected failure")
                report = self._failed(app_dir, "failed", f"{type(e).__name__}: {e}", start)
        await self._record(report)
        return report

    def _failed(self, app_dir: Path, status: str, error: str, start: float) -> AppReport:
        wall = round((time.perf_counter() - start) * 1000.0, 3)
        return AppReport(app=app_name(app_dir), analyzer=self.analyzer, status=status, error=error,
                         metrics=RunMetrics(wall_ms=wall))

    async def _record(self, report: AppReport):
        self.reports[report.app] = report
        if self.out_dir:
            write_report(report, self.out_dir)
        if self.session_logger:
            self.session_logger.log_app(report.app, report.status, report.tally(), report.metrics.wall_ms,
                                        report.error)
        if self.repository is not None and self.session_logger is not None:
            await self.repository.upsert_app_metrics(self.session_logger.run_id, metrics_row(report))

    async def run(self, app_dirs: Sequence) -> List[AppReport]:
        semaphore = asyncio.Semaphore(self.config.run.jobs)
        dirs = [Path(d) for d in app_dirs]
        logger.info(f"Analyzing {len(dirs)} app(s) with {self.analyzer}, jobs={self.config.run.jobs}")
        reports = await asyncio.gather(*(self.analyze_app(d, semaphore) for d in dirs))
        return list(reports)

    def get_status(self) -> Dict[str, object]:
        """Aggregate status of the apps analyzed so far."""
        verdicts: Dict[str, int] = {}
        for r in self.reports.values():
            for status, n in r.tally().items():
                verdicts[status] = verdicts.get(status, 0) + n
        return {
            "analyzer": self.analyzer,
            "apps": len(self.reports),
            "failed": sum(1 for r in self.reports.values() if r.status != "ok"),
            "vulnerable": sum(r.vulnerable for r in self.reports.values()),
            "verdicts": verdicts,
            "wall_ms": round(sum(r.metrics.wall_ms for r in self.reports.values()), 3),
        }


def metrics_row(report: AppReport) -> Dict[str, object]:
    m = report.metrics
    return {
        "app": report.app,
        "analyzer": report.analyzer,
        "status": report.status,
        "wall_ms": m.wall_ms,
        "sinks": m.sink_count,
        "vulnerable": report.vulnerable,
        "visited_methods": m.visited_methods,
        "searches": m.searches,
        "cache_hit_rate": m.cache.get("rate", 0.0),
        "loops": sum(m.loops.values()),
        "error": report.error,
    }
