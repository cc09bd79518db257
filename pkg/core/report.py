"""
Report models shared by every subcommand.
"""

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field

from core.detectors import Verdict
from core.forward_eval import Fact, SinkFactResult

SCHEMA_VERSION = 1


class FactView(BaseModel):
    label: str
    kind: Literal["Unresolved", "ConstSet", "Unknown"]
    values: List[Union[int, str]] = []


class FlowView(BaseModel):
    chain: List[str]
    reachable: bool
    low_confidence: bool = False
    unpaired: bool = False
    facts: List[FactView] = []


class SinkReport(BaseModel):
    site: str
    method: str
    line: int
    sink: str
    status: Literal["Vulnerable", "Safe", "Unreachable", "Unknown", "LowConfidence"]
    severity: str = "medium"
    witness: List[str] = []
    flows: List[FlowView] = []
    ssg_file: Optional[str] = None


class RunMetrics(BaseModel):
    wall_ms: float = Field(0.0, ge=0)
    sink_ms: Dict[str, float] = {}
    searches: int = Field(0, ge=0)
    cache: Dict[str, float] = {}
    loops: Dict[str, int] = {}
    visited_methods: int = Field(0, ge=0)
    sink_cache_hits: int = Field(0, ge=0)
    sink_count: int = Field(0, ge=0)
    classes: int = Field(0, ge=0)
    methods: int = Field(0, ge=0)


class AppReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    app: str
    analyzer: Literal["targetvet", "oracle"] = "targetvet"
    status: Literal["ok", "failed", "timeout"] = "ok"
    error: str = ""
    verdicts: List[SinkReport] = []
    metrics: RunMetrics = RunMetrics()

    def tally(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for v in self.verdicts:
            out[v.status] = out.get(v.status, 0) + 1
        return out

    @property
    def vulnerable(self) -> int:
        return sum(1 for v in self.verdicts if v.status == "Vulnerable")


def fact_view(label: str, fact: Fact) -> FactView:
    return FactView(label=label, kind=fact.kind.value, values=fact.render())


def flow_view(result: SinkFactResult) -> FlowView:
    return FlowView(
        chain=list(result.flow),
        reachable=result.reachable,
        low_confidence=result.low_confidence,
        unpaired=result.unpaired,
        facts=[fact_view(label, f) for label, f in sorted(result.facts.items())],
    )


def sink_report(verdict: Verdict, ssg_file: Optional[str] = None) -> SinkReport:
    return SinkReport(
        site=verdict.site,
        method=verdict.method,
        line=verdict.line,
        sink=verdict.sink,
        status=verdict.status.value,
        severity=verdict.severity,
        witness=list(verdict.witness),
        flows=[flow_view(r) for r in verdict.evidence],
        ssg_file=ssg_file,
    )


def report_filename(report: AppReport) -> str:
    suffix = "" if report.analyzer == "targetvet" else f".{report.analyzer}"
    return f"{report.app}{suffix}.report.json"


def write_report(report: AppReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / report_filename(report)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_report(path) -> AppReport:
    return AppReport.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
