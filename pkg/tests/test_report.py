import json

from core.report import AppReport, FlowView, RunMetrics, SinkReport, load_report, report_filename, write_report

from tests.conftest import ROOT

SCHEMA = json.loads((ROOT / "schemas" / "report.schema.json").read_text())


def test_schema_lists_every_report_field():
    assert set(SCHEMA["properties"]) == set(AppReport.model_fields)
    defs = SCHEMA["$defs"]
    assert set(defs["SinkReport"]["properties"]) == set(SinkReport.model_fields)
    assert set(defs["FlowView"]["properties"]) == set(FlowView.model_fields)
    assert set(defs["RunMetrics"]["properties"]) == set(RunMetrics.model_fields)


def _report(analyzer: str = "targetvet") -> AppReport:
    verdict = SinkReport(site="Lcom/t/A;.go:()V@3", method="<com.t.A: void go()>", line=3,
                         sink="Ljava/net/ServerSocket;.<init>:(I)V", status="Vulnerable",
                         flows=[FlowView(chain=["<com.t.A: void go()>"], reachable=True)])
    return AppReport(app="demo", analyzer=analyzer, verdicts=[verdict], metrics=RunMetrics(wall_ms=1.5))


def test_write_and_load(tmp_path):
    path = write_report(_report(), tmp_path)
    assert path.name == "demo.report.json"
    again = load_report(path)
    assert again == _report()
    assert again.vulnerable == 1
    assert again.tally() == {"Vulnerable": 1}


def test_oracle_reports_get_their_own_file():
    assert report_filename(_report("oracle")) == "demo.oracle.report.json"
