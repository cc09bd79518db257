from core.engine.activity_logger import ActivityLogger
from core.engine.app_analyzer import AppAnalyzer
from core.session_logger import SessionLogger

from tests.conftest import FIXTURES


def test_session_file_records_config_apps_and_end(tmp_path):
    session = SessionLogger(tmp_path, run_id="r1", command="vet")
    session.log_config({"forward_eval": {"k": 8}, "framework_prefixes": ["java/"]})
    session.log_app("demo", "ok", {"Vulnerable": 1}, 12.5)
    session.log_app("broken", "failed", {}, 0.4, error="MissingManifest: no manifest.txt")
    session.end_session("2 app(s), 1 failed")

    text = (tmp_path / "runs" / "r1" / "session.txt").read_text()
    assert text.count("RUN ID: r1") == 1
    assert "    - k: 8" in text
    assert "APP #1: demo" in text
    assert "Verdicts: Vulnerable=1" in text
    assert "APP #2: broken" in text
    assert "Error: MissingManifest" in text
    assert "Failed: 1" in text
    assert session.app_count == 2 and session.failed_count == 1


def test_sessions_listed_newest_first(tmp_path):
    SessionLogger(tmp_path, run_id="2026-01-01_00-00-00").log("first")
    second = SessionLogger(tmp_path, run_id="2026-01-02_00-00-00")
    second.log("second")

    assert [s["id"] for s in second.get_sessions()] == ["2026-01-02_00-00-00", "2026-01-01_00-00-00"]
    assert "first" in second.get_session_content("2026-01-01_00-00-00")
    assert second.get_session_content("missing") is None


def test_activity_log_uses_plain_names(tmp_path):
    session = SessionLogger(tmp_path, run_id="r1")
    activity = ActivityLogger("my app", session.log_dir, session)
    activity.log_callers("<com.t.A: void run()>", ["AdvancedChain", "ICC"])
    activity.log_callers("<com.t.A: void go()>", [])
    activity.log_verdict("Lcom/t/A;.run:()V@3", "Unknown")
    activity.log_error("boom")

    text = activity.log_file.read_text()
    assert activity.log_file.name == "activity_my_app.log"
    assert "object handed to the framework, inter-component intent" in text
    assert "No callers of <com.t.A: void go()>" in text
    assert "unknown (value not a constant)" in text
    assert "ERROR: boom" in (session.log_dir / "session.txt").read_text()


def test_analyzer_writes_activity_trail(tmp_path, config, specs):
    AppAnalyzer(config, specs, activity_dir=tmp_path).analyze(FIXTURES / "ecb" / "app")

    text = (tmp_path / "activity_ecb.log").read_text()
    assert "ANALYSIS STARTED  |  ecb" in text
    assert "Found 2 call site(s) of cipher-ecb" in text
    assert "found by: direct call" in text
    assert "VULNERABLE" in text
    assert "ANALYSIS FINISHED  |  2 sink site(s)" in text
