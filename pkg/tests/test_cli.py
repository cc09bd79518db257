import csv
import json

import pytest

from main import EXIT_FAILED, EXIT_OK, EXIT_VULNERABLE, expand_app_dirs, main

from tests.conftest import FIXTURES


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("TARGETVET_LOG_DIR", str(tmp_path / "logs"))
    return tmp_path / "logs"


def test_gen_writes_app_and_truth(tmp_path):
    out = tmp_path / "gen"
    code = main(["gen", "--out", str(out), "--seed", "3", "--classes", "14", "--methods-per-class", "2",
                 "--sinks", "10"])
    assert code == EXIT_OK
    assert (out / "app" / "manifest.txt").is_file()
    assert len(json.loads((out / "truth.json").read_text())["sinks"]) == 10


def test_gen_count_uses_one_directory_per_seed(tmp_path):
    out = tmp_path / "gen"
    assert main(["gen", "--out", str(out), "--seed", "5", "--count", "2", "--classes", "8",
                 "--linkages", "Static,Private", "--sinks", "2"]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["seed_5", "seed_6"]
    assert len(expand_app_dirs([str(out)])) == 2


def test_infeasible_gen_fails(tmp_path):
    assert main(["gen", "--out", str(tmp_path / "gen"), "--sinks", "2"]) == EXIT_FAILED


def test_vet_reports_and_metrics(tmp_path, log_dir):
    out, metrics = tmp_path / "out", tmp_path / "metrics.csv"
    code = main(["vet", str(FIXTURES / "ecb" / "app"), "--out", str(out), "--metrics", str(metrics)])

    assert code == EXIT_OK
    report = json.loads((out / "ecb.report.json").read_text())
    assert sorted(v["status"] for v in report["verdicts"]) == ["Safe", "Vulnerable"]
    rows = list(csv.DictReader(metrics.open()))
    assert rows[0]["app"] == "ecb" and rows[0]["vulnerable"] == "1"
    assert len(list((log_dir / "runs").iterdir())) == 1


def test_vet_fail_on_vuln():
    assert main(["vet", str(FIXTURES / "ecb" / "app"), "--fail-on-vuln"]) == EXIT_VULNERABLE
    assert main(["vet", str(FIXTURES / "unregistered" / "app"), "--fail-on-vuln"]) == EXIT_OK


def test_vet_failed_app_exits_one(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["vet", str(FIXTURES / "ecb" / "app"), str(empty)]) == EXIT_FAILED


def test_vet_writes_db(tmp_path):
    db = tmp_path / "m.sqlite"
    assert main(["vet", str(FIXTURES / "ecb" / "app"), "--db", str(db)]) == EXIT_OK
    assert db.is_file()


def test_oracle_subcommand(tmp_path):
    out = tmp_path / "out"
    assert main(["oracle", str(FIXTURES / "ecb" / "app"), "--out", str(out)]) == EXIT_OK
    assert (out / "ecb.oracle.report.json").is_file()


def test_emit_ssg(tmp_path):
    ssg = tmp_path / "ssg"
    assert main(["vet", str(FIXTURES / "ecb" / "app"), "--emit-ssg", str(ssg)]) == EXIT_OK
    assert sorted(p.name for p in (ssg / "ecb").iterdir()) == ["ssg_000.json", "ssg_001.json"]


def test_bad_config_fails(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"forward_eval": {"k": 0}}))
    assert main(["--config", str(config), "vet", str(FIXTURES / "ecb" / "app")]) == EXIT_FAILED


def test_replay_fixtures():
    assert main(["replay-fixtures", str(FIXTURES)]) == EXIT_OK
