import pytest

from core.engine.app_analyzer import AppAnalyzer
from core.oracle import analyze_app_dir, whole_app_analyze
from core.sbc.model import parse_method_sig
from core.sbc.parser import parse_app

from tests.conftest import FIXTURES

FIXTURE_NAMES = sorted(p.name for p in FIXTURES.iterdir() if (p / "expected.json").is_file())


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_oracle_agrees_with_targeted_analysis(name, config, specs):
    app = FIXTURES / name / "app"
    targeted = AppAnalyzer(config, specs).analyze(app).report
    oracle = analyze_app_dir(app, specs, config.framework_prefixes, config.lifecycle(),
                             config.forward_eval.k).report

    assert oracle.analyzer == "oracle"
    assert {v.site: v.status for v in oracle.verdicts} == {v.site: v.status for v in targeted.verdicts}


def test_call_graph_holds_every_method(config, specs):
    model = parse_app(FIXTURES / "ecb" / "app", config.framework_prefixes)
    analysis = whole_app_analyze(model, specs, config.lifecycle())

    assert analysis.graph.graph.number_of_nodes() == model.method_count
    on_create = parse_method_sig("<com.ecb.MainActivity: void onCreate(android.os.Bundle)>")
    encrypt = parse_method_sig("<com.ecb.MainActivity: void encrypt(java.lang.String)>")
    assert on_create in analysis.graph.entries
    assert analysis.graph.is_reachable(encrypt)
    assert analysis.report.metrics.visited_methods <= model.method_count


def test_unregistered_component_outside_call_graph(config, specs):
    model = parse_app(FIXTURES / "unregistered" / "app", config.framework_prefixes)
    analysis = whole_app_analyze(model, specs, config.lifecycle())
    hidden = parse_method_sig("<com.unreg.HiddenActivity: void onCreate(android.os.Bundle)>")

    assert not analysis.graph.is_reachable(hidden)
    assert [v.status.value for v in analysis.verdicts] == ["Unreachable", "Unreachable"]
