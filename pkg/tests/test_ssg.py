import json

import pytest

from core.backtracker import Backtracker
from core.engine.app_analyzer import AppAnalyzer
from core.forward_eval import evaluate
from core.sbc.model import MethodSig
from core.sbc.parser import SbcParser
from core.ssg import SSG, EdgeKind, SSGBuilder, TaintSet, Track, base_of, taint_transfer

from tests.conftest import FIXTURES

FIELD = "Lcom/t/A;.f:I"
MODE = "Lcom/heyzap/Consts;.MODE:Ljava/lang/String;"


def stmt(text: str, line: int = 10):
    return SbcParser().parse_instruction(text, line)


@pytest.fixture
def ssgs(config, specs):
    def build(name: str):
        return AppAnalyzer(config, specs, keep_ssgs=True).analyze(FIXTURES / name / "app").ssgs
    return build


# ============================================================
# Taint sets and transfer
# ============================================================

def test_taint_set_keeps_root_with_sub_paths():
    t = TaintSet([f"v1.{FIELD}"])
    assert t.touched("v1")
    assert t.kill("v1") == ["", f".{FIELD}"]
    assert not t

    t = TaintSet([f"v1.{FIELD}"])
    t.remove(f"v1.{FIELD}")
    assert not t.touched("v1")


def test_access_path_needs_register_root():
    assert base_of("v12[]") == "v12"
    with pytest.raises(ValueError):
        base_of("this.f")


def test_param_definition_leaves_residual():
    t = TaintSet(["v1"])
    out = taint_transfer(stmt("v1 = param 1"), t)
    assert out.relevant
    assert dict(out.residual) == {1: {""}}
    assert not t


def test_binop_taints_both_operands():
    t = TaintSet(["v3"])
    taint_transfer(stmt("v3 = binop add v1 v2"), t)
    assert t.paths == {"v1", "v2"}


def test_instance_field_get_moves_taint_to_field_path():
    t = TaintSet(["v2"])
    taint_transfer(stmt(f"v2 = iget v0 {FIELD}"), t)
    assert f"v0.{FIELD}" in t

    out = taint_transfer(stmt(f"iput v5 v0 {FIELD}"), t)
    assert out.relevant
    assert t.paths == {"v5"}


def test_static_field_get_records_app_static():
    t, statics = TaintSet(["v2"]), set()
    taint_transfer(stmt(f"v2 = sget {FIELD}"), t, statics)
    assert statics == {FIELD}

    framework = set()
    taint_transfer(stmt("v2 = sget Ljavax/crypto/Cipher;.MODE:I"), TaintSet(["v2"]), framework,
                   is_framework=lambda cls: cls.startswith("javax."))
    assert framework == set()


def test_static_put_discards_the_field():
    t, statics = TaintSet(), {FIELD}
    out = taint_transfer(stmt(f"sput v2 {FIELD}"), t, statics)
    assert out.relevant
    assert statics == set()
    assert t.paths == {"v2"}

    # an earlier write of the same field is dead
    assert not taint_transfer(stmt(f"sput v4 {FIELD}"), t, statics).relevant
    assert t.paths == {"v2"}


def test_intent_extras_flow_through_put_extra():
    t = TaintSet(["v3"])
    taint_transfer(stmt("v3 = invoke v1 Landroid/content/Intent;.getStringExtra:(Ljava/lang/String;)Ljava/lang/String; v2"), t)
    assert "v1.#extras" in t

    out = taint_transfer(stmt("invoke v1 Landroid/content/Intent;.putExtra:(Ljava/lang/String;I)Landroid/content/Intent; v4 v5"), t)
    assert out.relevant
    assert {"v4", "v5"} <= t.paths


def test_get_intent_is_an_intent_residual():
    t = TaintSet(["v1.#extras"])
    out = taint_transfer(stmt("v1 = invoke v0 Landroid/app/Activity;.getIntent:()Landroid/content/Intent;"), t)
    assert dict(out.residual) == {"intent": {"", ".#extras"}}


def test_untouched_statement_is_irrelevant():
    t = TaintSet(["v1"])
    assert not taint_transfer(stmt("v4 = const 3"), t).relevant
    assert t.paths == {"v1"}


# ============================================================
# Generated graphs
# ============================================================

def test_caller_frame_joins_through_cross_method_edge(ssgs):
    site = "Lcom/ecb/MainActivity;.encrypt:(Ljava/lang/String;)V@16"
    ssg = ssgs("ecb")[site]
    on_create = "Lcom/ecb/MainActivity;.onCreate:(Landroid/os/Bundle;)V"

    assert ssg.sink_unit == site
    assert set(ssg.units) == {
        site, "Lcom/ecb/MainActivity;.encrypt:(Ljava/lang/String;)V@15", f"{on_create}@6", f"{on_create}@7"}
    cross = ssg.cross_edges()
    assert len(cross) == 1
    assert (cross[0].src, cross[0].via) == (f"{on_create}@7", "Direct")
    assert cross[0].bound() == {0: "v0", 1: "v1"}

    assert ssg.reachable
    assert [(t.unit, t.reachable) for t in ssg.tails] == [(f"{on_create}@6", True)]


def test_static_initializer_runs_on_its_own_track(ssgs):
    ssg = ssgs("clinit_static")["Lcom/heyzap/MainActivity;.onCreate:(Landroid/os/Bundle;)V@8"]

    assert ssg.taint_map.statics == {MODE}
    assert len(ssg.static_tracks) == 1
    track = ssg.static_tracks[0]
    assert track.valid
    assert track.fields == (MODE,)
    assert {ssg.units[u].track for u in track.units} == {Track.STATIC_INIT}
    assert ssg.unresolved_statics == set()


def test_unregistered_sink_method_has_only_unreachable_tails(ssgs):
    ssg = ssgs("unregistered")["Lcom/unreg/HiddenActivity;.onCreate:(Landroid/os/Bundle;)V@7"]
    assert ssg.tails
    assert not ssg.reachable


def test_icc_edge_binds_the_intent(ssgs):
    ssg = ssgs("icc_explicit")["Lcom/icc/SecondActivity;.onCreate:(Landroid/os/Bundle;)V@9"]
    icc = [e for e in ssg.cross_edges() if e.via == "ICC"]
    assert len(icc) == 1
    assert icc[0].bound() == {"intent": "v2"}
    assert ssg.reachable


def test_graph_survives_json(ssgs):
    ssg = ssgs("icc_explicit")["Lcom/icc/SecondActivity;.onCreate:(Landroid/os/Bundle;)V@9"]
    data = json.loads(json.dumps(ssg.to_json()))
    again = SSG.from_json(data)

    assert again.to_json() == ssg.to_json()
    assert again.sink.stmt == ssg.sink.stmt
    assert {e.kind for e in again.edges} <= set(EdgeKind)


def test_recursive_callers_are_logged_as_loops(config, specs):
    report = AppAnalyzer(config, specs).analyze(FIXTURES / "loops" / "app").report
    assert report.metrics.loops["CrossBackward"] >= 1


def test_static_writers_are_the_contained_methods(fixture_app):
    model, index, hierarchy = fixture_app("clinit_static")
    builder = SSGBuilder(model, index, Backtracker(model, hierarchy, index))

    assert builder.contained_methods_for_static(MODE) == {MethodSig("com.heyzap.Consts", "<clinit>", (), "V")}
    assert builder.contained_methods_for_static("Lcom/heyzap/Consts;.OTHER:I") == set()


MP3_START = "Lcom/studiosol/palcomp3/MP3Server;.onStartCommand:(Landroid/content/Intent;II)I"
MP3_INIT = "Lcom/studiosol/palcomp3/MP3LocalServer;.<init>:()V"
NANO_INIT = "Lcom/studiosol/util/NanoHTTPD;.<init>:(I)V"
PORT = "Lcom/studiosol/palcomp3/MP3LocalServer;.PORT:I"


def test_constructor_calls_pair_with_returns(ssgs):
    ssg = ssgs("mp3_server")[f"{MP3_START}@11"]
    calls = [e for e in ssg.edges if e.kind == EdgeKind.CONTAINED_CALL]
    returns = [e for e in ssg.edges if e.kind == EdgeKind.CONTAINED_RETURN]

    assert ssg.cross_edges() == []
    assert len(calls) == len(returns) == 2
    for call in calls:
        assert [r.dst for r in returns if r.dst == call.src] == [call.src]
        callee = ssg.units[call.dst].method
        [back] = [r for r in returns if r.dst == call.src]
        assert ssg.units[back.src].method == callee

    by_src = {e.src: e for e in calls}
    assert ssg.units[by_src[f"{MP3_START}@8"].dst].method.search == MP3_INIT
    assert ssg.units[by_src[f"{MP3_INIT}@16"].dst].method.search == NANO_INIT
    assert by_src[f"{MP3_INIT}@16"].bound() == {0: "v0", 1: "v3"}
    assert {e.src for e in returns} == {f"{MP3_INIT}@16", f"{NANO_INIT}@9"}


def test_static_port_resolved_through_class_initializer(ssgs):
    ssg = ssgs("mp3_server")[f"{MP3_START}@11"]

    assert ssg.taint_map.statics == {PORT}
    [track] = ssg.static_tracks
    assert track.valid
    assert track.fields == (PORT,)
    assert track.witness == ("com.studiosol.palcomp3.MP3LocalServer", "com.studiosol.palcomp3.MP3Server")
    assert ssg.unresolved_statics == set()

    [result] = evaluate(ssg)
    assert result.facts["arg0"].is_const
    assert result.facts["arg0"].values == {8081}


def test_orphan_static_initializer_track_is_invalid(app_dir, config, specs):
    app = app_dir(
        "activity Lcom/t/Main; exported",
        Main="""
            .class public Lcom/t/Main;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                return-void
            .end method
        """,
        Hidden="""
            .class public Lcom/t/Hidden;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                v1 = sget Lcom/t/Consts;.MODE:Ljava/lang/String;
                v2 = invoke Ljavax/crypto/Cipher;.getInstance:(Ljava/lang/String;)Ljavax/crypto/Cipher; v1
                return-void
            .end method
        """,
        Consts="""
            .class public Lcom/t/Consts;
            .super Ljava/lang/Object;
            .field public static MODE:Ljava/lang/String;

            .method static <clinit>()V
                v0 = const "AES/ECB/NoPadding"
                sput v0 Lcom/t/Consts;.MODE:Ljava/lang/String;
                return-void
            .end method
        """,
    )
    analysis = AppAnalyzer(config, specs, keep_ssgs=True).analyze(app)
    ssg = analysis.ssgs["Lcom/t/Hidden;.onCreate:(Landroid/os/Bundle;)V@7"]
    mode = "Lcom/t/Consts;.MODE:Ljava/lang/String;"

    [track] = ssg.static_tracks
    assert not track.valid
    assert track.fields == (mode,)
    assert ssg.unresolved_statics == {mode}
    assert all(r.facts["arg0"].is_unresolved for r in evaluate(ssg))
    assert [v.status for v in analysis.report.verdicts] == ["Unreachable"]


@pytest.mark.parametrize("fixture,site", [
    ("mp3_server", f"{MP3_START}@11"),
    ("heyzap", "Lcom/heyzap/http/MySSLSocketFactory;.getFixedSocketFactory:"
               "(Lorg/apache/http/conn/ssl/X509HostnameVerifier;)Lorg/apache/http/conn/ssl/SSLSocketFactory;@14"),
    ("netcast", "Lcom/connectsdk/service/netcast/NetcastHttpServer;.start:()V@14"),
])
def test_serialized_graph_evaluates_the_same(ssgs, fixture, site):
    ssg = ssgs(fixture)[site]
    again = SSG.from_json(json.loads(json.dumps(ssg.to_json())))

    want = evaluate(ssg)
    got = evaluate(again)
    assert want
    assert [(r.key(), r.flow, r.tail) for r in got] == [(r.key(), r.flow, r.tail) for r in want]
