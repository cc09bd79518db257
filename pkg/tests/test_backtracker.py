import pytest

from core.backtracker import Backtracker, CallChain, CallerEdge, LifecycleTable, Reach, Via
from core.config_manager import AnalyzerConfig
from core.engine.app_analyzer import AppAnalyzer
from core.sbc.hierarchy import build_hierarchy
from core.sbc.model import ComponentKind, MethodSig, parse_method_sig
from core.sbc.parser import parse_app
from core.search_index import build_index

from tests.conftest import CIPHER


@pytest.fixture
def tracker(fixture_app):
    def make(name: str) -> Backtracker:
        model, index, hierarchy = fixture_app(name)
        return Backtracker(model, hierarchy, index)
    return make


def sig(text: str) -> MethodSig:
    return parse_method_sig(text)


def tracker_for(app) -> Backtracker:
    model = parse_app(app, AnalyzerConfig().framework_prefixes)
    return Backtracker(model, build_hierarchy(model), build_index(model))


def test_direct_caller_binds_receiver_and_argument(tracker):
    t = tracker("ecb")
    callers = t.find_callers(sig("<com.ecb.MainActivity: void encrypt(java.lang.String)>"))

    assert len(callers) == 1
    edge = callers[0]
    assert edge.via == Via.DIRECT
    assert edge.caller.name == "onCreate"
    assert edge.line == 7
    assert edge.bound() == {0: "v0", 1: "v1"}


def test_caller_lists_are_memoized(tracker):
    t = tracker("ecb")
    encrypt = sig("<com.ecb.MainActivity: void encrypt(java.lang.String)>")
    first = t.find_callers(encrypt)
    scans = t.index.scan_count
    assert t.find_callers(encrypt) == first
    assert t.index.scan_count == scans


def test_callback_handler_resolved_through_advanced_chain(tracker):
    t = tracker("callback_executor")
    run = sig("<com.netcast.Task: void run()>")

    assert t.overridden_type(run) == "java.lang.Runnable"
    chains = [c for c in t.find_callers(run) if isinstance(c, CallChain)]
    assert len(chains) == 1
    chain = chains[0]
    assert [m.name for m in chain.methods] == ["connect", "runInBackground", "runInBackground"]
    assert chain.handler == run
    assert chain.ending_edge.line == 32
    assert chain.ending_edge.bound() == {0: "v1"}


def test_reachability_witness_runs_entry_first(tracker):
    t = tracker("callback_executor")
    ok, witness = t.is_reachable(sig("<com.netcast.Task: void run()>"))

    assert ok
    assert [e.caller.name for e in witness] == ["onCreate", "connect", "runInBackground", "runInBackground"]
    assert witness[-1].callee.name == "run"


def test_explicit_icc_edge(tracker):
    t = tracker("icc_explicit")
    callers = t.find_callers(sig("<com.icc.SecondActivity: void onCreate(android.os.Bundle)>"))

    assert len(callers) == 1
    edge = callers[0]
    assert edge.via == Via.ICC
    assert edge.caller == sig("<com.icc.MainActivity: void onCreate(android.os.Bundle)>")
    assert edge.line == 13
    assert edge.bound() == {"intent": "v2"}
    assert not edge.low_confidence


def test_implicit_icc_edge_uses_receiver_intent_slot(tracker):
    t = tracker("icc_implicit")
    receiver = sig("<com.mp3server.PortReceiver: void onReceive(android.content.Context,android.content.Intent)>")
    callers = t.find_callers(receiver)

    assert [e.via for e in callers] == [Via.ICC]
    assert callers[0].bound() == {2: "v1"}
    assert callers[0].line == 12


def test_lifecycle_predecessors_skip_undefined_handlers(tracker):
    t = tracker("lifecycle_resume")
    on_resume = sig("<com.life.MainActivity: void onResume()>")

    assert t.lifecycle_predecessors(on_resume, resolved=False) == [
        sig("<com.life.MainActivity: void onCreate(android.os.Bundle)>")]
    assert t.lifecycle_predecessors(on_resume, resolved=True) is Reach.ENTRY_REACHED

    callers = t.find_callers(on_resume)
    assert [(e.via, e.caller.name) for e in callers] == [(Via.LIFECYCLE, "onCreate")]
    assert callers[0].bound() == {0: "v0"}


def test_static_initializer_reachable_through_class_reference(tracker):
    t = tracker("clinit_static")
    ok, witness = t.clinit_reachable("com.heyzap.Consts")
    assert ok
    assert witness == ["com.heyzap.Consts", "com.heyzap.MainActivity"]

    clinit = sig("Lcom/heyzap/Consts;.<clinit>:()V")
    assert [e.via for e in t.find_callers(clinit)] == [Via.CLINIT_IMPLICIT]


def test_unregistered_component_is_unreachable(tracker):
    t = tracker("unregistered")
    hidden = sig("<com.unreg.HiddenActivity: void onCreate(android.os.Bundle)>")

    assert t.handler_kind(hidden) == ComponentKind.ACTIVITY
    assert t.find_callers(hidden) == []
    assert t.is_reachable(hidden) == (False, [])


def test_recursive_callers_still_reach_entry(tracker):
    t = tracker("loops")
    ok, witness = t.is_reachable(sig("<com.loops.MainActivity: void a(java.lang.String)>"))
    assert ok
    assert [e.caller.name for e in witness] == ["onCreate", "b"]


def test_method_without_body_is_counted_unresolved(tracker):
    t = tracker("ecb")
    assert t.find_callers(MethodSig("com.ecb.Missing", "go", (), "V")) == []
    assert t.unresolved_callees == 1
    assert t.stats()["unresolved_callees"] == 1


def test_sink_method_cache_counts_hits(tracker):
    t = tracker("unregistered")
    hidden = sig("<com.unreg.HiddenActivity: void onCreate(android.os.Bundle)>")
    assert t.sink_method_cache(hidden) is None
    t.remember_sink_method(hidden, False)
    assert t.sink_method_cache(hidden) == (False, [])
    assert t.sink_cache_hits == 1


def _encrypt_app(app_dir, sites: int):
    calls = "\n".join(f"    v{2 + i} = invoke {CIPHER} v1" for i in range(sites))
    return app_dir("activity Lcom/t/Main; exported", Main=f"""\
.class public Lcom/t/Main;
.super Landroid/app/Activity;

.method public onCreate(Landroid/os/Bundle;)V
    v0 = param 0
    v1 = const "AES"
    invoke v0 Lcom/t/Main;.encrypt:(Ljava/lang/String;)V v1
    return-void
.end method

.method public encrypt(Ljava/lang/String;)V
    v0 = param 0
    v1 = param 1
{calls}
    return-void
.end method
""")


def test_repeated_sink_method_is_served_from_cache(app_dir, tmp_path, config, specs):
    single = AppAnalyzer(config, specs).analyze(_encrypt_app(app_dir, 1)).report
    (tmp_path / "app").rename(tmp_path / "single")
    triple = AppAnalyzer(config, specs).analyze(_encrypt_app(app_dir, 3)).report

    # three sites in one method: s - u = 2
    assert [v.status for v in triple.verdicts] == ["Vulnerable"] * 3
    assert single.metrics.sink_cache_hits == 0
    assert triple.metrics.sink_cache_hits == 2
    assert triple.metrics.searches == single.metrics.searches


# ============================================================
# Connected-device server apps
# ============================================================

NETCAST_START = "<com.connectsdk.service.netcast.NetcastHttpServer: void start()>"
NETCAST_RUN = "<com.connectsdk.service.NetcastTVService$1: void run()>"


def test_executor_runnable_chain_through_static_helpers(tracker):
    t = tracker("netcast")
    run = sig(NETCAST_RUN)

    assert t.overridden_type(run) == "java.lang.Runnable"
    [chain] = [c for c in t.find_callers(run) if isinstance(c, CallChain)]
    assert [m.analysis for m in chain.methods] == [
        "<com.connectsdk.service.NetcastTVService: void connect()>",
        "<com.connectsdk.core.Util: void runInBackground(java.lang.Runnable)>",
        "<com.connectsdk.core.Util: void runInBackground(java.lang.Runnable,boolean)>",
    ]
    assert all(e.via == Via.ADVANCED_CHAIN for e in chain.edges)
    assert chain.edges[0].line == 18
    assert chain.edges[1].bound() == {0: "v0", 1: "v1"}
    assert chain.ending_edge.line == 15
    assert chain.ending_edge.bound() == {0: "v0"}
    assert chain.handler == run


def test_private_server_start_has_one_direct_caller(tracker):
    t = tracker("netcast")
    callers = t.find_callers(sig(NETCAST_START))

    assert [(e.via, e.caller.analysis, e.line) for e in callers] == [(Via.DIRECT, NETCAST_RUN, 18)]
    assert callers[0].bound() == {0: "v2"}

    ok, witness = t.is_reachable(sig(NETCAST_START))
    assert ok
    assert [e.caller.name for e in witness] == ["onCreate", "connect", "runInBackground", "runInBackground", "run"]


def test_child_class_call_site_found_by_child_signature(tracker):
    t = tracker("child_server")
    callers = t.find_callers(sig("<com.connectsdk.service.netcast.NetcastHttpServer: void start()>"))

    assert [(e.via, e.caller.name, e.line) for e in callers] == [(Via.CHILD_CLASS_SIG, "onCreate", 8)]
    assert callers[0].bound() == {0: "v1"}


def test_overloading_child_keeps_its_own_call_sites(app_dir):
    app = app_dir(
        "activity Lcom/t/Main; exported",
        Main="""
            .class public Lcom/t/Main;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                v1 = new Lcom/t/Custom;
                invoke v1 Lcom/t/Custom;.<init>:()V
                invoke v1 Lcom/t/Custom;.start:()V
                v2 = new Lcom/t/Plain;
                invoke v2 Lcom/t/Plain;.<init>:()V
                invoke v2 Lcom/t/Plain;.start:()V
                return-void
            .end method
        """,
        Server="""
            .class public Lcom/t/Server;
            .super Ljava/lang/Object;

            .method public <init>()V
                v0 = param 0
                return-void
            .end method

            .method public start()V
                v0 = param 0
                return-void
            .end method
        """,
        Custom="""
            .class public Lcom/t/Custom;
            .super Lcom/t/Server;

            .method public <init>()V
                v0 = param 0
                return-void
            .end method

            .method public start()V
                v0 = param 0
                return-void
            .end method
        """,
        Plain="""
            .class public Lcom/t/Plain;
            .super Lcom/t/Server;

            .method public <init>()V
                v0 = param 0
                return-void
            .end method
        """,
    )
    t = tracker_for(app)
    server_start = MethodSig("com.t.Server", "start", (), "V")
    custom_start = MethodSig("com.t.Custom", "start", (), "V")

    assert [(e.via, e.line) for e in t.find_callers(server_start)] == [(Via.CHILD_CLASS_SIG, 11)]
    direct = [e for e in t.find_callers(custom_start) if isinstance(e, CallerEdge)]
    assert [(e.via, e.line) for e in direct] == [(Via.DIRECT, 8)]


def test_super_typed_receiver_found_by_advanced_search(tracker):
    t = tracker("super_server")
    start = sig("<com.connectsdk.service.netcast.NetcastHttpServer: void start()>")

    assert t.overridden_type(start) == "com.connectsdk.service.netcast.SuperServer"
    callers = t.find_callers(start)
    assert len(callers) == 1
    chain = callers[0]
    assert isinstance(chain, CallChain)
    assert len(chain.edges) == 1
    edge = chain.ending_edge
    assert (edge.via, edge.caller.name, edge.line) == (Via.ADVANCED_CHAIN, "onCreate", 9)
    assert edge.bound() == {0: "v1"}


def test_three_class_static_initializer_witness(tracker):
    t = tracker("heyzap")
    ok, witness = t.clinit_reachable("com.heyzap.internal.APIClient")

    assert ok
    assert witness == [
        "com.heyzap.internal.APIClient", "com.heyzap.house.model.AdModel",
        "com.heyzap.sdk.ads.HeyzapInterstitialActivity"]

    factory = sig("<com.heyzap.http.MySSLSocketFactory: org.apache.http.conn.ssl.SSLSocketFactory "
                  "getFixedSocketFactory(org.apache.http.conn.ssl.X509HostnameVerifier)>")
    callers = t.find_callers(factory)
    assert [(e.via, e.caller.name, e.line) for e in callers] == [(Via.DIRECT, "<clinit>", 7)]
    assert callers[0].bound() == {0: "v0"}


def test_service_started_with_class_constant(tracker):
    t = tracker("http_server_service")
    on_start = sig("<com.lge.app1.fota.HttpServerService: int onStartCommand(android.content.Intent,int,int)>")
    callers = t.find_callers(on_start)

    assert len(callers) == 1
    edge = callers[0]
    assert edge.via == Via.ICC
    assert edge.caller == sig("<com.lge.app1.MainActivity: void onCreate(android.os.Bundle)>")
    assert edge.line == 12
    assert edge.bound() == {1: "v1"}
    assert not edge.low_confidence


# ============================================================
# Degraded searches
# ============================================================

def test_intent_built_in_helper_is_low_confidence(app_dir, config, specs):
    app = app_dir(
        """
        activity Lcom/t/Main; exported
        activity Lcom/t/Second;
        """,
        Main="""
            .class public Lcom/t/Main;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                v1 = const class Lcom/t/Second;
                v2 = invoke v0 Lcom/t/Main;.buildIntent:(Ljava/lang/Class;)Landroid/content/Intent; v1
                invoke v0 Lcom/t/Main;.startActivity:(Landroid/content/Intent;)V v2
                return-void
            .end method

            .method public buildIntent(Ljava/lang/Class;)Landroid/content/Intent;
                v0 = param 0
                v1 = param 1
                v2 = new Landroid/content/Intent;
                invoke v2 Landroid/content/Intent;.<init>:(Landroid/content/Context;Ljava/lang/Class;)V v0 v1
                v3 = const "mode"
                v4 = const "AES/ECB/NoPadding"
                invoke v2 Landroid/content/Intent;.putExtra:(Ljava/lang/String;Ljava/lang/String;)Landroid/content/Intent; v3 v4
                return v2
            .end method
        """,
        Second="""
            .class public Lcom/t/Second;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                v1 = invoke v0 Landroid/app/Activity;.getIntent:()Landroid/content/Intent;
                v2 = const "mode"
                v3 = invoke v1 Landroid/content/Intent;.getStringExtra:(Ljava/lang/String;)Ljava/lang/String; v2
                v4 = invoke Ljavax/crypto/Cipher;.getInstance:(Ljava/lang/String;)Ljavax/crypto/Cipher; v3
                return-void
            .end method
        """,
    )
    t = tracker_for(app)
    callers = t.find_callers(MethodSig("com.t.Second", "onCreate", ("Landroid/os/Bundle;",), "V"))

    assert [(e.via, e.line, e.low_confidence) for e in callers] == [(Via.ICC, 8, True)]
    assert callers[0].bound() == {"intent": "v2"}

    [verdict] = AppAnalyzer(config, specs).analyze(app).report.verdicts
    assert verdict.site == "Lcom/t/Second;.onCreate:(Landroid/os/Bundle;)V@9"
    assert verdict.status == "LowConfidence"


def test_missing_constructor_and_ending_are_counted(app_dir):
    app = app_dir(
        "activity Lcom/t/Main; exported",
        Main="""
            .class public Lcom/t/Main;
            .super Landroid/app/Activity;

            .method public onCreate(Landroid/os/Bundle;)V
                v0 = param 0
                v1 = new Lcom/t/Idle;
                invoke v1 Lcom/t/Idle;.<init>:()V
                return-void
            .end method
        """,
        Idle="""
            .class public Lcom/t/Idle;
            .super Ljava/lang/Object;
            .implements Ljava/lang/Runnable;

            .method public <init>()V
                v0 = param 0
                return-void
            .end method

            .method public run()V
                v0 = param 0
                return-void
            .end method
        """,
        Orphan="""
            .class public Lcom/t/Orphan;
            .super Ljava/lang/Object;
            .implements Ljava/lang/Runnable;

            .method public run()V
                v0 = param 0
                return-void
            .end method
        """,
    )
    t = tracker_for(app)

    assert t.find_callers(MethodSig("com.t.Orphan", "run", (), "V")) == []
    assert (t.no_constructor, t.no_ending) == (1, 0)
    assert t.find_callers(MethodSig("com.t.Idle", "run", (), "V")) == []
    assert (t.no_constructor, t.no_ending) == (1, 1)
    assert t.stats()["no_constructor"] == 1
    assert t.stats()["no_ending"] == 1


def test_broken_chain_rejected():
    a = MethodSig("com.t.A", "a", (), "V")
    b = MethodSig("com.t.B", "b", (), "V")
    c = MethodSig("com.t.C", "c", (), "V")
    with pytest.raises(ValueError):
        CallChain((CallerEdge(a, None, b, Via.ADVANCED_CHAIN), CallerEdge(c, None, a, Via.ADVANCED_CHAIN)))


def test_cyclic_lifecycle_predecessors_rejected():
    with pytest.raises(ValueError):
        LifecycleTable(predecessor_map={
            ComponentKind.ACTIVITY: {"onStart": ("onResume",), "onResume": ("onStart",)}})


def test_lifecycle_table_from_config_merges_extras():
    table = LifecycleTable.from_config(
        [{"api_class": "android.os.Handler", "api_method": "post", "handler": "run"}],
        ["startActivity", "startForegroundService"])

    assert table.icc_apis.count("startActivity") == 1
    assert "startForegroundService" in table.icc_apis
    post = MethodSig("android.os.Handler", "post", ("Ljava/lang/Runnable;",), "Z")
    assert table.match_registration(post, "arg", "run") is not None
    assert table.predecessors(ComponentKind.ACTIVITY, "onResume") == ("onStart", "onPause")
    assert table.intent_slot(ComponentKind.RECEIVER, "onReceive") == 2
