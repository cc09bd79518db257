import tempfile
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

from core.corpusgen import LINKAGES, GenSpec, generate
from core.forward_eval import Fact, join
from core.sbc.hierarchy import build_hierarchy
from core.sbc.model import MethodSig, parse_method_sig
from core.sbc.parser import parse_app
from core.search_index import build_index

from tests.conftest import write_app

IDENT = st.from_regex(r"[a-z][a-zA-Z0-9]{0,6}", fullmatch=True)
CLASS = st.builds(lambda pkg, name: ".".join(pkg + [name]),
                  st.lists(IDENT, min_size=1, max_size=3),
                  st.from_regex(r"[A-Z][a-zA-Z0-9]{0,6}", fullmatch=True))
BASE_DESC = st.sampled_from(["I", "Z", "J", "D", "Ljava/lang/String;", "Landroid/content/Intent;"])
DESC = st.builds(lambda dims, base: "[" * dims + base, st.integers(0, 2), BASE_DESC)


@given(cls=CLASS, name=IDENT, params=st.lists(DESC, max_size=4), ret=st.one_of(st.just("V"), DESC))
def test_signature_renderings_round_trip(cls, name, params, ret):
    sig = MethodSig(cls, name, tuple(params), ret)
    assert parse_method_sig(sig.search) == sig
    assert parse_method_sig(sig.analysis) == sig
    assert parse_method_sig(sig.search).analysis == sig.analysis


@st.composite
def class_forests(draw):
    n = draw(st.integers(2, 15))
    return [draw(st.one_of(st.none(), st.integers(0, i - 1))) if i else None for i in range(n)]


@settings(max_examples=30, deadline=None)
@given(supers=class_forests())
def test_subclass_query_matches_brute_force(supers):
    files = {}
    for i, sup in enumerate(supers):
        header = f".class public Lp/C{i};"
        files[f"C{i}"] = header + (f"\n.super Lp/C{sup};" if sup is not None else "")
    with tempfile.TemporaryDirectory() as tmp:
        h = build_hierarchy(parse_app(write_app(Path(tmp) / "app", "", **files)))

    for c in range(len(supers)):
        expected, frontier = set(), {c}
        while frontier:
            frontier = {i for i, s in enumerate(supers) if s in frontier} - expected
            expected |= frontier
        assert h.subclasses(f"p.C{c}") == {f"p.C{i}" for i in expected}


def _naive_invocations(app_dir: Path):
    """callee search form -> {(containing method search form, line)} from a plain line scan."""
    out = {}
    for path in sorted(app_dir.rglob("*.sbc")):
        cls = method = None
        for lineno, raw in enumerate(path.read_text().split("\n"), start=1):
            text = raw.strip()
            if text.startswith(".class "):
                cls = text.split()[-1]
            elif text.startswith(".method "):
                name, rest = text.split()[-1].split("(", 1)
                params, ret = rest.split(")", 1)
                method = f"{cls}.{name}:({params}){ret}"
            elif "invoke" in text.split():
                callee = next(t for t in text.split() if ";." in t and ":(" in t)
                out.setdefault(callee, set()).add((method, lineno))
    return out


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), linkages=st.lists(st.sampled_from(LINKAGES), min_size=1, max_size=4, unique=True))
def test_invocation_search_matches_line_scan(seed, linkages):
    spec = GenSpec(seed=seed, classes=10, methods_per_class=2, linkages=linkages, sinks=len(linkages) + 1)
    with tempfile.TemporaryDirectory() as tmp:
        app_dir, _ = generate(spec, tmp)
        naive = _naive_invocations(app_dir)
        index = build_index(parse_app(app_dir))

    assert naive
    for callee, expected in naive.items():
        hits = index.search_invocations(callee)
        assert {(h.containing_method.search, h.line) for h in hits} == expected


INTS = st.frozensets(st.integers(-50, 50), max_size=10)


@given(a=INTS, b=INTS, k=st.integers(1, 8))
def test_join_is_bounded_commutative_and_absorbing(a, b, k):
    fa, fb = Fact.const(a, k=k), Fact.const(b, k=k)
    j = join(fa, fb, k=k)

    assert j == join(fb, fa, k=k)
    assert j.is_unknown or (j.values == fa.values | fb.values and len(j.values) <= k)
    assert join(j, fa, k=k) == j
    assert join(fa, fa, k=k) == fa
    assert join(Fact.unresolved(), fa, k=k) == fa
