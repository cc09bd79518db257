import json

import pytest
from pydantic import ValidationError

from core.detectors import Predicate, SinkSpec, Status, judge, judge_site, load_sink_specs
from core.errors import SpecArityMismatch
from core.forward_eval import ConstName, Fact, NewObj, SinkFactResult

from tests.conftest import CIPHER, ROOT

SITE = "Lcom/t/A;.go:()V@12"
VERIFIER = ConstName("org.apache.http.conn.ssl.SSLSocketFactory", "ALLOW_ALL_HOSTNAME_VERIFIER")


def spec(kind: str, value=None, params=(0,)) -> SinkSpec:
    return SinkSpec(sink=CIPHER, params=list(params), predicate=Predicate(kind=kind, value=value))


def result(fact: Fact, reachable: bool = True, low_confidence: bool = False) -> SinkFactResult:
    return SinkFactResult(SITE, {"arg0": fact}, ("<com.t.A: void go()>",), reachable, low_confidence,
                          sink=CIPHER)


# ============================================================
# Predicates
# ============================================================

@pytest.mark.parametrize("value,expected", [
    ("AES", True),
    ("AES/ECB/PKCS5Padding", True),
    ("aes/ecb/nopadding", True),
    ("AES/GCM/NoPadding", False),
    ("AES/CBC/PKCS5Padding", False),
    ("", False),
    (8081, False),
])
def test_cipher_mode(value, expected):
    assert Predicate(kind="cipher-mode", value="ECB").matches(value) is expected


def test_equals_constant_name_accepts_short_and_qualified_names():
    assert Predicate(kind="equals-constant-name", value="ALLOW_ALL_HOSTNAME_VERIFIER").matches(VERIFIER)
    assert Predicate(kind="equals-constant-name", value=str(VERIFIER)).matches(VERIFIER)
    assert not Predicate(kind="equals-constant-name", value="ALLOW_ALL_HOSTNAME_VERIFIER").matches(
        "ALLOW_ALL_HOSTNAME_VERIFIER")
    strict = ConstName("org.apache.http.conn.ssl.SSLSocketFactory", "STRICT_HOSTNAME_VERIFIER")
    assert not Predicate(kind="equals-constant-name", value="ALLOW_ALL_HOSTNAME_VERIFIER").matches(strict)


def test_int_equals_rejects_strings_and_booleans():
    p = Predicate(kind="int-equals", value=8081)
    assert p.matches(8081)
    assert not p.matches("8081")
    assert not p.matches(8080)
    assert not Predicate(kind="int-equals", value=1).matches(True)


def test_contains():
    p = Predicate(kind="contains", value="http://")
    assert p.matches("http://example.com")
    assert not p.matches("https://example.com")


def test_unknown_predicate_kind_rejected():
    with pytest.raises(ValidationError):
        Predicate(kind="regex", value=".*")


# ============================================================
# Sink specs
# ============================================================

def test_shipped_sink_specs_load(specs):
    assert [s.label for s in specs] == [
        "cipher-ecb", "allow-all-hostnames", "allow-all-hostnames-https", "open-port"]
    assert specs[3].sig.is_constructor
    assert specs[0].name == "cipher-ecb"


def test_tracked_position_outside_arity_rejected():
    with pytest.raises(SpecArityMismatch) as e:
        spec("cipher-mode", "ECB", params=(1,)).check_arity()
    assert e.value.arity == 1


def test_load_rejects_bad_arity(tmp_path):
    path = tmp_path / "sinks.json"
    path.write_text(json.dumps([{"sink": CIPHER, "params": [3], "predicate": {"kind": "contains", "value": "x"}}]))
    with pytest.raises(SpecArityMismatch):
        load_sink_specs(path)


def test_malformed_sink_signature_rejected():
    with pytest.raises(ValidationError):
        SinkSpec(sink="Cipher.getInstance", params=[0], predicate=Predicate(kind="contains", value="x"))


def test_shipped_file_path():
    assert len(load_sink_specs(ROOT / "sinks.json")) == 4


# ============================================================
# Site verdicts
# ============================================================

def test_no_results_is_unreachable():
    v = judge_site(SITE, [], spec("cipher-mode", "ECB"))
    assert v.status == Status.UNREACHABLE
    assert v.method == "<com.t.A: void go()>"
    assert v.line == 12


def test_unreachable_results_are_unreachable():
    v = judge_site(SITE, [result(Fact.const(["AES"]), reachable=False)], spec("cipher-mode", "ECB"))
    assert v.status == Status.UNREACHABLE


def test_only_low_confidence_paths():
    v = judge_site(SITE, [result(Fact.const(["AES"]), low_confidence=True)], spec("cipher-mode", "ECB"))
    assert v.status == Status.LOW_CONFIDENCE


def test_matching_constant_is_vulnerable():
    results = [result(Fact.const(["AES/GCM/NoPadding"])), result(Fact.const(["AES"]))]
    v = judge_site(SITE, results, spec("cipher-mode", "ECB"))
    assert v.status == Status.VULNERABLE
    assert v.witness == ("<com.t.A: void go()>",)
    assert len(v.evidence) == 2


def test_low_confidence_match_does_not_count():
    results = [result(Fact.const(["AES/GCM/NoPadding"])), result(Fact.const(["AES"]), low_confidence=True)]
    assert judge_site(SITE, results, spec("cipher-mode", "ECB")).status == Status.SAFE


@pytest.mark.parametrize("fact", [Fact.unknown(), Fact.unresolved(), Fact.const([NewObj("com.t.V")])])
def test_opaque_value_is_unknown(fact):
    assert judge_site(SITE, [result(fact)], spec("cipher-mode", "ECB")).status == Status.UNKNOWN


def test_known_non_matching_constants_are_safe():
    v = judge_site(SITE, [result(Fact.const(["AES/GCM/NoPadding", "AES/CBC/PKCS5Padding"]))],
                   spec("cipher-mode", "ECB"))
    assert v.status == Status.SAFE


def test_judge_groups_results_by_site():
    other = SinkFactResult("Lcom/t/B;.run:()V@4", {"arg0": Fact.const(["AES"])}, (), True, sink=CIPHER)
    verdicts = judge([result(Fact.const(["AES/GCM/NoPadding"])), other], [spec("cipher-mode", "ECB")])
    assert [(v.site, v.status) for v in verdicts] == [
        ("Lcom/t/A;.go:()V@12", Status.SAFE), ("Lcom/t/B;.run:()V@4", Status.VULNERABLE)]
