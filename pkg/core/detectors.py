"""
Security predicates over sink facts.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, field_validator

from core.errors import SpecArityMismatch
from core.forward_eval import ArrayObj, ConstName, Fact, NewObj, SinkFactResult
from core.sbc.model import Expr, MethodSig, parse_method_sig

logger = logging.getLogger("detectors")

RECEIVER = "receiver"


class Status(Enum):
    VULNERABLE = "Vulnerable"
    SAFE = "Safe"
    UNREACHABLE = "Unreachable"
    UNKNOWN = "Unknown"
    LOW_CONFIDENCE = "LowConfidence"


class Predicate(BaseModel):
    kind: Literal["contains", "equals-constant-name", "int-equals", "cipher-mode"]
    value: Optional[Union[int, str]] = None

    def matches(self, v) -> bool:
        return PREDICATES[self.kind](v, self.value)


class SinkSpec(BaseModel):
    sink: str
    params: List[int] = []
    receiver: bool = False
    predicate: Predicate
    severity: str = "medium"
    label: str = ""

    @field_validator("sink")
    @classmethod
    def _valid_sig(cls, v: str) -> str:
        parse_method_sig(v)
        return v

    @property
    def sig(self) -> MethodSig:
        return parse_method_sig(self.sink)

    @property
    def name(self) -> str:
        return self.label or self.sink

    def check_arity(self):
        arity = self.sig.arity
        for i in self.params:
            if not 0 <= i < arity:
                raise SpecArityMismatch(self.sink, i, arity)

    def tracked(self, call: Expr) -> List[Tuple[str, str]]:
        """(label, register) pairs the sink call passes for the tracked positions."""
        self.check_arity()
        out = [(f"arg{i}", call.operands[i]) for i in self.params]
        if self.receiver and call.base is not None:
            out.append((RECEIVER, call.base))
        return out


def load_sink_specs(path) -> List[SinkSpec]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("sinks", [])
    specs = [SinkSpec.model_validate(item) for item in data]
    for s in specs:
        s.check_arity()
    logger.info(f"Loaded {len(specs)} sink specs from {path}")
    return specs


# ============================================================
# Predicates
# ============================================================

def _contains(v, token) -> bool:
    return isinstance(v, str) and str(token) in v


def _equals_constant_name(v, name) -> bool:
    return isinstance(v, ConstName) and (v.name == name or str(v) == name)


def _int_equals(v, n) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and n is not None and v == int(n)


def _cipher_mode(v, mode) -> bool:
    """A transformation with the given mode segment, or a bare algorithm name (platform default ECB)."""
    if not isinstance(v, str) or not v:
        return False
    parts = v.split("/")
    if len(parts) == 1:
        return True
    return parts[1].strip().upper() == str(mode or "ECB").upper()


PREDICATES: Dict[str, Callable] = {
    "contains": _contains,
    "equals-constant-name": _equals_constant_name,
    "int-equals": _int_equals,
    "cipher-mode": _cipher_mode,
}


# ============================================================
# Verdicts
# ============================================================

@dataclass
class Verdict:
    site: str
    method: str
    line: int
    sink: str
    status: Status
    severity: str = "medium"
    evidence: List[SinkFactResult] = field(default_factory=list)
    witness: Tuple[str, ...] = ()


def _opaque(fact: Fact) -> bool:
    if not fact.is_const:
        return True
    return any(isinstance(v, (NewObj, ArrayObj)) for v in fact.values)


def fact_matches(fact: Fact, predicate: Predicate) -> bool:
    return fact.is_const and any(predicate.matches(v) for v in fact.values)


def judge_site(site: str, results: List[SinkFactResult], spec: SinkSpec) -> Verdict:
    sig_text, _, line = site.rpartition("@")
    method = parse_method_sig(sig_text).analysis
    base = dict(site=site, method=method, line=int(line), sink=spec.sink, severity=spec.severity)

    reachable = [r for r in results if r.reachable]
    if not reachable:
        return Verdict(status=Status.UNREACHABLE, evidence=list(results), **base)
    high = [r for r in reachable if not r.low_confidence]
    if not high:
        return Verdict(status=Status.LOW_CONFIDENCE, evidence=reachable, witness=reachable[0].flow, **base)

    for r in high:
        if any(fact_matches(f, spec.predicate) for f in r.facts.values()):
            return Verdict(status=Status.VULNERABLE, evidence=high, witness=r.flow, **base)
    if any(_opaque(f) for r in high for f in r.facts.values()):
        return Verdict(status=Status.UNKNOWN, evidence=high, witness=high[0].flow, **base)
    return Verdict(status=Status.SAFE, evidence=high, witness=high[0].flow, **base)


def judge(results: List[SinkFactResult], specs: List[SinkSpec],
          site_specs: Optional[Dict[str, str]] = None) -> List[Verdict]:
    """
    One verdict per sink site. `site_specs` maps a site to the sink string of
    its spec; without it every result is judged against the first spec whose
    sink the site's unit id names.
    """
    by_sink = {s.sink: s for s in specs}
    grouped: Dict[str, List[SinkFactResult]] = {}
    for r in results:
        grouped.setdefault(r.sink_unit, []).append(r)
    verdicts = []
    for site in sorted(set(grouped) | set(site_specs or {})):
        sink = (site_specs or {}).get(site)
        spec = by_sink.get(sink) if sink else None
        if spec is None:
            spec = next((s for s in specs if s.sink in {r.sink for r in grouped.get(site, [])}), None)
        if spec is None:
            logger.warning(f"No sink spec for {site}; skipped")
            continue
        verdicts.append(judge_site(site, grouped.get(site, []), spec))
    return verdicts
