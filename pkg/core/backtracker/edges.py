from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from core.sbc.model import Instruction, MethodSig


class Via(Enum):
    DIRECT = "Direct"
    CHILD_CLASS_SIG = "ChildClassSig"
    ADVANCED_CHAIN = "AdvancedChain"
    ICC = "ICC"
    LIFECYCLE = "Lifecycle"
    CLINIT_IMPLICIT = "ClinitImplicit"


class LoopKind(Enum):
    CROSS_BACKWARD = "CrossBackward"
    INNER_BACKWARD = "InnerBackward"
    CROSS_FORWARD = "CrossForward"
    INNER_FORWARD = "InnerForward"


@dataclass(frozen=True)
class CallerEdge:
    caller: MethodSig
    call_site: Optional[Instruction]
    callee: MethodSig
    via: Via
    # callee parameter slot -> caller register at call_site ("intent" slot for ICC edges)
    binding: Tuple[Tuple[object, str], ...] = ()
    low_confidence: bool = False
    hop: str = "call"  # "call", "field" or "return" inside an advanced-search chain

    @property
    def line(self) -> int:
        return self.call_site.line if self.call_site is not None else 0

    def bound(self) -> Dict[object, str]:
        return dict(self.binding)

    def describe(self) -> str:
        return f"{self.caller.analysis} -[{self.via.value}@{self.line}]-> {self.callee.analysis}"


@dataclass(frozen=True)
class CallChain:
    """Forward object-taint chain from the constructor site to the ending method."""
    edges: Tuple[CallerEdge, ...]

    def __post_init__(self):
        for a, b in zip(self.edges, self.edges[1:]):
            if a.callee != b.caller:
                raise ValueError(f"broken chain between {a.describe()} and {b.describe()}")

    @property
    def head(self) -> MethodSig:
        return self.edges[0].caller

    @property
    def ending_method(self) -> MethodSig:
        return self.edges[-1].caller

    @property
    def ending_edge(self) -> CallerEdge:
        return self.edges[-1]

    @property
    def handler(self) -> MethodSig:
        return self.edges[-1].callee

    @property
    def methods(self) -> List[MethodSig]:
        return [e.caller for e in self.edges]

    def predecessor_edge(self, method: MethodSig) -> Optional[CallerEdge]:
        """Chain edge arriving at `method`, if the chain passes through it."""
        for e in self.edges[:-1]:
            if e.callee == method:
                return e
        return None


@dataclass
class LoopLog:
    counts: Dict[LoopKind, int] = field(default_factory=lambda: {k: 0 for k in LoopKind})

    def record(self, kind: LoopKind):
        self.counts[kind] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> Dict[str, int]:
        return {k.value: v for k, v in self.counts.items()}
