"""
Forward evaluation of an SSG.

Facts live on the lattice Unresolved <= ConstSet (at most k values) <= Unknown.
ConstSet values are ints, strings, class references, named framework
constants, or references to abstract objects (NewObj / ArrayObj) that carry
their own member facts.

The static track runs first and fills the global static map. Each flow then
runs its frames from the tail method down to the sink, binding callee
parameters from caller registers along the CrossMethod edges.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

from core.sbc.model import ClassRef, Expr, ExprKind, InstrKind, MethodSig
from core.ssg import SSG, SSGEdge, SSGUnit, Track, INTENT_KEY

logger = logging.getLogger("forward_eval")

DEFAULT_K = 8
INT_MIN, INT_RANGE = -(2 ** 31), 2 ** 32


def default_framework(cls: str) -> bool:
    return cls.startswith(("java.", "javax.", "android."))


class FactKind(Enum):
    UNRESOLVED = "Unresolved"
    CONST_SET = "ConstSet"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ConstName:
    """A framework static constant, e.g. ALLOW_ALL_HOSTNAME_VERIFIER."""
    owner: str
    name: str

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}"


@dataclass(eq=False)
class NewObj:
    ctor_class: str
    members: Dict[str, "Fact"] = field(default_factory=dict)
    site: str = ""

    def __repr__(self) -> str:
        return f"NewObj({self.ctor_class})"


@dataclass(eq=False)
class ArrayObj:
    elem_type: str
    length: "Fact"
    elements: Dict[int, "Fact"] = field(default_factory=dict)
    degraded: bool = False
    site: str = ""

    def __repr__(self) -> str:
        return f"ArrayObj({self.elem_type})"


@dataclass(frozen=True)
class Fact:
    kind: FactKind
    values: FrozenSet = frozenset()
    provenance: FrozenSet[str] = frozenset()

    @classmethod
    def unresolved(cls) -> "Fact":
        return cls(FactKind.UNRESOLVED)

    @classmethod
    def unknown(cls, provenance: Iterable[str] = ()) -> "Fact":
        return cls(FactKind.UNKNOWN, frozenset(), frozenset(provenance))

    @classmethod
    def const(cls, values: Iterable, provenance: Iterable[str] = (), k: int = DEFAULT_K) -> "Fact":
        vals = frozenset(values)
        if not vals:
            return cls.unknown(provenance)
        if len(vals) > k:
            return cls.unknown(provenance)
        return cls(FactKind.CONST_SET, vals, frozenset(provenance))

    @property
    def is_const(self) -> bool:
        return self.kind == FactKind.CONST_SET

    @property
    def is_unknown(self) -> bool:
        return self.kind == FactKind.UNKNOWN

    @property
    def is_unresolved(self) -> bool:
        return self.kind == FactKind.UNRESOLVED

    def objects(self) -> List:
        return [v for v in self.values if isinstance(v, (NewObj, ArrayObj))]

    def with_provenance(self, extra: Iterable[str]) -> "Fact":
        return Fact(self.kind, self.values, self.provenance | frozenset(extra))

    def render(self) -> List:
        return sorted((render_value(v) for v in self.values), key=lambda v: (str(type(v)), str(v)))


def render_value(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (int, str)):
        return v
    if isinstance(v, ClassRef):
        return f"class {v.name}"
    if isinstance(v, ConstName):
        return str(v)
    if isinstance(v, NewObj):
        return f"new {v.ctor_class}"
    if isinstance(v, ArrayObj):
        return f"array {v.elem_type}"
    return repr(v)


def join(a: Fact, b: Fact, k: int = DEFAULT_K) -> Fact:
    if a.is_unresolved:
        return b
    if b.is_unresolved:
        return a
    if a.is_unknown or b.is_unknown:
        return Fact.unknown(a.provenance | b.provenance)
    return Fact.const(a.values | b.values, a.provenance | b.provenance, k)


def join_all(facts: Iterable[Fact], k: int = DEFAULT_K) -> Fact:
    out = Fact.unresolved()
    for f in facts:
        out = join(out, f, k)
    return out


def java_int(x: int) -> int:
    return (x - INT_MIN) % INT_RANGE + INT_MIN


def java_str(v) -> Optional[str]:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, str)):
        return str(v)
    return None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def apply_binop(op: str, a, b):
    """One pointwise application; None when the pair has no value."""
    if op == "concat":
        sa, sb = java_str(a), java_str(b)
        return None if sa is None or sb is None else sa + sb
    if not (_is_int(a) and _is_int(b)):
        return None
    if op == "add":
        return java_int(a + b)
    if op == "sub":
        return java_int(a - b)
    if op == "mul":
        return java_int(a * b)
    if b == 0:
        return None
    q = abs(a) // abs(b)
    return java_int(q if (a >= 0) == (b >= 0) else -q)


def pointwise(fn: Callable, facts: List[Fact], provenance: Iterable[str] = (), k: int = DEFAULT_K) -> Fact:
    """Apply fn over every value combination; Unknown absorbs, Unresolved stays bottom."""
    prov = set(provenance)
    for f in facts:
        prov |= f.provenance
    if any(f.is_unknown for f in facts):
        return Fact.unknown(prov)
    if any(f.is_unresolved for f in facts):
        return Fact.unresolved()
    out = set()
    for combo in product(*(sorted(f.values, key=repr) for f in facts)):
        r = fn(*combo)
        if r is not None:
            out.add(r)
    return Fact.const(out, prov, k)


# ============================================================
# Fact maps
# ============================================================

@dataclass
class FactMaps:
    """Per-frame register facts, the per-flow field heap and the shared static map."""
    env: Dict[str, Fact] = field(default_factory=dict)
    statics: Dict[str, Fact] = field(default_factory=dict)
    heap: Dict[str, Fact] = field(default_factory=dict)
    k: int = DEFAULT_K

    def get(self, reg: Optional[str]) -> Fact:
        if reg is None:
            return Fact.unresolved()
        return self.env.get(reg, Fact.unresolved())

    def frame(self) -> "FactMaps":
        return FactMaps({}, self.statics, self.heap, self.k)


def eval_expr(expr: Expr, maps: FactMaps, uid: str = "") -> Fact:
    """Facts for the expression kinds that need no call context."""
    k = maps.k
    prov = (uid,) if uid else ()
    kind = expr.kind
    if kind == ExprKind.CONST:
        return Fact.const([expr.operands[0]], prov, k)
    if kind == ExprKind.BINOP:
        a, b = (maps.get(r) for r in expr.operands)
        return pointwise(lambda x, y: apply_binop(expr.op, x, y), [a, b], prov, k)
    if kind == ExprKind.CAST:
        return maps.get(expr.operands[0]).with_provenance(prov)
    if kind == ExprKind.PHI:
        return join_all((maps.get(r) for r in expr.operands), k).with_provenance(prov)
    if kind == ExprKind.NEW:
        return Fact.const([NewObj(expr.ref, site=uid)], prov, k)
    if kind == ExprKind.NEW_ARRAY:
        return Fact.const([ArrayObj(expr.op, maps.get(expr.operands[0]), site=uid)], prov, k)
    if kind == ExprKind.FIELD_GET:
        return _field_get(expr, maps, prov)
    if kind == ExprKind.ARRAY_GET:
        return _array_get(expr, maps, prov)
    return Fact.unknown(prov)


def _field_get(expr: Expr, maps: FactMaps, prov) -> Fact:
    fref = expr.ref
    if expr.base is None:
        if fref.search in maps.statics:
            return maps.statics[fref.search]
        return Fact.unresolved()
    base = maps.get(expr.base)
    objs = [o for o in base.objects() if isinstance(o, NewObj)]
    if base.is_const and objs:
        return join_all((o.members.get(fref.search, maps.heap.get(fref.search, Fact.unresolved())) for o in objs),
                        maps.k)
    if fref.search in maps.heap:
        return maps.heap[fref.search]
    return Fact.unknown(prov) if base.is_unknown else Fact.unresolved()


def _array_get(expr: Expr, maps: FactMaps, prov) -> Fact:
    base = maps.get(expr.base)
    index = maps.get(expr.operands[0])
    arrays = [o for o in base.objects() if isinstance(o, ArrayObj)]
    if not (base.is_const and arrays):
        return Fact.unknown(prov) if base.is_unknown else Fact.unresolved()
    if any(a.degraded for a in arrays) or index.is_unknown:
        return Fact.unknown(prov)
    if index.is_unresolved:
        return Fact.unresolved()
    facts = [a.elements.get(i, Fact.unresolved()) for a in arrays for i in index.values if _is_int(i)]
    return join_all(facts, maps.k)


def field_put(base: Fact, fsig: str, value: Fact, maps: FactMaps):
    objs = [o for o in base.objects() if isinstance(o, NewObj)]
    strong = base.is_const and len(base.values) == 1 and len(objs) == 1
    for o in objs:
        o.members[fsig] = value if strong else join(o.members.get(fsig, Fact.unresolved()), value, maps.k)
    prev = maps.heap.get(fsig)
    maps.heap[fsig] = value if prev is None else join(prev, value, maps.k)


def array_put(base: Fact, index: Fact, value: Fact, maps: FactMaps):
    for a in (o for o in base.objects() if isinstance(o, ArrayObj)):
        if not index.is_const:
            a.degraded = True
            continue
        ints = [i for i in index.values if _is_int(i) and i >= 0]
        for i in ints:
            a.elements[i] = value if len(ints) == 1 else join(a.elements.get(i, Fact.unresolved()), value, maps.k)


# ============================================================
# API models
# ============================================================

def _members(recv: Fact, key: str, k: int) -> Fact:
    objs = [o for o in recv.objects() if isinstance(o, NewObj)]
    if not (recv.is_const and objs):
        return Fact.unknown()
    return join_all((o.members.get(key, Fact.unresolved()) for o in objs), k)


def _set_member(recv: Fact, key: str, value: Fact, k: int):
    objs = [o for o in recv.objects() if isinstance(o, NewObj)]
    strong = len(recv.values) == 1
    for o in objs:
        o.members[key] = value if strong else join(o.members.get(key, Fact.unresolved()), value, k)


def _parse_int(s):
    if not isinstance(s, str):
        return None
    try:
        return java_int(int(s.strip(), 10))
    except ValueError:
        return None


def _sb_init(recv, args, k):
    _set_member(recv, "#value", args[0] if args else Fact.const([""]), k)
    return Fact.unresolved()


def _sb_append(recv, args, k):
    current = _members(recv, "#value", k)
    _set_member(recv, "#value", pointwise(lambda a, b: apply_binop("concat", a, b), [current, args[0]], k=k), k)
    return recv


def _sb_to_string(recv, args, k):
    return _members(recv, "#value", k)


def _string_value_of(recv, args, k):
    return pointwise(java_str, [args[0]], k=k)


def _string_concat(recv, args, k):
    return pointwise(lambda a, b: apply_binop("concat", a, b), [recv, args[0]], k=k)


def _parse_int_model(recv, args, k):
    return pointwise(_parse_int, [args[0]], k=k)


def _int_to_string(recv, args, k):
    return pointwise(lambda v: str(v) if _is_int(v) else None, [args[0]], k=k)


def _intent_init(recv, args, k):
    if len(args) == 2:
        _set_member(recv, "#class", args[1], k)
    elif len(args) == 1:
        _set_member(recv, "#action", args[0], k)
    return Fact.unresolved()


def _intent_set_action(recv, args, k):
    _set_member(recv, "#action", args[0], k)
    return recv


def _intent_set_class(recv, args, k):
    _set_member(recv, "#class", args[-1], k)
    return recv


def _intent_put_extra(recv, args, k):
    key = args[0]
    if not key.is_const:
        for o in (o for o in recv.objects() if isinstance(o, NewObj)):
            o.members["#extras?"] = Fact.unknown()
        return recv
    for name in key.values:
        _set_member(recv, f"#extra:{name}", args[1] if len(key.values) == 1
                    else join(_members(recv, f"#extra:{name}", k), args[1], k), k)
    return recv


def _intent_get_extra(recv, args, k):
    key = args[0]
    objs = [o for o in recv.objects() if isinstance(o, NewObj)]
    if not (recv.is_const and objs and key.is_const):
        return Fact.unknown()
    if any("#extras?" in o.members for o in objs):
        return Fact.unknown()
    facts = []
    for o in objs:
        for name in key.values:
            value = o.members.get(f"#extra:{name}")
            if value is None:
                value = args[1] if len(args) > 1 else Fact.unknown()
            facts.append(value)
    return join_all(facts, k)


def _noop(recv, args, k):
    return Fact.unresolved()


API_MODELS: Dict[Tuple[str, str], Callable] = {
    ("java.lang.StringBuilder", "<init>"): _sb_init,
    ("java.lang.StringBuilder", "append"): _sb_append,
    ("java.lang.StringBuilder", "toString"): _sb_to_string,
    ("java.lang.String", "valueOf"): _string_value_of,
    ("java.lang.String", "concat"): _string_concat,
    ("java.lang.Integer", "parseInt"): _parse_int_model,
    ("java.lang.Integer", "toString"): _int_to_string,
    ("android.content.Intent", "<init>"): _intent_init,
    ("android.content.Intent", "setAction"): _intent_set_action,
    ("android.content.Intent", "setClass"): _intent_set_class,
    ("android.content.Intent", "putExtra"): _intent_put_extra,
    ("android.content.Intent", "getStringExtra"): _intent_get_extra,
    ("android.content.Intent", "getIntExtra"): _intent_get_extra,
    ("java.lang.Object", "<init>"): _noop,
}


def api_model(call: MethodSig, args: List[Fact], recv: Optional[Fact] = None, k: int = DEFAULT_K) -> Fact:
    """Fact for a framework call; unmodeled APIs give Unknown."""
    model = API_MODELS.get((call.cls, call.name))
    if model is None:
        return Fact.unknown()
    return model(recv if recv is not None else Fact.unresolved(), args, k)


# ============================================================
# Evaluation
# ============================================================

@dataclass
class SinkFactResult:
    sink_unit: str
    facts: Dict[str, Fact]
    flow: Tuple[str, ...]
    reachable: bool
    low_confidence: bool = False
    unpaired: bool = False
    tail: str = ""
    sink: str = ""

    def key(self) -> Tuple:
        return (
            tuple((label, f.kind, tuple(f.render())) for label, f in sorted(self.facts.items())),
            self.reachable, self.low_confidence, self.unpaired,
        )


@dataclass
class Flow:
    tail_method: MethodSig
    edges: Tuple[SSGEdge, ...]
    reachable: bool
    witness: Tuple[str, ...]
    low_confidence: bool
    tail_unit: str


class FlowEvaluator:
    def __init__(self, ssg: SSG, k: int = DEFAULT_K, max_flows: int = 256, max_depth: int = 12,
                 is_framework: Optional[Callable[[str], bool]] = None, sink: str = ""):
        self.ssg = ssg
        self.sink = sink
        self.k = k
        self.max_flows = max_flows
        self.max_depth = max_depth
        self.is_framework = is_framework or default_framework
        self.statics: Dict[str, Fact] = {}
        self._static_done = False
        self.flows_truncated = False

    # ------------------------------------------------------------
    # Flows
    # ------------------------------------------------------------

    def flows(self) -> List[Flow]:
        ssg = self.ssg
        out: List[Flow] = []
        for tail in sorted(ssg.tails, key=lambda t: (t.unit, t.method.search)):
            stack = [(tail.method, (), frozenset([tail.method]))]
            while stack:
                if len(out) >= self.max_flows:
                    self.flows_truncated = True
                    logger.warning(f"{ssg.sink_unit}: flow cap {self.max_flows} reached")
                    return out
                method, edges, seen = stack.pop()
                if method == ssg.sink_method:
                    low = tail.low_confidence or any(e.low_confidence for e in edges)
                    out.append(Flow(tail.method, edges, tail.reachable, tail.witness, low, tail.unit))
                    continue
                nxt = ssg.cross_edges_from(method)
                for e in reversed(nxt):
                    callee = ssg.units[e.dst].method
                    if callee in seen:
                        continue
                    stack.append((callee, edges + (e,), seen | {callee}))
        return out

    # ------------------------------------------------------------
    # Units
    # ------------------------------------------------------------

    def _object_for(self, cls: str) -> Fact:
        return Fact.const([NewObj(cls)], k=self.k)

    def _run(self, method: MethodSig, units: List[SSGUnit], params: Dict[object, Fact], maps: FactMaps,
             depth: int, entry_like: bool) -> List[Fact]:
        """Evaluate units in line order; returns facts of the recorded returns."""
        returns: List[Fact] = []
        for unit in units:
            stmt = unit.stmt
            expr = stmt.expr
            if stmt.kind == InstrKind.RETURN:
                if stmt.operand is not None:
                    returns.append(maps.get(stmt.operand))
                continue
            if expr is None:
                continue
            if expr.kind == ExprKind.PARAM:
                slot = expr.operands[0]
                if slot in params:
                    fact = params[slot]
                elif slot == 0 and not method.is_static:
                    fact = self._object_for(method.cls)
                    params[0] = fact
                else:
                    fact = Fact.unknown([unit.id]) if entry_like else Fact.unresolved()
                maps.env[stmt.lhs] = fact
                continue
            if expr.kind == ExprKind.INVOKE:
                result = self._invoke(unit, params, maps, depth, entry_like)
                if stmt.defines_register:
                    maps.env[stmt.lhs] = result
                continue
            if expr.kind == ExprKind.FIELD_PUT:
                value = maps.get(expr.operands[0])
                if expr.base is None:
                    maps.statics[expr.ref.search] = value
                else:
                    field_put(maps.get(expr.base), expr.ref.search, value, maps)
                continue
            if expr.kind == ExprKind.ARRAY_PUT:
                array_put(maps.get(expr.base), maps.get(expr.operands[1]), maps.get(expr.operands[0]), maps)
                continue
            if expr.kind == ExprKind.FIELD_GET and expr.base is None and self.is_framework(expr.ref.owner):
                maps.env[stmt.lhs] = Fact.const([ConstName(expr.ref.owner, expr.ref.name)], [unit.id], self.k)
                continue
            maps.env[stmt.lhs] = eval_expr(expr, maps, unit.id)
        return returns

    def _invoke(self, unit: SSGUnit, params: Dict[object, Fact], maps: FactMaps, depth: int,
                entry_like: bool) -> Fact:
        expr = unit.stmt.expr
        call: MethodSig = expr.ref
        edge = self.ssg.contained_call(unit.id)
        if edge is not None:
            return self._contained(edge, expr, maps, depth)
        if call.name == "getIntent" and not call.params:
            if INTENT_KEY in params:
                return params[INTENT_KEY]
            return Fact.unknown([unit.id]) if entry_like else Fact.unresolved()
        if self.is_framework(call.cls):
            recv = maps.get(expr.base) if expr.base else None
            args = [maps.get(r) for r in expr.operands]
            return api_model(call, args, recv, self.k).with_provenance([unit.id])
        return Fact.unknown([unit.id])

    def _contained(self, edge: SSGEdge, expr: Expr, maps: FactMaps, depth: int) -> Fact:
        callee = self.ssg.units[edge.dst].method
        if callee.sub_signature != expr.ref.sub_signature:
            return Fact.unresolved()
        if depth >= self.max_depth:
            return Fact.unknown()
        params: Dict[object, Fact] = {}
        for slot, reg in edge.binding:
            fact = maps.get(reg)
            object_slot = slot == 0 and expr.base is not None
            if fact.is_unresolved and object_slot:
                fact = self._object_for(expr.ref.cls if expr.ref.is_constructor else callee.cls)
                maps.env[reg] = fact
            params[slot] = fact
        returns = self._run(callee, self.ssg.units_of(callee), params, maps.frame(), depth + 1, False)
        return join_all(returns, self.k)

    # ------------------------------------------------------------
    # Tracks
    # ------------------------------------------------------------

    def run_static_track(self):
        for track in reversed(self.ssg.static_tracks):
            if not track.valid:
                continue
            units = sorted((self.ssg.units[u] for u in track.units if self.ssg.units[u].method == track.clinit),
                           key=lambda u: u.line)
            maps = FactMaps({}, self.statics, {}, self.k)
            self._run(track.clinit, units, {}, maps, 0, True)
        self._static_done = True

    def run_flow(self, flow: Flow) -> SinkFactResult:
        assert self._static_done, "static track must be evaluated before any flow"
        ssg = self.ssg
        heap: Dict[str, Fact] = {}
        method = flow.tail_method
        params: Dict[object, Fact] = {}
        entry_like = flow.reachable
        methods = [flow.tail_method]
        for i in range(len(flow.edges) + 1):
            exit_line = ssg.units[flow.edges[i].src].line if i < len(flow.edges) else ssg.sink.line
            units = [u for u in ssg.units_of(method) if u.line < exit_line and u.track == Track.MAIN]
            maps = FactMaps({}, self.statics, heap, self.k)
            self._run(method, units, params, maps, 0, entry_like and i == 0)
            if i == len(flow.edges):
                facts = {label: maps.get(reg) for label, reg in ssg.tracked}
                break
            edge = flow.edges[i]
            params = {slot: maps.get(reg) for slot, reg in edge.binding}
            method = ssg.units[edge.dst].method
            methods.append(method)
        chain = tuple(flow.witness) + tuple(m.analysis for m in methods)
        return SinkFactResult(ssg.sink_unit, facts, chain, flow.reachable, flow.low_confidence,
                              tail=flow.tail_unit, sink=self.sink)

    def evaluate(self) -> List[SinkFactResult]:
        self.run_static_track()
        results = [self.run_flow(f) for f in self.flows()]
        if len(self.ssg.tracked) > 1:
            results = pair_parameters(results, [label for label, _ in self.ssg.tracked])
        seen, out = set(), []
        for r in results:
            key = r.key()
            if key in seen:
                continue
            seen.add(key)
            out.append(r)
        return out


def pair_parameters(results: List[SinkFactResult], labels: List[str]) -> List[SinkFactResult]:
    """Cross-pair parameters that one flow leaves Unresolved with the values other flows resolve."""
    resolved: Dict[str, List[Fact]] = {label: [] for label in labels}
    for r in results:
        for label in labels:
            f = r.facts.get(label, Fact.unresolved())
            if not f.is_unresolved and f not in resolved[label]:
                resolved[label].append(f)
    out = []
    for r in results:
        gaps = [label for label in labels if r.facts.get(label, Fact.unresolved()).is_unresolved and resolved[label]]
        if not gaps:
            out.append(r)
            continue
        for combo in product(*(resolved[label] for label in gaps)):
            facts = dict(r.facts)
            facts.update(zip(gaps, combo))
            out.append(SinkFactResult(r.sink_unit, facts, r.flow, r.reachable, r.low_confidence, True, r.tail, r.sink))
    return out


def evaluate(ssg: SSG, k: int = DEFAULT_K, max_flows: int = 256, max_depth: int = 12,
             is_framework: Optional[Callable[[str], bool]] = None, sink: str = "") -> List[SinkFactResult]:
    return FlowEvaluator(ssg, k, max_flows, max_depth, is_framework, sink).evaluate()
