"""
Self-contained slicing graph (SSG) generation.

One SSG is built per sink call site. Building it has four parts:

1. Slice backward inside the sink method from the tracked sink
   operands, recording every statement that defines or moves tainted
   data.
2. At method entry, map the residual parameter taint onto the callers
   that the backtracker reports, and continue slicing in each of them.
3. Enter contained app calls whose return value or arguments carry
   taint, or which write a tainted static field. Their residual
   parameter taint maps back onto the call-site arguments.
4. Slice the static initializers of tainted static fields that no
   main-path statement writes, on a separate track.

Access paths in a taint set are strings rooted at a register:
`v3`, `v3.<field sig>`, `v3[]` and `v3.#extras` (intent extras).
Static fields live in one global set per SSG.
"""

import logging
import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from core.backtracker.edges import CallChain, CallerEdge, LoopKind, Via
from core.backtracker.tracker import Backtracker
from core.sbc.model import (
    AppModel,
    ExprKind,
    Instruction,
    InstrKind,
    MethodBody,
    MethodSig,
    array_path,
    field_path,
    parse_field_ref,
    parse_method_sig,
)
from core.sbc.parser import SbcParser
from core.search_index import CallHit, SearchIndex

logger = logging.getLogger("ssg")

EXTRAS = "#extras"
INTENT_CLASS = "android.content.Intent"
EXTRA_GETTERS = ("getStringExtra", "getIntExtra", "getBooleanExtra", "getLongExtra")
INTENT_KEY = "intent"

_REG_RE = re.compile(r"^v\d+")


class Track(Enum):
    MAIN = "Main"
    STATIC_INIT = "StaticInit"


class EdgeKind(Enum):
    CROSS_METHOD = "CrossMethod"
    CONTAINED_CALL = "ContainedCall"
    CONTAINED_RETURN = "ContainedReturn"


def unit_id(method: MethodSig, line: int) -> str:
    return f"{method.search}@{line}"


def base_of(path: str) -> str:
    m = _REG_RE.match(path)
    if m is None:
        raise ValueError(f"access path without a register root: {path!r}")
    return m.group(0)


def _under(path: str, prefix: str) -> bool:
    return path == prefix or (path.startswith(prefix) and path[len(prefix)] in ".[")


# ============================================================
# Taint bookkeeping
# ============================================================

class TaintSet:
    """Register-rooted access paths; any tainted path keeps its root register tainted."""

    __slots__ = ("paths",)

    def __init__(self, paths: Iterable[str] = ()):
        self.paths: Set[str] = set()
        for p in paths:
            self.add(p)

    def copy(self) -> "TaintSet":
        out = TaintSet()
        out.paths = set(self.paths)
        return out

    def __bool__(self) -> bool:
        return bool(self.paths)

    def __contains__(self, path: str) -> bool:
        return path in self.paths

    def frozen(self) -> FrozenSet[str]:
        return frozenset(self.paths)

    def add(self, path: str):
        self.paths.add(path)
        self.paths.add(base_of(path))

    def touched(self, reg: str) -> bool:
        return reg in self.paths

    def under(self, prefix: str) -> List[str]:
        return sorted(p for p in self.paths if _under(p, prefix))

    def suffixes(self, reg: str) -> List[str]:
        return [p[len(reg):] for p in self.under(reg)]

    def remove(self, path: str):
        """Untaint one path; the root goes too once its last sub-path is gone."""
        self.paths.discard(path)
        root = base_of(path)
        if root != path and not any(p != root for p in self.under(root)):
            self.paths.discard(root)

    def kill(self, reg: str) -> List[str]:
        gone = self.suffixes(reg)
        for s in gone:
            self.paths.discard(reg + s)
        return gone


@dataclass
class TaintRecord:
    frame: str
    method: MethodSig
    parent: Optional[str]
    paths: Tuple[str, ...]
    residual: Dict[str, Tuple[str, ...]] = field(default_factory=dict)


@dataclass
class TaintMap:
    """Per-frame taint sets along the backtracking chain plus the global static set."""
    frames: Dict[str, TaintRecord] = field(default_factory=dict)
    statics: Set[str] = field(default_factory=set)

    def children(self, frame: str) -> List[TaintRecord]:
        return [r for r in self.frames.values() if r.parent == frame]


@dataclass
class Transfer:
    relevant: bool = False
    residual: Dict[object, Set[str]] = field(default_factory=lambda: defaultdict(set))


def taint_transfer(stmt: Instruction, taint: TaintSet, statics: Optional[Set[str]] = None,
                   is_framework: Callable[[str], bool] = lambda cls: False) -> Transfer:
    """
    Reverse transfer of one statement with every invoke treated as opaque.

    Mutates `taint` (and `statics`) in place. Parameter and getIntent
    definitions of tainted registers come back in `residual`, keyed by
    parameter slot or "intent".
    """
    statics = statics if statics is not None else set()
    out = Transfer()
    expr = stmt.expr
    if expr is None or stmt.kind not in (InstrKind.DEFINITION, InstrKind.INVOKE):
        return out
    kind = expr.kind

    if stmt.defines_register:
        if not taint.touched(stmt.lhs):
            if kind == ExprKind.INVOKE:
                return _opaque_receiver(stmt, taint, out)
            return out
        suffixes = taint.kill(stmt.lhs)
        out.relevant = True
        if kind == ExprKind.PARAM:
            out.residual[expr.operands[0]].update(suffixes)
        elif kind in (ExprKind.CAST, ExprKind.PHI):
            for op in expr.operands:
                for s in suffixes:
                    taint.add(op + s)
        elif kind == ExprKind.BINOP:
            for op in expr.operands:
                taint.add(op)
        elif kind == ExprKind.FIELD_GET:
            if expr.base is not None:
                for s in suffixes:
                    taint.add(field_path(expr.base, expr.ref) + s)
            elif not is_framework(expr.ref.owner):
                statics.add(expr.ref.search)
        elif kind == ExprKind.ARRAY_GET:
            for s in suffixes:
                taint.add(array_path(expr.base) + s)
            taint.add(expr.operands[0])
        elif kind == ExprKind.INVOKE:
            ref = expr.ref
            if ref.cls == INTENT_CLASS and ref.name in EXTRA_GETTERS and expr.base:
                taint.add(f"{expr.base}.{EXTRAS}")
                for op in expr.operands:
                    taint.add(op)
            elif ref.name == "getIntent" and not ref.params:
                out.residual[INTENT_KEY].update(suffixes)
            else:
                if expr.base:
                    taint.add(expr.base)
                for op in expr.operands:
                    taint.add(op)
        return out

    if kind == ExprKind.FIELD_PUT:
        value = expr.operands[0]
        if expr.base is not None:
            hits = taint.under(stmt.lhs)
            if hits:
                out.relevant = True
                for p in hits:
                    taint.remove(p)
                    taint.add(value + p[len(stmt.lhs):])
        elif expr.ref.search in statics:
            out.relevant = True
            statics.discard(expr.ref.search)
            taint.add(value)
        return out

    if kind == ExprKind.ARRAY_PUT:
        hits = taint.under(stmt.lhs)
        if hits:
            out.relevant = True
            value, index = expr.operands
            for p in hits:
                taint.add(value + p[len(stmt.lhs):])
            taint.add(index)
        return out

    if kind == ExprKind.INVOKE:
        return _opaque_receiver(stmt, taint, out)
    return out


def _opaque_receiver(stmt: Instruction, taint: TaintSet, out: Transfer) -> Transfer:
    expr = stmt.expr
    ref = expr.ref
    if expr.base is None:
        return out
    if ref.cls == INTENT_CLASS and ref.name == "putExtra":
        if f"{expr.base}.{EXTRAS}" in taint:
            out.relevant = True
            for op in expr.operands:
                taint.add(op)
        return out
    if taint.touched(expr.base):
        out.relevant = True
        for op in expr.operands:
            taint.add(op)
    return out


# ============================================================
# Graph
# ============================================================

@dataclass(frozen=True)
class SSGUnit:
    id: str
    method: MethodSig
    stmt: Instruction
    track: Track = Track.MAIN

    @property
    def line(self) -> int:
        return self.stmt.line


@dataclass(frozen=True)
class SSGEdge:
    src: str
    dst: str
    kind: EdgeKind
    # callee slot (or "intent") -> caller register
    binding: Tuple[Tuple[object, str], ...] = ()
    via: str = ""
    low_confidence: bool = False

    def bound(self) -> Dict[object, str]:
        return dict(self.binding)


@dataclass
class TailNode:
    unit: str
    method: MethodSig
    reachable: bool
    witness: Tuple[str, ...] = ()
    low_confidence: bool = False
    unresolved: Tuple[str, ...] = ()


@dataclass
class StaticTrack:
    clinit: MethodSig
    fields: Tuple[str, ...]
    units: Tuple[str, ...]
    valid: bool
    witness: Tuple[str, ...] = ()


@dataclass
class SSG:
    sink_unit: str
    sink_method: MethodSig
    tracked: List[Tuple[str, str]]
    units: Dict[str, SSGUnit] = field(default_factory=dict)
    edges: List[SSGEdge] = field(default_factory=list)
    taint_map: TaintMap = field(default_factory=TaintMap)
    tails: List[TailNode] = field(default_factory=list)
    static_tracks: List[StaticTrack] = field(default_factory=list)
    unresolved_statics: Set[str] = field(default_factory=set)

    def __post_init__(self):
        self._edge_keys: Set[Tuple] = {(e.src, e.dst, e.kind) for e in self.edges}

    @property
    def reachable(self) -> bool:
        return any(t.reachable for t in self.tails)

    @property
    def sink(self) -> SSGUnit:
        return self.units[self.sink_unit]

    def add_unit(self, method: MethodSig, stmt: Instruction, track: Track = Track.MAIN) -> str:
        uid = unit_id(method, stmt.line)
        if uid not in self.units:
            self.units[uid] = SSGUnit(uid, method, stmt, track)
        return uid

    def add_edge(self, edge: SSGEdge):
        key = (edge.src, edge.dst, edge.kind)
        if key not in self._edge_keys:
            self._edge_keys.add(key)
            self.edges.append(edge)

    def units_of(self, method: MethodSig) -> List[SSGUnit]:
        return sorted((u for u in self.units.values() if u.method == method), key=lambda u: u.line)

    def methods(self) -> Set[MethodSig]:
        return {u.method for u in self.units.values()}

    def cross_edges(self) -> List[SSGEdge]:
        return [e for e in self.edges if e.kind == EdgeKind.CROSS_METHOD]

    def cross_edges_from(self, method: MethodSig) -> List[SSGEdge]:
        return sorted((e for e in self.cross_edges() if self.units[e.src].method == method),
                      key=lambda e: (self.units[e.src].line, e.dst))

    def contained_call(self, src: str) -> Optional[SSGEdge]:
        for e in self.edges:
            if e.src == src and e.kind == EdgeKind.CONTAINED_CALL:
                return e
        return None

    # ------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------

    def to_json(self) -> Dict:
        def sig(m: MethodSig) -> Dict:
            return {"sig": m.search, "modifiers": sorted(m.modifiers)}

        return {
            "sink_unit": self.sink_unit,
            "sink_method": sig(self.sink_method),
            "tracked": [list(t) for t in self.tracked],
            "units": [
                {"id": u.id, "method": sig(u.method), "line": u.line, "stmt": u.stmt.render(), "track": u.track.value}
                for u in sorted(self.units.values(), key=lambda u: u.id)
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "kind": e.kind.value,
                 "binding": [[k, r] for k, r in e.binding], "via": e.via, "low_confidence": e.low_confidence}
                for e in self.edges
            ],
            "taint_map": {
                "frames": [
                    {"frame": r.frame, "method": r.method.search, "parent": r.parent, "paths": list(r.paths),
                     "residual": {str(k): list(v) for k, v in r.residual.items()}}
                    for r in self.taint_map.frames.values()
                ],
                "statics": sorted(self.taint_map.statics),
            },
            "tails": [
                {"unit": t.unit, "method": sig(t.method), "reachable": t.reachable, "witness": list(t.witness),
                 "low_confidence": t.low_confidence, "unresolved": list(t.unresolved)}
                for t in self.tails
            ],
            "static_tracks": [
                {"clinit": s.clinit.search, "fields": list(s.fields), "units": list(s.units), "valid": s.valid,
                 "witness": list(s.witness)}
                for s in self.static_tracks
            ],
            "unresolved_statics": sorted(self.unresolved_statics),
        }

    @classmethod
    def from_json(cls, data: Dict) -> "SSG":
        parser = SbcParser()

        def sig(d: Dict) -> MethodSig:
            return parse_method_sig(d["sig"], d.get("modifiers", ()))

        units = {}
        for u in data["units"]:
            stmt = parser.parse_instruction(u["stmt"], u["line"], "<ssg>")
            units[u["id"]] = SSGUnit(u["id"], sig(u["method"]), stmt, Track(u["track"]))
        edges = [
            SSGEdge(e["from"], e["to"], EdgeKind(e["kind"]),
                    tuple((k if isinstance(k, str) and not k.isdigit() else int(k), r) for k, r in e["binding"]),
                    e.get("via", ""), e.get("low_confidence", False))
            for e in data["edges"]
        ]
        tmap = TaintMap(statics=set(data["taint_map"]["statics"]))
        for r in data["taint_map"]["frames"]:
            tmap.frames[r["frame"]] = TaintRecord(r["frame"], parse_method_sig(r["method"]), r["parent"],
                                                  tuple(r["paths"]), {k: tuple(v) for k, v in r["residual"].items()})
        tails = [
            TailNode(t["unit"], sig(t["method"]), t["reachable"], tuple(t["witness"]), t["low_confidence"],
                     tuple(t["unresolved"]))
            for t in data["tails"]
        ]
        tracks = [
            StaticTrack(parse_method_sig(s["clinit"]), tuple(s["fields"]), tuple(s["units"]), s["valid"],
                        tuple(s["witness"]))
            for s in data["static_tracks"]
        ]
        return cls(data["sink_unit"], sig(data["sink_method"]), [tuple(t) for t in data["tracked"]],
                   units, edges, tmap, tails, tracks, set(data["unresolved_statics"]))


# ============================================================
# Generation
# ============================================================

@dataclass
class _SliceResult:
    residual: Dict[object, Set[str]]
    units: Tuple[str, ...]
    statics_after: FrozenSet[str]


class SSGBuilder:
    def __init__(self, model: AppModel, index: SearchIndex, tracker: Backtracker,
                 max_contained_depth: int = 12):
        self.model = model
        self.index = index
        self.tracker = tracker
        self.max_contained_depth = max_contained_depth
        self._slices: Dict[Tuple, _SliceResult] = {}
        self._frames: Dict[Tuple, str] = {}
        self.ssg: Optional[SSG] = None

    def is_framework(self, cls: str) -> bool:
        return self.model.is_framework(cls)

    # ------------------------------------------------------------
    # Intra-method slicing
    # ------------------------------------------------------------

    def _slice(self, body: MethodBody, line: int, taint: TaintSet, statics: Set[str], track: Track,
               stack: Tuple[MethodSig, ...], returns: Tuple[str, ...] = ()) -> _SliceResult:
        key = (body.sig, line, taint.frozen(), frozenset(statics), track, returns)
        memo = self._slices.get(key)
        if memo is not None:
            statics.clear()
            statics.update(memo.statics_after)
            return memo

        self.tracker.visited_methods.add(body.sig)
        t = taint.copy()
        residual: Dict[object, Set[str]] = defaultdict(set)
        recorded: List[str] = []
        for instr in body.before(line):
            if instr.kind == InstrKind.RETURN:
                if returns and instr.operand is not None:
                    for s in returns:
                        t.add(instr.operand + s)
                    recorded.append(self._record(body.sig, instr, track))
                continue
            if instr.expr is not None and instr.expr.kind == ExprKind.INVOKE:
                if self._contained(body, instr, t, statics, residual, recorded, track, stack):
                    continue
            step = taint_transfer(instr, t, statics, self.is_framework)
            if step.relevant:
                recorded.append(self._record(body.sig, instr, track))
                for k, v in step.residual.items():
                    residual[k].update(v)

        recorded.extend(self._anchors(body, recorded, track))
        result = _SliceResult(dict(residual), tuple(dict.fromkeys(recorded)), frozenset(statics))
        self._slices[key] = result
        return result

    def _record(self, method: MethodSig, instr: Instruction, track: Track) -> str:
        unit_track = track if method.is_clinit else Track.MAIN
        return self.ssg.add_unit(method, instr, unit_track)

    def _anchors(self, body: MethodBody, recorded: List[str], track: Track) -> List[str]:
        """Allocation and parameter definitions of object registers the recorded units write through."""
        out = []
        for uid in recorded:
            unit = self.ssg.units[uid]
            if unit.method != body.sig or unit.stmt.expr is None:
                continue
            expr = unit.stmt.expr
            if expr.kind not in (ExprKind.FIELD_PUT, ExprKind.ARRAY_PUT, ExprKind.INVOKE, ExprKind.FIELD_GET):
                continue
            if expr.base is None:
                continue
            definition = body.definition_of(expr.base)
            if definition is not None and definition.expr.kind in (ExprKind.PARAM, ExprKind.NEW):
                out.append(self._record(body.sig, definition, track))
        return out

    def contained_methods_for_static(self, field_sig: str) -> Set[MethodSig]:
        return self.index.search_field_access(field_sig, "put")

    def _contained(self, body: MethodBody, instr: Instruction, t: TaintSet, statics: Set[str],
                   residual: Dict[object, Set[str]], recorded: List[str], track: Track,
                   stack: Tuple[MethodSig, ...]) -> bool:
        """Enter an app callee when its result or arguments carry taint; False leaves the call opaque."""
        expr = instr.expr
        target = self.tracker._dispatch_target(expr)
        if target is None:
            return False
        tbody = self.model.method(target)
        lhs_taint = instr.defines_register and t.touched(instr.lhs)
        slots = target.arity + (0 if target.is_static else 1)
        slot_regs = {k: expr.arg_for_slot(k) for k in range(slots)}
        tainted_slots = {k: r for k, r in slot_regs.items() if r and t.touched(r) and tbody.param_register(k)}
        writes_static = bool(statics) and any(target in self.contained_methods_for_static(f) for f in statics)
        if not (lhs_taint or tainted_slots or writes_static):
            return False
        if target in stack:
            self.tracker.loop_log.record(LoopKind.INNER_BACKWARD if target == body.sig else LoopKind.CROSS_BACKWARD)
            return False
        if len(stack) > self.max_contained_depth:
            return False

        returns = tuple(t.kill(instr.lhs)) if lhs_taint else ()
        callee_taint = TaintSet()
        for k, reg in tainted_slots.items():
            preg = tbody.param_register(k)
            for s in t.suffixes(reg):
                callee_taint.add(preg + s)
        for reg in set(tainted_slots.values()):
            t.kill(reg)

        result = self._slice(tbody, tbody.end_line, callee_taint, statics, track, stack + (target,), returns)
        for k, suffixes in result.residual.items():
            if k == INTENT_KEY:
                residual[INTENT_KEY].update(suffixes)
                continue
            reg = slot_regs.get(k)
            if reg:
                for s in suffixes:
                    t.add(reg + s)

        call_uid = self._record(body.sig, instr, track)
        recorded.append(call_uid)
        if result.units:
            ordered = sorted(result.units, key=lambda u: self.ssg.units[u].line)
            callee_units = [u for u in ordered if self.ssg.units[u].method == target] or ordered
            binding = tuple((k, r) for k, r in slot_regs.items() if r)
            self.ssg.add_edge(SSGEdge(call_uid, callee_units[0], EdgeKind.CONTAINED_CALL, binding))
            self.ssg.add_edge(SSGEdge(callee_units[-1], call_uid, EdgeKind.CONTAINED_RETURN))
        return True

    # ------------------------------------------------------------
    # Inter-procedural frames
    # ------------------------------------------------------------

    def generate(self, sink_site: CallHit, tracked: List[Tuple[str, str]]) -> SSG:
        body = self.model.method(sink_site.containing_method)
        self.ssg = SSG(unit_id(body.sig, sink_site.line), body.sig, list(tracked))
        self._slices.clear()
        self._frames.clear()
        sink_uid = self.ssg.add_unit(body.sig, sink_site.instruction)
        taint = TaintSet(reg for _, reg in tracked)
        self._frame(body, sink_site.line, taint, set(), (body.sig,), None, sink_uid, None)
        self.add_offpath_clinit()
        self._dedupe_tails()
        logger.debug(f"SSG for {sink_uid}: {len(self.ssg.units)} units, {len(self.ssg.edges)} edges, "
                     f"{len(self.ssg.tails)} tails, reachable={self.ssg.reachable}")
        return self.ssg

    def _frame(self, body: MethodBody, line: int, taint: TaintSet, statics: Set[str],
               active: Tuple[MethodSig, ...], forced: Optional[CallChain], exit_uid: str,
               parent: Optional[str]) -> str:
        """Slice one method on one path. Static taint is per path; what is left at a path end is global."""
        key = (body.sig, line, taint.frozen(), frozenset(statics), forced)
        known = self._frames.get(key)
        if known is not None:
            return known

        frame_id = f"{body.sig.search}#{len(self.ssg.taint_map.frames)}"
        statics = set(statics)
        result = self._slice(body, line, taint, statics, Track.MAIN, (body.sig,))
        units = [u for u in result.units if self.ssg.units[u].method == body.sig] + [exit_uid]
        first = min(units, key=lambda u: self.ssg.units[u].line)
        self._frames[key] = first
        residual = {k: v for k, v in result.residual.items() if v}
        self.ssg.taint_map.frames[frame_id] = TaintRecord(
            frame_id, body.sig, parent, tuple(sorted(taint.paths)),
            {str(k): tuple(sorted(v)) for k, v in residual.items()})

        method = body.sig
        if not residual:
            self._tail(first, method)
            self.ssg.taint_map.statics.update(statics)
            return first

        descended = False
        for edge, chain in self._callers_for(method, residual, forced, first):
            caller = edge.caller
            if caller in active:
                self.tracker.loop_log.record(
                    LoopKind.INNER_BACKWARD if caller == method else LoopKind.CROSS_BACKWARD)
                continue
            cbody = self.model.method(caller)
            if cbody is None:
                continue
            bound = edge.bound()
            ctaint = TaintSet()
            for k, suffixes in residual.items():
                reg = bound.get(k)
                if reg:
                    for s in suffixes:
                        ctaint.add(reg + s)
            exit_instr = edge.call_site if edge.call_site is not None else self._final_return(cbody)
            caller_exit = self.ssg.add_unit(caller, exit_instr)
            self.ssg.add_edge(SSGEdge(caller_exit, first, EdgeKind.CROSS_METHOD, edge.binding,
                                      edge.via.value, edge.low_confidence))
            self._frame(cbody, exit_instr.line, ctaint, statics, active + (caller,), chain, caller_exit, frame_id)
            descended = True
        if not descended:
            self.ssg.taint_map.statics.update(statics)
        return first

    @staticmethod
    def _final_return(body: MethodBody) -> Instruction:
        for instr in reversed(body.instructions):
            if instr.kind == InstrKind.RETURN:
                return instr
        return Instruction(InstrKind.RETURN, body.end_line)

    def _callers_for(self, method: MethodSig, residual: Dict[object, Set[str]], forced: Optional[CallChain],
                     first: str) -> List[Tuple[CallerEdge, Optional[CallChain]]]:
        tracker = self.tracker
        unresolved = tuple(sorted(str(k) for k in residual))
        if method.is_clinit:
            self._tail(first, method, unresolved)
            return []
        if tracker.handler_kind(method) is not None:
            if not tracker.is_entry(method):
                self.ssg.tails.append(TailNode(first, method, False, unresolved=unresolved))
                return []
            out = []
            for item in tracker.find_callers(method):
                if isinstance(item, CallChain):
                    continue
                if item.via == Via.LIFECYCLE and 0 in residual:
                    out.append((item, None))
                elif item.via == Via.ICC and any(k in residual for k, _ in item.binding):
                    out.append((item, None))
            if not out:
                self.ssg.tails.append(TailNode(first, method, True, unresolved=unresolved))
            return out
        if forced is not None:
            pred = forced.predecessor_edge(method)
            if pred is not None and pred.hop == "call":
                return [(pred, forced)]
        out = []
        for item in tracker.find_callers(method):
            if isinstance(item, CallChain):
                out.append((item.ending_edge, item))
            elif item.via != Via.CLINIT_IMPLICIT:
                out.append((item, None))
        if not out:
            self.ssg.tails.append(TailNode(first, method, False, unresolved=unresolved))
        return out

    def _tail(self, uid: str, method: MethodSig, unresolved: Tuple[str, ...] = ()):
        tracker = self.tracker
        if method.is_clinit:
            ok, classes = tracker.clinit_reachable(method.cls)
            self.ssg.tails.append(TailNode(uid, method, ok, tuple(classes), unresolved=unresolved))
            return
        ok, witness = tracker.is_reachable(method)
        chain = tuple(e.caller.analysis for e in witness)
        low = any(e.low_confidence for e in witness)
        self.ssg.tails.append(TailNode(uid, method, ok, chain, low, unresolved))

    def _dedupe_tails(self):
        seen, out = set(), []
        for t in self.ssg.tails:
            key = (t.unit, t.method)
            if key in seen:
                continue
            seen.add(key)
            out.append(t)
        self.ssg.tails = out

    # ------------------------------------------------------------
    # Static initializers
    # ------------------------------------------------------------

    def add_offpath_clinit(self) -> SSG:
        ssg = self.ssg
        main_methods = {u.method for u in ssg.units.values() if u.track == Track.MAIN}
        main_writes = {
            u.stmt.expr.ref.search for u in ssg.units.values()
            if u.stmt.expr is not None and u.stmt.expr.kind == ExprKind.FIELD_PUT and u.stmt.expr.base is None
        }
        pending = deque(sorted(ssg.taint_map.statics))
        handled: Set[str] = set()
        tracks: Dict[MethodSig, StaticTrack] = {}
        resolved: Set[str] = set(main_writes)
        while pending:
            fsig = pending.popleft()
            if fsig in handled:
                continue
            handled.add(fsig)
            owner = parse_field_ref(fsig).owner
            clinit = MethodSig(owner, "<clinit>", (), "V")
            body = self.model.method(clinit)
            if body is None or clinit in main_methods:
                continue
            if body.sig not in self.contained_methods_for_static(fsig):
                continue
            focus = {fsig}
            result = self._slice(body, body.end_line, TaintSet(), focus, Track.STATIC_INIT, (body.sig,))
            ok, witness = self.tracker.clinit_reachable(owner)
            prev = tracks.get(body.sig)
            units = tuple(dict.fromkeys((prev.units if prev else ()) + result.units))
            fields = tuple(dict.fromkeys((prev.fields if prev else ()) + (fsig,)))
            tracks[body.sig] = StaticTrack(body.sig, fields, units, ok, tuple(witness))
            if ok:
                resolved.add(fsig)
            else:
                logger.warning(f"Static initializer of {owner} is unreachable; {fsig} stays unresolved")
            for extra in sorted(focus - {fsig}):
                ssg.taint_map.statics.add(extra)
                pending.append(extra)
        ssg.static_tracks = list(tracks.values())
        ssg.unresolved_statics = set(ssg.taint_map.statics) - resolved
        return ssg


def generate_ssg(sink_site: CallHit, model: AppModel, idx: SearchIndex, tracker: Backtracker,
                 tracked: List[Tuple[str, str]], max_contained_depth: int = 12) -> SSG:
    return SSGBuilder(model, idx, tracker, max_contained_depth).generate(sink_site, tracked)
