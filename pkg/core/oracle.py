"""
Whole-app baseline analyzer.

Builds the complete call graph up front (class-hierarchy resolution plus
callback, ICC and class-initialization edges), then abstractly executes
every registered component from its lifecycle handlers with the same fact
lattice and API models the targeted analyzer uses. Its verdicts are the
reference the targeted analyzer is checked against; its visited-method
count is the cost the targeted analyzer avoids.
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from core.backtracker.lifecycle import LifecycleTable, icc_targets
from core.detectors import SinkSpec, Verdict, judge_site
from core.engine.app_analyzer import find_sink_sites, sink_targets
from core.forward_eval import (
    DEFAULT_K,
    ConstName,
    Fact,
    FactMaps,
    NewObj,
    SinkFactResult,
    api_model,
    array_put,
    eval_expr,
    field_put,
    join_all,
)
from core.report import AppReport, RunMetrics, sink_report
from core.sbc.hierarchy import ClassHierarchy, build_hierarchy, entry_points
from core.sbc.model import (
    AppModel,
    ClassRef,
    Component,
    ExprKind,
    InstrKind,
    MethodBody,
    MethodSig,
)
from core.sbc.parser import parse_app
from core.search_index import build_index
from core.ssg import unit_id

logger = logging.getLogger("oracle")


# ============================================================
# Call graph
# ============================================================

class WholeAppCallGraph:
    """Every app method as a node; edges resolved eagerly for the whole app."""

    def __init__(self, model: AppModel, hierarchy: ClassHierarchy, lifecycle: LifecycleTable):
        self.model = model
        self.hierarchy = hierarchy
        self.lifecycle = lifecycle
        self.graph = nx.DiGraph()
        self.entries: Set[MethodSig] = entry_points(model.manifest, hierarchy, lifecycle)
        self._subtypes: Dict[str, Set[str]] = defaultdict(set)
        for cls in model.classes:
            for sup in hierarchy.supertypes(cls):
                self._subtypes[sup].add(cls)
        self._handlers_by_name: Dict[str, List[MethodSig]] = defaultdict(list)
        for body in model.methods():
            self._handlers_by_name[body.sig.name].append(body.sig)
        self.build()

    def _body_sig(self, cls: str, sub: str) -> Optional[MethodSig]:
        owner = self.hierarchy.resolve(cls, sub)
        if owner is None:
            return None
        return self.model.class_def(owner).methods[sub].sig

    def cha_targets(self, call: MethodSig) -> Set[MethodSig]:
        sub = call.sub_signature
        out: Set[MethodSig] = set()
        direct = self._body_sig(call.cls, sub)
        if direct is not None:
            out.add(direct)
        if call.is_constructor or (direct is not None and direct.is_signature_method):
            return out
        for cls in self._subtypes.get(call.cls, ()):
            target = self._body_sig(cls, sub)
            if target is not None:
                out.add(target)
        return out

    def _component_handlers(self, comp: Component) -> List[MethodSig]:
        names = self.lifecycle.handlers(comp.kind)
        return [self.model.class_def(owner).methods[sub].sig
                for sub, owner in sorted(self.hierarchy.defined_methods(comp.class_name).items())
                if sub.split(":", 1)[0] in names]

    def _clinit_of(self, cls: str) -> Optional[MethodSig]:
        cdef = self.model.class_def(cls)
        if cdef is None:
            return None
        body = cdef.methods.get("<clinit>:()V")
        return body.sig if body is not None else None

    def build(self):
        g = self.graph
        for body in self.model.methods():
            g.add_node(body.sig)
        for body in self.model.methods():
            src = body.sig
            for instr in body.instructions:
                expr = instr.expr
                if expr is None:
                    continue
                referenced = None
                if expr.kind == ExprKind.INVOKE:
                    call: MethodSig = expr.ref
                    for target in self.cha_targets(call):
                        g.add_edge(src, target, kind="cha", line=instr.line)
                    for pair in self.lifecycle.callback_pairs:
                        if pair.api_method == call.name:
                            for handler in self._handlers_by_name.get(pair.handler, ()):
                                g.add_edge(src, handler, kind="callback", line=instr.line)
                    if self.lifecycle.is_icc_call(call):
                        for comp in self.model.manifest.components:
                            if icc_targets(call.name, comp.kind):
                                for handler in self._component_handlers(comp):
                                    g.add_edge(src, handler, kind="icc", line=instr.line)
                    if expr.base is None:
                        referenced = call.cls
                elif expr.kind == ExprKind.NEW:
                    referenced = expr.ref
                elif expr.kind in (ExprKind.FIELD_GET, ExprKind.FIELD_PUT) and expr.base is None:
                    referenced = expr.ref.owner
                if referenced is not None and referenced != src.cls:
                    clinit = self._clinit_of(referenced)
                    if clinit is not None:
                        g.add_edge(src, clinit, kind="clinit", line=instr.line)
        logger.debug(f"Call graph: {g.number_of_nodes()} nodes, {g.number_of_edges()} edges")

    def reachable(self) -> Set[MethodSig]:
        out: Set[MethodSig] = set()
        for entry in self.entries:
            if entry in self.graph:
                out.add(entry)
                out |= nx.descendants(self.graph, entry)
        return out

    def is_reachable(self, method: MethodSig) -> bool:
        return method in self.reachable()


# ============================================================
# Whole-app abstract execution
# ============================================================

@dataclass
class _Context:
    chain: Tuple[str, ...]
    intent: Fact
    stack: Tuple[MethodSig, ...] = ()


@dataclass
class OracleRun:
    results: List[SinkFactResult] = field(default_factory=list)
    executed: Set[MethodSig] = field(default_factory=set)
    launched: Set[str] = field(default_factory=set)
    truncated: bool = False


class WholeAppInterpreter:
    def __init__(self, model: AppModel, hierarchy: ClassHierarchy, lifecycle: LifecycleTable,
                 specs: Sequence[SinkSpec], k: int = DEFAULT_K, max_depth: int = 32, max_calls: int = 200_000):
        self.model = model
        self.hierarchy = hierarchy
        self.lifecycle = lifecycle
        self.k = k
        self.max_depth = max_depth
        self.max_calls = max_calls
        self.statics: Dict[str, Fact] = {}
        self.initialized: Set[str] = set()
        self.run_state = OracleRun()
        self._calls = 0
        # search-form call signature -> spec
        self._sinks: Dict[str, SinkSpec] = {}
        for spec in specs:
            for target in sink_targets(spec.sig, hierarchy):
                self._sinks.setdefault(target.search, spec)

    def _body(self, cls: str, sub: str) -> Optional[MethodBody]:
        owner = self.hierarchy.resolve(cls, sub)
        return self.model.class_def(owner).methods[sub] if owner is not None else None

    # ------------------------------------------------------------
    # Components
    # ------------------------------------------------------------

    def run(self) -> OracleRun:
        deferred: List[Component] = []
        for comp in self.model.manifest.components:
            if self.model.class_def(comp.class_name) is None:
                logger.warning(f"Manifest component {comp.class_name} has no class body")
                continue
            if any(self.lifecycle.intent_slot(comp.kind, h) is not None for h in self.lifecycle.handlers(comp.kind)):
                deferred.append(comp)
                continue
            self.run_component(comp, Fact.unknown(), ())
        for comp in deferred:
            if comp.class_name not in self.run_state.launched:
                self.run_component(comp, Fact.unknown(), ())
        return self.run_state

    def run_component(self, comp: Component, intent: Fact, chain: Tuple[str, ...],
                      stack: Tuple[MethodSig, ...] = ()):
        this = Fact.const([NewObj(comp.class_name)], k=self.k)
        self._ensure_init(comp.class_name, _Context(chain, intent, stack))
        names = self.lifecycle.handlers(comp.kind)
        defined = self.hierarchy.defined_methods(comp.class_name)
        for name in names:
            for sub, owner in sorted(defined.items()):
                if sub.split(":", 1)[0] != name:
                    continue
                body = self.model.class_def(owner).methods[sub]
                params: Dict[int, Fact] = {0: this}
                slot = self.lifecycle.intent_slot(comp.kind, name)
                if slot is not None:
                    params[slot] = intent
                self._execute(body, params, _Context(chain, intent, stack))

    # ------------------------------------------------------------
    # Methods
    # ------------------------------------------------------------

    def _ensure_init(self, cls: str, ctx: _Context):
        if cls in self.initialized or self.model.class_def(cls) is None:
            return
        self.initialized.add(cls)
        body = self.model.class_def(cls).methods.get("<clinit>:()V")
        if body is not None:
            self._execute(body, {}, ctx)

    def _execute(self, body: MethodBody, params: Dict[int, Fact], ctx: _Context) -> Fact:
        sig = body.sig
        if sig in ctx.stack or len(ctx.stack) >= self.max_depth:
            return Fact.unknown()
        self._calls += 1
        if self._calls > self.max_calls:
            if not self.run_state.truncated:
                logger.warning(f"{self.model.name}: call limit reached; remaining calls are Unknown")
            self.run_state.truncated = True
            return Fact.unknown()
        self.run_state.executed.add(sig)
        ctx = _Context(ctx.chain + (sig.analysis,), ctx.intent, ctx.stack + (sig,))
        maps = FactMaps({}, self.statics, {}, self.k)
        returns: List[Fact] = []
        for instr in body.instructions:
            if instr.kind == InstrKind.RETURN:
                if instr.operand is not None:
                    returns.append(maps.get(instr.operand))
                continue
            expr = instr.expr
            if expr is None:
                continue
            uid = unit_id(sig, instr.line)
            kind = expr.kind
            if kind == ExprKind.PARAM:
                slot = expr.operands[0]
                maps.env[instr.lhs] = params.get(slot, Fact.unknown([uid]))
                continue
            if kind == ExprKind.INVOKE:
                result = self._invoke(sig, instr.line, expr, maps, ctx)
                if instr.defines_register:
                    maps.env[instr.lhs] = result
                continue
            if kind == ExprKind.NEW:
                self._ensure_init(expr.ref, ctx)
            if kind in (ExprKind.FIELD_GET, ExprKind.FIELD_PUT) and expr.base is None:
                owner = expr.ref.owner
                if self.model.is_framework(owner) or self.model.class_def(owner) is None:
                    if kind == ExprKind.FIELD_GET:
                        maps.env[instr.lhs] = Fact.const([ConstName(owner, expr.ref.name)], [uid], self.k)
                    continue
                self._ensure_init(owner, ctx)
            if kind == ExprKind.FIELD_PUT:
                value = maps.get(expr.operands[0])
                if expr.base is None:
                    self.statics[expr.ref.search] = value
                else:
                    field_put(maps.get(expr.base), expr.ref.search, value, maps)
                continue
            if kind == ExprKind.ARRAY_PUT:
                array_put(maps.get(expr.base), maps.get(expr.operands[1]), maps.get(expr.operands[0]), maps)
                continue
            maps.env[instr.lhs] = eval_expr(expr, maps, uid)
        return join_all(returns, self.k)

    def _invoke(self, caller: MethodSig, line: int, expr, maps: FactMaps, ctx: _Context) -> Fact:
        call: MethodSig = expr.ref
        recv = maps.get(expr.base) if expr.base else None
        args = [maps.get(r) for r in expr.operands]

        spec = self._sinks.get(call.search)
        if spec is not None:
            facts = {f"arg{i}": args[i] for i in spec.params if i < len(args)}
            if spec.receiver and recv is not None:
                facts["receiver"] = recv
            self.run_state.results.append(SinkFactResult(
                unit_id(caller, line), facts, ctx.chain, True, sink=spec.sink))

        targets = self._dispatch(call, expr.base is None, recv)
        if targets:
            if expr.base is None:
                self._ensure_init(call.cls, ctx)
            returns = []
            for body in targets:
                slots: Dict[int, Fact] = {}
                shift = 0
                if not body.sig.is_static:
                    slots[0] = recv if recv is not None else Fact.unknown()
                    shift = 1
                slots.update({i + shift: a for i, a in enumerate(args)})
                returns.append(self._execute(body, slots, ctx))
            return join_all(returns, self.k)

        if call.name == "getIntent" and not call.params:
            return ctx.intent
        if self.lifecycle.is_icc_call(call) and args:
            self._launch(call, args[0], ctx)
        self._callbacks(call, recv, args, ctx)
        if self.model.is_framework(call.cls) or self.model.class_def(call.cls) is None:
            return api_model(call, args, recv, self.k)
        return Fact.unknown()

    def _dispatch(self, call: MethodSig, static_call: bool, recv: Optional[Fact]) -> List[MethodBody]:
        sub = call.sub_signature
        direct = self._body(call.cls, sub)
        if static_call or call.is_constructor or (direct is not None and direct.sig.is_private):
            return [direct] if direct is not None else []
        objs = [o for o in recv.objects() if isinstance(o, NewObj)] if recv is not None and recv.is_const else []
        if objs:
            found = {}
            for o in objs:
                body = self._body(o.ctor_class, sub)
                if body is not None:
                    found[body.sig] = body
            return list(found.values())
        return [direct] if direct is not None else []

    def _callbacks(self, call: MethodSig, recv: Optional[Fact], args: List[Fact], ctx: _Context):
        for pair in self.lifecycle.callback_pairs:
            if pair.api_method != call.name:
                continue
            carrier = recv if pair.role == "receiver" else (args[0] if args else None)
            if carrier is None or not carrier.is_const:
                continue
            for obj in (o for o in carrier.objects() if isinstance(o, NewObj)):
                this = Fact.const([obj], k=self.k)
                for sub, owner in sorted(self.hierarchy.defined_methods(obj.ctor_class).items()):
                    if sub.split(":", 1)[0] != pair.handler:
                        continue
                    body = self.model.class_def(owner).methods[sub]
                    params = {0: this}
                    params.update({i + 1: Fact.unknown() for i in range(body.sig.arity)})
                    self._execute(body, params, ctx)

    def _launch(self, call: MethodSig, intent: Fact, ctx: _Context):
        manifest = self.model.manifest
        targets: Dict[str, Component] = {}
        for obj in (o for o in intent.objects() if isinstance(o, NewObj)):
            cls_fact = obj.members.get("#class")
            if cls_fact is not None and cls_fact.is_const:
                for ref in cls_fact.values:
                    name = ref.name if isinstance(ref, ClassRef) else str(ref)
                    comp = manifest.component_for(name)
                    if comp is not None:
                        targets[comp.class_name] = comp
            action = obj.members.get("#action")
            if action is not None and action.is_const:
                for value in action.values:
                    for comp in manifest.by_action(str(value)):
                        targets[comp.class_name] = comp
        for name, comp in sorted(targets.items()):
            if not icc_targets(call.name, comp.kind):
                continue
            if any(s.cls == name for s in ctx.stack):
                continue
            self.run_state.launched.add(name)
            self.run_component(comp, intent, ctx.chain, ctx.stack)


# ============================================================
# Entry point
# ============================================================

@dataclass
class OracleAnalysis:
    report: AppReport
    verdicts: List[Verdict]
    graph: WholeAppCallGraph
    run: OracleRun


def whole_app_analyze(model: AppModel, specs: Sequence[SinkSpec], lifecycle: Optional[LifecycleTable] = None,
                      k: int = DEFAULT_K) -> OracleAnalysis:
    start = time.perf_counter()
    lifecycle = lifecycle or LifecycleTable()
    hierarchy = build_hierarchy(model)
    graph = WholeAppCallGraph(model, hierarchy, lifecycle)
    reachable = graph.reachable()

    interp = WholeAppInterpreter(model, hierarchy, lifecycle, specs, k)
    run = interp.run()

    sites = find_sink_sites(build_index(model), hierarchy, specs)
    by_site: Dict[str, List[SinkFactResult]] = defaultdict(list)
    for r in run.results:
        by_site[r.sink_unit].append(r)
    verdicts = []
    for spec, hit in sites:
        site = unit_id(hit.containing_method, hit.line)
        results = by_site.get(site, [])
        if results and hit.containing_method not in reachable:
            logger.warning(f"{site} executed but outside the call graph's reachable set")
        verdicts.append(judge_site(site, results, spec))

    wall_ms = round((time.perf_counter() - start) * 1000.0, 3)
    metrics = RunMetrics(wall_ms=wall_ms, visited_methods=len(reachable), sink_count=len(sites),
                         classes=model.class_count, methods=model.method_count)
    report = AppReport(app=model.name, analyzer="oracle", verdicts=[sink_report(v) for v in verdicts],
                       metrics=metrics)
    logger.info(f"{model.name}: oracle visited {len(reachable)}/{model.method_count} methods, "
                f"{len(sites)} sink site(s), {wall_ms:.1f} ms")
    return OracleAnalysis(report, verdicts, graph, run)


def analyze_app_dir(app_dir, specs: Sequence[SinkSpec], framework_prefixes: Sequence[str],
                    lifecycle: Optional[LifecycleTable] = None, k: int = DEFAULT_K) -> OracleAnalysis:
    return whole_app_analyze(parse_app(Path(app_dir), framework_prefixes), specs, lifecycle, k)
