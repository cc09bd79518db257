"""
On-the-fly caller resolution.

The tracker answers one question for the slicer: who calls this method?
Signature methods are found by a direct search of their own signature
(plus child-class signatures that still dispatch to them). Overriding
and callback methods are found by searching the constructors of their
class and forward-tainting the new object until it is handed to an
ending method. Static initializers, lifecycle handlers and ICC targets
each have their own path.
"""

import logging
from collections import deque
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from core.backtracker.edges import CallChain, CallerEdge, LoopKind, LoopLog, Via
from core.backtracker.lifecycle import (
    COMPONENT_BASES,
    LifecycleTable,
    icc_targets,
)
from core.errors import NoConstructorFound, NoEndingMethod, UnresolvedCallee
from core.sbc.hierarchy import ClassHierarchy, entry_points
from core.sbc.model import (
    AppModel,
    Component,
    ComponentKind,
    Expr,
    ExprKind,
    InstrKind,
    MethodBody,
    MethodSig,
    class_to_desc,
    parse_method_sig,
)
from core.search_index import CallHit, SearchIndex

logger = logging.getLogger("backtracker")

INTENT_CLASS = "android.content.Intent"
COMPONENT_NAME_CLASS = "android.content.ComponentName"
INTENT_TARGET_SETTERS = ("<init>", "setClass", "setAction", "setClassName", "setComponent")

Caller = Union[CallerEdge, CallChain]


class Reach(Enum):
    ENTRY_REACHED = "EntryReached"


class Backtracker:
    def __init__(self, model: AppModel, hierarchy: ClassHierarchy, index: SearchIndex,
                 lifecycle: Optional[LifecycleTable] = None,
                 max_advanced_depth: int = 64, max_field_hops: int = 1):
        self.model = model
        self.hierarchy = hierarchy
        self.index = index
        self.lifecycle = lifecycle or LifecycleTable()
        self.max_advanced_depth = max_advanced_depth
        self.max_field_hops = max_field_hops

        self.entries: Set[MethodSig] = entry_points(model.manifest, hierarchy, self.lifecycle)
        self.loop_log = LoopLog()
        self.visited_methods: Set[MethodSig] = set()
        self.unresolved_callees = 0
        self.no_constructor = 0
        self.no_ending = 0

        self._callers: Dict[MethodSig, Tuple[Caller, ...]] = {}
        self._reach: Dict[MethodSig, Tuple[bool, Tuple[CallerEdge, ...]]] = {}
        self._clinit: Dict[str, Tuple[bool, Tuple[str, ...]]] = {}
        self._sink_methods: Dict[MethodSig, Tuple[bool, Tuple[CallerEdge, ...]]] = {}
        self.sink_cache_hits = 0

    # ============================================================
    # Helpers
    # ============================================================

    def canon(self, sig: MethodSig) -> MethodSig:
        """Signature carrying the modifiers declared by the app body."""
        body = self.model.method(sig)
        return body.sig if body is not None else sig

    def body(self, sig: MethodSig) -> Optional[MethodBody]:
        return self.model.method(sig)

    def is_entry(self, sig: MethodSig) -> bool:
        return sig in self.entries

    def _ordered_supertypes(self, cls: str) -> List[str]:
        out, queue = [], deque([cls])
        seen = {cls}
        while queue:
            c = queue.popleft()
            nxt = []
            if c in self.hierarchy.super_map:
                nxt.append(self.hierarchy.super_of(c))
            nxt.extend(self.hierarchy.interfaces(c))
            for n in nxt:
                if n not in seen:
                    seen.add(n)
                    out.append(n)
                    queue.append(n)
        return out

    def component_kind(self, cls: str) -> Optional[ComponentKind]:
        """Kind of component a class is, registered or not."""
        comp = self.model.manifest.component_for(cls)
        if comp is not None:
            return comp.kind
        for sup in self._ordered_supertypes(cls):
            if sup in COMPONENT_BASES:
                return COMPONENT_BASES[sup]
        return None

    def handler_kind(self, sig: MethodSig) -> Optional[ComponentKind]:
        """Component kind when `sig` is a lifecycle handler, else None."""
        if sig in self.entries:
            comps = self._components_for(sig)
            if comps:
                return comps[0].kind
        kind = self.component_kind(sig.cls)
        if kind is not None and self.lifecycle.is_handler(kind, sig.name):
            return kind
        return None

    def _components_for(self, handler: MethodSig) -> List[Component]:
        """Registered components whose lifecycle dispatches to `handler`."""
        return [
            c for c in self.model.manifest.components
            if self.hierarchy.resolve(c.class_name, handler.sub_signature) == handler.cls
            and self.lifecycle.is_handler(c.kind, handler.name)
        ]

    def overridden_type(self, callee: MethodSig) -> Optional[str]:
        """Super type whose calls may dispatch to `callee`, if any."""
        sub = callee.sub_signature
        supers = self._ordered_supertypes(callee.cls)
        for sup in supers:
            cdef = self.model.class_def(sup)
            if cdef is not None and sub in cdef.methods:
                return sup
        if callee.name in self.lifecycle.callback_handlers():
            for sup in supers:
                if sup != "java.lang.Object" and self.model.class_def(sup) is None:
                    return sup
        return None

    @staticmethod
    def binding_for(expr: Expr, callee: MethodSig) -> Tuple[Tuple[object, str], ...]:
        slots = callee.arity + (0 if callee.is_static else 1)
        out = []
        for k in range(slots):
            reg = expr.arg_for_slot(k)
            if reg is not None:
                out.append((k, reg))
        return tuple(out)

    # ============================================================
    # Dispatch
    # ============================================================

    def find_callers(self, callee: MethodSig) -> List[Caller]:
        callee = self.canon(callee)
        cached = self._callers.get(callee)
        if cached is not None:
            return list(cached)
        self.visited_methods.add(callee)

        if self.body(callee) is None:
            self.unresolved_callees += 1
            err = UnresolvedCallee(callee.search, "no app body")
            logger.warning(str(err))
            self._callers[callee] = ()
            return []

        if callee.is_clinit:
            ok, _ = self.clinit_reachable(callee.cls)
            found: List[Caller] = [CallerEdge(callee, None, callee, Via.CLINIT_IMPLICIT)] if ok else []
        elif self.handler_kind(callee) is not None:
            found = list(self._entry_callers(callee))
        elif callee.is_signature_method:
            found = list(self.basic_search(callee))
        else:
            found = list(self.basic_search(callee))
            iface = self.overridden_type(callee)
            if iface is not None:
                found.extend(self.advanced_search(callee, iface))

        unique = tuple(dict.fromkeys(found))
        self._callers[callee] = unique
        logger.debug(f"{callee.analysis}: {len(unique)} caller(s)")
        return list(unique)

    def _entry_callers(self, handler: MethodSig) -> List[CallerEdge]:
        comps = self._components_for(handler)
        if not comps:
            logger.info(f"{handler.analysis} belongs to no registered component")
            return []
        out: List[CallerEdge] = []
        for pred in self._predecessor_sigs(handler, comps):
            pbody = self.body(pred)
            this_reg = pbody.param_register(0) if pbody is not None else None
            binding = ((0, this_reg),) if this_reg else ()
            out.append(CallerEdge(pred, None, handler, Via.LIFECYCLE, binding))
        for comp in comps:
            if comp.kind == ComponentKind.ACTIVITY or self.lifecycle.intent_slot(comp.kind, handler.name) is not None:
                out.extend(self.icc_callers(comp.class_name, comp.actions, handler))
        return out

    # ============================================================
    # Basic search
    # ============================================================

    def basic_search(self, callee: MethodSig) -> List[CallerEdge]:
        """Direct signature search plus non-overloading child-class signatures."""
        searches = [(callee, Via.DIRECT)]
        if not callee.is_private and not callee.is_constructor:
            sub = callee.sub_signature
            for child in sorted(self.hierarchy.subclasses(callee.cls)):
                if self.hierarchy.resolve(child, sub) == callee.cls:
                    searches.append((callee.with_class(child), Via.CHILD_CLASS_SIG))
        out = []
        for sig, via in searches:
            for hit in self.index.search_invocations(sig.search):
                out.append(CallerEdge(hit.containing_method, hit.instruction, callee, via,
                                      self.binding_for(hit.instruction.expr, callee)))
        return out

    # ============================================================
    # Advanced search
    # ============================================================

    def _constructor_sites(self, callee: MethodSig) -> List[CallHit]:
        sub = callee.sub_signature
        classes = [callee.cls] + sorted(
            s for s in self.hierarchy.subclasses(callee.cls) if self.hierarchy.resolve(s, sub) == callee.cls)
        sites = []
        for cls in classes:
            cdef = self.model.class_def(cls)
            ctors = [b.sig for b in cdef.methods.values() if b.sig.is_constructor] if cdef else []
            if not ctors:
                ctors = [MethodSig(cls, "<init>", (), "V")]
            for ctor in ctors:
                for hit in self.index.search_invocations(ctor.search):
                    site_body = self.body(hit.containing_method)
                    # super(...) chaining inside a subclass constructor is not an allocation
                    if (hit.containing_method.is_constructor and site_body is not None
                            and hit.instruction.expr.base == site_body.param_register(0)):
                        continue
                    sites.append(hit)
        return sites

    def advanced_search(self, callee: MethodSig, iface_or_super: str) -> List[CallChain]:
        callee = self.canon(callee)
        sites = self._constructor_sites(callee)
        if not sites:
            self.no_constructor += 1
            logger.warning(str(NoConstructorFound(f"{callee.cls} (for {callee.analysis})")))
            return []
        chains: List[CallChain] = []
        for site in sites:
            obj = site.instruction.expr.base
            body = self.body(site.containing_method)
            if obj is None or body is None:
                continue
            start = frozenset([(site.containing_method, frozenset([obj]))])
            self._forward(callee, iface_or_super, body, site.line, {obj}, (), start, 0, chains)
        if not chains:
            self.no_ending += 1
            logger.warning(str(NoEndingMethod(f"{callee.analysis} via {iface_or_super}")))
        return list(dict.fromkeys(chains))

    def _ending_register(self, expr: Expr, tainted: Set[str], callee: MethodSig, iface: str) -> Optional[str]:
        invoked: MethodSig = expr.ref
        if (expr.base in tainted and invoked.sub_signature == callee.sub_signature
                and invoked.cls != callee.cls and self.hierarchy.is_subtype(callee.cls, invoked.cls)):
            return expr.base
        if not self.model.is_framework(invoked.cls):
            return None
        iface_desc = class_to_desc(iface)
        for i, reg in enumerate(expr.operands):
            if reg in tainted and i < invoked.arity and invoked.params[i] == iface_desc:
                return reg
        if expr.base in tainted and self.lifecycle.match_registration(invoked, "receiver", callee.name):
            return expr.base
        for reg in expr.operands:
            if reg in tainted and self.lifecycle.match_registration(invoked, "arg", callee.name):
                return reg
        return None

    def _dispatch_target(self, expr: Expr) -> Optional[MethodSig]:
        invoked: MethodSig = expr.ref
        if expr.base is None or invoked.is_constructor:
            return self.canon(invoked) if self.model.is_app_method(invoked) else None
        owner = self.hierarchy.resolve(invoked.cls, invoked.sub_signature)
        if owner is None:
            return None
        return self.canon(invoked.with_class(owner))

    def _forward(self, callee: MethodSig, iface: str, body: MethodBody, start_line: int,
                 tainted: Set[str], prefix: Tuple[CallerEdge, ...],
                 visited: FrozenSet[Tuple[MethodSig, FrozenSet[str]]], field_hops: int,
                 chains: List[CallChain]):
        self.visited_methods.add(body.sig)
        tainted = set(tainted)
        for instr in body.after(start_line):
            expr = instr.expr
            if instr.kind == InstrKind.RETURN:
                if instr.operand in tainted:
                    self._forward_through_return(callee, iface, body, tainted, prefix, visited, field_hops, chains)
                continue
            if expr is None:
                continue
            if instr.defines_register and expr.kind in (ExprKind.CAST, ExprKind.PHI):
                if any(u in tainted for u in expr.uses()):
                    tainted.add(instr.lhs)
                continue
            if expr.kind == ExprKind.FIELD_PUT:
                if expr.operands[0] in tainted and field_hops < self.max_field_hops:
                    self._forward_through_field(callee, iface, body, instr, tainted, prefix, visited,
                                                field_hops, chains)
                continue
            if expr.kind != ExprKind.INVOKE:
                continue
            if not any(expr.slots_of(r) for r in tainted):
                continue
            ending = self._ending_register(expr, tainted, callee, iface)
            if ending is not None:
                edge = CallerEdge(body.sig, instr, callee, Via.ADVANCED_CHAIN, ((0, ending),))
                chains.append(CallChain(prefix + (edge,)))
                continue
            target = self._dispatch_target(expr)
            if target is None:
                continue
            tbody = self.body(target)
            slots = sorted({s for r in tainted for s in expr.slots_of(r)})
            regs = frozenset(p for p in (tbody.param_register(s) for s in slots) if p)
            if not regs:
                continue
            if target == body.sig:
                self.loop_log.record(LoopKind.INNER_FORWARD)
                continue
            key = (target, regs)
            if key in visited:
                self.loop_log.record(LoopKind.CROSS_FORWARD)
                continue
            if len(prefix) + 1 >= self.max_advanced_depth:
                continue
            edge = CallerEdge(body.sig, instr, target, Via.ADVANCED_CHAIN, self.binding_for(expr, target))
            self._forward(callee, iface, tbody, tbody.start_line, set(regs), prefix + (edge,),
                          visited | {key}, field_hops, chains)

    def _forward_through_field(self, callee, iface, body, instr, tainted, prefix, visited, field_hops, chains):
        fref = instr.expr.ref
        for hit in self.index.field_access_hits(fref.search, "get"):
            hbody = self.body(hit.containing_method)
            if hbody is None or not hit.instruction.defines_register:
                continue
            regs = frozenset([hit.instruction.lhs])
            key = (hbody.sig, regs)
            if key in visited:
                self.loop_log.record(LoopKind.CROSS_FORWARD)
                continue
            if len(prefix) + 1 >= self.max_advanced_depth:
                continue
            edge = CallerEdge(body.sig, instr, hbody.sig, Via.ADVANCED_CHAIN, hop="field")
            self._forward(callee, iface, hbody, hit.line, set(regs), prefix + (edge,),
                          visited | {key}, field_hops + 1, chains)

    def _forward_through_return(self, callee, iface, body, tainted, prefix, visited, field_hops, chains):
        for hit in self.index.search_invocations(body.sig.search):
            hbody = self.body(hit.containing_method)
            if hbody is None or not hit.instruction.defines_register:
                continue
            regs = frozenset([hit.instruction.lhs])
            key = (hbody.sig, regs)
            if key in visited:
                self.loop_log.record(LoopKind.CROSS_FORWARD)
                continue
            if len(prefix) + 1 >= self.max_advanced_depth:
                continue
            edge = CallerEdge(body.sig, hit.instruction, hbody.sig, Via.ADVANCED_CHAIN, hop="return")
            self._forward(callee, iface, hbody, hit.line, set(regs), prefix + (edge,),
                          visited | {key}, field_hops, chains)

    # ============================================================
    # Static initializers
    # ============================================================

    def clinit_reachable(self, si_class: str) -> Tuple[bool, List[str]]:
        """Breadth-first search over class references towards a registered component."""
        if si_class in self._clinit:
            ok, witness = self._clinit[si_class]
            return ok, list(witness)
        entry_classes = self.model.manifest.classes()
        result: Tuple[bool, Tuple[str, ...]] = (False, ())
        if si_class in entry_classes:
            result = (True, (si_class,))
        else:
            queue = deque([(si_class, (si_class,))])
            seen = {si_class}
            while queue and not result[0]:
                cls, path = queue.popleft()
                for ref in sorted(self.index.search_class_references(class_to_desc(cls))):
                    if ref in seen:
                        continue
                    seen.add(ref)
                    if ref in entry_classes:
                        result = (True, path + (ref,))
                        break
                    queue.append((ref, path + (ref,)))
        self._clinit[si_class] = result
        logger.debug(f"<clinit> of {si_class} reachable={result[0]} witness={list(result[1])}")
        return result[0], list(result[1])

    # ============================================================
    # ICC
    # ============================================================

    def _icc_sites(self, kind: ComponentKind) -> List[CallHit]:
        sites = []
        for api in self.lifecycle.icc_apis:
            if not icc_targets(api, kind):
                continue
            for search in self.index.invoked_signatures_named(api):
                if not self.lifecycle.is_icc_call(parse_method_sig(search)):
                    continue
                sites.extend(self.index.search_invocations(search))
        return sites

    def _intent_reaches(self, body: MethodBody, seeds: Set[str], site: CallHit, intent_reg: str) -> bool:
        tainted = set(seeds)
        for instr in body.instructions:
            if instr.line >= site.line:
                break
            expr = instr.expr
            if expr is None:
                continue
            if instr.defines_register and expr.kind in (ExprKind.CAST, ExprKind.PHI):
                if any(u in tainted for u in expr.uses()):
                    tainted.add(instr.lhs)
            elif expr.kind == ExprKind.INVOKE and expr.base is not None:
                owner = expr.ref.cls
                if (owner in (INTENT_CLASS, COMPONENT_NAME_CLASS) and expr.ref.name in INTENT_TARGET_SETTERS
                        and any(a in tainted for a in expr.operands)):
                    tainted.add(expr.base)
                if owner == INTENT_CLASS and instr.defines_register and expr.base in tainted:
                    tainted.add(instr.lhs)
        return intent_reg in tainted

    def icc_callers(self, component_class: str, actions: Iterable[str], callee: MethodSig) -> List[CallerEdge]:
        """Join of ICC call sites with methods holding the target's class or action constant."""
        comp = self.model.manifest.component_for(component_class)
        if comp is None:
            return []
        seeds: Dict[MethodSig, Set[str]] = {}
        for hit in self.index.search_const_class(class_to_desc(component_class)):
            seeds.setdefault(hit.containing_method, set()).add(hit.instruction.lhs)
        for action in sorted(set(actions)):
            for hit in self.index.search_const_string(action):
                seeds.setdefault(hit.containing_method, set()).add(hit.instruction.lhs)

        slot = self.lifecycle.intent_slot(comp.kind, callee.name)
        out = []
        for site in self._icc_sites(comp.kind):
            if site.containing_method not in seeds:
                continue
            body = self.body(site.containing_method)
            intent_reg = site.instruction.expr.operands[0]
            low = False
            if not self._intent_reaches(body, seeds[site.containing_method], site, intent_reg):
                definition = body.definition_of(intent_reg)
                if definition is not None and definition.expr.kind in (ExprKind.NEW, ExprKind.CONST):
                    continue
                low = True
            key = slot if slot is not None else "intent"
            out.append(CallerEdge(site.containing_method, site.instruction, callee, Via.ICC,
                                  ((key, intent_reg),), low_confidence=low))
        return out

    # ============================================================
    # Lifecycle
    # ============================================================

    def _predecessor_sigs(self, handler: MethodSig, comps: List[Component]) -> List[MethodSig]:
        out: List[MethodSig] = []
        for comp in comps:
            defined = self.hierarchy.defined_methods(comp.class_name)
            by_name: Dict[str, List[str]] = {}
            for sub in defined:
                by_name.setdefault(sub.split(":", 1)[0], []).append(sub)
            queue = deque(self.lifecycle.predecessors(comp.kind, handler.name))
            seen = set()
            while queue:
                name = queue.popleft()
                if name in seen:
                    continue
                seen.add(name)
                subs = by_name.get(name)
                if not subs:
                    queue.extend(self.lifecycle.predecessors(comp.kind, name))
                    continue
                for sub in sorted(subs):
                    sig = self.canon(parse_method_sig(f"{class_to_desc(defined[sub])}.{sub}"))
                    if sig not in out and sig != handler:
                        out.append(sig)
        return out

    def lifecycle_predecessors(self, handler: MethodSig, resolved: bool) -> Union[List[MethodSig], Reach]:
        handler = self.canon(handler)
        comps = self._components_for(handler)
        if not comps:
            return []
        if resolved:
            return Reach.ENTRY_REACHED
        return self._predecessor_sigs(handler, comps)

    # ============================================================
    # Reachability and caches
    # ============================================================

    def sink_method_cache(self, method: MethodSig) -> Optional[Tuple[bool, List[CallerEdge]]]:
        cached = self._sink_methods.get(self.canon(method))
        if cached is None:
            return None
        self.sink_cache_hits += 1
        return cached[0], list(cached[1])

    def remember_sink_method(self, method: MethodSig, reachable: bool, witness: Iterable[CallerEdge] = ()):
        self._sink_methods[self.canon(method)] = (reachable, tuple(witness))

    def is_reachable(self, method: MethodSig) -> Tuple[bool, List[CallerEdge]]:
        """Reachability-only backward search; the witness runs entry-side first."""
        method = self.canon(method)
        if method in self._reach:
            ok, witness = self._reach[method]
            return ok, list(witness)
        if method in self.entries:
            self._reach[method] = (True, ())
            return True, []

        queue = deque([(method, ())])
        seen = {method}
        found: Optional[Tuple[CallerEdge, ...]] = None
        while queue and found is None:
            current, path = queue.popleft()
            for item in self.find_callers(current):
                if isinstance(item, CallChain):
                    # the handler runs once the chain head does
                    edge, below = item.edges[0], item.edges[1:] + path
                else:
                    edge, below = item, path
                if edge.via == Via.CLINIT_IMPLICIT:
                    found = below
                    break
                caller = edge.caller
                if caller in self.entries:
                    found = (edge,) + below
                    break
                known = self._reach.get(caller)
                if known is not None:
                    if known[0]:
                        found = known[1] + (edge,) + below
                        break
                    continue
                if caller in seen:
                    continue
                seen.add(caller)
                queue.append((caller, (edge,) + below))

        if found is None:
            for m in seen:
                self._reach[m] = (False, ())
            return False, []
        self._reach[method] = (True, found)
        return True, list(found)

    def stats(self) -> Dict[str, object]:
        return {
            "loops": self.loop_log.as_dict(),
            "visited_methods": len(self.visited_methods),
            "unresolved_callees": self.unresolved_callees,
            "no_constructor": self.no_constructor,
            "no_ending": self.no_ending,
            "sink_cache_hits": self.sink_cache_hits,
        }


def find_callers(tracker: Backtracker, callee: MethodSig) -> List[Caller]:
    return tracker.find_callers(callee)


def clinit_reachable(tracker: Backtracker, si_class: str) -> Tuple[bool, List[str]]:
    return tracker.clinit_reachable(si_class)
