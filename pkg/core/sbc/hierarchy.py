import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from core.errors import CyclicHierarchy
from core.sbc.model import ROOT_CLASS, AppModel, Manifest, MethodSig, class_to_desc, parse_method_sig

logger = logging.getLogger("sbc")


@dataclass
class ClassHierarchy:
    super_map: Dict[str, str] = field(default_factory=dict)
    interfaces_map: Dict[str, List[str]] = field(default_factory=dict)
    children_map: Dict[str, Set[str]] = field(default_factory=dict)
    # class -> {sub-signature -> defining app class}
    overload_map: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def super_of(self, cls: str) -> str:
        return self.super_map.get(cls, ROOT_CLASS)

    def interfaces(self, cls: str) -> List[str]:
        return self.interfaces_map.get(cls, [])

    def children(self, cls: str) -> Set[str]:
        return self.children_map.get(cls, set())

    def subclasses(self, cls: str) -> Set[str]:
        """All transitive children (not including cls)."""
        out: Set[str] = set()
        queue = deque(self.children(cls))
        while queue:
            c = queue.popleft()
            if c in out:
                continue
            out.add(c)
            queue.extend(self.children(c))
        return out

    def supers(self, cls: str) -> List[str]:
        """Declared super chain, nearest first, ending at the first class the app does not define."""
        chain = []
        cur = cls
        while cur in self.super_map:
            cur = self.super_map[cur]
            chain.append(cur)
        return chain

    def supertypes(self, cls: str) -> Set[str]:
        """Every super class and interface reachable from cls."""
        out: Set[str] = set()
        queue = deque([cls])
        while queue:
            c = queue.popleft()
            nxt = []
            if c in self.super_map:
                nxt.append(self.super_map[c])
            nxt.extend(self.interfaces(c))
            for n in nxt:
                if n not in out:
                    out.add(n)
                    queue.append(n)
        return out

    def is_subtype(self, cls: str, other: str) -> bool:
        return cls == other or other in self.supertypes(cls)

    def resolve(self, cls: str, sub_signature: str) -> Optional[str]:
        """App class whose body defines sub_signature as seen from cls."""
        return self.overload_map.get(cls, {}).get(sub_signature)

    def overloads(self, cls: str, sub_signature: str) -> bool:
        """True when cls itself declares sub_signature."""
        return self.resolve(cls, sub_signature) == cls

    def defined_methods(self, cls: str) -> Dict[str, str]:
        return self.overload_map.get(cls, {})


def build_hierarchy(model: AppModel) -> ClassHierarchy:
    h = ClassHierarchy()
    for name, cdef in model.classes.items():
        h.super_map[name] = cdef.super_name
        h.interfaces_map[name] = list(cdef.interfaces)
        h.children_map.setdefault(cdef.super_name, set()).add(name)

    # cycle check over app-internal super and interface edges
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in model.classes}

    def edges(c):
        return [n for n in [h.super_map.get(c)] + h.interfaces(c) if n in color]

    for start in sorted(model.classes):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(edges(start)))]
        path = [start]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
                continue
            if color[nxt] == GREY:
                raise CyclicHierarchy(path[path.index(nxt):] + [nxt])
            if color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append((nxt, iter(edges(nxt))))

    def table(cls: str) -> Dict[str, str]:
        if cls in h.overload_map:
            return h.overload_map[cls]
        cdef = model.classes.get(cls)
        if cdef is None:
            return {}
        inherited = dict(table(cdef.super_name))
        for sub in cdef.methods:
            inherited[sub] = cls
        h.overload_map[cls] = inherited
        return inherited

    for name in sorted(model.classes):
        table(name)
    return h


def entry_points(manifest: Manifest, hierarchy: ClassHierarchy, lifecycle) -> Set[MethodSig]:
    """Lifecycle handlers that registered component classes define or inherit."""
    out: Set[MethodSig] = set()
    for comp in manifest.components:
        defined = hierarchy.defined_methods(comp.class_name)
        if not defined and comp.class_name not in hierarchy.super_map:
            logger.warning(f"Manifest component {comp.class_name} has no class body")
            continue
        handlers = lifecycle.handlers(comp.kind)
        for sub, owner in defined.items():
            name = sub.split(":", 1)[0]
            if name in handlers:
                out.add(parse_method_sig(f"{class_to_desc(owner)}.{sub}"))
    return out
