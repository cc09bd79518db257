"""
Text index over SBC plaintext.

Every search the analyzer performs is an exact token or exact signature
match, so the index is a postings map from canonical strings to
(file, line) lists. Lines resolve to their containing method through
per-file sorted method extents.
"""

import bisect
import logging
import math
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

import cachetools

from core.sbc.model import AppModel, ClassRef, ExprKind, Instruction, MethodBody, MethodSig, class_to_desc

logger = logging.getLogger("search_index")


class CommandKind(Enum):
    INVOCATION_OF = "InvocationOf"
    TOKEN_IN_CLASS = "TokenInClass"
    FIELD_ACCESS = "FieldAccess"
    CONST_CLASS = "ConstClass"
    CONST_STRING = "ConstString"


@dataclass(frozen=True)
class SearchCommand:
    kind: CommandKind
    payload: str

    @classmethod
    def invocation(cls, sig_search_form: str) -> "SearchCommand":
        return cls(CommandKind.INVOCATION_OF, sig_search_form)

    @classmethod
    def class_token(cls, class_desc: str) -> "SearchCommand":
        return cls(CommandKind.TOKEN_IN_CLASS, class_desc)

    @classmethod
    def field_access(cls, field_sig: str, mode: str) -> "SearchCommand":
        if mode not in ("get", "put"):
            raise ValueError(f"field access mode must be get or put, got {mode!r}")
        return cls(CommandKind.FIELD_ACCESS, f"{mode} {field_sig}")

    @classmethod
    def const_class(cls, class_desc: str) -> "SearchCommand":
        return cls(CommandKind.CONST_CLASS, class_desc)

    @classmethod
    def const_string(cls, value: str) -> "SearchCommand":
        return cls(CommandKind.CONST_STRING, value)


@dataclass(frozen=True)
class CallHit:
    """A located instruction: the method containing it, its file and line."""
    containing_method: MethodSig
    line: int
    instruction: Instruction
    file: str = ""


@dataclass
class CacheStats:
    lookups: int = 0
    hits: int = 0

    @property
    def rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def as_dict(self) -> Dict[str, float]:
        return {"lookups": self.lookups, "hits": self.hits, "rate": round(self.rate, 4)}


class SearchIndex:
    def __init__(self, model: AppModel):
        self.model = model
        self.postings: Dict[Tuple[CommandKind, str], List[Tuple[str, int]]] = defaultdict(list)
        self._extents: Dict[str, List[Tuple[int, int, MethodBody]]] = {}
        self._starts: Dict[str, List[int]] = {}
        self._cache = cachetools.Cache(maxsize=math.inf)
        self._lock = threading.Lock()
        self.stats = CacheStats()
        self._invoked_by_name: Dict[str, Set[str]] = defaultdict(set)
        self.scan_count = 0
        self.build_ms = 0.0

    # ------------------------------------------------------------
    # Build
    # ------------------------------------------------------------

    def _post(self, kind: CommandKind, payload: str, file: str, line: int):
        self.postings[(kind, payload)].append((file, line))

    def build(self) -> "SearchIndex":
        t0 = time.perf_counter()
        per_file: Dict[str, List[Tuple[int, int, MethodBody]]] = defaultdict(list)
        for body in self.model.methods():
            per_file[body.file].append((body.start_line, body.end_line, body))
            for instr in body.instructions:
                self._index_instruction(body.file, instr)
        for file, extents in per_file.items():
            extents.sort(key=lambda e: e[0])
            self._extents[file] = extents
            self._starts[file] = [e[0] for e in extents]
        for hits in self.postings.values():
            hits.sort()
        self.build_ms = (time.perf_counter() - t0) * 1000.0
        logger.debug(f"Indexed {self.model.name}: {len(self.postings)} tokens in {self.build_ms:.1f} ms")
        return self

    def _index_instruction(self, file: str, instr: Instruction):
        expr = instr.expr
        if expr is None:
            return
        line = instr.line
        if expr.kind == ExprKind.INVOKE:
            self._post(CommandKind.INVOCATION_OF, expr.ref.search, file, line)
            self._invoked_by_name[expr.ref.name].add(expr.ref.search)
            self._post(CommandKind.TOKEN_IN_CLASS, expr.ref.class_desc, file, line)
        elif expr.kind in (ExprKind.FIELD_GET, ExprKind.FIELD_PUT):
            mode = "get" if expr.kind == ExprKind.FIELD_GET else "put"
            self._post(CommandKind.FIELD_ACCESS, f"{mode} {expr.ref.search}", file, line)
            self._post(CommandKind.TOKEN_IN_CLASS, class_to_desc(expr.ref.owner), file, line)
        elif expr.kind == ExprKind.NEW:
            self._post(CommandKind.TOKEN_IN_CLASS, class_to_desc(expr.ref), file, line)
        elif expr.kind == ExprKind.CONST:
            value = expr.operands[0]
            if isinstance(value, ClassRef):
                self._post(CommandKind.CONST_CLASS, str(value), file, line)
                self._post(CommandKind.TOKEN_IN_CLASS, str(value), file, line)
            elif isinstance(value, str):
                self._post(CommandKind.CONST_STRING, value, file, line)

    # ------------------------------------------------------------
    # Resolution
    # ------------------------------------------------------------

    def method_at(self, file: str, line: int) -> Optional[MethodBody]:
        starts = self._starts.get(file)
        if not starts:
            return None
        i = bisect.bisect_right(starts, line) - 1
        if i < 0:
            return None
        start, end, body = self._extents[file][i]
        return body if start <= line <= end else None

    def _hits(self, kind: CommandKind, payload: str) -> Tuple[CallHit, ...]:
        out = []
        for file, line in self.postings.get((kind, payload), ()):
            body = self.method_at(file, line)
            if body is None:
                continue
            out.append(CallHit(body.sig, line, body.at(line), file))
        return tuple(out)

    # ------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------

    def run(self, cmd: SearchCommand):
        """Uncached execution of one command."""
        hits = self._hits(cmd.kind, cmd.payload)
        if cmd.kind == CommandKind.TOKEN_IN_CLASS:
            target = cmd.payload
            return frozenset(h.containing_method.cls for h in hits if h.containing_method.class_desc != target)
        return hits

    def cached(self, cmd: SearchCommand):
        with self._lock:
            self.stats.lookups += 1
            if cmd in self._cache:
                self.stats.hits += 1
                return self._cache[cmd]
        result = self.run(cmd)
        with self._lock:
            self.scan_count += 1
            self._cache[cmd] = result
        return result

    def search_invocations(self, sig_search_form: str) -> List[CallHit]:
        return list(self.cached(SearchCommand.invocation(sig_search_form)))

    def search_class_references(self, class_desc: str) -> Set[str]:
        return set(self.cached(SearchCommand.class_token(class_desc)))

    def field_access_hits(self, field_sig: str, mode: str) -> List[CallHit]:
        return list(self.cached(SearchCommand.field_access(field_sig, mode)))

    def search_field_access(self, field_sig: str, mode: str) -> Set[MethodSig]:
        return {h.containing_method for h in self.field_access_hits(field_sig, mode)}

    def search_const_class(self, class_desc: str) -> List[CallHit]:
        return list(self.cached(SearchCommand.const_class(class_desc)))

    def search_const_string(self, value: str) -> List[CallHit]:
        return list(self.cached(SearchCommand.const_string(value)))

    def invoked_signatures_named(self, name: str) -> List[str]:
        """Every distinct callee signature invoked under a method name."""
        return sorted(self._invoked_by_name.get(name, ()))

    def drop_cache(self):
        with self._lock:
            self._cache.clear()

    def stats_json(self) -> Dict:
        by_kind: Dict[str, Dict[str, int]] = {}
        for (kind, _), hits in self.postings.items():
            entry = by_kind.setdefault(kind.value, {"keys": 0, "entries": 0, "max": 0})
            entry["keys"] += 1
            entry["entries"] += len(hits)
            entry["max"] = max(entry["max"], len(hits))
        return {
            "app": self.model.name,
            "tokens": len(self.postings),
            "postings": by_kind,
            "methods": self.model.method_count,
            "build_ms": round(self.build_ms, 3),
        }


def build_index(model: AppModel) -> SearchIndex:
    return SearchIndex(model).build()


def search_invocations(idx: SearchIndex, sig_search_form: str) -> List[CallHit]:
    return idx.search_invocations(sig_search_form)


def search_class_references(idx: SearchIndex, class_name: str) -> Set[str]:
    return idx.search_class_references(class_name)


def search_field_access(idx: SearchIndex, field_sig: str, mode: str) -> Set[MethodSig]:
    return idx.search_field_access(field_sig, mode)


def cached(idx: SearchIndex, cmd: SearchCommand):
    return idx.cached(cmd)
