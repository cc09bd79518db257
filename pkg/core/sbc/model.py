"""
Typed model of an SBC (disassembled bytecode) app.

Class names are held in dotted form (`com.pkg.Cls`). Search-form strings
(`Lcom/pkg/Cls;.start:()V`) are what the text index keys on; analysis-form
strings (`<com.pkg.Cls: void start()>`) are what reports print.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Tuple

ROOT_CLASS = "java.lang.Object"

PRIMITIVES = {
    "V": "void",
    "Z": "boolean",
    "B": "byte",
    "C": "char",
    "S": "short",
    "I": "int",
    "J": "long",
    "F": "float",
    "D": "double",
}
_JAVA_PRIMITIVES = {v: k for k, v in PRIMITIVES.items()}

_ANALYSIS_RE = re.compile(r"^<([^:\s]+): (\S+) ([^(\s]+)\((.*)\)>$")
_SEARCH_RE = re.compile(r"^L([^;]+);\.([^:]+):\((.*)\)(\S+)$")
_FIELD_RE = re.compile(r"^L([^;]+);\.([^:]+):(\S+)$")


# ============================================================
# Descriptors
# ============================================================

def class_to_desc(name: str) -> str:
    return "L" + name.replace(".", "/") + ";"


def desc_to_class(desc: str) -> str:
    if not (desc.startswith("L") and desc.endswith(";")):
        raise ValueError(f"not a class descriptor: {desc}")
    return desc[1:-1].replace("/", ".")


def split_descriptors(text: str) -> List[str]:
    """Split a concatenated descriptor list such as `Ljava/lang/String;IZ`."""
    out: List[str] = []
    i = 0
    while i < len(text):
        start = i
        while text[i] == "[":
            i += 1
            if i >= len(text):
                raise ValueError(f"dangling array marker in {text!r}")
        if text[i] == "L":
            end = text.find(";", i)
            if end < 0:
                raise ValueError(f"unterminated class descriptor in {text!r}")
            i = end + 1
        elif text[i] in PRIMITIVES:
            i += 1
        else:
            raise ValueError(f"bad descriptor character {text[i]!r} in {text!r}")
        out.append(text[start:i])
    return out


def desc_to_java(desc: str) -> str:
    dims = 0
    while desc.startswith("["):
        dims += 1
        desc = desc[1:]
    base = PRIMITIVES.get(desc) or desc_to_class(desc)
    return base + "[]" * dims


def java_to_desc(java: str) -> str:
    dims = 0
    while java.endswith("[]"):
        dims += 1
        java = java[:-2]
    base = _JAVA_PRIMITIVES.get(java) or class_to_desc(java)
    return "[" * dims + base


# ============================================================
# Signatures and references
# ============================================================

@dataclass(frozen=True)
class MethodSig:
    cls: str
    name: str
    params: Tuple[str, ...]
    ret: str
    modifiers: FrozenSet[str] = field(default=frozenset(), compare=False, hash=False)

    def __post_init__(self):
        mods = set(self.modifiers)
        if self.name == "<clinit>":
            if self.params:
                raise ValueError("<clinit> takes no parameters")
            mods |= {"static", "constructor"}
        elif self.name == "<init>":
            mods.add("constructor")
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "modifiers", frozenset(mods))

    @property
    def class_desc(self) -> str:
        return class_to_desc(self.cls)

    @property
    def sub_signature(self) -> str:
        return f"{self.name}:({''.join(self.params)}){self.ret}"

    @property
    def search(self) -> str:
        return f"{self.class_desc}.{self.sub_signature}"

    @property
    def analysis(self) -> str:
        args = ",".join(desc_to_java(p) for p in self.params)
        return f"<{self.cls}: {desc_to_java(self.ret)} {self.name}({args})>"

    @property
    def is_static(self) -> bool:
        return "static" in self.modifiers

    @property
    def is_private(self) -> bool:
        return "private" in self.modifiers

    @property
    def is_constructor(self) -> bool:
        return self.name == "<init>"

    @property
    def is_clinit(self) -> bool:
        return self.name == "<clinit>"

    @property
    def is_signature_method(self) -> bool:
        """Static, private and constructor call sites always name the method itself."""
        return self.is_static or self.is_private or self.is_constructor

    @property
    def arity(self) -> int:
        return len(self.params)

    def with_class(self, cls: str) -> "MethodSig":
        return MethodSig(cls, self.name, self.params, self.ret, self.modifiers)

    def with_modifiers(self, modifiers) -> "MethodSig":
        return MethodSig(self.cls, self.name, self.params, self.ret, frozenset(modifiers))

    def __str__(self) -> str:
        return self.search


def render_search(sig: MethodSig) -> str:
    return sig.search


def render_analysis(sig: MethodSig) -> str:
    return sig.analysis


def parse_method_sig(text: str, modifiers=()) -> MethodSig:
    """Parse either rendering back into a MethodSig."""
    text = text.strip()
    m = _ANALYSIS_RE.match(text)
    if m:
        cls, ret, name, args = m.groups()
        params = tuple(java_to_desc(a) for a in args.split(",")) if args else ()
        return MethodSig(cls, name, params, java_to_desc(ret), frozenset(modifiers))
    m = _SEARCH_RE.match(text)
    if m:
        cls, name, args, ret = m.groups()
        split_descriptors(ret)
        return MethodSig(cls.replace("/", "."), name, tuple(split_descriptors(args)), ret, frozenset(modifiers))
    raise ValueError(f"not a method signature: {text!r}")


@dataclass(frozen=True)
class FieldRef:
    owner: str
    name: str
    desc: str

    @property
    def search(self) -> str:
        return f"{class_to_desc(self.owner)}.{self.name}:{self.desc}"

    def __str__(self) -> str:
        return self.search


def parse_field_ref(text: str) -> FieldRef:
    m = _FIELD_RE.match(text.strip())
    if not m:
        raise ValueError(f"not a field signature: {text!r}")
    owner, name, desc = m.groups()
    return FieldRef(owner.replace("/", "."), name, desc)


@dataclass(frozen=True)
class ClassRef:
    """A `const class` operand."""
    name: str

    def __str__(self) -> str:
        return class_to_desc(self.name)


# ============================================================
# Instructions
# ============================================================

class InstrKind(Enum):
    DEFINITION = "Definition"
    INVOKE = "Invoke"
    RETURN = "Return"
    GOTO = "Goto"
    IF = "If"
    NOP = "Nop"


class ExprKind(Enum):
    CONST = "Const"
    PARAM = "Param"
    NEW = "New"
    NEW_ARRAY = "NewArray"
    BINOP = "Binop"
    CAST = "Cast"
    PHI = "Phi"
    INVOKE = "InvokeExpr"
    FIELD_GET = "FieldGet"
    FIELD_PUT = "FieldPut"
    ARRAY_GET = "ArrayGet"
    ARRAY_PUT = "ArrayPut"


BINOPS = ("add", "sub", "mul", "div", "concat")


def is_register(name: Optional[str]) -> bool:
    return bool(name) and name[0] == "v" and name[1:].isdigit()


@dataclass(frozen=True)
class Expr:
    """
    Operand layout per kind:
      Const      operands=(value,)          value: int | str | ClassRef
      Param      operands=(k,)
      New        ref=class name
      NewArray   op=element desc, operands=(size,)
      Binop      op=operator, operands=(a, b)
      Cast       op=target desc, operands=(a,)
      Phi        operands=(a, b, ...)
      InvokeExpr ref=MethodSig, base=receiver or None, operands=args
      FieldGet   ref=FieldRef, base=object or None (static)
      FieldPut   ref=FieldRef, base=object or None, operands=(value,)
      ArrayGet   base=array, operands=(index,)
      ArrayPut   base=array, operands=(value, index)
    """
    kind: ExprKind
    operands: Tuple[Any, ...] = ()
    op: Optional[str] = None
    ref: Any = None
    base: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        arity = {ExprKind.BINOP: 2, ExprKind.CAST: 1, ExprKind.CONST: 1, ExprKind.NEW_ARRAY: 1,
                 ExprKind.ARRAY_GET: 1, ExprKind.ARRAY_PUT: 2, ExprKind.FIELD_PUT: 1}
        if self.kind in arity and len(self.operands) != arity[self.kind]:
            raise ValueError(f"{self.kind.value} expects {arity[self.kind]} operands")
        if self.kind == ExprKind.PHI and len(self.operands) < 2:
            raise ValueError("Phi needs at least two operands")
        if self.kind == ExprKind.PARAM:
            if len(self.operands) != 1 or not isinstance(self.operands[0], int) or self.operands[0] < 0:
                raise ValueError("Param carries one index >= 0")
        if self.kind == ExprKind.BINOP and self.op not in BINOPS:
            raise ValueError(f"unknown binop {self.op}")

    @property
    def is_static_access(self) -> bool:
        return self.kind in (ExprKind.FIELD_GET, ExprKind.FIELD_PUT) and self.base is None

    def uses(self) -> Tuple[str, ...]:
        k = self.kind
        if k in (ExprKind.CONST, ExprKind.PARAM, ExprKind.NEW):
            return ()
        if k in (ExprKind.NEW_ARRAY, ExprKind.BINOP, ExprKind.CAST, ExprKind.PHI):
            return self.operands
        if k in (ExprKind.INVOKE, ExprKind.FIELD_GET, ExprKind.ARRAY_GET):
            return ((self.base,) if self.base else ()) + self.operands
        return self.operands + ((self.base,) if self.base else ())

    def arg_for_slot(self, slot: int) -> Optional[str]:
        """Register passed for callee parameter slot (slot 0 is the receiver of instance calls)."""
        if self.kind != ExprKind.INVOKE:
            return None
        if self.base is None:
            return self.operands[slot] if 0 <= slot < len(self.operands) else None
        if slot == 0:
            return self.base
        return self.operands[slot - 1] if 0 < slot <= len(self.operands) else None

    def slots_of(self, reg: str) -> List[int]:
        if self.kind != ExprKind.INVOKE:
            return []
        shift = 0 if self.base is None else 1
        slots = [0] if self.base == reg else []
        slots += [i + shift for i, r in enumerate(self.operands) if r == reg]
        return slots

    def render(self) -> str:
        k = self.kind
        if k == ExprKind.CONST:
            v = self.operands[0]
            if isinstance(v, ClassRef):
                return f"const class {v}"
            if isinstance(v, str):
                return "const " + quote_string(v)
            return f"const {v}"
        if k == ExprKind.PARAM:
            return f"param {self.operands[0]}"
        if k == ExprKind.NEW:
            return f"new {class_to_desc(self.ref)}"
        if k == ExprKind.NEW_ARRAY:
            return f"newarray {self.op} {self.operands[0]}"
        if k == ExprKind.BINOP:
            return f"binop {self.op} {self.operands[0]} {self.operands[1]}"
        if k == ExprKind.CAST:
            return f"cast {self.op} {self.operands[0]}"
        if k == ExprKind.PHI:
            return "phi " + " ".join(self.operands)
        if k == ExprKind.INVOKE:
            parts = ["invoke"] + ([self.base] if self.base else []) + [self.ref.search] + list(self.operands)
            return " ".join(parts)
        if k == ExprKind.FIELD_GET:
            return f"iget {self.base} {self.ref.search}" if self.base else f"sget {self.ref.search}"
        if k == ExprKind.FIELD_PUT:
            if self.base:
                return f"iput {self.operands[0]} {self.base} {self.ref.search}"
            return f"sput {self.operands[0]} {self.ref.search}"
        if k == ExprKind.ARRAY_GET:
            return f"aget {self.base} {self.operands[0]}"
        return f"aput {self.operands[0]} {self.base} {self.operands[1]}"


def quote_string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def field_path(base: str, fref: FieldRef) -> str:
    return f"{base}.{fref.search}"


def array_path(base: str) -> str:
    return f"{base}[]"


@dataclass(frozen=True)
class Instruction:
    kind: InstrKind
    line: int
    lhs: Optional[str] = None
    expr: Optional[Expr] = None
    targets: Tuple[str, ...] = ()
    operand: Optional[str] = None  # returned register, or the branch condition

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind == InstrKind.DEFINITION and not self.lhs:
            raise ValueError("Definition needs a left-hand side")
        if self.kind in (InstrKind.RETURN, InstrKind.INVOKE) and self.targets:
            raise ValueError("Return/Invoke carry no branch targets")
        if self.expr is not None and self.expr.kind == ExprKind.PHI and self.kind != InstrKind.DEFINITION:
            raise ValueError("Phi only appears on Definition")

    @property
    def invoked(self) -> Optional[MethodSig]:
        if self.expr is not None and self.expr.kind == ExprKind.INVOKE:
            return self.expr.ref
        return None

    @property
    def defines_register(self) -> bool:
        return self.kind == InstrKind.DEFINITION and is_register(self.lhs)

    def render(self) -> str:
        if self.kind == InstrKind.NOP:
            return f"label {self.targets[0]}" if self.targets else "nop"
        if self.kind == InstrKind.GOTO:
            return f"goto {self.targets[0]}"
        if self.kind == InstrKind.IF:
            return f"if {self.operand} goto {self.targets[0]}"
        if self.kind == InstrKind.RETURN:
            return f"return {self.operand}" if self.operand else "return-void"
        if self.kind == InstrKind.INVOKE or not is_register(self.lhs):
            return self.expr.render()
        return f"{self.lhs} = {self.expr.render()}"


# ============================================================
# Classes, manifest, app
# ============================================================

@dataclass
class MethodBody:
    sig: MethodSig
    file: str
    start_line: int
    end_line: int
    instructions: List[Instruction] = field(default_factory=list)

    def __post_init__(self):
        self._by_line: Dict[int, Instruction] = {}
        self._defs: Dict[str, Instruction] = {}
        self._params: Dict[int, str] = {}

    def index(self):
        self._by_line = {i.line: i for i in self.instructions}
        self._defs = {i.lhs: i for i in self.instructions if i.defines_register}
        self._params = {
            i.expr.operands[0]: i.lhs
            for i in self.instructions
            if i.defines_register and i.expr.kind == ExprKind.PARAM
        }

    def at(self, line: int) -> Optional[Instruction]:
        return self._by_line.get(line)

    def definition_of(self, reg: str) -> Optional[Instruction]:
        return self._defs.get(reg)

    def param_register(self, slot: int) -> Optional[str]:
        return self._params.get(slot)

    def before(self, line: int, inclusive: bool = False) -> List[Instruction]:
        """Instructions above `line` in reverse textual order."""
        limit = line + 1 if inclusive else line
        return [i for i in reversed(self.instructions) if i.line < limit]

    def after(self, line: int) -> List[Instruction]:
        return [i for i in self.instructions if i.line > line]

    def returns(self) -> List[Instruction]:
        return [i for i in self.instructions if i.kind == InstrKind.RETURN and i.operand is not None]


@dataclass
class ClassDef:
    name: str
    file: str
    line: int
    modifiers: FrozenSet[str] = frozenset()
    super_name: str = ROOT_CLASS
    interfaces: List[str] = field(default_factory=list)
    fields: Dict[str, FieldRef] = field(default_factory=dict)
    static_fields: set = field(default_factory=set)
    methods: Dict[str, MethodBody] = field(default_factory=dict)  # sub-signature -> body

    @property
    def desc(self) -> str:
        return class_to_desc(self.name)


class ComponentKind(Enum):
    ACTIVITY = "activity"
    SERVICE = "service"
    RECEIVER = "receiver"
    PROVIDER = "provider"


@dataclass(frozen=True)
class Component:
    kind: ComponentKind
    class_name: str
    exported: bool = False
    actions: Tuple[str, ...] = ()


@dataclass
class Manifest:
    components: List[Component] = field(default_factory=list)

    def component_for(self, class_name: str) -> Optional[Component]:
        for comp in self.components:
            if comp.class_name == class_name:
                return comp
        return None

    def is_registered(self, class_name: str) -> bool:
        return self.component_for(class_name) is not None

    def classes(self) -> set:
        return {c.class_name for c in self.components}

    def by_action(self, action: str) -> List[Component]:
        return [c for c in self.components if action in c.actions]


def app_name(app_dir) -> str:
    """Directory name of an app; a bare `app` directory takes its parent's name."""
    path = Path(app_dir).resolve()
    return path.parent.name if path.name == "app" and path.parent.name else path.name


@dataclass
class AppModel:
    root: Path
    classes: Dict[str, ClassDef]
    manifest: Manifest
    files: Dict[str, List[str]]
    framework_prefixes: Tuple[str, ...] = ("java/", "javax/", "android/")

    @property
    def name(self) -> str:
        return app_name(self.root)

    def class_def(self, name: str) -> Optional[ClassDef]:
        return self.classes.get(name)

    def method(self, sig: MethodSig) -> Optional[MethodBody]:
        cdef = self.classes.get(sig.cls)
        if cdef is None:
            return None
        return cdef.methods.get(sig.sub_signature)

    def methods(self) -> Iterator[MethodBody]:
        for name in sorted(self.classes):
            cdef = self.classes[name]
            for sub in sorted(cdef.methods):
                yield cdef.methods[sub]

    def is_framework(self, class_name: str) -> bool:
        slashed = class_name.replace(".", "/")
        return any(slashed.startswith(p) for p in self.framework_prefixes)

    def is_app_method(self, sig: MethodSig) -> bool:
        return self.method(sig) is not None

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def method_count(self) -> int:
        return sum(len(c.methods) for c in self.classes.values())

    @property
    def instruction_count(self) -> int:
        return sum(len(m.instructions) for m in self.methods())
