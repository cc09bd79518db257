"""
Concrete SBC interpreter.

Runs app methods on real values so generated programs can be checked
against the forward evaluator. Framework calls follow the same API model
list as the evaluator, on concrete values; any other framework call yields
an opaque None.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from core.forward_eval import ConstName, apply_binop, java_int, java_str
from core.sbc.model import AppModel, Expr, ExprKind, InstrKind, MethodBody, MethodSig

logger = logging.getLogger("interpreter")


class InterpreterError(Exception):
    pass


@dataclass(eq=False)
class ConcreteObject:
    cls: str
    fields: Dict[str, Any] = field(default_factory=dict)


@dataclass(eq=False)
class ConcreteArray:
    elem_type: str
    items: List[Any]


@dataclass
class SinkCall:
    sink: str
    args: List[Any]
    receiver: Any = None


class Interpreter:
    def __init__(self, model: AppModel, sinks: Iterable[str] = (), max_steps: int = 100_000,
                 max_depth: int = 64):
        self.model = model
        self.sinks = set(sinks)
        self.max_steps = max_steps
        self.max_depth = max_depth
        self.statics: Dict[str, Any] = {}
        self.initialized: set = set()
        self.observations: List[SinkCall] = []
        self._steps = 0

    def run(self, entry: MethodSig, args: Optional[Dict[int, Any]] = None) -> List[SinkCall]:
        """Run one entry method; slot 0 of an instance entry defaults to a fresh component object."""
        args = dict(args or {})
        body = self.model.method(entry)
        if body is None:
            raise InterpreterError(f"no body for {entry.search}")
        if not body.sig.is_static and 0 not in args:
            args[0] = ConcreteObject(entry.cls)
        logger.debug(f"Interpreting {entry.search}")
        start = len(self.observations)
        self._ensure_init(entry.cls)
        self._execute(body, args, 0)
        return self.observations[start:]

    # ------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------

    def _ensure_init(self, cls: str):
        if cls in self.initialized or self.model.class_def(cls) is None:
            return
        self.initialized.add(cls)
        body = self.model.method(MethodSig(cls, "<clinit>", (), "V"))
        if body is not None:
            self._execute(body, {}, 0)

    def _execute(self, body: MethodBody, params: Dict[int, Any], depth: int) -> Any:
        if depth > self.max_depth:
            raise InterpreterError(f"call depth exceeded in {body.sig.search}")
        instrs = body.instructions
        labels = {i.targets[0]: n for n, i in enumerate(instrs) if i.kind == InstrKind.NOP and i.targets}
        regs: Dict[str, Any] = {}
        order: Dict[str, int] = {}
        pc = 0
        while pc < len(instrs):
            self._steps += 1
            if self._steps > self.max_steps:
                raise InterpreterError("step limit exceeded")
            instr = instrs[pc]
            pc += 1
            kind = instr.kind
            if kind == InstrKind.NOP:
                continue
            if kind == InstrKind.GOTO:
                pc = labels[instr.targets[0]]
                continue
            if kind == InstrKind.IF:
                if regs.get(instr.operand):
                    pc = labels[instr.targets[0]]
                continue
            if kind == InstrKind.RETURN:
                return regs.get(instr.operand) if instr.operand else None
            expr = instr.expr
            if expr.kind == ExprKind.PHI:
                defined = [r for r in expr.operands if r in order]
                if not defined:
                    raise InterpreterError(f"phi with no defined operand at line {instr.line}")
                value = regs[max(defined, key=lambda r: order[r])]
            elif expr.kind == ExprKind.PARAM:
                value = params.get(expr.operands[0])
            else:
                value = self._eval(expr, regs, depth)
            if instr.defines_register:
                regs[instr.lhs] = value
                order[instr.lhs] = self._steps
        return None

    def _eval(self, expr: Expr, regs: Dict[str, Any], depth: int) -> Any:
        k = expr.kind
        if k == ExprKind.CONST:
            return expr.operands[0]
        if k == ExprKind.BINOP:
            a, b = (regs.get(r) for r in expr.operands)
            if expr.op == "div" and b == 0:
                raise ArithmeticError("/ by zero")
            result = apply_binop(expr.op, a, b)
            if result is None:
                raise InterpreterError(f"binop {expr.op} on {a!r}, {b!r}")
            return result
        if k == ExprKind.CAST:
            return regs.get(expr.operands[0])
        if k == ExprKind.NEW:
            return ConcreteObject(expr.ref)
        if k == ExprKind.NEW_ARRAY:
            return ConcreteArray(expr.op, [None] * int(regs.get(expr.operands[0]) or 0))
        if k == ExprKind.FIELD_GET:
            if expr.base is None:
                owner = expr.ref.owner
                if self.model.is_framework(owner) or self.model.class_def(owner) is None:
                    return ConstName(owner, expr.ref.name)
                self._ensure_init(owner)
                return self.statics.get(expr.ref.search)
            obj = regs.get(expr.base)
            return obj.fields.get(expr.ref.search) if isinstance(obj, ConcreteObject) else None
        if k == ExprKind.FIELD_PUT:
            value = regs.get(expr.operands[0])
            if expr.base is None:
                self._ensure_init(expr.ref.owner)
                self.statics[expr.ref.search] = value
            else:
                obj = regs.get(expr.base)
                if isinstance(obj, ConcreteObject):
                    obj.fields[expr.ref.search] = value
            return None
        if k == ExprKind.ARRAY_GET:
            arr = regs.get(expr.base)
            return arr.items[regs.get(expr.operands[0])]
        if k == ExprKind.ARRAY_PUT:
            arr = regs.get(expr.base)
            arr.items[regs.get(expr.operands[1])] = regs.get(expr.operands[0])
            return None
        if k == ExprKind.INVOKE:
            return self._invoke(expr, regs, depth)
        raise InterpreterError(f"cannot evaluate {k.value}")

    def _invoke(self, expr: Expr, regs: Dict[str, Any], depth: int) -> Any:
        call: MethodSig = expr.ref
        recv = regs.get(expr.base) if expr.base else None
        args = [regs.get(r) for r in expr.operands]
        if call.search in self.sinks:
            self.observations.append(SinkCall(call.search, args, recv))
            return None
        target = self._dispatch(call, recv)
        if target is not None:
            self._ensure_init(target.sig.cls)
            slots = {} if target.sig.is_static else {0: recv}
            shift = 0 if target.sig.is_static else 1
            slots.update({i + shift: v for i, v in enumerate(args)})
            return self._execute(target, slots, depth + 1)
        return self._framework(call, recv, args)

    def _dispatch(self, call: MethodSig, recv: Any) -> Optional[MethodBody]:
        if call.is_static or call.is_constructor or call.is_private or not isinstance(recv, ConcreteObject):
            return self.model.method(call)
        cls = recv.cls
        while cls is not None:
            cdef = self.model.class_def(cls)
            if cdef is None:
                break
            body = cdef.methods.get(call.sub_signature)
            if body is not None:
                return body
            cls = cdef.super_name
        return self.model.method(call)

    @staticmethod
    def _framework(call: MethodSig, recv: Any, args: List[Any]) -> Any:
        key = (call.cls, call.name)
        if key == ("java.lang.StringBuilder", "<init>"):
            recv.fields["#value"] = args[0] if args else ""
            return None
        if key == ("java.lang.StringBuilder", "append"):
            recv.fields["#value"] = recv.fields.get("#value", "") + java_str(args[0])
            return recv
        if key == ("java.lang.StringBuilder", "toString"):
            return recv.fields.get("#value", "")
        if key == ("java.lang.String", "valueOf"):
            return java_str(args[0])
        if key == ("java.lang.String", "concat"):
            return recv + args[0]
        if key == ("java.lang.Integer", "parseInt"):
            return java_int(int(args[0].strip(), 10))
        if key == ("java.lang.Integer", "toString"):
            return str(args[0])
        if key == ("android.content.Intent", "putExtra"):
            recv.fields[f"#extra:{args[0]}"] = args[1]
            return recv
        if key in (("android.content.Intent", "getStringExtra"), ("android.content.Intent", "getIntExtra")):
            return recv.fields.get(f"#extra:{args[0]}", args[1] if len(args) > 1 else None)
        return None
