import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from core.errors import DuplicateClass, DuplicateComponent, MissingManifest, ParseError
from core.sbc.model import (
    BINOPS,
    AppModel,
    ClassDef,
    ClassRef,
    Component,
    ComponentKind,
    Expr,
    ExprKind,
    FieldRef,
    Instruction,
    InstrKind,
    Manifest,
    MethodBody,
    MethodSig,
    array_path,
    desc_to_class,
    field_path,
    is_register,
    parse_field_ref,
    parse_method_sig,
    split_descriptors,
)

logger = logging.getLogger("sbc")

DEFAULT_FRAMEWORK_PREFIXES = ("java/", "javax/", "android/")
MANIFEST_NAME = "manifest.txt"


class SbcParser:
    """Line-oriented parser for one `.sbc` file; classes accumulate across files."""

    def __init__(self):
        self.class_pattern = re.compile(r"^\.class\s+((?:[\w-]+\s+)*)(L[^;\s]+;)$")
        self.super_pattern = re.compile(r"^\.super\s+(L[^;\s]+;)$")
        self.implements_pattern = re.compile(r"^\.implements\s+(L[^;\s]+;)$")
        self.field_pattern = re.compile(r"^\.field\s+((?:[\w-]+\s+)*)([\w$]+):(\S+)$")
        self.method_pattern = re.compile(r"^\.method\s+((?:[\w-]+\s+)*)(<?[\w$]+>?)\((\S*?)\)(\S+)$")
        self.assign_pattern = re.compile(r"^(v\d+)\s*=\s*(.+)$")
        self.const_string_pattern = re.compile(r'^const\s+"((?:[^"\\]|\\.)*)"$')
        self.const_int_pattern = re.compile(r"^const\s+(-?\d+)$")
        self.const_class_pattern = re.compile(r"^const\s+class\s+(L[^;\s]+;)$")
        self.classes: Dict[str, ClassDef] = {}

    # ------------------------------------------------------------
    # Files
    # ------------------------------------------------------------

    def parse_file(self, rel_path: str, lines: Sequence[str]):
        current: Optional[ClassDef] = None
        method: Optional[MethodBody] = None
        labels: set = set()
        jumps: List[Tuple[int, str]] = []

        for lineno, raw in enumerate(lines, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue

            if method is not None:
                if text == ".end method":
                    for jline, target in jumps:
                        if target not in labels:
                            raise ParseError(rel_path, jline, f"unknown label {target}")
                    method.end_line = lineno
                    method.index()
                    current.methods[method.sig.sub_signature] = method
                    method, labels, jumps = None, set(), []
                    continue
                if text.startswith("."):
                    raise ParseError(rel_path, lineno, f"directive inside method body: {text}")
                instr = self.parse_instruction(text, lineno, rel_path)
                if instr.kind == InstrKind.NOP:
                    if instr.targets[0] in labels:
                        raise ParseError(rel_path, lineno, f"duplicate label {instr.targets[0]}")
                    labels.add(instr.targets[0])
                elif instr.kind in (InstrKind.GOTO, InstrKind.IF):
                    jumps.append((lineno, instr.targets[0]))
                method.instructions.append(instr)
                continue

            m = self.class_pattern.match(text)
            if m:
                name = desc_to_class(m.group(2))
                if name in self.classes:
                    raise DuplicateClass(name, self.classes[name].file, rel_path)
                current = ClassDef(name=name, file=rel_path, line=lineno,
                                   modifiers=frozenset(m.group(1).split()))
                self.classes[name] = current
                continue

            if current is None:
                raise ParseError(rel_path, lineno, "expected .class")

            m = self.super_pattern.match(text)
            if m:
                current.super_name = desc_to_class(m.group(1))
                continue
            m = self.implements_pattern.match(text)
            if m:
                current.interfaces.append(desc_to_class(m.group(1)))
                continue
            m = self.field_pattern.match(text)
            if m:
                mods = m.group(1).split()
                self._check_descriptors(rel_path, lineno, m.group(3))
                fref = FieldRef(current.name, m.group(2), m.group(3))
                current.fields[fref.name] = fref
                if "static" in mods:
                    current.static_fields.add(fref.name)
                continue
            m = self.method_pattern.match(text)
            if m:
                mods = m.group(1).split()
                try:
                    params = tuple(split_descriptors(m.group(3)))
                    split_descriptors(m.group(4))
                    sig = MethodSig(current.name, m.group(2), params, m.group(4), frozenset(mods))
                except ValueError as e:
                    raise ParseError(rel_path, lineno, str(e))
                if sig.sub_signature in current.methods:
                    raise ParseError(rel_path, lineno, f"duplicate method {sig.sub_signature}")
                method = MethodBody(sig=sig, file=rel_path, start_line=lineno, end_line=lineno)
                continue
            if text == ".end method":
                raise ParseError(rel_path, lineno, ".end method without .method")
            raise ParseError(rel_path, lineno, f"unrecognized line: {text}")

        if method is not None:
            raise ParseError(rel_path, method.start_line, "unterminated .method")

    def _check_descriptors(self, file: str, line: int, text: str):
        try:
            if len(split_descriptors(text)) != 1:
                raise ValueError(f"expected one descriptor: {text}")
        except ValueError as e:
            raise ParseError(file, line, str(e))

    # ------------------------------------------------------------
    # Instructions
    # ------------------------------------------------------------

    def _reg(self, token: str, file: str, line: int) -> str:
        if not is_register(token):
            raise ParseError(file, line, f"expected register, got {token!r}")
        return token

    def _field(self, token: str, file: str, line: int) -> FieldRef:
        try:
            return parse_field_ref(token)
        except ValueError as e:
            raise ParseError(file, line, str(e))

    def _invoke(self, tokens: List[str], file: str, line: int) -> Expr:
        if not tokens:
            raise ParseError(file, line, "invoke without callee")
        base = None
        if is_register(tokens[0]):
            base, tokens = tokens[0], tokens[1:]
        if not tokens:
            raise ParseError(file, line, "invoke without callee")
        try:
            sig = parse_method_sig(tokens[0])
        except ValueError as e:
            raise ParseError(file, line, str(e))
        args = tuple(self._reg(t, file, line) for t in tokens[1:])
        if len(args) != sig.arity:
            raise ParseError(file, line, f"{sig.search} takes {sig.arity} args, got {len(args)}")
        return Expr(ExprKind.INVOKE, args, ref=sig, base=base)

    def parse_rhs(self, rhs: str, file: str, line: int) -> Expr:
        m = self.const_string_pattern.match(rhs)
        if m:
            return Expr(ExprKind.CONST, (re.sub(r"\\(.)", r"\1", m.group(1)),))
        m = self.const_int_pattern.match(rhs)
        if m:
            return Expr(ExprKind.CONST, (int(m.group(1)),))
        m = self.const_class_pattern.match(rhs)
        if m:
            return Expr(ExprKind.CONST, (ClassRef(desc_to_class(m.group(1))),))

        tokens = rhs.split()
        op, rest = tokens[0], tokens[1:]
        try:
            if op == "param" and len(rest) == 1 and rest[0].isdigit():
                return Expr(ExprKind.PARAM, (int(rest[0]),))
            if op == "new" and len(rest) == 1:
                return Expr(ExprKind.NEW, ref=desc_to_class(rest[0]))
            if op == "newarray" and len(rest) == 2:
                self._check_descriptors(file, line, rest[0])
                return Expr(ExprKind.NEW_ARRAY, (self._reg(rest[1], file, line),), op=rest[0])
            if op == "binop" and len(rest) == 3 and rest[0] in BINOPS:
                return Expr(ExprKind.BINOP, (self._reg(rest[1], file, line), self._reg(rest[2], file, line)), op=rest[0])
            if op == "cast" and len(rest) == 2:
                self._check_descriptors(file, line, rest[0])
                return Expr(ExprKind.CAST, (self._reg(rest[1], file, line),), op=rest[0])
            if op == "phi" and len(rest) >= 2:
                return Expr(ExprKind.PHI, tuple(self._reg(t, file, line) for t in rest))
            if op == "iget" and len(rest) == 2:
                return Expr(ExprKind.FIELD_GET, ref=self._field(rest[1], file, line), base=self._reg(rest[0], file, line))
            if op == "sget" and len(rest) == 1:
                return Expr(ExprKind.FIELD_GET, ref=self._field(rest[0], file, line))
            if op == "aget" and len(rest) == 2:
                return Expr(ExprKind.ARRAY_GET, (self._reg(rest[1], file, line),), base=self._reg(rest[0], file, line))
            if op == "invoke":
                return self._invoke(rest, file, line)
        except ValueError as e:
            raise ParseError(file, line, str(e))
        raise ParseError(file, line, f"unknown expression: {rhs}")

    def parse_instruction(self, text: str, line: int, file: str = "<text>") -> Instruction:
        m = self.assign_pattern.match(text)
        if m:
            lhs, rhs = m.groups()
            expr = self.parse_rhs(rhs.strip(), file, line)
            return Instruction(InstrKind.DEFINITION, line, lhs=lhs, expr=expr)

        tokens = text.split()
        op, rest = tokens[0], tokens[1:]
        if op == "invoke":
            return Instruction(InstrKind.INVOKE, line, expr=self._invoke(rest, file, line))
        if op == "iput" and len(rest) == 3:
            fref = self._field(rest[2], file, line)
            base = self._reg(rest[1], file, line)
            expr = Expr(ExprKind.FIELD_PUT, (self._reg(rest[0], file, line),), ref=fref, base=base)
            return Instruction(InstrKind.DEFINITION, line, lhs=field_path(base, fref), expr=expr)
        if op == "sput" and len(rest) == 2:
            fref = self._field(rest[1], file, line)
            expr = Expr(ExprKind.FIELD_PUT, (self._reg(rest[0], file, line),), ref=fref)
            return Instruction(InstrKind.DEFINITION, line, lhs=fref.search, expr=expr)
        if op == "aput" and len(rest) == 3:
            base = self._reg(rest[1], file, line)
            expr = Expr(ExprKind.ARRAY_PUT, (self._reg(rest[0], file, line), self._reg(rest[2], file, line)), base=base)
            return Instruction(InstrKind.DEFINITION, line, lhs=array_path(base), expr=expr)
        if op == "return" and len(rest) == 1:
            return Instruction(InstrKind.RETURN, line, operand=self._reg(rest[0], file, line))
        if op == "return-void" and not rest:
            return Instruction(InstrKind.RETURN, line)
        if op == "label" and len(rest) == 1:
            return Instruction(InstrKind.NOP, line, targets=(rest[0],))
        if op == "goto" and len(rest) == 1:
            return Instruction(InstrKind.GOTO, line, targets=(rest[0],))
        if op == "if" and len(rest) == 3 and rest[1] == "goto":
            return Instruction(InstrKind.IF, line, targets=(rest[2],), operand=self._reg(rest[0], file, line))
        raise ParseError(file, line, f"unknown instruction: {text}")


def read_lines(path: Path, name: str) -> List[str]:
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data[:e.start].count(b"\n") + 1
        raise ParseError(name, line, f"invalid UTF-8 at byte {e.start}")
    return text.split("\n")


def parse_manifest(path: Path) -> Manifest:
    manifest = Manifest()
    seen = set()
    lines = read_lines(path, MANIFEST_NAME)
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split()
        try:
            kind = ComponentKind(tokens[0])
        except ValueError:
            raise ParseError(MANIFEST_NAME, lineno, f"unknown component kind {tokens[0]!r}")
        if len(tokens) < 2:
            raise ParseError(MANIFEST_NAME, lineno, "component without class")
        try:
            class_name = desc_to_class(tokens[1])
        except ValueError as e:
            raise ParseError(MANIFEST_NAME, lineno, str(e))
        exported = False
        actions = []
        for tok in tokens[2:]:
            if tok == "exported":
                exported = True
            elif tok.startswith("action="):
                actions.append(tok[len("action="):])
            else:
                raise ParseError(MANIFEST_NAME, lineno, f"unknown manifest attribute {tok!r}")
        if (kind, class_name) in seen:
            raise DuplicateComponent(MANIFEST_NAME, lineno, f"{kind.value} {class_name} registered twice")
        seen.add((kind, class_name))
        manifest.components.append(Component(kind, class_name, exported, tuple(actions)))
    return manifest


def parse_app(app_dir, framework_prefixes: Sequence[str] = DEFAULT_FRAMEWORK_PREFIXES) -> AppModel:
    """Parse every `.sbc` file under app_dir plus its manifest."""
    root = Path(app_dir)
    manifest_path = root / MANIFEST_NAME
    sbc_files = sorted(root.rglob("*.sbc")) if root.is_dir() else []
    if not manifest_path.is_file() or not sbc_files:
        raise MissingManifest(str(root))

    parser = SbcParser()
    files: Dict[str, List[str]] = {}
    for path in sbc_files:
        rel = path.relative_to(root).as_posix()
        lines = read_lines(path, rel)
        files[rel] = lines
        parser.parse_file(rel, lines)

    manifest = parse_manifest(manifest_path)
    model = AppModel(root=root, classes=parser.classes, manifest=manifest, files=files,
                     framework_prefixes=tuple(framework_prefixes))
    logger.info(f"Parsed {model.name}: {model.class_count} classes, {model.method_count} methods, "
                f"{len(manifest.components)} components")
    return model
