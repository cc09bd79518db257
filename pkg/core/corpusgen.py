"""
Synthetic SBC app generator.

Every planted sink lives in its own package `gen.s<k>` and reaches the
cipher sink through one linkage kind. The value passed to the sink is built
by one constant-flow template. Filler classes under `gen.filler` add mass
without touching any sink. Output is a pure function of the GenSpec.
"""

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

from core.detectors import Predicate, SinkSpec
from core.errors import InfeasibleSpec
from core.forward_eval import apply_binop
from core.sbc.model import MethodSig, app_name, quote_string

logger = logging.getLogger("corpusgen")

LINKAGES = ("Static", "Private", "Ctor", "VirtualChild", "Interface", "Callback", "Async",
            "IccExplicit", "IccImplicit", "Clinit")
VALUE_TEMPLATES = ("direct", "concat", "builder", "static")

VULNERABLE_VALUES = ("AES/ECB/PKCS5Padding", "DES/ECB/NoPadding", "AES")
SAFE_VALUES = ("AES/GCM/NoPadding", "AES/CBC/PKCS5Padding")

CIPHER_SINK = "Ljavax/crypto/Cipher;.getInstance:(Ljava/lang/String;)Ljavax/crypto/Cipher;"
PORT_SINK = "Ljava/net/ServerSocket;.<init>:(I)V"

STRING = "Ljava/lang/String;"
INTENT = "Landroid/content/Intent;"
BUILDER = "Ljava/lang/StringBuilder;"
OBJECT_INIT = "Ljava/lang/Object;.<init>:()V"
EXTRA_KEY = "mode"

# classes each linkage adds besides the entry activity
_LINKAGE_CLASSES = {
    "Static": 1, "Private": 0, "Ctor": 1, "VirtualChild": 2, "Interface": 2, "Callback": 1,
    "Async": 1, "IccExplicit": 1, "IccImplicit": 1, "Clinit": 1,
}


class GenSpec(BaseModel):
    seed: int = 1
    classes: int = 50
    methods_per_class: int = 10
    linkages: List[str] = list(LINKAGES)
    sinks: int = 10
    unreachable_fraction: float = 0.0
    value_templates: List[str] = list(VALUE_TEMPLATES)


@dataclass
class SinkTruth:
    sink_id: str
    package: str
    linkage: str
    template: str
    reachable: bool
    value: str
    expected_status: str
    site: str
    chain: List[str] = field(default_factory=list)


@dataclass
class GroundTruth:
    seed: int
    app: str
    sinks: List[SinkTruth]
    classes: int
    methods: int

    def to_json(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Dict) -> "GroundTruth":
        return cls(data["seed"], data["app"], [SinkTruth(**s) for s in data["sinks"]],
                   data["classes"], data["methods"])


def expected_status(value: str, reachable: bool) -> str:
    if not reachable:
        return "Unreachable"
    parts = value.split("/")
    return "Vulnerable" if len(parts) == 1 or parts[1].upper() == "ECB" else "Safe"


# ============================================================
# Text emission
# ============================================================

def desc(cls: str) -> str:
    return "L" + cls.replace(".", "/") + ";"


class _Regs:
    def __init__(self, start: int = 0):
        self.n = start

    def __call__(self) -> str:
        reg = f"v{self.n}"
        self.n += 1
        return reg


@dataclass
class _Method:
    header: str
    body: List[str]


@dataclass
class _Class:
    name: str
    super_name: str = "java.lang.Object"
    interfaces: Tuple[str, ...] = ()
    fields: List[str] = field(default_factory=list)
    methods: List[_Method] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.name.replace(".", "/") + ".sbc"

    def method(self, header: str, body: List[str]) -> "_Class":
        self.methods.append(_Method(header, body))
        return self

    def render(self) -> List[str]:
        out = [f".class public {desc(self.name)}", f".super {desc(self.super_name)}"]
        out += [f".implements {desc(i)}" for i in self.interfaces]
        out += self.fields
        for m in self.methods:
            out.append("")
            out.append(f".method {m.header}")
            out += ["    " + line for line in m.body]
            out.append(".end method")
        return out


def _ctor(super_name: str = "java.lang.Object") -> _Method:
    return _Method("public <init>()V", [
        "v0 = param 0",
        f"invoke v0 {desc(super_name)}.<init>:()V",
        "return-void",
    ])


def _split(value: str) -> Tuple[str, str]:
    cut = value.index("/") + 1 if "/" in value else len(value) // 2
    return value[:cut], value[cut:]


def _emit_value(template: str, value: str, regs: _Regs, consts: Optional[_Class]) -> Tuple[List[str], str]:
    """Lines leaving `value` in the returned register."""
    if template == "direct":
        r = regs()
        return [f"{r} = const {quote_string(value)}"], r
    if template == "concat":
        head, tail = _split(value)
        a, b, c = regs(), regs(), regs()
        return [f"{a} = const {quote_string(head)}", f"{b} = const {quote_string(tail)}",
                f"{c} = binop concat {a} {b}"], c
    if template == "builder":
        head, tail = _split(value)
        sb, a, t1, b, t2, out = (regs() for _ in range(6))
        append = f"{BUILDER}.append:({STRING}){BUILDER}"
        return [
            f"{sb} = new {BUILDER}",
            f"invoke {sb} {BUILDER}.<init>:()V",
            f"{a} = const {quote_string(head)}",
            f"{t1} = invoke {sb} {append} {a}",
            f"{b} = const {quote_string(tail)}",
            f"{t2} = invoke {sb} {append} {b}",
            f"{out} = invoke {sb} {BUILDER}.toString:(){STRING}",
        ], out
    if template == "static":
        fsig = f"{desc(consts.name)}.VALUE:{STRING}"
        consts.fields.append(f".field public static VALUE:{STRING}")
        consts.method("static <clinit>()V", [
            f"v0 = const {quote_string(value)}",
            f"sput v0 {fsig}",
            "return-void",
        ])
        r = regs()
        return [f"{r} = sget {fsig}"], r
    raise InfeasibleSpec(f"unknown value template {template!r}")


def _sink_line(reg: str, regs: _Regs) -> str:
    return f"{regs()} = invoke {CIPHER_SINK} {reg}"


# ============================================================
# Linkage templates
# ============================================================

@dataclass
class _Planted:
    classes: List[_Class]
    components: List[str]           # manifest lines when reachable
    unreachable_drop: List[str]     # manifest lines omitted when unreachable
    sink_class: str
    chain: List[str]


def _handler_sig(cls: str, name: str, params: Tuple[str, ...], ret: str = "V") -> str:
    return MethodSig(cls, name, params, ret).analysis


def _plant(k: int, linkage: str, template: str, value: str) -> _Planted:
    pkg = f"gen.s{k}"
    entry = _Class(f"{pkg}.Entry", "android.app.Activity")
    consts = _Class(f"{pkg}.Consts") if template == "static" else None
    regs = _Regs(2)
    on_create = ["v0 = param 0", "v1 = param 1"]
    extra: List[_Class] = []
    entry_line = f"activity {desc(entry.name)} exported"
    components = [entry_line]
    drop = [entry_line]
    entry_sig = _handler_sig(entry.name, "onCreate", ("Landroid/os/Bundle;",))

    def value_in_entry() -> str:
        lines, reg = _emit_value(template, value, regs, consts)
        on_create.extend(lines)
        return reg

    if linkage == "Static":
        worker = _Class(f"{pkg}.Worker")
        v = value_in_entry()
        on_create.append(f"invoke {desc(worker.name)}.apply:({STRING})V {v}")
        worker.method(f"public static apply({STRING})V", [
            "v0 = param 0", f"v1 = invoke {CIPHER_SINK} v0", "return-void"])
        extra.append(worker)
        sink_class = worker.name
        chain = [entry_sig, _handler_sig(worker.name, "apply", (STRING,))]
    elif linkage == "Private":
        v = value_in_entry()
        on_create.append(f"invoke v0 {desc(entry.name)}.apply:({STRING})V {v}")
        entry.method(f"private apply({STRING})V", [
            "v0 = param 0", "v1 = param 1", f"v2 = invoke {CIPHER_SINK} v1", "return-void"])
        sink_class = entry.name
        chain = [entry_sig, _handler_sig(entry.name, "apply", (STRING,))]
    elif linkage == "Ctor":
        worker = _Class(f"{pkg}.Worker")
        v = value_in_entry()
        h = regs()
        on_create += [f"{h} = new {desc(worker.name)}", f"invoke {h} {desc(worker.name)}.<init>:({STRING})V {v}"]
        worker.method(f"public <init>({STRING})V", [
            "v0 = param 0", "v1 = param 1", f"invoke v0 {OBJECT_INIT}",
            f"v2 = invoke {CIPHER_SINK} v1", "return-void"])
        extra.append(worker)
        sink_class = worker.name
        chain = [entry_sig, _handler_sig(worker.name, "<init>", (STRING,))]
    elif linkage == "VirtualChild":
        base = _Class(f"{pkg}.Base")
        child = _Class(f"{pkg}.Child", base.name)
        base.methods.append(_ctor())
        base.method(f"public apply({STRING})V", [
            "v0 = param 0", "v1 = param 1", f"v2 = invoke {CIPHER_SINK} v1", "return-void"])
        child.methods.append(_ctor(base.name))
        v = value_in_entry()
        h = regs()
        on_create += [f"{h} = new {desc(child.name)}", f"invoke {h} {desc(child.name)}.<init>:()V",
                      f"invoke {h} {desc(child.name)}.apply:({STRING})V {v}"]
        extra += [base, child]
        sink_class = base.name
        chain = [entry_sig, _handler_sig(base.name, "apply", (STRING,))]
    elif linkage in ("Interface", "Callback", "Async"):
        if linkage == "Interface":
            holder = _Class(f"{pkg}.Task", interfaces=("java.lang.Runnable",))
            handler_header, handler_params = "public run()V", ()
            handler_regs = ["v0 = param 0"]
            handler_ret = ["return-void"]
            super_name = "java.lang.Object"
        elif linkage == "Callback":
            holder = _Class(f"{pkg}.Clicker", interfaces=("android.view.View$OnClickListener",))
            handler_header, handler_params = "public onClick(Landroid/view/View;)V", ("Landroid/view/View;",)
            handler_regs = ["v0 = param 0", "v1 = param 1"]
            handler_ret = ["return-void"]
            super_name = "java.lang.Object"
        else:
            holder = _Class(f"{pkg}.Job", "android.os.AsyncTask")
            handler_header = "protected doInBackground([Ljava/lang/Object;)Ljava/lang/Object;"
            handler_params = ("[Ljava/lang/Object;",)
            handler_regs = ["v0 = param 0", "v1 = param 1"]
            handler_ret = ["return v4"]
            super_name = "android.os.AsyncTask"
        fsig = f"{desc(holder.name)}.mode:{STRING}"
        holder.fields.append(f".field private mode:{STRING}")
        holder.method(f"public <init>({STRING})V", [
            "v0 = param 0", "v1 = param 1", f"invoke v0 {desc(super_name)}.<init>:()V",
            f"iput v1 v0 {fsig}", "return-void"])
        handler_name = handler_header.split()[1].split("(")[0]
        holder.method(handler_header, handler_regs + [
            f"v2 = iget v0 {fsig}", f"v3 = invoke {CIPHER_SINK} v2"]
            + (["v4 = cast Ljava/lang/Object; v3"] if linkage == "Async" else []) + handler_ret)
        v = value_in_entry()
        obj = regs()
        on_create += [f"{obj} = new {desc(holder.name)}", f"invoke {obj} {desc(holder.name)}.<init>:({STRING})V {v}"]
        handler_sig = _handler_sig(holder.name, handler_name, handler_params,
                                   "Ljava/lang/Object;" if linkage == "Async" else "V")
        if linkage == "Interface":
            util = _Class(f"{pkg}.Util")
            util.method("public static runInBackground(Ljava/lang/Runnable;)V", [
                "v0 = param 0",
                "v1 = invoke Ljava/util/concurrent/Executors;.newSingleThreadExecutor:()"
                "Ljava/util/concurrent/ExecutorService;",
                "invoke v1 Ljava/util/concurrent/Executor;.execute:(Ljava/lang/Runnable;)V v0",
                "return-void"])
            on_create.append(f"invoke {desc(util.name)}.runInBackground:(Ljava/lang/Runnable;)V {obj}")
            extra += [holder, util]
            chain = [entry_sig, _handler_sig(util.name, "runInBackground", ("Ljava/lang/Runnable;",)), handler_sig]
        elif linkage == "Callback":
            view = regs()
            on_create += [f"{view} = new Landroid/view/View;",
                          f"invoke {view} Landroid/view/View;.setOnClickListener:"
                          f"(Landroid/view/View$OnClickListener;)V {obj}"]
            extra.append(holder)
            chain = [entry_sig, handler_sig]
        else:
            n, arr, res = regs(), regs(), regs()
            on_create += [f"{n} = const 0", f"{arr} = newarray [Ljava/lang/Object; {n}",
                          f"{res} = invoke {obj} Landroid/os/AsyncTask;.execute:"
                          f"([Ljava/lang/Object;)Landroid/os/AsyncTask; {arr}"]
            extra.append(holder)
            chain = [entry_sig, handler_sig]
        sink_class = holder.name
    elif linkage in ("IccExplicit", "IccImplicit"):
        target = _Class(f"{pkg}.Target", "android.app.Service")
        target.method(f"public onStartCommand({INTENT}II)I", [
            "v0 = param 0", "v1 = param 1", f"v2 = const {quote_string(EXTRA_KEY)}",
            f"v3 = invoke v1 {INTENT}.getStringExtra:({STRING}){STRING} v2",
            f"v4 = invoke {CIPHER_SINK} v3", "v5 = const 1", "return v5"])
        v = value_in_entry()
        intent, key, tag, put, started = regs(), regs(), regs(), regs(), regs()
        on_create.append(f"{intent} = new {INTENT}")
        action = f"{pkg}.ACTION"
        if linkage == "IccExplicit":
            on_create += [f"{tag} = const class {desc(target.name)}",
                          f"invoke {intent} {INTENT}.<init>:(Landroid/content/Context;Ljava/lang/Class;)V v0 {tag}"]
            target_line = f"service {desc(target.name)}"
        else:
            on_create += [f"{tag} = const {quote_string(action)}",
                          f"invoke {intent} {INTENT}.<init>:({STRING})V {tag}"]
            target_line = f"service {desc(target.name)} action={action}"
        on_create += [
            f"{key} = const {quote_string(EXTRA_KEY)}",
            f"{put} = invoke {intent} {INTENT}.putExtra:({STRING}{STRING}){INTENT} {key} {v}",
            f"{started} = invoke v0 Landroid/content/Context;.startService:({INTENT})"
            f"Landroid/content/ComponentName; {intent}",
        ]
        extra.append(target)
        components.append(target_line)
        drop = [target_line]
        sink_class = target.name
        chain = [entry_sig, _handler_sig(target.name, "onStartCommand", (INTENT, "I", "I"), "I")]
    elif linkage == "Clinit":
        holder = _Class(f"{pkg}.Holder")
        holder.fields.append(f".field public static TAG:{STRING}")
        cregs = _Regs(0)
        lines, reg = _emit_value(template, value, cregs, consts)
        t = cregs()
        holder.method("static <clinit>()V", lines + [
            _sink_line(reg, cregs), f"{t} = const \"tag\"", f"sput {t} {desc(holder.name)}.TAG:{STRING}",
            "return-void"])
        on_create.append(f"{regs()} = sget {desc(holder.name)}.TAG:{STRING}")
        extra.append(holder)
        sink_class = holder.name
        chain = [entry_sig, _handler_sig(holder.name, "<clinit>", ())]
    else:
        raise InfeasibleSpec(f"unknown linkage {linkage!r}")

    on_create.append("return-void")
    entry.methods.insert(0, _Method("public onCreate(Landroid/os/Bundle;)V", on_create))
    classes = [entry] + extra + ([consts] if consts is not None else [])
    return _Planted(classes, components, drop, sink_class, chain)


def _filler(spec: GenSpec, count: int) -> Tuple[List[_Class], Optional[str]]:
    if count <= 0:
        return [], None
    main = _Class("gen.filler.Main", "android.app.Activity")
    body = ["v0 = param 0", "v1 = param 1"]
    workers = []
    for i in range(count - 1):
        cls = _Class(f"gen.filler.F{i}")
        for j in range(spec.methods_per_class):
            nxt = (f"invoke {desc(cls.name)}.m{j + 1}:(I)I v2" if j + 1 < spec.methods_per_class else None)
            lines = ["v0 = param 0", f"v1 = const {j + 1}", "v2 = binop add v0 v1"]
            if nxt:
                lines.append(f"v3 = {nxt}")
                lines.append("return v3")
            else:
                lines.append("return v2")
            cls.method(f"public static m{j}(I)I", lines)
        workers.append(cls)
        body += [f"v{2 + 2 * i} = const {i}", f"v{3 + 2 * i} = invoke {desc(cls.name)}.m0:(I)I v{2 + 2 * i}"]
    body.append("return-void")
    main.method("public onCreate(Landroid/os/Bundle;)V", body)
    return [main] + workers, f"activity {desc(main.name)} exported"


# ============================================================
# Generation
# ============================================================

def _validate(spec: GenSpec):
    if spec.sinks < 1:
        raise InfeasibleSpec("sink count must be at least 1")
    if not spec.linkages:
        raise InfeasibleSpec("linkage mix is empty")
    unknown = [l for l in spec.linkages if l not in LINKAGES]
    if unknown:
        raise InfeasibleSpec(f"unknown linkage kinds {unknown}")
    if not spec.value_templates or any(t not in VALUE_TEMPLATES for t in spec.value_templates):
        raise InfeasibleSpec(f"value templates must be drawn from {list(VALUE_TEMPLATES)}")
    if len(set(spec.linkages)) > spec.sinks:
        raise InfeasibleSpec(f"{len(set(spec.linkages))} linkage kinds need at least as many sinks, got {spec.sinks}")
    if not 0.0 <= spec.unreachable_fraction <= 1.0:
        raise InfeasibleSpec("unreachable fraction must lie in [0, 1]")
    if spec.methods_per_class < 1:
        raise InfeasibleSpec("methods per class must be at least 1")
    for linkage in set(spec.linkages):
        need = 1 + _LINKAGE_CLASSES[linkage] + (1 if spec.value_templates == ["static"] else 0)
        if spec.classes < need:
            raise InfeasibleSpec(f"{linkage} needs at least {need} classes, got {spec.classes}")


def generate(spec: GenSpec, out_dir) -> Tuple[Path, GroundTruth]:
    """Write `<out_dir>/app` and `<out_dir>/truth.json`; returns the app dir and its ground truth."""
    _validate(spec)
    rng = random.Random(spec.seed)
    out = Path(out_dir)
    app_dir = out / "app"

    order = [spec.linkages[i % len(spec.linkages)] for i in range(spec.sinks)]
    rng.shuffle(order)
    # every distinct kind keeps at least one sink
    for kind in dict.fromkeys(spec.linkages):
        if kind not in order:
            order[rng.randrange(len(order))] = kind
    n_dead = round(spec.unreachable_fraction * spec.sinks)
    dead = set(rng.sample(range(spec.sinks), n_dead))

    classes: List[_Class] = []
    manifest: List[str] = []
    truths: List[SinkTruth] = []
    planted: List[Tuple[int, _Planted, str, str, bool]] = []
    for k, linkage in enumerate(order):
        template = rng.choice(spec.value_templates)
        value = rng.choice(VULNERABLE_VALUES + SAFE_VALUES)
        p = _plant(k, linkage, template, value)
        reachable = k not in dead
        classes += p.classes
        manifest += p.components if reachable else [c for c in p.components if c not in p.unreachable_drop]
        planted.append((k, p, template, value, reachable))

    filler, filler_line = _filler(spec, spec.classes - len(classes))
    classes += filler
    if filler_line:
        manifest.append(filler_line)

    texts: Dict[str, List[str]] = {c.path: c.render() for c in classes}
    for k, p, template, value, reachable in planted:
        path = p.sink_class.replace(".", "/") + ".sbc"
        line = next(i for i, text in enumerate(texts[path], start=1) if CIPHER_SINK in text)
        method = _sink_method(texts[path], line, p.sink_class)
        truths.append(SinkTruth(
            sink_id=f"s{k}", package=f"gen.s{k}", linkage=order[k],
            template=template, reachable=reachable, value=value,
            expected_status=expected_status(value, reachable),
            site=f"{method}@{line}", chain=p.chain))

    app_dir.mkdir(parents=True, exist_ok=True)
    for rel in sorted(texts):
        path = app_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(texts[rel]) + "\n", encoding="utf-8")
    (app_dir / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")

    methods = sum(len(c.methods) for c in classes)
    truth = GroundTruth(spec.seed, app_name(app_dir), truths, len(classes), methods)
    (out / "truth.json").write_text(json.dumps(truth.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Generated seed={spec.seed}: {len(classes)} classes, {methods} methods, {len(truths)} sinks")
    return app_dir, truth


def _sink_method(lines: List[str], sink_line: int, cls: str) -> str:
    """Search-form signature of the method enclosing a 1-based line."""
    for i in range(sink_line - 1, -1, -1):
        text = lines[i].strip()
        if text.startswith(".method "):
            header = text.split()[-1]
            name, rest = header.split("(", 1)
            params, ret = rest.split(")", 1)
            return f"{desc(cls)}.{name}:({params}){ret}"
    raise ValueError(f"line {sink_line} is outside any method")


# ============================================================
# Constant programs for the forward-evaluation oracle
# ============================================================

@dataclass
class ConstantProgram:
    seed: int
    two_path: bool
    kind: str                      # "int" or "str"
    files: Dict[str, str]
    manifest: str
    entry: MethodSig
    sink: str
    branch_args: List[Dict[int, int]]

    def write(self, root) -> Path:
        root = Path(root)
        for rel, text in sorted(self.files.items()):
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        (root / "manifest.txt").write_text(self.manifest, encoding="utf-8")
        return root


def _int_steps(rng: random.Random, regs: _Regs, live: List[Tuple[str, int]], n: int) -> List[str]:
    """Random arithmetic over live (register, value) pairs; divisors are never zero."""
    lines = []
    for _ in range(n):
        if rng.random() < 0.4 or len(live) < 2:
            value = rng.randint(-1000, 1000)
            r = regs()
            lines.append(f"{r} = const {value}")
            live.append((r, value))
            continue
        op = rng.choice(("add", "sub", "mul", "div"))
        (ra, a), (rb, b) = rng.choice(live), rng.choice(live)
        if op == "div" and b == 0:
            op = "add"
        r = regs()
        lines.append(f"{r} = binop {op} {ra} {rb}")
        live.append((r, apply_binop(op, a, b)))
    return lines


def _str_steps(rng: random.Random, regs: _Regs, live: List[Tuple[str, object]], n: int) -> List[str]:
    lines = []
    for _ in range(n):
        choice = rng.random()
        r = regs()
        if choice < 0.35 or not live:
            value = rng.choice(("AES", "DES", "/", "ECB", "CBC", "GCM", "PKCS5Padding", "NoPadding", "-", "x"))
            lines.append(f"{r} = const {quote_string(value)}")
            live.append((r, value))
        elif choice < 0.5:
            value = rng.randint(0, 99)
            lines.append(f"{r} = const {value}")
            s = regs()
            lines.append(f"{s} = invoke Ljava/lang/String;.valueOf:(I){STRING} {r}")
            live.append((s, str(value)))
        elif choice < 0.75:
            (ra, a), (rb, b) = rng.choice(live), rng.choice(live)
            lines.append(f"{r} = binop concat {ra} {rb}")
            live.append((r, a + b))
        else:
            (ra, a), (rb, b) = rng.choice(live), rng.choice(live)
            append = f"{BUILDER}.append:({STRING}){BUILDER}"
            t1, t2, out = regs(), regs(), regs()
            lines += [f"{r} = new {BUILDER}", f"invoke {r} {BUILDER}.<init>:()V",
                      f"{t1} = invoke {r} {append} {ra}", f"{t2} = invoke {r} {append} {rb}",
                      f"{out} = invoke {r} {BUILDER}.toString:(){STRING}"]
            live.append((out, a + b))
    return lines


def generate_constant_program(seed: int, two_path: bool = False, steps: int = 8) -> ConstantProgram:
    """One entry method computing a constant that reaches a sink; two_path adds a branch and a phi."""
    rng = random.Random(seed)
    kind = rng.choice(("int", "str"))
    cls = f"gen.p{seed}.Main"
    regs = _Regs(2)
    live: List = []
    gen = _int_steps if kind == "int" else _str_steps
    body = ["v0 = param 0", "v1 = param 1"]
    body += gen(rng, regs, live, max(1, steps // 2))
    if two_path:
        left_live, right_live = list(live), list(live)
        left = gen(rng, regs, left_live, max(1, steps // 2))
        right = gen(rng, regs, right_live, max(1, steps // 2))
        a, b = left_live[-1][0], right_live[-1][0]
        result = regs()
        body += ["if v1 goto Lright"] + left + ["goto Ljoin", "label Lright"] + right + [
            "label Ljoin", f"{result} = phi {a} {b}"]
    else:
        body += gen(rng, regs, live, max(1, steps // 2))
        result = live[-1][0]
    if kind == "int":
        sock = regs()
        body += [f"{sock} = new Ljava/net/ServerSocket;", f"invoke {sock} {PORT_SINK} {result}"]
        sink = PORT_SINK
    else:
        body.append(f"{regs()} = invoke {CIPHER_SINK} {result}")
        sink = CIPHER_SINK
    body.append("return-void")
    main = _Class(cls, "android.app.Activity").method("public onCreate(Landroid/os/Bundle;)V", body)
    text = "\n".join(main.render()) + "\n"
    entry = MethodSig(cls, "onCreate", ("Landroid/os/Bundle;",), "V")
    branches = [{1: 0}, {1: 1}] if two_path else [{1: 0}]
    return ConstantProgram(seed, two_path, kind, {main.path: text}, f"activity {desc(cls)} exported\n",
                           entry, sink, branches)


def sink_specs() -> List[SinkSpec]:
    """Sink specs matching the sinks planted by `generate` and `generate_constant_program`."""
    return [
        SinkSpec(sink=CIPHER_SINK, params=[0], predicate=Predicate(kind="cipher-mode", value="ECB"),
                 severity="high", label="cipher-ecb"),
        SinkSpec(sink=PORT_SINK, params=[0], predicate=Predicate(kind="int-equals", value=8081),
                 label="open-port"),
    ]
