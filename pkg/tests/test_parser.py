import pytest

from core.backtracker.lifecycle import LifecycleTable
from core.errors import CyclicHierarchy, DuplicateClass, DuplicateComponent, MissingManifest, ParseError
from core.sbc.hierarchy import build_hierarchy, entry_points
from core.sbc.model import ClassRef, ComponentKind, ExprKind, InstrKind, MethodSig, parse_method_sig
from core.sbc.parser import SbcParser, parse_app

MAIN = """
    .class public Lcom/t/Main;
    .super Landroid/app/Activity;
    .field private count:I
    .field public static TAG:Ljava/lang/String;

    .method public onCreate(Landroid/os/Bundle;)V
        v0 = param 0
        v1 = const "a \\"quoted\\" value"
        v2 = const -7
        v3 = const class Lcom/t/Other;
        v4 = binop add v2 v2
        label L1
        if v4 goto L1
        iput v2 v0 Lcom/t/Main;.count:I
        v5 = invoke v0 Lcom/t/Main;.helper:(I)I v4
        return-void
    .end method

    .method private static helper(I)I
        v0 = param 0
        return v0
    .end method
"""


def test_parse_app_builds_classes_methods_and_manifest(app_dir):
    root = app_dir("activity Lcom/t/Main; exported action=com.t.GO", Main=MAIN)
    model = parse_app(root)

    assert model.class_count == 1
    assert model.method_count == 2
    cdef = model.class_def("com.t.Main")
    assert cdef.super_name == "android.app.Activity"
    assert "TAG" in cdef.static_fields

    comp = model.manifest.component_for("com.t.Main")
    assert comp.kind == ComponentKind.ACTIVITY
    assert comp.exported
    assert comp.actions == ("com.t.GO",)


def test_instruction_shapes(app_dir):
    model = parse_app(app_dir("activity Lcom/t/Main;", Main=MAIN))
    body = model.method(parse_method_sig("Lcom/t/Main;.onCreate:(Landroid/os/Bundle;)V"))

    consts = [i.expr.operands[0] for i in body.instructions if i.expr is not None and i.expr.kind == ExprKind.CONST]
    assert consts == ['a "quoted" value', -7, ClassRef("com.t.Other")]

    kinds = [i.kind for i in body.instructions]
    assert InstrKind.NOP in kinds and InstrKind.IF in kinds

    call = next(i for i in body.instructions if i.invoked is not None)
    assert call.expr.base == "v0"
    assert call.expr.operands == ("v4",)
    assert call.defines_register

    assert body.param_register(0) == "v0"
    assert body.at(call.line) is call


def test_body_signatures_carry_modifiers(app_dir):
    model = parse_app(app_dir("activity Lcom/t/Main;", Main=MAIN))
    helper = model.method(MethodSig("com.t.Main", "helper", ("I",), "I"))
    assert helper.sig.is_static
    assert helper.sig.is_private
    assert helper.sig.is_signature_method


def test_missing_manifest(tmp_path):
    (tmp_path / "Main.sbc").write_text(".class public Lcom/t/Main;\n", encoding="utf-8")
    with pytest.raises(MissingManifest):
        parse_app(tmp_path)


def test_no_sbc_files(tmp_path):
    (tmp_path / "manifest.txt").write_text("activity Lcom/t/Main;\n", encoding="utf-8")
    with pytest.raises(MissingManifest):
        parse_app(tmp_path)


def test_duplicate_class_across_files(app_dir):
    root = app_dir("activity Lcom/t/Main;", A=".class public Lcom/t/Main;", B=".class public Lcom/t/Main;")
    with pytest.raises(DuplicateClass):
        parse_app(root)


def test_duplicate_component(app_dir):
    root = app_dir("activity Lcom/t/Main;\nactivity Lcom/t/Main;", Main=MAIN)
    with pytest.raises(DuplicateComponent):
        parse_app(root)


@pytest.mark.parametrize("line", [
    "v1 = bogus v2",
    "v1 = invoke Lcom/t/Main;.helper:(I)I",
    "goto NOWHERE",
    "x1 = const 1",
])
def test_bad_instructions_raise_parse_error(line):
    text = [".class public Lcom/t/Main;", ".method public m()V", f"    {line}", "    return-void", ".end method"]
    with pytest.raises(ParseError) as info:
        SbcParser().parse_file("Main.sbc", text)
    assert info.value.file == "Main.sbc"


def test_invalid_utf8_raises_parse_error_with_line(tmp_path):
    (tmp_path / "manifest.txt").write_text("activity Lcom/t/Main;\n", encoding="utf-8")
    (tmp_path / "Bad.sbc").write_bytes(b".class public Lcom/t/Main;\n.super Lcom/t/B\xff\xfe;\n")
    with pytest.raises(ParseError) as info:
        parse_app(tmp_path)
    assert (info.value.file, info.value.line) == ("Bad.sbc", 2)


def test_invalid_utf8_manifest(tmp_path):
    (tmp_path / "manifest.txt").write_bytes(b"activity Lcom/t/\xc3(;\n")
    (tmp_path / "Main.sbc").write_text(".class public Lcom/t/Main;\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        parse_app(tmp_path)
    assert (info.value.file, info.value.line) == ("manifest.txt", 1)


def test_unterminated_method():
    with pytest.raises(ParseError):
        SbcParser().parse_file("Main.sbc", [".class public Lcom/t/Main;", ".method public m()V", "    return-void"])


def test_signature_forms_agree():
    sig = parse_method_sig("Lcom/t/Main;.helper:(ILjava/lang/String;)[I")
    assert sig.analysis == "<com.t.Main: int[] helper(int,java.lang.String)>"
    assert parse_method_sig(sig.analysis) == sig
    assert sig.sub_signature == "helper:(ILjava/lang/String;)[I"


# ============================================================
# Hierarchy and entry points
# ============================================================

BASE = """
    .class public Lcom/t/Base;
    .super Landroid/app/Activity;

    .method public onCreate(Landroid/os/Bundle;)V
        return-void
    .end method

    .method public start()V
        return-void
    .end method
"""

CHILD = """
    .class public Lcom/t/Child;
    .super Lcom/t/Base;

    .method public onResume()V
        return-void
    .end method
"""

PLAIN = """
    .class public Lcom/t/Plain;

    .method public go()V
        return-void
    .end method
"""


def test_hierarchy_children_and_inherited_methods(app_dir):
    model = parse_app(app_dir("activity Lcom/t/Child;", Base=BASE, Child=CHILD, Plain=PLAIN))
    h = build_hierarchy(model)

    assert h.children("com.t.Base") == {"com.t.Child"}
    assert h.super_of("com.t.Plain") == "java.lang.Object"
    assert h.resolve("com.t.Child", "start:()V") == "com.t.Base"
    assert h.resolve("com.t.Child", "onResume:()V") == "com.t.Child"
    assert h.is_subtype("com.t.Child", "android.app.Activity")


def test_cyclic_hierarchy_rejected(app_dir):
    a = ".class public Lcom/t/A;\n.super Lcom/t/B;"
    b = ".class public Lcom/t/B;\n.super Lcom/t/A;"
    model = parse_app(app_dir("", A=a, B=b))
    with pytest.raises(CyclicHierarchy):
        build_hierarchy(model)


def test_entry_points_include_inherited_handlers(app_dir):
    model = parse_app(app_dir("activity Lcom/t/Child;", Base=BASE, Child=CHILD, Plain=PLAIN))
    entries = entry_points(model.manifest, build_hierarchy(model), LifecycleTable())

    assert entries == {
        parse_method_sig("<com.t.Base: void onCreate(android.os.Bundle)>"),
        parse_method_sig("<com.t.Child: void onResume()>"),
    }


def test_unregistered_classes_contribute_no_entries(app_dir):
    model = parse_app(app_dir("", Base=BASE, Child=CHILD))
    assert entry_points(model.manifest, build_hierarchy(model), LifecycleTable()) == set()
