"""Wrapper-stub generator.

From a .spec description of a native library this produces:

  * the extern signature file the compiler consumes (entry symbols are
    `<base>_wrapper`),
  * C wrapper source marshalling between argument registers and the
    user's native functions,
  * a build note listing the entry symbols the shared object must export.

Primitive arguments go through the v1 host-table getters/returners.
Arguments of a mapped kind (single constructor, all-int fields) go
through the compound accessors (get_ctor_arg_int, return_ctor,
set_ctor_arg_int), which are table extension slots behind api_version 2;
the build note flags wrappers that need them.

The term-side marshal plan (unmarshal/marshal below) is the same
field-order correspondence executed on machine terms, used by tests and
by in-process plugins.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import __version__
from . import frontend as fe
from .terms import Cmp, Int, Term, Var, deref

GENERATOR_NAME = "mlp stubgen"


class StubgenError(Exception):
    pass


class MarshalError(Exception):
    pass


# --------------------------------------------------------------------------
# Signature generation


def signature_ast(spec: fe.SpecAst) -> fe.SignatureAst:
    externs = [fe.ExternDecl(p.lp_name, p.entry_base + "_wrapper", p.type)
               for p in spec.preds]
    regcl = {p.lp_name for p in spec.preds if p.regcl}
    return fe.SignatureAst(spec.spec_name, spec.lib_name, externs, regcl,
                           source_file=spec.source_file)


def generate_signature(spec: fe.SpecAst) -> str:
    return fe.format_signature(signature_ast(spec))


# --------------------------------------------------------------------------
# Mapped-kind plans


@dataclass(frozen=True)
class MarshalPlan:
    kind_name: str
    ctor_name: str
    record_name: str
    field_names: tuple  # ordered; positionally matched to ctor arguments


def marshal_plans(spec: fe.SpecAst) -> dict:
    """One plan per mapped kind; raises StubgenError on non-int fields."""
    plans = {}
    for m in spec.native_maps:
        ctor = None
        for cname, cty in spec.constructors:
            cod = fe.type_codomain(cty)
            if isinstance(cod, fe.KindType) and cod.name == m.kind_name:
                ctor = (cname, cty)
        if ctor is None:
            raise StubgenError("mapped kind %r has no constructor" % m.kind_name)
        for fname, fty in m.fields:
            if not (isinstance(fty, fe.BaseType) and fty.name == "int"):
                raise StubgenError(
                    "kind %r: field %r has type %s; only int fields can be "
                    "marshalled" % (m.kind_name, fname, fe.format_type(fty)))
        n_fields = len(m.fields)
        ctor_arity = len(fe.type_domains(ctor[1]))
        if ctor_arity != n_fields:
            raise StubgenError(
                "kind %r: constructor %s has %d arguments but record %s has "
                "%d fields" % (m.kind_name, ctor[0], ctor_arity,
                               m.record_name, n_fields))
        plans[m.kind_name] = MarshalPlan(m.kind_name, ctor[0], m.record_name,
                                         tuple(f for f, _ in m.fields))
    return plans


def unmarshal(plan: MarshalPlan, term: Term) -> tuple:
    """Ground ctor term -> ordered native field values."""
    t = deref(term)
    if isinstance(t, Var):
        raise MarshalError("cannot unmarshal %s: argument is unbound"
                           % plan.kind_name)
    if not isinstance(t, Cmp) or t.functor != plan.ctor_name \
            or len(t.args) != len(plan.field_names):
        raise MarshalError("cannot unmarshal %s: expected %s/%d term"
                           % (plan.kind_name, plan.ctor_name,
                              len(plan.field_names)))
    vals = []
    for k, a in enumerate(t.args):
        a = deref(a)
        if not isinstance(a, Int):
            raise MarshalError(
                "cannot unmarshal %s: constructor argument %d is not a ground int"
                % (plan.kind_name, k))
        vals.append(a.val)
    return tuple(vals)


def marshal(plan: MarshalPlan, values) -> Cmp:
    """Ordered native field values -> ground ctor term."""
    values = tuple(values)
    if len(values) != len(plan.field_names):
        raise MarshalError("%s expects %d field values, got %d"
                           % (plan.record_name, len(plan.field_names),
                              len(values)))
    return Cmp(plan.ctor_name, tuple(Int(int(v)) for v in values))


# --------------------------------------------------------------------------
# C wrapper generation


def _classify(ty: fe.TypeExpr, plans: dict, pred: str, pos: int) -> str:
    if isinstance(ty, fe.BaseType) and ty.name in ("int", "real", "string"):
        return ty.name
    if isinstance(ty, fe.KindType) and ty.name in plans:
        return "kind:" + ty.name
    raise StubgenError("predicate %r argument %d: type %s cannot be marshalled"
                       % (pred, pos, fe.format_type(ty)))


_C_IN = {"int": "int64_t", "real": "double", "string": "const char *"}
_C_OUT = {"int": "int64_t", "real": "double"}


def _wrapper(p: fe.SpecPred, plans: dict, lines: list) -> bool:
    """Emit one wrapper; returns True if it needs the v2 table slots."""
    doms = fe.type_domains(p.type)
    if not fe.is_predicate_type(p.type) or not doms:
        raise StubgenError("predicate %r: type %s is not a predicate type with "
                           "arguments" % (p.lp_name, fe.format_type(p.type)))
    kinds = [_classify(d, plans, p.lp_name, i + 1) for i, d in enumerate(doms)]
    out_kind = kinds[-1]
    if out_kind == "string":
        raise StubgenError("predicate %r argument %d: string results need a "
                           "hand-written wrapper" % (p.lp_name, len(doms)))
    uses_v2 = any(k.startswith("kind:") for k in kinds)

    # prototype for the user's native function
    arg_cts = []
    for k in kinds[:-1]:
        arg_cts.append("struct %s" % plans[k[5:]].record_name
                       if k.startswith("kind:") else _C_IN[k])
    ret_ct = ("struct %s" % plans[out_kind[5:]].record_name
              if out_kind.startswith("kind:") else _C_OUT[out_kind])
    lines.append("extern %s %s(%s);" % (ret_ct, p.entry_base,
                                        ", ".join(arg_cts) or "void"))
    lines.append("")
    lines.append("/* %s : %s */" % (p.lp_name, fe.format_type(p.type)))
    lines.append("void %s_wrapper(void)" % p.entry_base)
    lines.append("{")

    call_args = []
    for i, k in enumerate(kinds[:-1], 1):
        v = "a%d" % i
        call_args.append(v)
        if k == "int":
            lines.append("    int64_t %s = T->get_int(%d);" % (v, i))
        elif k == "real":
            lines.append("    double %s = T->get_real(%d);" % (v, i))
        elif k == "string":
            lines.append("    int64_t %s_len = T->get_string_len(%d);" % (v, i))
            lines.append("    char %s[%s_len + 1];" % (v, v))
            lines.append("    %s[T->get_string(%d, %s, %s_len)] = '\\0';"
                         % (v, i, v, v))
        else:
            plan = plans[k[5:]]
            lines.append("    struct %s %s;" % (plan.record_name, v))
            for f, fname in enumerate(plan.field_names):
                lines.append("    %s.%s = T->get_ctor_arg_int(%d, %d);"
                             % (v, fname, i, f))

    o = len(kinds)
    if out_kind == "int":
        lines.append("    T->return_int(%d, %s(%s));"
                     % (o, p.entry_base, ", ".join(call_args)))
    elif out_kind == "real":
        lines.append("    T->return_real(%d, %s(%s));"
                     % (o, p.entry_base, ", ".join(call_args)))
    else:
        plan = plans[out_kind[5:]]
        lines.append("    struct %s out = %s(%s);"
                     % (plan.record_name, p.entry_base, ", ".join(call_args)))
        lines.append('    T->return_ctor(%d, "%s", %d);'
                     % (o, plan.ctor_name, len(plan.field_names)))
        for f, fname in enumerate(plan.field_names):
            lines.append("    T->set_ctor_arg_int(%d, %d, out.%s);"
                         % (o, f, fname))
    lines.append("}")
    lines.append("")
    return uses_v2


def generate_wrappers(spec: fe.SpecAst) -> str:
    plans = marshal_plans(spec)
    lines = [
        "/* Generated by %s %s from %s. Do not edit. */"
        % (GENERATOR_NAME, __version__, spec.source_file),
        "",
        '#include <stdint.h>',
        '#include "mlp_plugin.h"',
        "",
        "static const mlp_host_table *T;",
        "",
        "uint32_t mlp_abi_version = MLP_ABI_VERSION;",
        "",
        "void mlp_init(const mlp_host_table *table)",
        "{",
        "    T = table;",
        "}",
        "",
    ]
    for m in spec.native_maps:
        plan = plans[m.kind_name]
        fields = " ".join("int64_t %s;" % f for f in plan.field_names)
        lines.append("struct %s { %s };" % (plan.record_name, fields))
    if spec.native_maps:
        lines.append("")
    needs_v2 = False
    for p in spec.preds:
        needs_v2 |= _wrapper(p, plans, lines)
    if needs_v2:
        lines.append("/* Compound marshalling above requires a host with "
                     "api_version >= 2. */")
        lines.append("")
    return "\n".join(lines)


def generate_build_note(spec: fe.SpecAst) -> str:
    from .loader import library_filename
    lines = [
        "Build note for %s (generated by %s %s)" % (spec.spec_name,
                                                    GENERATOR_NAME, __version__),
        "",
        "Shared object: %s (library name %r)"
        % (library_filename(spec.lib_name) or spec.lib_name, spec.lib_name),
        "ABI: export mlp_abi_version (= 1) and mlp_init; see mlp_plugin.h.",
        "",
        "Required entry symbols:",
    ]
    for p in spec.preds:
        lines.append("  %s_wrapper  (predicate %s/%d%s)"
                     % (p.entry_base, p.lp_name, len(fe.type_domains(p.type)),
                        ", regcl" if p.regcl else ""))
    lines.append("")
    lines.append("Implement the native functions declared 'extern' in the "
                 "generated wrapper source and link them into the same "
                 "shared object.")
    return "\n".join(lines) + "\n"


def generate_all(spec: fe.SpecAst) -> dict:
    """filename -> content for everything stubgen emits."""
    return {
        spec.spec_name + ".sig": generate_signature(spec),
        spec.spec_name + "_wrappers.c": generate_wrappers(spec),
        spec.spec_name + "_build_note.txt": generate_build_note(spec),
    }
