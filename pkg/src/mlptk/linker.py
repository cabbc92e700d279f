"""Linker: combine bytecode images into one.

Output segments are the concatenation of input segments in input order;
operands inside the code copied from image k are adjusted by the total
size of the corresponding segment over images 0..k-1 (the fixed-offset
rule).  Exactly-matching extern entries across images are merged to the
first occurrence, with call operands remapped accordingly.
"""

from __future__ import annotations

from .bytecode import (BytecodeImage, Instruction, Op, PredEntry,
                       shift_template, validate)
from .diagnostics import Diagnostic, LinkError


def _diagnose(images) -> tuple:
    """Shared analysis for link and link_check.

    Returns (diagnostics, extern_out, extern_maps) where extern_maps[k]
    maps image k's extern indices into the merged table.
    """
    diags = []
    seen_preds = {}
    for k, img in enumerate(images):
        for p in img.predicate_table:
            key = (p.name, p.arity)
            if key in seen_preds:
                diags.append(Diagnostic(
                    "duplicate definition of predicate %s/%d (images %d and %d)"
                    % (p.name, p.arity, seen_preds[key], k)))
            else:
                seen_preds[key] = k

    extern_out = []
    extern_index = {}   # full entry -> merged index
    extern_by_pred = {} # (pred, arity) -> merged index
    extern_maps = []
    for k, img in enumerate(images):
        mapping = {}
        for i, e in enumerate(img.extern_table):
            if e in extern_index:
                mapping[i] = extern_index[e]
                continue
            prior = extern_by_pred.get((e.pred_name, e.arity))
            if prior is not None:
                p = extern_out[prior]
                diags.append(Diagnostic(
                    "conflicting extern declarations for %s/%d: %s:%s regcl=%s vs %s:%s regcl=%s"
                    % (e.pred_name, e.arity, p.lib_name, p.entry_symbol, p.regcl,
                       e.lib_name, e.entry_symbol, e.regcl)))
                mapping[i] = prior
                continue
            idx = len(extern_out)
            extern_out.append(e)
            extern_index[e] = idx
            extern_by_pred[(e.pred_name, e.arity)] = idx
            mapping[i] = idx
        extern_maps.append(mapping)
    return diags, extern_out, extern_maps


def link_check(images) -> list:
    """All errors link() would raise, as diagnostics, without linking."""
    if not images:
        return [Diagnostic("nothing to link: no input images")]
    diags, _, _ = _diagnose(images)
    return diags


def link(images) -> BytecodeImage:
    if not images:
        raise LinkError(Diagnostic("nothing to link: no input images"))
    for img in images:
        validate(img)
    diags, extern_out, extern_maps = _diagnose(images)
    if diags:
        raise LinkError(diags)

    out = BytecodeImage(extern_table=extern_out)
    const_off = 0
    tmpl_off = 0
    code_off = 0
    for k, img in enumerate(images):
        emap = extern_maps[k]
        out.const_pool.extend(img.const_pool)
        out.template_pool.extend(shift_template(t, const_off)
                                 for t in img.template_pool)
        for p in img.predicate_table:
            out.predicate_table.append(PredEntry(p.name, p.arity, p.offset + code_off))
        for ins in img.code:
            op = ins.op
            if op in (Op.GET_TEMPLATE, Op.PUT_TEMPLATE):
                ins = Instruction(op, ins.a + tmpl_off, ins.b)
            elif op in (Op.CALL, Op.EXECUTE):
                ins = Instruction(op, ins.a + const_off, ins.b)
            elif op in (Op.CALL_EXTERN, Op.EXECUTE_EXTERN):
                ins = Instruction(op, emap[ins.a], ins.b)
            elif op in (Op.TRY_ME_ELSE, Op.RETRY_ME_ELSE):
                ins = Instruction(op, ins.a + code_off, ins.b)
            out.code.append(ins)
        const_off += len(img.const_pool)
        tmpl_off += len(img.template_pool)
        code_off += len(img.code)

    validate(out)
    return out
