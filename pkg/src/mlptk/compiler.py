"""Clause compiler: module AST -> bytecode image.

Compilation scheme is template-based: each clause head argument compiles
to `get_template t, Ai`, each goal argument to `put_template t, Ai` (or
register moves / env loads when the value is already placed), followed
by the call instruction selected from the callee's symbol-table kind:

  LOCAL / ACCUMULATED   -> call / execute (by name)
  EXTERN                -> call_extern / execute_extern (extern-table index)
  INTRINSIC             -> intrinsic opcode over the closed id set

The final goal of a body compiles to the execute form (last-call
optimization); the environment frame is deallocated first.

Register discipline: values live across a call to a non-regcl extern
may stay parked in argument registers above the callee's arity; values
live across any other call (user predicate, intrinsic, regcl extern)
are saved to environment slots.  `conservative_regs` disables parking
and treats every call as clobbering.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import frontend as fe
from .bytecode import (MAX_REGISTERS, BytecodeImage, ExternEntry, Instruction,
                       Intrinsic, Op, PredEntry, TCmp, TConst, TSlot)
from .diagnostics import CompileError, Diagnostic

INTRINSICS = {
    ("solve", 1): Intrinsic.SOLVE,
    ("not", 1): Intrinsic.NOT,
    ("eval", 2): Intrinsic.EVAL,
    ("lt", 2): Intrinsic.LT,
    ("gt", 2): Intrinsic.GT,
    ("le", 2): Intrinsic.LE,
    ("ge", 2): Intrinsic.GE,
    ("eq_num", 2): Intrinsic.EQ_NUM,
}

_INTRINSIC_NAMES = {name for name, _ in INTRINSICS}

KIND_LOCAL = "LOCAL"
KIND_ACCUMULATED = "ACCUMULATED"
KIND_EXTERN = "EXTERN"
KIND_INTRINSIC = "INTRINSIC"


@dataclass
class SymbolTableEntry:
    name: str
    arity: int
    type: fe.TypeExpr | None
    kind: str
    extern_index: int | None = None
    intrinsic_id: Intrinsic | None = None
    regcl: bool = False


class ImageBuilder:
    def __init__(self):
        self.const_pool = []
        self._const_index = {}
        self.template_pool = []
        self._template_index = {}
        self.code = []
        self.predicate_table = []
        self.extern_table = []

    def const(self, tag, value) -> int:
        key = (tag, value, type(value).__name__)
        idx = self._const_index.get(key)
        if idx is None:
            idx = len(self.const_pool)
            self.const_pool.append((tag, value))
            self._const_index[key] = idx
        return idx

    def template(self, node) -> int:
        idx = self._template_index.get(node)
        if idx is None:
            idx = len(self.template_pool)
            self.template_pool.append(node)
            self._template_index[node] = idx
        return idx

    def image(self) -> BytecodeImage:
        return BytecodeImage(const_pool=self.const_pool,
                             template_pool=self.template_pool,
                             extern_table=self.extern_table,
                             predicate_table=self.predicate_table,
                             code=self.code)


class _ClauseVars:
    """Dense 0-based slot assignment; '_' is fresh at every occurrence."""

    def __init__(self):
        self.slots = {}
        self.count = 0

    def slot(self, name: str) -> int:
        if name == "_":
            s = self.count
            self.count += 1
            return s
        s = self.slots.get(name)
        if s is None:
            s = self.count
            self.slots[name] = s
            self.count += 1
        return s


def _build_template(builder: ImageBuilder, arg: fe.TermPat, cv: _ClauseVars):
    if isinstance(arg, fe.PVar):
        return TSlot(cv.slot(arg.name))
    if isinstance(arg, fe.PInt):
        return TConst(builder.const("int", arg.val))
    if isinstance(arg, fe.PReal):
        return TConst(builder.const("real", arg.val))
    if isinstance(arg, fe.PStr):
        return TConst(builder.const("str", arg.val))
    if isinstance(arg, fe.PAtom):
        return TConst(builder.const("sym", arg.name))
    if isinstance(arg, fe.PCmp):
        return TCmp(builder.const("sym", arg.functor),
                    tuple(_build_template(builder, a, cv) for a in arg.args))
    raise CompileError(Diagnostic("unsupported term pattern %r" % (arg,)))


def _pat_vars(arg: fe.TermPat, out: set):
    if isinstance(arg, fe.PVar):
        if arg.name != "_":
            out.add(arg.name)
    elif isinstance(arg, fe.PCmp):
        for a in arg.args:
            _pat_vars(a, out)


def goal_vars(goal: fe.Goal) -> set:
    out = set()
    for a in goal.args:
        _pat_vars(a, out)
    return out


# --------------------------------------------------------------------------
# Symbol table


def _base_of_literal(arg: fe.TermPat) -> str | None:
    if isinstance(arg, fe.PInt):
        return "int"
    if isinstance(arg, fe.PReal):
        return "real"
    if isinstance(arg, fe.PStr):
        return "string"
    return None


def check_call(goal: fe.Goal, entry: SymbolTableEntry, var_types=None,
               filename="<input>") -> list:
    """Check one call site against a symbol table entry; returns diagnostics."""
    diags = []
    line, col = goal.pos
    if len(goal.args) != entry.arity:
        diags.append(Diagnostic(
            "predicate %s expects %d arguments, got %d"
            % (entry.name, entry.arity, len(goal.args)), filename, line, col))
        return diags
    if entry.type is None:
        return diags
    doms = fe.type_domains(entry.type)
    if var_types is None:
        var_types = {}
    for pos, (arg, dom) in enumerate(zip(goal.args, doms), 1):
        if not (isinstance(dom, fe.BaseType) and dom.name in ("int", "real", "string")):
            continue
        lit = _base_of_literal(arg)
        if lit is not None:
            if lit != dom.name:
                diags.append(Diagnostic(
                    "argument %d of %s: %s literal where %s expected"
                    % (pos, entry.name, lit, dom.name), filename, line, col))
        elif isinstance(arg, fe.PVar):
            if arg.name == "_":
                continue
            seen = var_types.get(arg.name)
            if seen is None:
                var_types[arg.name] = dom.name
            elif seen != dom.name:
                diags.append(Diagnostic(
                    "argument %d of %s: variable %s has type %s but %s expected"
                    % (pos, entry.name, arg.name, seen, dom.name), filename, line, col))
        elif isinstance(arg, (fe.PAtom, fe.PCmp)):
            diags.append(Diagnostic(
                "argument %d of %s: structured term where %s expected"
                % (pos, entry.name, dom.name), filename, line, col))
    return diags


def build_symbol_table(m: fe.ModuleAst, sigs: dict, accum_modules=None):
    """Returns (symtab, extern_table, diagnostics)."""
    diags = []
    fname = m.source_file
    symtab: dict[tuple, SymbolTableEntry] = {}
    extern_table: list[ExternEntry] = []

    for sig_name in m.accum_externs:
        sig = sigs.get(sig_name)
        if sig is None:
            diags.append(Diagnostic("cannot resolve accum_extern %r: no such signature"
                                    % sig_name, fname))
            continue
        for decl in sig.externs:
            arity = len(fe.type_domains(decl.type))
            key = (decl.lp_name, arity)
            regcl = decl.lp_name in sig.regcl
            if (decl.lp_name, arity) in INTRINSICS:
                diags.append(Diagnostic("extern %s/%d collides with an intrinsic"
                                        % key, fname, *decl.pos))
                continue
            new = ExternEntry(sig.lib_name, decl.c_name, decl.lp_name, arity, regcl)
            prev = symtab.get(key)
            if prev is not None:
                if prev.kind == KIND_EXTERN and extern_table[prev.extern_index] == new:
                    continue  # same declaration accumulated twice
                diags.append(Diagnostic("conflicting declarations for %s/%d" % key,
                                        fname, *decl.pos))
                continue
            symtab[key] = SymbolTableEntry(decl.lp_name, arity, decl.type, KIND_EXTERN,
                                           extern_index=len(extern_table), regcl=regcl)
            extern_table.append(new)

    for mod_name in m.accumulates:
        am = (accum_modules or {}).get(mod_name)
        if am is None:
            diags.append(Diagnostic("cannot resolve accumulate %r: module source not found"
                                    % mod_name, fname))
            continue
        decls = {}
        for name, ty, _pos in am.local_sig:
            decls[(name, len(fe.type_domains(ty)))] = ty
        for cl in am.clauses:
            decls.setdefault((cl.head_name, len(cl.head_args)), None)
        for key, ty in decls.items():
            prev = symtab.get(key)
            if prev is not None and prev.kind == KIND_EXTERN:
                diags.append(Diagnostic(
                    "predicate %s/%d comes from both module %r and an extern signature"
                    % (key[0], key[1], mod_name), fname))
                continue
            if prev is None:
                symtab[key] = SymbolTableEntry(key[0], key[1], ty, KIND_ACCUMULATED)

    for name, ty, pos in m.local_sig:
        arity = len(fe.type_domains(ty))
        key = (name, arity)
        prev = symtab.get(key)
        if prev is not None and prev.kind == KIND_EXTERN:
            diags.append(Diagnostic("local declaration of extern predicate %s/%d" % key,
                                    fname, *pos))
            continue
        if key in INTRINSICS:
            diags.append(Diagnostic("cannot redeclare intrinsic %s/%d" % key, fname, *pos))
            continue
        symtab[key] = SymbolTableEntry(name, arity, ty, KIND_LOCAL)

    for cl in m.clauses:
        key = (cl.head_name, len(cl.head_args))
        prev = symtab.get(key)
        if key in INTRINSICS:
            diags.append(Diagnostic("redefinition of intrinsic predicate %s/%d" % key,
                                    fname, *cl.pos))
        elif prev is not None and prev.kind == KIND_EXTERN:
            diags.append(Diagnostic("redefinition of extern predicate %s/%d" % key,
                                    fname, *cl.pos))
        elif prev is not None and prev.kind == KIND_ACCUMULATED:
            diags.append(Diagnostic(
                "predicate %s/%d is already defined in an accumulated module" % key,
                fname, *cl.pos))
        elif prev is None:
            symtab[key] = SymbolTableEntry(key[0], key[1], None, KIND_LOCAL)
        else:
            pass  # more clauses for a known local predicate

    for key, iid in INTRINSICS.items():
        symtab.setdefault(key, SymbolTableEntry(key[0], key[1], None, KIND_INTRINSIC,
                                                intrinsic_id=iid))
    return symtab, extern_table, diags


# --------------------------------------------------------------------------
# Clause code generation


class _RegAllocator:
    def __init__(self, filename, pos):
        self.filename = filename
        self.pos = pos
        self.high = 0

    def fresh_high(self, floor: int) -> int:
        self.high = max(self.high, floor) + 1
        if self.high > MAX_REGISTERS:
            raise CompileError(Diagnostic(
                "clause needs more than %d argument registers" % MAX_REGISTERS,
                self.filename, *self.pos))
        return self.high


def compile_clause(clause: fe.Clause, symtab: dict, builder: ImageBuilder,
                   conservative: bool, filename: str) -> list:
    cv = _ClauseVars()
    code = []
    body = clause.body
    arity = len(clause.head_args)
    if arity > MAX_REGISTERS:
        raise CompileError(Diagnostic("head arity exceeds %d registers" % MAX_REGISTERS,
                                      filename, *clause.pos))

    live_after = []  # index j (0-based over body): vars used in goals after j
    acc = set()
    for g in reversed(body):
        live_after.append(set(acc))
        acc |= goal_vars(g)
    live_after.reverse()

    avail: dict[str, int] = {}     # variable -> register currently holding it
    env_saved: dict[str, int] = {} # variable -> env save slot
    n_saves = 0

    for i, arg in enumerate(clause.head_args, 1):
        t = builder.template(_build_template(builder, arg, cv))
        code.append(Instruction(Op.GET_TEMPLATE, t, i))
        if isinstance(arg, fe.PVar) and arg.name != "_":
            avail.setdefault(arg.name, i)

    for j, goal in enumerate(body):
        last = j == len(body) - 1
        entry = symtab[(goal.name, len(goal.args))]
        m_arity = len(goal.args)
        clobbering = conservative or not (entry.kind == KIND_EXTERN and not entry.regcl)
        regs = _RegAllocator(filename, goal.pos)
        regs.high = max([m_arity] + list(avail.values()))

        # park low-register values that must survive target writes or the call
        needed_source = {a.name for a in goal.args
                         if isinstance(a, fe.PVar) and a.name in avail}
        for var in sorted(avail, key=lambda v: avail[v]):
            r = avail[var]
            if r <= m_arity and (var in live_after[j] or var in needed_source):
                h = regs.fresh_high(m_arity)
                code.append(Instruction(Op.MOVE_REG, r, h))
                avail[var] = h

        # fill argument registers
        for p, arg in enumerate(goal.args, 1):
            if isinstance(arg, fe.PVar) and arg.name != "_":
                if arg.name in avail:
                    if avail[arg.name] != p:
                        code.append(Instruction(Op.MOVE_REG, avail[arg.name], p))
                    continue
                if arg.name in env_saved:
                    code.append(Instruction(Op.LOAD_ENV, env_saved[arg.name], p))
                    avail[arg.name] = p
                    continue
            t = builder.template(_build_template(builder, arg, cv))
            code.append(Instruction(Op.PUT_TEMPLATE, t, p))
            if isinstance(arg, fe.PVar) and arg.name != "_":
                avail[arg.name] = p

        # values live past a clobbering call must reside in the environment
        if clobbering and not last:
            for var in sorted(live_after[j] & set(avail), key=lambda v: avail[v]):
                if var not in env_saved:
                    code.append(Instruction(Op.STORE_ENV, avail[var], n_saves))
                    env_saved[var] = n_saves
                    n_saves += 1
            avail.clear()

        if entry.kind == KIND_EXTERN:
            if last:
                code.append(Instruction(Op.DEALLOCATE))
                code.append(Instruction(Op.EXECUTE_EXTERN, entry.extern_index))
            else:
                code.append(Instruction(Op.CALL_EXTERN, entry.extern_index))
        elif entry.kind == KIND_INTRINSIC:
            code.append(Instruction(Op.INTRINSIC, int(entry.intrinsic_id)))
            if last:
                code.append(Instruction(Op.DEALLOCATE))
                code.append(Instruction(Op.PROCEED))
        else:
            name_const = builder.const("sym", goal.name)
            if last:
                code.append(Instruction(Op.DEALLOCATE))
                code.append(Instruction(Op.EXECUTE, name_const, m_arity))
            else:
                code.append(Instruction(Op.CALL, name_const, m_arity))

    if not body:
        code.append(Instruction(Op.DEALLOCATE))
        code.append(Instruction(Op.PROCEED))

    return [Instruction(Op.ALLOCATE, n_saves)] + code


# --------------------------------------------------------------------------
# Module compilation


def compile_module(m: fe.ModuleAst, sigs: dict, accum_modules=None,
                   conservative_regs: bool = False) -> BytecodeImage:
    symtab, extern_table, diags = build_symbol_table(m, sigs, accum_modules)
    fname = m.source_file

    # type/arity checking of every call site
    for cl in m.clauses:
        var_types: dict[str, str] = {}
        head_key = (cl.head_name, len(cl.head_args))
        head_entry = symtab.get(head_key)
        if head_entry is not None and head_entry.type is not None:
            doms = fe.type_domains(head_entry.type)
            for arg, dom in zip(cl.head_args, doms):
                if (isinstance(arg, fe.PVar) and arg.name != "_"
                        and isinstance(dom, fe.BaseType)
                        and dom.name in ("int", "real", "string")):
                    var_types.setdefault(arg.name, dom.name)
        for g in cl.body:
            entry = symtab.get((g.name, len(g.args)))
            if entry is None:
                declared = [k for k in symtab if k[0] == g.name]
                if declared:
                    entry = symtab[declared[0]]
                    diags += check_call(g, entry, var_types, fname)
                else:
                    diags.append(Diagnostic("undeclared predicate %s/%d"
                                            % (g.name, len(g.args)), fname, *g.pos))
                continue
            diags += check_call(g, entry, var_types, fname)

    if diags:
        raise CompileError(diags)

    builder = ImageBuilder()
    builder.extern_table = extern_table

    groups: dict[tuple, list] = {}
    for cl in m.clauses:
        groups.setdefault((cl.head_name, len(cl.head_args)), []).append(cl)

    for (name, arity), clauses in groups.items():
        blocks = [compile_clause(cl, symtab, builder, conservative_regs, fname)
                  for cl in clauses]
        base = len(builder.code)
        builder.predicate_table.append(PredEntry(name, arity, base))
        if len(blocks) == 1:
            builder.code.extend(blocks[0])
            continue
        starts = []
        pos = base
        for blk in blocks:
            starts.append(pos)
            pos += 1 + len(blk)  # one chain instruction before each block
        for i, blk in enumerate(blocks):
            if i == 0:
                builder.code.append(Instruction(Op.TRY_ME_ELSE, starts[1], arity))
            elif i < len(blocks) - 1:
                builder.code.append(Instruction(Op.RETRY_ME_ELSE, starts[i + 1]))
            else:
                builder.code.append(Instruction(Op.TRUST_ME))
            builder.code.extend(blk)

    return builder.image()


# --------------------------------------------------------------------------
# Query compilation (used by the runner)


def compile_query(goals: list, extern_index: dict, known_arities: dict,
                  filename: str = "<query>"):
    """Compile a goal conjunction into a standalone code fragment.

    `extern_index` maps (pred, arity) -> extern/handle index for the loaded
    program; `known_arities` maps predicate names to their known arities (for
    arity diagnostics on extern/intrinsic calls).  Returns (builder, qvars)
    where qvars maps query variable name -> clause slot, in appearance order.
    """
    builder = ImageBuilder()
    cv = _ClauseVars()
    builder.code.append(Instruction(Op.ALLOCATE, 0))
    for goal in goals:
        key = (goal.name, len(goal.args))
        for p, arg in enumerate(goal.args, 1):
            if p > MAX_REGISTERS:
                raise CompileError(Diagnostic("query goal arity exceeds %d"
                                              % MAX_REGISTERS, filename, *goal.pos))
            t = builder.template(_build_template(builder, arg, cv))
            builder.code.append(Instruction(Op.PUT_TEMPLATE, t, p))
        if key in INTRINSICS:
            builder.code.append(Instruction(Op.INTRINSIC, int(INTRINSICS[key])))
        elif key in extern_index:
            builder.code.append(Instruction(Op.CALL_EXTERN, extern_index[key]))
        elif goal.name in known_arities and key[1] not in known_arities[goal.name]:
            raise CompileError(Diagnostic(
                "predicate %s expects %s arguments, got %d"
                % (goal.name, "/".join(map(str, sorted(known_arities[goal.name]))),
                   len(goal.args)), filename, *goal.pos))
        else:
            builder.code.append(Instruction(Op.CALL, builder.const("sym", goal.name),
                                            len(goal.args)))
    builder.code.append(Instruction(Op.HALT))
    return builder, dict(cv.slots)
