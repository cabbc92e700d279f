"""The abstract machine.

A register machine over tagged terms: 64 argument registers, a binding
trail, environment frames (created by allocate, dropped by deallocate),
and a choice-point stack driving backtracking.  The final call of a
clause body runs through the execute forms with the frame already
deallocated, so deterministic tail recursion runs in constant
environment depth.

Extern calls go through resolved handles (loader.ResolvedHandle); the
handle is invoked with the host API bound, then the machine's failure
flag decides between continuing and backtracking.  Intrinsics (solve,
not, eval, comparisons) are interpreted in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import hostapi
from .bytecode import MAX_REGISTERS, Instruction, Intrinsic, Op, shift_template
from .compiler import INTRINSICS, compile_query
from .loader import LoadedProgram, const_to_term
from .terms import (Atom, Cmp, Int, Real, Term, Var, deref, format_term,
                    resolve_copy, unify)


class MachineError(Exception):
    """Unrecoverable execution error (not a logical failure)."""


class BudgetExhausted(MachineError):
    def __init__(self, steps):
        self.steps = steps
        super().__init__("step budget exhausted after %d instructions" % steps)


class Frame:
    """Environment frame: continuation, save slots, clause-local variables."""

    __slots__ = ("prev", "saved_cp", "saves", "vars", "depth")

    def __init__(self, prev, saved_cp, n_saves):
        self.prev = prev
        self.saved_cp = saved_cp
        self.saves = [None] * n_saves
        self.vars = {}  # template slot -> Var, per activation
        self.depth = 1 if prev is None else prev.depth + 1


class ChoicePoint:
    __slots__ = ("regs", "env", "cp", "mark", "alt")

    def __init__(self, regs, env, cp, mark, alt):
        self.regs = regs
        self.env = env
        self.cp = cp
        self.mark = mark
        self.alt = alt


_COMPARES = {
    int(Intrinsic.LT): lambda a, b: a < b,
    int(Intrinsic.GT): lambda a, b: a > b,
    int(Intrinsic.LE): lambda a, b: a <= b,
    int(Intrinsic.GE): lambda a, b: a >= b,
    int(Intrinsic.EQ_NUM): lambda a, b: a == b,
}

_ARITH_OPS = ("+", "-", "*", "/")


def eval_arith(t: Term) -> Term:
    """Evaluate an arithmetic expression term to Int or Real.

    Mixed int/real operands promote to real; int division truncates
    toward zero; division by zero is an evaluation error."""
    t = deref(t)
    if isinstance(t, (Int, Real)):
        return t
    if isinstance(t, Var):
        raise MachineError("arithmetic: unbound variable in expression")
    if isinstance(t, Cmp) and t.functor in _ARITH_OPS and len(t.args) == 2:
        a = eval_arith(t.args[0])
        b = eval_arith(t.args[1])
        op = t.functor
        if isinstance(a, Int) and isinstance(b, Int):
            if op == "+":
                return Int(a.val + b.val)
            if op == "-":
                return Int(a.val - b.val)
            if op == "*":
                return Int(a.val * b.val)
            if b.val == 0:
                raise MachineError("arithmetic: integer division by zero")
            q = abs(a.val) // abs(b.val)
            return Int(q if (a.val >= 0) == (b.val >= 0) else -q)
        x, y = float(a.val), float(b.val)
        if op == "+":
            return Real(x + y)
        if op == "-":
            return Real(x - y)
        if op == "*":
            return Real(x * y)
        if y == 0.0:
            raise MachineError("arithmetic: division by zero")
        return Real(x / y)
    raise MachineError("arithmetic: %s is not an arithmetic expression"
                       % format_term(t))


class Machine:
    """One query execution over a loaded program.

    Create a fresh Machine per query: set_query appends the compiled
    query fragment to a private copy of the program's pools.
    """

    def __init__(self, prog: LoadedProgram, max_steps: int | None = None):
        self.prog = prog
        self.const_pool = list(prog.const_pool)
        self.const_terms = list(prog.const_terms)
        self.templates = list(prog.template_pool)
        self.code = list(prog.code)
        self.pred_index = prog.predicate_index
        self.extern_index = prog.extern_index
        self.handles = prog.handles

        # landing pad for continuations of top-level and sub-proof goals
        self.sub_halt = len(self.code)
        self.code.append(Instruction(Op.HALT))

        self.regs: list = [None] * MAX_REGISTERS
        from .terms import Trail
        self.trail = Trail()
        self.env: Frame | None = None
        self.choices: list[ChoicePoint] = []
        self.cp = self.sub_halt
        self.pc = self.sub_halt

        self.failure_flag = False
        self.host_faults: list = []
        self.steps = 0
        self.max_steps = max_steps
        self.max_env_depth = 0
        self.extern_invocations = 0

        self.qvars: dict[str, int] = {}
        self.query_frame: Frame | None = None
        self._capture_frame = False
        self._query_set = False

    # -- query setup --------------------------------------------------------

    def set_query(self, goals) -> None:
        if self._query_set:
            raise MachineError("machine already holds a query; use a fresh one")
        self._query_set = True
        builder, qvars = compile_query(goals, self.extern_index,
                                       self.prog.known_arities)
        coff = len(self.const_pool)
        toff = len(self.templates)
        base = len(self.code)
        self.const_pool.extend(builder.const_pool)
        self.const_terms.extend(const_to_term(c) for c in builder.const_pool)
        self.templates.extend(shift_template(t, coff)
                              for t in builder.template_pool)
        for ins in builder.code:
            if ins.op == Op.PUT_TEMPLATE:
                ins = Instruction(ins.op, ins.a + toff, ins.b)
            elif ins.op == Op.CALL:
                ins = Instruction(ins.op, ins.a + coff, ins.b)
            self.code.append(ins)
        self.qvars = qvars
        self.pc = base
        self.cp = self.sub_halt
        self._capture_frame = True

    # -- helpers -------------------------------------------------------------

    def _instantiate(self, t, frame: Frame):
        kind = type(t).__name__
        if kind == "TSlot":
            v = frame.vars.get(t.slot)
            if v is None:
                v = Var()
                frame.vars[t.slot] = v
            return v
        if kind == "TConst":
            return self.const_terms[t.const]
        return Cmp(self.const_pool[t.functor_const][1],
                   tuple(self._instantiate(a, frame) for a in t.args))

    def _backtrack(self) -> bool:
        if not self.choices:
            return False
        c = self.choices[-1]
        self.trail.undo(c.mark)
        self.regs[:len(c.regs)] = c.regs
        self.env = c.env
        self.cp = c.cp
        self.pc = c.alt
        self.failure_flag = False
        return True

    def _invoke_extern(self, idx: int) -> bool:
        h = self.handles[idx]
        self.extern_invocations += 1
        with hostapi.invocation(self, h.pred_name, h.arity):
            try:
                h.fn()
            except MachineError:
                raise
            except Exception as exc:
                raise MachineError(
                    "extern %s/%d (%s:%s) raised %s: %s"
                    % (h.pred_name, h.arity, h.lib_name, h.entry_symbol,
                       type(exc).__name__, exc))
        if self.failure_flag:
            self.failure_flag = False
            return False
        return True

    def _goal_term(self, t, what: str):
        t = deref(t)
        if isinstance(t, Atom):
            return t.sym, ()
        if isinstance(t, Cmp):
            return t.functor, t.args
        raise MachineError("%s: goal %s is not callable" % (what, format_term(t)))

    def _prove(self, name: str, args) -> bool:
        """Run a self-contained sub-proof; all bindings are undone."""
        saved = (self.regs, self.env, self.cp, self.pc,
                 self.choices, self.failure_flag)
        mark = self.trail.mark()
        self.regs = [None] * MAX_REGISTERS
        for i, a in enumerate(args):
            self.regs[i] = a
        self.env = None
        self.choices = []
        self.cp = self.sub_halt
        self.pc = self.sub_halt
        try:
            key = (name, len(args))
            if key in self.pred_index:
                self.pc = self.pred_index[key]
                ok = self._run() == "halt"
            elif key in self.extern_index:
                ok = self._invoke_extern(self.extern_index[key])
            elif key in INTRINSICS:
                ok = self._intrinsic(int(INTRINSICS[key])) is None
                if ok and self.pc != self.sub_halt:
                    ok = self._run() == "halt"
            else:
                ok = False
        finally:
            self.trail.undo(mark)
            (self.regs, self.env, self.cp, self.pc,
             self.choices, self.failure_flag) = saved
        return ok

    def _intrinsic(self, iid: int):
        """Returns None to continue at pc, or "backtrack"."""
        if iid == Intrinsic.EVAL:
            v = eval_arith(self.regs[0])
            return None if unify(self.regs[1], v, self.trail) else "backtrack"
        cmpf = _COMPARES.get(iid)
        if cmpf is not None:
            a = eval_arith(self.regs[0])
            b = eval_arith(self.regs[1])
            return None if cmpf(a.val, b.val) else "backtrack"
        if iid == Intrinsic.SOLVE:
            name, args = self._goal_term(self.regs[0], "solve")
            key = (name, len(args))
            for i, a in enumerate(args):
                self.regs[i] = a
            if key in self.pred_index:
                self.cp = self.pc
                self.pc = self.pred_index[key]
                return None
            if key in self.extern_index:
                return None if self._invoke_extern(self.extern_index[key]) \
                    else "backtrack"
            if key in INTRINSICS:
                return self._intrinsic(int(INTRINSICS[key]))
            return "backtrack"
        if iid == Intrinsic.NOT:
            name, args = self._goal_term(self.regs[0], "not")
            return "backtrack" if self._prove(name, args) else None
        raise MachineError("unknown intrinsic id %d" % iid)

    # -- the dispatch loop ---------------------------------------------------

    def _run(self) -> str:
        """Run until halt or exhaustion of alternatives."""
        code = self.code
        regs = self.regs
        while True:
            self.steps += 1
            if self.max_steps is not None and self.steps > self.max_steps:
                raise BudgetExhausted(self.steps)
            ins = code[self.pc]
            self.pc += 1
            op = ins.op

            if op == Op.PUT_TEMPLATE:
                regs[ins.b - 1] = self._instantiate(self.templates[ins.a], self.env)
            elif op == Op.GET_TEMPLATE:
                cell = regs[ins.b - 1]
                if cell is None:
                    raise MachineError("argument register A%d is empty" % ins.b)
                t = self._instantiate(self.templates[ins.a], self.env)
                if not unify(cell, t, self.trail):
                    if not self._backtrack():
                        return "fail"
            elif op == Op.ALLOCATE:
                frame = Frame(self.env, self.cp, ins.a)
                self.env = frame
                if frame.depth > self.max_env_depth:
                    self.max_env_depth = frame.depth
                if self._capture_frame:
                    self.query_frame = frame
                    self._capture_frame = False
            elif op == Op.DEALLOCATE:
                self.cp = self.env.saved_cp
                self.env = self.env.prev
            elif op == Op.CALL:
                target = self.pred_index.get((self.const_pool[ins.a][1], ins.b))
                if target is None:
                    if not self._backtrack():
                        return "fail"
                else:
                    self.cp = self.pc
                    self.pc = target
            elif op == Op.EXECUTE:
                target = self.pred_index.get((self.const_pool[ins.a][1], ins.b))
                if target is None:
                    if not self._backtrack():
                        return "fail"
                else:
                    self.pc = target
            elif op == Op.PROCEED:
                self.pc = self.cp
            elif op == Op.TRY_ME_ELSE:
                self.choices.append(ChoicePoint(
                    tuple(regs[:ins.b]), self.env, self.cp,
                    self.trail.mark(), ins.a))
            elif op == Op.RETRY_ME_ELSE:
                self.choices[-1].alt = ins.a
            elif op == Op.TRUST_ME:
                self.choices.pop()
            elif op == Op.FAIL:
                if not self._backtrack():
                    return "fail"
            elif op == Op.MOVE_REG:
                regs[ins.b - 1] = regs[ins.a - 1]
            elif op == Op.STORE_ENV:
                self.env.saves[ins.b] = regs[ins.a - 1]
            elif op == Op.LOAD_ENV:
                regs[ins.b - 1] = self.env.saves[ins.a]
            elif op == Op.CALL_EXTERN:
                if not self._invoke_extern(ins.a):
                    if not self._backtrack():
                        return "fail"
            elif op == Op.EXECUTE_EXTERN:
                if self._invoke_extern(ins.a):
                    self.pc = self.cp
                elif not self._backtrack():
                    return "fail"
            elif op == Op.INTRINSIC:
                if self._intrinsic(ins.a) == "backtrack":
                    if not self._backtrack():
                        return "fail"
            elif op == Op.HALT:
                return "halt"
            else:
                raise MachineError("cannot execute opcode %r" % op)

            if regs is not self.regs:
                regs = self.regs  # _prove swapped register banks and back

    # -- answers -------------------------------------------------------------

    def _answer(self) -> dict:
        frame = self.query_frame
        out = {}
        for name, slot in self.qvars.items():
            cell = None if frame is None else frame.vars.get(slot)
            if cell is None:
                out[name] = Var(name)
                continue
            t = deref(cell)
            if isinstance(t, Var) and t.name.startswith("_G"):
                t.name = name  # report unbound query vars under their own name
            out[name] = resolve_copy(cell)
        return out

    def solve(self, goals):
        """Yield one binding dict per solution; resumes on demand."""
        self.set_query(goals)
        status = self._run()
        while status == "halt":
            yield self._answer()
            if not self._backtrack():
                return
            status = self._run()


def snapshot_registers(machine: Machine, n: int) -> tuple:
    """Identity snapshot of the first n argument register cells."""
    return tuple(machine.regs[:n])


@dataclass
class Outcome:
    kind: str                     # "success" | "failure" | "budget"
    answers: list = field(default_factory=list)
    machine: Machine | None = None


def run(prog: LoadedProgram, goals, max_steps: int | None = None,
        max_answers: int | None = 1) -> Outcome:
    """Convenience facade: run a query, collect up to max_answers answers
    (None collects all)."""
    m = Machine(prog, max_steps=max_steps)
    answers = []
    try:
        for ans in m.solve(goals):
            answers.append(ans)
            if max_answers is not None and len(answers) >= max_answers:
                break
    except BudgetExhausted:
        return Outcome("budget", answers, m)
    return Outcome("success" if answers else "failure", answers, m)


def format_answer(ans: dict) -> str:
    if not ans:
        return "yes"
    return "\n".join("%s = %s" % (k, format_term(v)) for k, v in ans.items())
