"""The simulator interface exposed to extern-predicate code.

A plugin (in-process or native) interacts with the running machine only
through this fixed call table: typed getters that read argument
registers, return functions that unify a freshly built term with an
argument register, and fail().  The table is valid only during an
extern invocation on the invoking machine's thread; one invocation runs
at a time per process (plugins are assumed non-reentrant).

Ordering rule: once the failure flag is set (by fail(), a failed
return_* unification, or a type fault), the remaining host calls in the
same invocation are inert no-ops returning zero values.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

from .terms import Atom, Cmp, Int, Real, Str, Term, Var, bind, deref, unify

API_VERSION = 1
MAX_REGISTERS = 64


class HostApiError(Exception):
    pass


@dataclass(frozen=True)
class HostFault:
    pred_name: str
    register: int
    message: str

    def __str__(self):
        return "host API fault in %s (register A%d): %s" % (
            self.pred_name, self.register, self.message)


class HostApi:
    """Marshalling interface bound to one machine for one invocation."""

    api_version = API_VERSION

    def __init__(self, machine, pred_name: str, arity: int):
        self._machine = machine
        self._pred_name = pred_name
        self._arity = arity

    # -- plumbing ---------------------------------------------------------

    def _fault(self, register: int, message: str):
        m = self._machine
        m.host_faults.append(HostFault(self._pred_name, register, message))
        m.failure_flag = True

    def _inert(self) -> bool:
        return self._machine.failure_flag

    def _reg_term(self, i: int):
        if not isinstance(i, int) or not 1 <= i <= MAX_REGISTERS:
            self._fault(i if isinstance(i, int) else 0,
                        "register index %r out of range" % (i,))
            return None
        t = self._machine.regs[i - 1]
        if t is None:
            self._fault(i, "argument register A%d is empty" % i)
            return None
        return deref(t)

    def _get(self, i: int, want, what: str):
        if self._inert():
            return None
        t = self._reg_term(i)
        if t is None:
            return None
        if not isinstance(t, want):
            found = "unbound variable" if isinstance(t, Var) else type(t).__name__
            self._fault(i, "type fault: expected %s, register holds %s" % (what, found))
            return None
        return t

    def _return(self, i: int, term: Term):
        if self._inert():
            return
        t = self._reg_term(i)
        if t is None:
            return
        if not unify(self._machine.regs[i - 1], term, self._machine.trail):
            self._machine.failure_flag = True

    # -- v1 surface ---------------------------------------------------------

    def get_int(self, i: int) -> int:
        t = self._get(i, Int, "int")
        return 0 if t is None else t.val

    def get_real(self, i: int) -> float:
        t = self._get(i, Real, "real")
        return 0.0 if t is None else t.val

    def get_string_len(self, i: int) -> int:
        t = self._get(i, Str, "string")
        return 0 if t is None else len(t.val.encode("utf-8"))

    def get_string(self, i: int) -> bytes:
        t = self._get(i, Str, "string")
        return b"" if t is None else t.val.encode("utf-8")

    def return_int(self, i: int, v: int) -> None:
        self._return(i, Int(int(v)))

    def return_real(self, i: int, v: float) -> None:
        self._return(i, Real(float(v)))

    def return_string(self, i: int, data) -> None:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        self._return(i, Str(data))

    def fail(self) -> None:
        self._machine.failure_flag = True

    # -- v2 extension slots (compound-term marshalling, see stubgen) --------

    def get_ctor_arg_int(self, i: int, k: int) -> int:
        if self._inert():
            return 0
        t = self._reg_term(i)
        if t is None:
            return 0
        if not isinstance(t, Cmp) or not 0 <= k < len(t.args):
            self._fault(i, "type fault: expected compound with argument %d" % k)
            return 0
        arg = deref(t.args[k])
        if not isinstance(arg, Int):
            self._fault(i, "type fault: constructor argument %d is not int" % k)
            return 0
        return arg.val

    def return_ctor(self, i: int, ctor: str, arity: int) -> None:
        if self._inert():
            return
        self._return(i, Cmp(ctor, tuple(Var() for _ in range(arity))))

    def set_ctor_arg_int(self, i: int, k: int, v: int) -> None:
        if self._inert():
            return
        t = self._reg_term(i)
        if t is None:
            return
        if not isinstance(t, Cmp) or not 0 <= k < len(t.args):
            self._fault(i, "type fault: expected compound with argument %d" % k)
            return
        if not unify(t.args[k], Int(int(v)), self._machine.trail):
            self._machine.failure_flag = True


# --------------------------------------------------------------------------
# Invocation context.  Extern invocations are serialized per process; the
# current api is visible only between entry and return of the wrapper.

_exec_lock = threading.Lock()
_current: HostApi | None = None


def current_api() -> HostApi:
    if _current is None:
        raise HostApiError("host API called outside an extern invocation")
    return _current


@contextmanager
def invocation(machine, pred_name: str, arity: int):
    global _current
    with _exec_lock:
        api = HostApi(machine, pred_name, arity)
        _current = api
        try:
            yield api
        finally:
            _current = None
