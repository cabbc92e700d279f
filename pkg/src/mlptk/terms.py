"""First-order terms, binding, trailing, and unification.

Every other part of the system manipulates these values: the compiler
builds templates shaped like them, the VM instantiates and unifies them,
and the host API marshals them across the plugin boundary.
"""

from __future__ import annotations

import sys


class Term:
    __slots__ = ()


class Var(Term):
    """A logic variable cell.  `ref` is None while unbound."""

    __slots__ = ("ref", "name")
    _counter = 0

    def __init__(self, name: str | None = None):
        self.ref: Term | None = None
        if name is None:
            Var._counter += 1
            name = "_G%d" % Var._counter
        self.name = name

    def __repr__(self):
        return "Var(%s)" % self.name


class Int(Term):
    __slots__ = ("val",)

    def __init__(self, val: int):
        self.val = val

    def __repr__(self):
        return "Int(%d)" % self.val


class Real(Term):
    __slots__ = ("val",)

    def __init__(self, val: float):
        self.val = val

    def __repr__(self):
        return "Real(%r)" % self.val


class Str(Term):
    """Immutable UTF-8 string; equality is content equality."""

    __slots__ = ("val",)

    def __init__(self, val: str):
        self.val = val

    def __repr__(self):
        return "Str(%r)" % self.val


class Atom(Term):
    __slots__ = ("sym",)

    def __init__(self, sym: str):
        self.sym = sys.intern(sym)

    def __repr__(self):
        return "Atom(%s)" % self.sym


class Cmp(Term):
    """Compound term: functor applied to one or more arguments."""

    __slots__ = ("functor", "args")

    def __init__(self, functor: str, args: tuple):
        assert len(args) >= 1, "zero-arity compounds are atoms"
        self.functor = sys.intern(functor)
        self.args = tuple(args)

    def __repr__(self):
        return "Cmp(%s/%d)" % (self.functor, len(self.args))


class TrailError(Exception):
    """Misuse of trail marks (undoing past an already-undone mark)."""


class Trail:
    """Log of variable cells bound since a mark, for backtracking."""

    __slots__ = ("entries",)

    def __init__(self):
        self.entries: list[Var] = []

    def mark(self) -> int:
        return len(self.entries)

    def record(self, v: Var) -> None:
        self.entries.append(v)

    def undo(self, mark: int) -> None:
        entries = self.entries
        if mark > len(entries):
            raise TrailError("stale trail mark %d (trail length %d)" % (mark, len(entries)))
        while len(entries) > mark:
            entries.pop().ref = None


def deref(t: Term) -> Term:
    """Follow the binding chain; result is a non-VAR term or an unbound Var."""
    while type(t) is Var:
        if t.ref is None:
            return t
        t = t.ref
    return t


def bind(v: Var, t: Term, trail: Trail) -> None:
    v.ref = t
    trail.record(v)


def occurs(v: Var, t: Term) -> bool:
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if x is v:
            return True
        if type(x) is Cmp:
            stack.extend(x.args)
    return False


def unify(a: Term, b: Term, trail: Trail) -> bool:
    """Unify with occurs check.  On failure all bindings made during the
    attempt are already undone."""
    mark = trail.mark()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = deref(x)
        y = deref(y)
        if x is y:
            continue
        tx, ty = type(x), type(y)
        if tx is Var:
            if occurs(x, y):
                trail.undo(mark)
                return False
            bind(x, y, trail)
        elif ty is Var:
            if occurs(y, x):
                trail.undo(mark)
                return False
            bind(y, x, trail)
        elif tx is not ty:
            trail.undo(mark)
            return False
        elif tx is Int or tx is Real:
            # INT and REAL never unify with each other; same-type by value.
            if x.val != y.val:
                trail.undo(mark)
                return False
        elif tx is Str:
            if x.val != y.val:
                trail.undo(mark)
                return False
        elif tx is Atom:
            if x.sym != y.sym:
                trail.undo(mark)
                return False
        else:  # Cmp
            if x.functor != y.functor or len(x.args) != len(y.args):
                trail.undo(mark)
                return False
            stack.extend(zip(x.args, y.args))
    return True


def resolve_copy(t: Term) -> Term:
    """Snapshot a term through its current bindings.

    Unbound variables are kept as-is (shared), so structural identity of
    repeated variables survives the copy.
    """
    t = deref(t)
    if type(t) is Cmp:
        return Cmp(t.functor, tuple(resolve_copy(a) for a in t.args))
    return t


def struct_eq(a: Term, b: Term) -> bool:
    """Structural equality through bindings; unbound vars only equal themselves."""
    a = deref(a)
    b = deref(b)
    if a is b:
        return True
    ta, tb = type(a), type(b)
    if ta is not tb:
        return False
    if ta is Var:
        return False
    if ta is Int or ta is Real:
        return a.val == b.val and type(a.val) is type(b.val)
    if ta is Str:
        return a.val == b.val
    if ta is Atom:
        return a.sym == b.sym
    return (a.functor == b.functor and len(a.args) == len(b.args)
            and all(struct_eq(x, y) for x, y in zip(a.args, b.args)))


def format_term(t: Term) -> str:
    t = deref(t)
    tt = type(t)
    if tt is Var:
        return t.name
    if tt is Int:
        return str(t.val)
    if tt is Real:
        return repr(t.val)
    if tt is Str:
        return '"%s"' % t.val.replace("\\", "\\\\").replace('"', '\\"')
    if tt is Atom:
        return t.sym
    return "%s(%s)" % (t.functor, ", ".join(format_term(a) for a in t.args))
