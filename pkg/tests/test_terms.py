import pytest

from mlptk.terms import (Atom, Cmp, Int, Real, Str, Trail, TrailError, Var,
                         bind, deref, format_term, occurs, resolve_copy,
                         struct_eq, unify)


def test_deref_follows_chains():
    a, b = Var("A"), Var("B")
    t = Trail()
    bind(a, b, t)
    bind(b, Int(7), t)
    assert deref(a) is deref(b)
    assert deref(a).val == 7


def test_unify_var_with_term_and_undo():
    x = Var("X")
    t = Trail()
    mark = t.mark()
    assert unify(x, Cmp("f", (Int(1), Atom("a"))), t)
    assert format_term(x) == "f(1, a)"
    t.undo(mark)
    assert deref(x) is x


def test_unify_compound_mismatch_undoes_partial_bindings():
    x, y = Var("X"), Var("Y")
    t = Trail()
    a = Cmp("f", (x, Int(1)))
    b = Cmp("f", (Int(9), Int(2)))
    assert not unify(a, b, t)
    assert deref(x) is x, "partial binding must be rolled back"
    assert not t.entries
    assert deref(y) is y


def test_int_real_never_unify():
    t = Trail()
    assert not unify(Int(1), Real(1.0), t)
    assert unify(Real(2.5), Real(2.5), t)
    assert not unify(Real(2.5), Real(2.6), t)


def test_string_content_equality():
    t = Trail()
    assert unify(Str("abc"), Str("abc"), t)
    assert not unify(Str("abc"), Str("abd"), t)


def test_occurs_check_rejects_cyclic_binding():
    x = Var("X")
    t = Trail()
    assert occurs(x, Cmp("f", (x,)))
    assert not unify(x, Cmp("f", (x,)), t)
    assert deref(x) is x


def test_trail_stale_mark_raises():
    t = Trail()
    v = Var()
    bind(v, Int(1), t)
    mark = t.mark()
    t.undo(0)
    with pytest.raises(TrailError):
        t.undo(mark)


def test_resolve_copy_snapshots_and_shares_unbound():
    x, y = Var("X"), Var("Y")
    t = Trail()
    term = Cmp("f", (x, x, y))
    bind(x, Int(3), t)
    snap = resolve_copy(term)
    t.undo(0)
    assert format_term(snap) == "f(3, 3, Y)"
    assert snap.args[2] is y, "unbound variables stay shared"


def test_struct_eq():
    assert struct_eq(Cmp("f", (Int(1),)), Cmp("f", (Int(1),)))
    assert not struct_eq(Cmp("f", (Int(1),)), Cmp("f", (Real(1.0),)))
    assert not struct_eq(Atom("a"), Atom("b"))
