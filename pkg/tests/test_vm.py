import math

import pytest

from mlptk import frontend, vm
from mlptk.terms import Int, Real
from mlptk.vm import BudgetExhausted, Machine, MachineError, eval_arith

from conftest import answers, load_text


def test_facts_and_backtracking_order():
    prog = load_text("p(1).\np(2).\np(3).")
    assert answers(prog, "p(X)") == ["X = 1", "X = 2", "X = 3"]


def test_conjunction_and_shared_variables():
    prog = load_text("p(1).\np(2).\nq(2).\nq(3).")
    assert answers(prog, "p(X), q(X)") == ["X = 2"]


def test_compound_unification_in_heads():
    prog = load_text("first(pair(X, _), X).")
    assert answers(prog, "first(pair(a, b), R)") == ["R = a"]
    assert answers(prog, "first(nope, R)") == []


def test_recursive_predicate():
    prog = load_text("""
len(nil, 0).
len(cons(_, T), N) :- len(T, M), eval(+(M, 1), N).
""")
    assert answers(prog, "len(cons(a, cons(b, cons(c, nil))), N)") == ["N = 3"]


def test_query_on_missing_predicate_fails():
    prog = load_text("p(1).")
    assert answers(prog, "q(1)") == []


def test_failure_then_alternative_clause():
    prog = load_text("""
p(X) :- q(X), r(X).
p(0).
q(1). q(2).
r(2).
""")
    assert answers(prog, "p(X)") == ["X = 2", "X = 0"]


def test_eval_arith_oracle_cases():
    assert eval_arith(_expr("+(3, 4)")).val == 7
    assert eval_arith(_expr("*(2.5, 4)")).val == 10.0
    assert isinstance(eval_arith(_expr("*(2.5, 4)")), Real)
    assert eval_arith(_expr("/(7, 2)")).val == 3
    assert eval_arith(_expr("/(-7, 2)")).val == -3
    assert eval_arith(_expr("/(7, -2)")).val == -3


def _expr(text):
    prog = load_text("p(1).")
    m = Machine(prog)
    m.set_query(frontend.parse_query("p(%s)" % text))
    # cheat: instantiate via the template machinery
    from mlptk.compiler import compile_query
    goals = frontend.parse_query("eval(%s, X)" % text)
    arg = goals[0].args[0]

    def build(p):
        if isinstance(p, frontend.PInt):
            return Int(p.val)
        if isinstance(p, frontend.PReal):
            return Real(p.val)
        from mlptk.terms import Cmp
        return Cmp(p.functor, tuple(build(a) for a in p.args))
    return build(arg)


def test_eval_errors():
    prog = load_text("p(1).")
    with pytest.raises(MachineError, match="division by zero"):
        vm.run(prog, frontend.parse_query("eval(/(1, 0), X)"))
    with pytest.raises(MachineError, match="unbound"):
        vm.run(prog, frontend.parse_query("eval(+(Y, 1), X)"))
    with pytest.raises(MachineError, match="not an arithmetic"):
        vm.run(prog, frontend.parse_query("eval(foo(1), X)"))


def test_comparisons():
    prog = load_text("p(1).")
    assert answers(prog, "lt(1, 2)") == ["yes"]
    assert answers(prog, "lt(2, 1)") == []
    assert answers(prog, "ge(2, 2)") == ["yes"]
    assert answers(prog, "eq_num(2, +(1, 1))") == ["yes"]
    assert answers(prog, "gt(2.5, 2)") == ["yes"]


def test_solve_metacall():
    prog = load_text("p(1).\np(2).")
    assert answers(prog, "solve(p(X))") == ["X = 1", "X = 2"]


def test_solve_of_intrinsic_and_extern():
    from conftest import TEST_SIG
    sig = frontend.parse_signature(TEST_SIG, "t.sig")
    prog = load_text("accum_extern t.\ng(X, Y) :- dec(X, Y).", {"t": sig})
    assert answers(prog, "solve(dec(5, Y))") == ["Y = 4"]
    assert answers(prog, "solve(lt(1, 2))") == ["yes"]


def test_solve_unbound_goal_is_error():
    prog = load_text("p(1).")
    with pytest.raises(MachineError, match="not callable"):
        vm.run(prog, frontend.parse_query("solve(X)"))


def test_not_negation_as_failure():
    prog = load_text("p(1).\np(2).")
    assert answers(prog, "not(p(3))") == ["yes"]
    assert answers(prog, "not(p(1))") == []
    # not/1 binds nothing
    assert answers(prog, "not(q(X))") == ["X = X"]


def test_not_leaves_no_bindings_on_failure_path():
    prog = load_text("p(1).\nq(X) :- not(p(X)).")
    assert answers(prog, "q(3)") == ["yes"]
    assert answers(prog, "q(1)") == []


def test_budget_exhaustion():
    prog = load_text("loop :- loop.")
    with pytest.raises(BudgetExhausted):
        list(Machine(prog, max_steps=1000).solve(frontend.parse_query("loop")))
    out = vm.run(prog, frontend.parse_query("loop"), max_steps=1000)
    assert out.kind == "budget"


def test_lco_constant_env_depth():
    prog = load_text("""
down(0).
down(N) :- gt(N, 0), eval(-(N, 1), M), down(M).
""")
    small = vm.run(prog, frontend.parse_query("down(1)"))
    big = vm.run(prog, frontend.parse_query("down(5000)"))
    assert big.kind == "success"
    assert big.machine.max_env_depth == small.machine.max_env_depth


def test_machine_rejects_second_query():
    prog = load_text("p(1).")
    m = Machine(prog)
    list(m.solve(frontend.parse_query("p(X)")))
    with pytest.raises(MachineError):
        m.set_query(frontend.parse_query("p(X)"))


def test_run_facade_outcomes():
    prog = load_text("p(1).\np(2).")
    assert vm.run(prog, frontend.parse_query("p(X)")).kind == "success"
    assert vm.run(prog, frontend.parse_query("p(9)")).kind == "failure"
    all_out = vm.run(prog, frontend.parse_query("p(X)"), max_answers=None)
    assert len(all_out.answers) == 2


def test_int_real_distinct_at_runtime():
    prog = load_text("p(1).\nr(1.0).")
    assert answers(prog, "p(1.0)") == []
    assert answers(prog, "r(1.0)") == ["yes"]


def test_real_answers_format():
    prog = load_text("half(X, Y) :- eval(/(X, 2.0), Y).")
    out = vm.run(prog, frontend.parse_query("half(1.0, Y)"))
    y = out.answers[0]["Y"]
    assert isinstance(y, Real) and math.isclose(y.val, 0.5)
