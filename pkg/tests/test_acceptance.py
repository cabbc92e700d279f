"""Acceptance criteria, one test per criterion.

Each test prints a single PASS line on success (visible with -s; under
plain pytest -v the test name itself is the pass/fail line).  Everything
here runs against in-process host: libraries only; no compiled plugin is
required.
"""

import math
import random
import time

import pytest

from mlptk import bytecode as bc
from mlptk import compiler, frontend, linker, loader, stubgen, vm
from mlptk.hostlibs import PRESERVING_TEST_SYMBOLS
from mlptk.terms import (Atom, Cmp, Int, Real, Str, Trail, Var, deref,
                         occurs, struct_eq, unify)

from conftest import TEST_SIG, answers, load_text


def report(name):
    print("PASS: %s" % name)


# --------------------------------------------------------------------------
# 1. Bytecode round trip


def _random_image(rng):
    n_const = rng.randint(2, 8)
    consts = [("sym", "f%d" % rng.randint(0, 9))]  # guaranteed symbol at 0
    for _ in range(n_const - 1):
        consts.append(rng.choice([
            ("sym", "s%d" % rng.randint(0, 9)),
            ("int", rng.randint(-1000, 1000)),
            ("real", rng.uniform(-10, 10)),
            ("str", "txt%d" % rng.randint(0, 9)),
        ]))
    syms = [i for i, (tag, _) in enumerate(consts) if tag == "sym"]

    def rnd_template(depth=0):
        r = rng.random()
        if r < 0.4 or depth >= 2:
            return bc.TSlot(rng.randint(0, 5))
        if r < 0.7:
            return bc.TConst(rng.randint(0, n_const - 1))
        return bc.TCmp(rng.choice(syms),
                       tuple(rnd_template(depth + 1)
                             for _ in range(rng.randint(1, 3))))

    templates = [rnd_template() for _ in range(rng.randint(1, 6))]
    externs = [bc.ExternEntry("host:test", "sym%d" % i, "e%d" % i,
                              rng.randint(0, 3), rng.random() < 0.3)
               for i in range(rng.randint(0, 3))]
    code = []
    n_code = rng.randint(1, 20)
    for _ in range(n_code):
        op = rng.choice([bc.Op.ALLOCATE, bc.Op.DEALLOCATE, bc.Op.PROCEED,
                         bc.Op.GET_TEMPLATE, bc.Op.PUT_TEMPLATE,
                         bc.Op.MOVE_REG, bc.Op.STORE_ENV, bc.Op.LOAD_ENV,
                         bc.Op.CALL, bc.Op.TRY_ME_ELSE, bc.Op.HALT]
                        + ([bc.Op.CALL_EXTERN] if externs else []))
        if op in (bc.Op.GET_TEMPLATE, bc.Op.PUT_TEMPLATE):
            ins = bc.Instruction(op, rng.randint(0, len(templates) - 1),
                                 rng.randint(1, 8))
        elif op == bc.Op.MOVE_REG:
            ins = bc.Instruction(op, rng.randint(1, 8), rng.randint(1, 8))
        elif op == bc.Op.STORE_ENV:
            ins = bc.Instruction(op, rng.randint(1, 8), rng.randint(0, 7))
        elif op == bc.Op.LOAD_ENV:
            ins = bc.Instruction(op, rng.randint(0, 7), rng.randint(1, 8))
        elif op == bc.Op.CALL:
            ins = bc.Instruction(op, rng.choice(syms), rng.randint(0, 4))
        elif op == bc.Op.TRY_ME_ELSE:
            ins = bc.Instruction(op, rng.randint(0, n_code - 1),
                                 rng.randint(0, 4))
        elif op == bc.Op.CALL_EXTERN:
            ins = bc.Instruction(op, rng.randint(0, len(externs) - 1))
        elif op == bc.Op.ALLOCATE:
            ins = bc.Instruction(op, rng.randint(0, 8))
        else:
            ins = bc.Instruction(op)
        code.append(ins)
    preds = [bc.PredEntry("p%d" % i, rng.randint(0, 3),
                          rng.randint(0, n_code - 1))
             for i in range(rng.randint(0, 3))]
    return bc.BytecodeImage(const_pool=consts, template_pool=templates,
                            extern_table=externs, predicate_table=preds,
                            code=code)


def test_bytecode_round_trip_1000_images_under_10s():
    rng = random.Random(1)
    t0 = time.time()
    for _ in range(1000):
        img = _random_image(rng)
        bc.validate(img)
        assert bc.deserialize(bc.serialize(img)) == img
    elapsed = time.time() - t0
    assert elapsed < 10.0, "round trips took %.1fs" % elapsed
    report("bytecode round trip, 1000 images in %.2fs" % elapsed)


# --------------------------------------------------------------------------
# 2. Linker oracle equivalence


def _random_program(rng, n_preds):
    """Acyclic clause set: pred i may call preds with smaller index."""
    clauses = []
    for i in range(n_preds):
        for _ in range(rng.randint(1, 3)):
            clauses.append("p%d(%d)." % (i, rng.randint(0, 4)))
        if i > 0:
            j = rng.randint(0, i - 1)
            kind = rng.random()
            if kind < 0.4:
                clauses.append("p%d(X) :- p%d(X)." % (i, j))
            elif kind < 0.7:
                clauses.append("p%d(X) :- p%d(X), lt(X, 4)." % (i, j))
            else:
                k = rng.randint(0, i - 1)
                clauses.append("p%d(X) :- p%d(X), p%d(X)." % (i, j, k))
    return clauses


def _compile_clauses(clauses, accum_names=(), accum_modules=None):
    header = "".join("accumulate %s.\n" % n for n in accum_names)
    mod = frontend.parse_module(header + "\n".join(clauses), "<gen>")
    return compiler.compile_module(mod, {}, accum_modules)


def test_linker_equivalence_with_monolithic_oracle():
    rng = random.Random(2)
    for trial in range(50):
        n_preds = rng.randint(3, 6)
        clauses = _random_program(rng, n_preds)
        mono = loader.load(_compile_clauses(clauses))

        n_parts = rng.randint(2, 4)
        parts = [[] for _ in range(n_parts)]
        for i in range(n_preds):
            parts[rng.randrange(n_parts)].extend(
                c for c in clauses if c.startswith("p%d(" % i))
        part_names = ["part%d" % k for k in range(n_parts)]
        part_asts = {
            name: frontend.parse_module("module %s.\n%s" % (name, "\n".join(cls)),
                                        name + ".mod")
            for name, cls in zip(part_names, parts)}
        images = []
        for k, cls in enumerate(parts):
            others = [n for n in part_names if n != part_names[k]]
            images.append(_compile_clauses(cls, others, part_asts))
        linked = loader.load(linker.link(images))

        for _ in range(5):
            q = "p%d(X)" % rng.randrange(n_preds)
            assert answers(linked, q) == answers(mono, q), \
                "trial %d query %s" % (trial, q)
    report("linker equivalence, 50 programs x 5 queries vs monolithic oracle")


# --------------------------------------------------------------------------
# 3. One-time symbol resolution


def _loop_prog():
    sig = frontend.parse_signature(TEST_SIG, "t.sig")
    return load_text("""
accum_extern t.
driver(0).
driver(N) :- gt(N, 0), a(N, M), driver(M).
a(N, M) :- dec(N, M).
""", {"t": sig})


def test_one_time_resolution_across_1000_invocations():
    prog = _loop_prog()
    out = vm.run(prog, frontend.parse_query("driver(1000)"))
    assert out.kind == "success"
    assert out.machine.extern_invocations == 1000
    assert prog.registry.resolution_count == len(prog.handles)
    dec_handles = [h for h in prog.handles if h.pred_name == "dec"]
    assert len(dec_handles) == 1, "dec resolved exactly once"
    report("one-time resolution: 1000 invocations, 1 resolution of dec/2")


# --------------------------------------------------------------------------
# 4. Register preservation


_PRESERVE_QUERIES = {
    "echo_int": lambda rng: "echo_int(%d, Y)" % rng.randint(-999, 999),
    "echo_real": lambda rng: "echo_real(%s, Y)" % _real(rng),
    "echo_str": lambda rng: 'echo_str("s%d", Y)' % rng.randint(0, 999),
    "dec_int": lambda rng: "dec(%d, Y)" % rng.randint(-999, 999),
    "add_int": lambda rng: "add(%d, %d, Y)" % (rng.randint(-999, 999),
                                               rng.randint(-999, 999)),
    "always_fail": lambda rng: "nope",
    "check_positive": lambda rng: "pos(%d)" % rng.randint(-5, 5),
    "noop": lambda rng: "noop",
}


def _real(rng):
    return "%.6f" % rng.uniform(-100, 100)


def test_register_preservation_for_non_regcl_plugins():
    assert set(_PRESERVE_QUERIES) == set(PRESERVING_TEST_SYMBOLS)
    sig = frontend.parse_signature(TEST_SIG, "t.sig")
    prog = load_text("accum_extern t.\nanchor(0).", {"t": sig})
    rng = random.Random(4)
    checks = 0
    for _ in range(200):
        symbol = rng.choice(PRESERVING_TEST_SYMBOLS)
        query = _PRESERVE_QUERIES[symbol](rng)
        m = vm.Machine(prog)
        orig = m._invoke_extern
        preserved = []

        def spy(idx, _m=m, _orig=orig, _out=preserved):
            h = _m.handles[idx]
            before = vm.snapshot_registers(_m, h.arity)
            ok = _orig(idx)
            _out.append(before == vm.snapshot_registers(_m, h.arity))
            return ok

        m._invoke_extern = spy
        list(m.solve(frontend.parse_query(query)))
        assert preserved and all(preserved), "%s clobbered registers" % symbol
        checks += len(preserved)
    assert checks >= 200
    report("register preservation: %d invocations left A1..An untouched"
           % checks)


def test_clobbering_plugin_with_regcl_still_computes_correctly():
    sig = frontend.parse_signature(TEST_SIG, "t.sig")
    prog = load_text("""
accum_extern t.
f(X, Y, R) :- clob(X, Y, S), add(S, X, R).
""", {"t": sig})
    rng = random.Random(5)
    for _ in range(50):
        x, y = rng.randint(-99, 99), rng.randint(-99, 99)
        got = answers(prog, "f(%d, %d, R)" % (x, y))
        assert got == ["R = %d" % (x + y + x)]
    report("regcl conservative path: clobbering plugin, 50 correct answers")


# --------------------------------------------------------------------------
# 5. Last-call optimization


def test_lco_constant_stack_over_100k_extern_tail_calls():
    prog = _loop_prog()
    initial = vm.run(prog, frontend.parse_query("driver(0)")).machine.max_env_depth
    out = vm.run(prog, frontend.parse_query("driver(100000)"))
    assert out.kind == "success"
    depth = out.machine.max_env_depth
    assert depth <= initial + 1, "env depth grew to %d" % depth
    report("LCO: 100000 iterations, max env depth %d (initial %d)"
           % (depth, initial))


# --------------------------------------------------------------------------
# 6. Intrinsics vs oracles


def _random_expr(rng, depth):
    """Returns (Term, oracle value)."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            v = rng.randint(-50, 50)
            return Int(v), v
        v = round(rng.uniform(-50, 50), 3)
        return Real(v), v
    op = rng.choice("+-*/")
    a, av = _random_expr(rng, depth - 1)
    b, bv = _random_expr(rng, depth - 1)
    if op == "/" and (bv == 0 or bv == 0.0):
        b, bv = Int(1), 1
    term = Cmp(op, (a, b))
    both_int = isinstance(av, int) and isinstance(bv, int)
    if op == "+":
        val = av + bv if both_int else float(av) + float(bv)
    elif op == "-":
        val = av - bv if both_int else float(av) - float(bv)
    elif op == "*":
        val = av * bv if both_int else float(av) * float(bv)
    elif both_int:
        q = abs(av) // abs(bv)
        val = q if (av >= 0) == (bv >= 0) else -q
    else:
        val = float(av) / float(bv)
    return term, val


def test_eval_matches_independent_oracle_on_10000_expressions():
    rng = random.Random(6)
    for i in range(10000):
        term, expect = _random_expr(rng, rng.randint(1, 5))
        got = vm.eval_arith(term)
        if isinstance(expect, int):
            assert isinstance(got, Int) and got.val == expect
        else:
            assert isinstance(got, Real)
            assert got.val == expect or \
                abs(got.val - expect) <= math.ulp(expect), \
                "expr %d: %r vs %r" % (i, got.val, expect)
    report("eval oracle: 10000 expressions, INT exact, REAL within 1 ulp")


def test_comparisons_match_direct_numeric_comparison():
    prog = load_text("anchor(0).")
    rng = random.Random(7)
    ops = {"lt": lambda a, b: a < b, "gt": lambda a, b: a > b,
           "le": lambda a, b: a <= b, "ge": lambda a, b: a >= b,
           "eq_num": lambda a, b: a == b}
    for i in range(10000):
        a = rng.choice([rng.randint(-20, 20), round(rng.uniform(-20, 20), 2)])
        b = a if rng.random() < 0.2 else \
            rng.choice([rng.randint(-20, 20), round(rng.uniform(-20, 20), 2)])
        name = rng.choice(list(ops))
        got = answers(prog, "%s(%s, %s)" % (name, a, b)) == ["yes"]
        assert got == ops[name](a, b), "case %d: %s(%s, %s)" % (i, name, a, b)
    report("comparison intrinsics: 10000 pairs agree with direct comparison")


def test_not_succeeds_exactly_when_solve_exhausts():
    rng = random.Random(8)
    for trial in range(100):
        clauses = _random_program(rng, rng.randint(2, 4))
        prog = loader.load(_compile_clauses(clauses))
        goal = "p%d(%d)" % (rng.randrange(2), rng.randint(0, 5))
        has_answer = answers(prog, "solve(%s)" % goal) != []
        not_succeeds = answers(prog, "not(%s)" % goal) == ["yes"]
        assert not_succeeds == (not has_answer), \
            "trial %d goal %s" % (trial, goal)
    report("not/solve duality on 100 generated programs")


# --------------------------------------------------------------------------
# 7. Unification properties


def _random_term(rng, vars_pool, depth):
    r = rng.random()
    if depth == 0 or r < 0.35:
        return rng.choice([
            lambda: rng.choice(vars_pool),
            lambda: Int(rng.randint(0, 3)),
            lambda: Real(float(rng.randint(0, 3))),
            lambda: Str("s%d" % rng.randint(0, 2)),
            lambda: Atom("a%d" % rng.randint(0, 2)),
        ])()
    return Cmp("f%d" % rng.randint(0, 2),
               tuple(_random_term(rng, vars_pool, depth - 1)
                     for _ in range(rng.randint(1, 3))))


def test_unification_properties_on_10000_pairs():
    rng = random.Random(9)
    for i in range(10000):
        vars_pool = [Var("V%d" % k) for k in range(4)]
        a = _random_term(rng, vars_pool, rng.randint(0, 3))
        b = _random_term(rng, vars_pool, rng.randint(0, 3))
        trail = Trail()
        mark = trail.mark()

        ok_ab = unify(a, b, trail)
        if ok_ab:
            # idempotence: re-unification under the resulting bindings holds
            assert unify(a, b, trail)
        trail.undo(mark)
        # undo soundness
        assert all(v.ref is None for v in vars_pool), "iteration %d" % i
        assert not trail.entries

        # symmetry
        ok_ba = unify(b, a, trail)
        trail.undo(mark)
        assert ok_ab == ok_ba, "iteration %d" % i

        # occurs check: a variable never unifies with a term containing it
        v = rng.choice(vars_pool)
        cyclic = Cmp("g", (Int(1), v))
        assert not unify(v, cyclic, trail)
        assert v.ref is None
    report("unification: symmetry, idempotence, undo, occurs on 10000 pairs")


# --------------------------------------------------------------------------
# 8. Loader error taxonomy


def test_loader_error_taxonomy_is_distinct_and_total():
    sig_missing_lib = frontend.parse_signature(
        "sig s.\n#lib ghostlib.\nextern type g g_sym int -> o.\n")
    sig_missing_sym = frontend.parse_signature(
        "sig s.\n#lib host:test.\nextern type g ghost_symbol int -> o.\n")
    src = "accum_extern s.\np(X) :- g(X)."

    img1 = compiler.compile_module(frontend.parse_module(src),
                                   {"s": sig_missing_lib})
    img2 = compiler.compile_module(frontend.parse_module(src),
                                   {"s": sig_missing_sym})

    with pytest.raises(loader.LibraryNotFound) as e1:
        loader.load(img1)
    with pytest.raises(loader.SymbolNotFound) as e2:
        loader.load(img2)
    assert type(e1.value) is not type(e2.value)
    assert "ghostlib" in str(e1.value) and e1.value.pred_name == "g"
    assert "ghost_symbol" in str(e2.value)
    report("loader taxonomy: LibraryNotFound and SymbolNotFound are distinct")


# --------------------------------------------------------------------------
# 9. Stubgen


def test_stubgen_acceptance():
    hand = frontend.parse_signature("""#sig math
#lib math

extern type sin sin_wrapper real -> real -> o.
extern type cos cos_wrapper real -> real -> o.
extern type tan tan_wrapper real -> real -> o.
#regcl sin
""", "hand.sig")
    spec = frontend.parse_spec("""spec math.
lib math.
pred sin sin real -> real -> o.
pred cos cos real -> real -> o.
pred tan tan real -> real -> o.
regcl sin.
""", "math.spec")
    assert frontend.parse_signature(stubgen.generate_signature(spec)) == hand

    pair_spec = frontend.parse_spec("""spec pairlib.
lib pairs.
kind pair type -> type -> type.
type pr int -> int -> pair int int.
map pair int int record pair { x int, y int }.
pred mk mk_pair int -> int -> pair int int -> o.
""", "pair.spec")
    sig = frontend.parse_signature(stubgen.generate_signature(pair_spec))
    source = stubgen.generate_wrappers(pair_spec)
    for d in sig.externs:
        assert "void %s(void)" % d.c_name in source

    plan = stubgen.marshal_plans(pair_spec)["pair"]
    rng = random.Random(10)
    for _ in range(1000):
        i, j = rng.randint(-10**6, 10**6), rng.randint(-10**6, 10**6)
        t = stubgen.marshal(plan, (i, j))
        assert stubgen.unmarshal(plan, t) == (i, j)
        assert struct_eq(stubgen.marshal(plan, stubgen.unmarshal(plan, t)), t)
    report("stubgen: signature equality, wrapper consistency, 1000 round trips")


# --------------------------------------------------------------------------
# 10. host:-only suite


def test_suite_requires_no_compiled_plugin():
    # every library this suite resolves is an in-process host: namespace
    sig = frontend.parse_signature(TEST_SIG, "t.sig")
    assert sig.lib_name.startswith(bc.HOST_LIB_PREFIX)
    prog = load_text("accum_extern t.\np(X, Y) :- dec(X, Y).", {"t": sig})
    assert all(h.lib_name.startswith(bc.HOST_LIB_PREFIX)
               for h in prog.handles)
    assert loader.library_filename(sig.lib_name) is None
    report("acceptance suite runs with host: namespaces only")
