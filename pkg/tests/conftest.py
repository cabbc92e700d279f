import pytest

from mlptk import compiler, frontend, loader, vm

TEST_SIG = """
sig t.
#lib host:test.
extern type echo_int echo_int int -> int -> o.
extern type echo_real echo_real real -> real -> o.
extern type echo_str echo_str string -> string -> o.
extern type dec dec_int int -> int -> o.
extern type add add_int int -> int -> int -> o.
extern type nope always_fail o.
extern type pos check_positive int -> o.
extern type noop noop o.
extern type clob clobber_args int -> int -> int -> o.
regcl clob.
"""


@pytest.fixture
def test_sig():
    return frontend.parse_signature(TEST_SIG, "t.sig")


def compile_text(source, sigs=None, accum=None, conservative=False):
    mod = frontend.parse_module(source, "<test>")
    return compiler.compile_module(mod, sigs or {}, accum,
                                   conservative_regs=conservative)


def load_text(source, sigs=None, accum=None, conservative=False):
    return loader.load(compile_text(source, sigs, accum, conservative))


def answers(prog, query, limit=None, max_steps=None):
    """All answers as formatted strings, e.g. 'X = 1\\nY = f(a)'."""
    m = vm.Machine(prog, max_steps=max_steps)
    out = []
    for a in m.solve(frontend.parse_query(query)):
        out.append(vm.format_answer(a))
        if limit is not None and len(out) >= limit:
            break
    return out
