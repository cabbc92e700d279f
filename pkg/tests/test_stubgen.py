import pytest

from mlptk import frontend, stubgen
from mlptk.stubgen import (MarshalError, StubgenError, generate_build_note,
                           generate_signature, generate_wrappers,
                           marshal, marshal_plans, unmarshal)
from mlptk.terms import Cmp, Int, Real, Var, struct_eq


MATH_SPEC = """
spec math.
lib math.
pred sin sin real -> real -> o.
pred cos cos real -> real -> o.
pred tan tan real -> real -> o.
regcl sin.
"""

PAIR_SPEC = """
spec pairlib.
lib pairs.
kind pair type -> type -> type.
type pr int -> int -> pair int int.
map pair int int record pair { x int, y int }.
pred mk mk_pair int -> int -> pair int int -> o.
pred shift pr_shift pair int int -> int -> pair int int -> o.
"""

HAND_SIG = """
#sig math
#lib math

extern type sin sin_wrapper real -> real -> o.
extern type cos cos_wrapper real -> real -> o.
extern type tan tan_wrapper real -> real -> o.
#regcl sin
"""


def _spec(text=MATH_SPEC):
    return frontend.parse_spec(text, "<spec>")


def test_generated_signature_matches_handwritten():
    generated = generate_signature(_spec())
    assert frontend.parse_signature(generated) \
        == frontend.parse_signature(HAND_SIG, "hand.sig")


def test_generated_signature_stable():
    assert generate_signature(_spec()) == generate_signature(_spec())


def test_zero_pred_spec_gives_header_only():
    s = _spec("spec empty.\nlib e.\n")
    sig = frontend.parse_signature(generate_signature(s))
    assert sig.externs == [] and sig.sig_name == "empty"


def test_wrapper_source_consistent_with_signature():
    s = _spec(PAIR_SPEC)
    sig = frontend.parse_signature(generate_signature(s))
    source = generate_wrappers(s)
    for d in sig.externs:
        assert "void %s(void)" % d.c_name in source


def test_primitive_wrapper_pattern():
    source = generate_wrappers(_spec())
    assert "double a1 = T->get_real(1);" in source
    assert "T->return_real(2, sin(a1));" in source


def test_pair_wrapper_marshalling():
    source = generate_wrappers(_spec(PAIR_SPEC))
    assert "struct pair {" in source
    assert "T->get_int(1)" in source and "T->get_int(2)" in source
    assert 'T->return_ctor(3, "pr", 2);' in source
    assert "T->set_ctor_arg_int(3, 0, out.x);" in source
    assert "api_version >= 2" in source


def test_provenance_header_present():
    from mlptk import __version__
    source = generate_wrappers(_spec())
    assert source.splitlines()[0].startswith("/* Generated by mlp stubgen %s"
                                             % __version__)


def test_non_int_field_rejected():
    with pytest.raises(StubgenError, match="only int fields"):
        marshal_plans(_spec("""spec s.
lib l.
kind box 1.
type bx real -> box real.
map box real record box { v real }.
"""))


def test_unmapped_type_in_pred_rejected():
    # string result has no marshalling path
    with pytest.raises(StubgenError, match="hand-written"):
        generate_wrappers(_spec("spec s.\nlib l.\n"
                                "pred up up string -> string -> o.\n"))


def test_marshal_round_trip_and_field_order():
    plan = marshal_plans(_spec(PAIR_SPEC))["pair"]
    assert plan.ctor_name == "pr"
    assert plan.field_names == ("x", "y")
    t = marshal(plan, (3, 4))
    assert struct_eq(t, Cmp("pr", (Int(3), Int(4))))
    assert unmarshal(plan, t) == (3, 4)
    assert unmarshal(plan, marshal(plan, (0, 0))) == (0, 0)


def test_unmarshal_faults():
    plan = marshal_plans(_spec(PAIR_SPEC))["pair"]
    with pytest.raises(MarshalError, match="unbound"):
        unmarshal(plan, Var())
    with pytest.raises(MarshalError, match="ground int"):
        unmarshal(plan, Cmp("pr", (Int(1), Var())))
    with pytest.raises(MarshalError):
        unmarshal(plan, Cmp("other", (Int(1), Int(2))))
    with pytest.raises(MarshalError):
        unmarshal(plan, Cmp("pr", (Real(1.0), Int(2))))


def test_build_note_lists_entry_symbols():
    note = generate_build_note(_spec())
    for sym in ("sin_wrapper", "cos_wrapper", "tan_wrapper"):
        assert sym in note
    assert "libmath" in note or "math.dll" in note


def test_generate_all_filenames():
    files = stubgen.generate_all(_spec(PAIR_SPEC))
    assert set(files) == {"pairlib.sig", "pairlib_wrappers.c",
                          "pairlib_build_note.txt"}
