import pytest

from mlptk import bytecode as bc
from mlptk import frontend, loader
from mlptk.loader import (AbiMismatch, LibraryNotFound, LibraryRegistry,
                          SymbolNotFound, library_filename, load)

from conftest import compile_text


def _img(lib="host:test", symbol="noop", pred="noop", arity=0):
    sig = frontend.parse_signature(
        "sig s.\n#lib %s.\nextern type %s %s %so.\n"
        % (lib, pred, symbol, "int -> " * arity), "s.sig")
    body = "(%s)" % ", ".join(str(i) for i in range(arity)) if arity else ""
    return compile_text("accum_extern s.\np :- %s%s." % (pred, body),
                        {"s": sig})


def test_library_filename_platform_mapping():
    assert library_filename("math", "linux") == "libmath.so"
    assert library_filename("math", "darwin") == "libmath.dylib"
    assert library_filename("math", "win32") == "math.dll"
    assert library_filename("host:test", "linux") is None


def test_host_namespace_resolution():
    prog = load(_img())
    assert len(prog.handles) == 1
    h = prog.handles[0]
    assert h.lib_name == "host:test" and h.entry_symbol == "noop"


def test_missing_library_diagnostic_names_both():
    img = _img(lib="no_such_lib", symbol="f", pred="p2")
    with pytest.raises(LibraryNotFound) as ei:
        load(img, search_paths=["/tmp"])
    assert ei.value.lib_name == "no_such_lib"
    assert ei.value.pred_name == "p2"
    assert "libno_such_lib.so" in str(ei.value)


def test_missing_host_namespace_is_library_not_found():
    with pytest.raises(LibraryNotFound):
        load(_img(lib="host:nothing"))


def test_missing_symbol_diagnostic_distinct():
    img = _img(symbol="no_such_symbol")
    with pytest.raises(SymbolNotFound) as ei:
        load(img)
    assert not isinstance(ei.value, LibraryNotFound)
    assert ei.value.symbol == "no_such_symbol"
    assert ei.value.lib_name == "host:test"


def test_failed_load_leaves_no_program():
    registry = LibraryRegistry()
    with pytest.raises(SymbolNotFound):
        load(_img(symbol="no_such_symbol"), registry=registry)
    # nothing usable came back and the registry did not count a resolution
    assert registry.resolution_count == 0


def test_each_library_opened_once():
    sig = frontend.parse_signature("""sig s.
#lib host:test.
extern type dec dec_int int -> int -> o.
extern type add add_int int -> int -> int -> o.
""", "s.sig")
    img = compile_text(
        "accum_extern s.\np(X, Y) :- dec(X, Y).\nq(X, Y) :- add(X, X, Y).",
        {"s": sig})
    registry = LibraryRegistry()
    prog = load(img, registry=registry)
    assert registry.open_count == 1
    assert registry.resolution_count == 2
    assert len(prog.handles) == 2


def test_abi_gate_rejects_library_without_version(tmp_path):
    # a real .so file that is not an mlp plugin: use the Python binary's
    # own libc handle stand-in by compiling nothing; instead fabricate a
    # file that fails dlopen and check it reports LibraryNotFound.
    bogus = tmp_path / "libfake.so"
    bogus.write_bytes(b"\x7fELF not really")
    img = _img(lib="fake", symbol="f", pred="p3")
    with pytest.raises(LibraryNotFound):
        load(img, search_paths=[str(tmp_path)])


def test_loaded_program_indexes():
    prog = load(compile_text("p(1).\np(2).\nq(X) :- p(X)."))
    assert ("p", 1) in prog.predicate_index
    assert ("q", 1) in prog.predicate_index
    assert prog.known_arities["p"] == {1}


def test_extern_operands_are_handle_indices():
    prog = load(_img())
    for ins in prog.code:
        if ins.op in (bc.Op.CALL_EXTERN, bc.Op.EXECUTE_EXTERN):
            assert 0 <= ins.a < len(prog.handles)


def test_const_to_term_mapping():
    from mlptk.terms import Atom, Int, Real, Str
    assert isinstance(loader.const_to_term(("sym", "a")), Atom)
    assert isinstance(loader.const_to_term(("int", 1)), Int)
    assert isinstance(loader.const_to_term(("real", 1.0)), Real)
    assert isinstance(loader.const_to_term(("str", "s")), Str)
