"""Loader: turn a validated image into a runnable program.

Opens every external library named in the extern table (once each),
resolves every entry symbol to a callable handle (once each, at load
time, never at call time), and patches extern-call operands so they
index the resolved-handle array.  `host:`-prefixed library names
resolve in-process through the hostlibs registry; everything else goes
through the platform dynamic loader (ctypes / dlopen).

A failing load raises before any runnable program exists; callers never
observe a partially initialized machine.
"""

from __future__ import annotations

import ctypes
import os
import sys
from dataclasses import dataclass, field

from . import hostapi, hostlibs
from .bytecode import (HOST_LIB_PREFIX, BytecodeImage, Instruction, Op,
                       validate)
from .terms import Atom, Int, Real, Str


class LoaderError(Exception):
    pass


class LibraryNotFound(LoaderError):
    def __init__(self, lib_name, searched, pred_name):
        self.lib_name = lib_name
        self.searched = list(searched)
        self.pred_name = pred_name
        super().__init__(
            "library not found: %r (needed by predicate %s); searched: %s"
            % (lib_name, pred_name, ", ".join(str(p) for p in self.searched) or "<none>"))


class SymbolNotFound(LoaderError):
    def __init__(self, lib_name, symbol, pred_name):
        self.lib_name = lib_name
        self.symbol = symbol
        self.pred_name = pred_name
        super().__init__("symbol not found: %r in library %r (needed by predicate %s)"
                         % (symbol, lib_name, pred_name))


class AbiMismatch(LoaderError):
    def __init__(self, lib_name, detail):
        self.lib_name = lib_name
        super().__init__("plugin ABI version mismatch in library %r: %s"
                         % (lib_name, detail))


def library_filename(lib_name: str, platform: str | None = None) -> str | None:
    """Map a logical library name to the platform shared-object filename.
    `host:` pseudo-libraries have no file and return None."""
    if lib_name.startswith(HOST_LIB_PREFIX):
        return None
    platform = platform or sys.platform
    if platform.startswith("win"):
        return "%s.dll" % lib_name
    if platform == "darwin":
        return "lib%s.dylib" % lib_name
    return "lib%s.so" % lib_name


@dataclass
class ResolvedHandle:
    fn: object          # zero-argument callable
    pred_name: str
    arity: int
    regcl: bool
    lib_name: str
    entry_symbol: str


class LibraryRegistry:
    """Opens libraries at most once per load and counts symbol resolutions."""

    def __init__(self, search_paths=()):
        self.search_paths = [str(p) for p in search_paths]
        self._open: dict[str, object] = {}
        self.open_count = 0
        self.resolution_count = 0

    def _find_library(self, lib_name, pred_name):
        fname = library_filename(lib_name)
        searched = []
        for d in list(self.search_paths) + [os.getcwd()]:
            candidate = os.path.join(d, fname)
            searched.append(candidate)
            if os.path.isfile(candidate):
                return candidate
        raise LibraryNotFound(lib_name, searched, pred_name)

    def open_library(self, lib_name, pred_name):
        if lib_name in self._open:
            return self._open[lib_name]
        if lib_name.startswith(HOST_LIB_PREFIX):
            ns = hostlibs.host_namespace(lib_name)
            if ns is None:
                raise LibraryNotFound(lib_name, ["<host namespaces>"], pred_name)
            handle = ns
        else:
            path = self._find_library(lib_name, pred_name)
            try:
                lib = ctypes.CDLL(path)
            except OSError as exc:
                raise LibraryNotFound(lib_name, [path], pred_name) from exc
            self._check_abi_and_init(lib, lib_name)
            handle = lib
        self._open[lib_name] = handle
        self.open_count += 1
        return handle

    def _check_abi_and_init(self, lib, lib_name):
        from .native import host_table
        try:
            version = ctypes.c_uint32.in_dll(lib, "mlp_abi_version").value
        except ValueError:
            raise AbiMismatch(lib_name, "library does not export mlp_abi_version")
        if version != hostapi.API_VERSION:
            raise AbiMismatch(lib_name, "plugin reports ABI version %d, host provides %d"
                              % (version, hostapi.API_VERSION))
        try:
            init = lib.mlp_init
        except AttributeError:
            raise SymbolNotFound(lib_name, "mlp_init", "<plugin init>")
        init.restype = None
        init.argtypes = [ctypes.POINTER(type(host_table()))]
        init(ctypes.byref(host_table()))

    def resolve(self, entry) -> ResolvedHandle:
        handle = self.open_library(entry.lib_name, entry.pred_name)
        if entry.lib_name.startswith(HOST_LIB_PREFIX):
            fn = handle.get(entry.entry_symbol)
            if fn is None:
                raise SymbolNotFound(entry.lib_name, entry.entry_symbol, entry.pred_name)
            bound = _bind_host_callable(fn)
        else:
            try:
                cfn = getattr(handle, entry.entry_symbol)
            except AttributeError:
                raise SymbolNotFound(entry.lib_name, entry.entry_symbol, entry.pred_name)
            cfn.restype = None
            cfn.argtypes = []
            bound = cfn
        self.resolution_count += 1
        return ResolvedHandle(bound, entry.pred_name, entry.arity,
                              entry.regcl, entry.lib_name, entry.entry_symbol)


def _bind_host_callable(fn):
    def call():
        fn(hostapi.current_api())
    return call


def resolve_host(lib_name: str, symbol: str):
    """Look up an in-process callable registered under a host: namespace."""
    fn = hostlibs.host_callable(lib_name, symbol)
    if fn is None:
        raise SymbolNotFound(lib_name, symbol, "<direct lookup>")
    return fn


def const_to_term(entry):
    tag, val = entry
    if tag == "sym":
        return Atom(val)
    if tag == "int":
        return Int(val)
    if tag == "real":
        return Real(val)
    return Str(val)


@dataclass
class LoadedProgram:
    """Immutable, runnable product of a successful load."""
    const_pool: list
    const_terms: list
    template_pool: list
    code: list                     # extern operands are handle indices
    predicate_index: dict          # (name, arity) -> code offset
    known_arities: dict            # name -> set of arities
    extern_index: dict             # (pred_name, arity) -> handle index
    handles: list                  # of ResolvedHandle, aligned with extern table
    registry: LibraryRegistry
    image: BytecodeImage = field(repr=False, default=None)


def load(img: BytecodeImage, search_paths=(), registry=None) -> LoadedProgram:
    validate(img)
    registry = registry or LibraryRegistry(search_paths)
    if search_paths and registry.search_paths != [str(p) for p in search_paths]:
        registry.search_paths = [str(p) for p in search_paths]

    handles = [registry.resolve(e) for e in img.extern_table]

    code = list(img.code)
    for i, ins in enumerate(code):
        if ins.op in (Op.CALL_EXTERN, Op.EXECUTE_EXTERN):
            # table index becomes handle index; the array is index-aligned
            # so the operand value is unchanged, but re-check totality
            if not 0 <= ins.a < len(handles):
                raise LoaderError("unresolvable extern operand %d at instruction %d"
                                  % (ins.a, i))
            code[i] = Instruction(ins.op, ins.a, ins.b)

    predicate_index = {}
    known_arities: dict[str, set] = {}
    for p in img.predicate_table:
        predicate_index[(p.name, p.arity)] = p.offset
        known_arities.setdefault(p.name, set()).add(p.arity)
    extern_index = {}
    for idx, e in enumerate(img.extern_table):
        extern_index[(e.pred_name, e.arity)] = idx
        known_arities.setdefault(e.pred_name, set()).add(e.arity)

    return LoadedProgram(
        const_pool=list(img.const_pool),
        const_terms=[const_to_term(c) for c in img.const_pool],
        template_pool=list(img.template_pool),
        code=code,
        predicate_index=predicate_index,
        known_arities=known_arities,
        extern_index=extern_index,
        handles=handles,
        registry=registry,
        image=img,
    )
