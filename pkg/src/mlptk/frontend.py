"""Parsers and ASTs for the three source dialects.

Dialects handled here:
  .sig   extern signature files (library name, extern predicate decls, regcl)
  .mod   module files (clauses plus accumulation declarations)
  .spec  stub-generator input files

Signature directives come in two historical spellings, `sig name.` /
`regcl names.` and `#sig name` / `#regcl names`; both are accepted and
normalized to one AST.  The formatter emits the keyword form (with the
one exception of `#lib`, which keeps its marker).

Comments run from `%` to end of line.  Clause syntax is Prolog-like:
lowercase atoms, capitalized variables, `f(a, X)` compounds.  At the
goal and clause-head level, juxtaposed arguments are also accepted
(`twice X Y :- sin X Z, sin Z Y.`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import Diagnostic, ParseError

BASE_TYPES = ("int", "real", "string", "o")


# --------------------------------------------------------------------------
# Type expressions


class TypeExpr:
    __slots__ = ()


@dataclass(frozen=True)
class BaseType(TypeExpr):
    name: str


@dataclass(frozen=True)
class KindType(TypeExpr):
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class ArrowType(TypeExpr):
    dom: TypeExpr
    cod: TypeExpr


def type_domains(t: TypeExpr) -> list:
    """The chain of argument types of a (possibly nullary) predicate type."""
    doms = []
    while isinstance(t, ArrowType):
        doms.append(t.dom)
        t = t.cod
    return doms


def type_codomain(t: TypeExpr) -> TypeExpr:
    while isinstance(t, ArrowType):
        t = t.cod
    return t


def is_predicate_type(t: TypeExpr) -> bool:
    cod = type_codomain(t)
    return isinstance(cod, BaseType) and cod.name == "o"


def format_type(t: TypeExpr) -> str:
    if isinstance(t, ArrowType):
        return "%s -> %s" % (_format_atomic(t.dom), format_type(t.cod))
    return _format_applied(t)


def _format_applied(t: TypeExpr) -> str:
    if isinstance(t, BaseType):
        return t.name
    if isinstance(t, KindType):
        if not t.args:
            return t.name
        return "%s %s" % (t.name, " ".join(_format_atomic(a) for a in t.args))
    return "(%s)" % format_type(t)


def _format_atomic(t: TypeExpr) -> str:
    if isinstance(t, BaseType):
        return t.name
    if isinstance(t, KindType) and not t.args:
        return t.name
    return "(%s)" % format_type(t)


# --------------------------------------------------------------------------
# Term patterns and clause-level AST


class TermPat:
    __slots__ = ()


@dataclass(frozen=True)
class PVar(TermPat):
    name: str


@dataclass(frozen=True)
class PInt(TermPat):
    val: int


@dataclass(frozen=True)
class PReal(TermPat):
    val: float


@dataclass(frozen=True)
class PStr(TermPat):
    val: str


@dataclass(frozen=True)
class PAtom(TermPat):
    name: str


@dataclass(frozen=True)
class PCmp(TermPat):
    functor: str
    args: tuple


@dataclass(frozen=True)
class Goal:
    name: str
    args: tuple
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Clause:
    head_name: str
    head_args: tuple
    body: tuple  # of Goal
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ExternDecl:
    lp_name: str
    c_name: str
    type: TypeExpr
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class SignatureAst:
    sig_name: str
    lib_name: str
    externs: list  # of ExternDecl
    regcl: set
    source_file: str = field(default="<input>", compare=False)

    def __eq__(self, other):
        if not isinstance(other, SignatureAst):
            return NotImplemented
        return (self.sig_name == other.sig_name
                and self.lib_name == other.lib_name
                and self.externs == other.externs
                and self.regcl == other.regcl)


@dataclass
class ModuleAst:
    module_name: str
    accumulates: list
    accum_externs: list
    local_sig: list  # of (name, TypeExpr, pos)
    clauses: list  # of Clause
    source_file: str = "<input>"


@dataclass(frozen=True)
class NativeMap:
    kind_name: str
    kind_args: tuple
    record_name: str
    fields: tuple  # of (field_name, TypeExpr)


@dataclass(frozen=True)
class SpecPred:
    lp_name: str
    entry_base: str
    type: TypeExpr
    regcl: bool


@dataclass
class SpecAst:
    spec_name: str
    lib_name: str
    kinds: list  # of (name, arity)
    constructors: list  # of (name, TypeExpr)
    native_maps: list  # of NativeMap
    preds: list  # of SpecPred
    source_file: str = "<input>"


# --------------------------------------------------------------------------
# Lexer

ATOM, VAR, INT, REAL, STR, PUNCT, DIRECTIVE, EOF = (
    "ATOM", "VAR", "INT", "REAL", "STR", "PUNCT", "DIRECTIVE", "EOF")

_PUNCT_CHARS = "(),.{}"
_OP_ATOMS = "+*/"  # '-' handled separately (negative literals)


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    col: int


def _is_digit(c):
    return "0" <= c <= "9"


class Lexer:
    def __init__(self, source: str, filename: str = "<input>"):
        self.src = source
        self.filename = filename
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, msg):
        raise ParseError(Diagnostic(msg, self.filename, self.line, self.col))

    def _advance(self, n=1):
        for _ in range(n):
            if self.pos < len(self.src) and self.src[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def tokens(self) -> list:
        out = []
        src = self.src
        while self.pos < len(src):
            c = src[self.pos]
            if c in " \t\r\n":
                self._advance()
                continue
            if c == "%":
                while self.pos < len(src) and src[self.pos] != "\n":
                    self._advance()
                continue
            line, col = self.line, self.col
            if c == "#":
                self._advance()
                name = self._ident_chars()
                if not name:
                    self.error("expected directive name after '#'")
                out.append(Token(DIRECTIVE, name, line, col))
                continue
            if _is_digit(c):
                out.append(self._number(line, col, sign=1))
                continue
            if c == "-":
                nxt = src[self.pos + 1] if self.pos + 1 < len(src) else ""
                if _is_digit(nxt):
                    self._advance()
                    out.append(self._number(line, col, sign=-1))
                elif nxt == ">":
                    self._advance(2)
                    out.append(Token(PUNCT, "->", line, col))
                else:
                    self._advance()
                    out.append(Token(ATOM, "-", line, col))
                continue
            if c in _OP_ATOMS:
                self._advance()
                out.append(Token(ATOM, c, line, col))
                continue
            if c == ":":
                if self.pos + 1 < len(src) and src[self.pos + 1] == "-":
                    self._advance(2)
                    out.append(Token(PUNCT, ":-", line, col))
                else:
                    self._advance()
                    out.append(Token(PUNCT, ":", line, col))
                continue
            if c in _PUNCT_CHARS:
                if c == ".":
                    # a '.' between digits belongs to a numeric literal and
                    # is consumed there; a bare '.' is a terminator
                    pass
                self._advance()
                out.append(Token(PUNCT, c, line, col))
                continue
            if c == '"':
                out.append(self._string(line, col))
                continue
            if c.isalpha() or c == "_":
                name = self._ident_chars()
                kind = VAR if (name[0].isupper() or name[0] == "_") else ATOM
                out.append(Token(kind, name, line, col))
                continue
            self.error("unexpected character %r" % c)
        out.append(Token(EOF, None, self.line, self.col))
        return out

    def _ident_chars(self) -> str:
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self._advance()
        return src[start:self.pos]

    def _number(self, line, col, sign):
        src = self.src
        start = self.pos
        while self.pos < len(src) and _is_digit(src[self.pos]):
            self._advance()
        is_real = False
        if (self.pos + 1 < len(src) and src[self.pos] == "."
                and _is_digit(src[self.pos + 1])):
            is_real = True
            self._advance()
            while self.pos < len(src) and _is_digit(src[self.pos]):
                self._advance()
        text = src[start:self.pos]
        if is_real:
            return Token(REAL, sign * float(text), line, col)
        return Token(INT, sign * int(text), line, col)

    def _string(self, line, col):
        self._advance()  # opening quote
        src = self.src
        chunks = []
        while True:
            if self.pos >= len(src):
                self.error("unterminated string literal")
            c = src[self.pos]
            if c == '"':
                self._advance()
                break
            if c == "\\":
                self._advance()
                if self.pos >= len(src):
                    self.error("unterminated escape in string literal")
                esc = src[self.pos]
                mapping = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}
                if esc not in mapping:
                    self.error("unknown escape \\%s" % esc)
                chunks.append(mapping[esc])
                self._advance()
            else:
                chunks.append(c)
                self._advance()
        return Token(STR, "".join(chunks), line, col)


# --------------------------------------------------------------------------
# Parser

_TERM_STARTERS = (VAR, INT, REAL, STR, ATOM)


class Parser:
    def __init__(self, source: str, filename: str = "<input>"):
        self.filename = filename
        self.toks = Lexer(source, filename).tokens()
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(Diagnostic(msg, self.filename, tok.line, tok.col))

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != EOF:
            self.i += 1
        return t

    def accept(self, kind, value=None):
        t = self.tok
        if t.kind == kind and (value is None or t.value == value):
            return self.advance()
        return None

    def expect(self, kind, value=None, what=None):
        t = self.accept(kind, value)
        if t is None:
            want = what or (value if value is not None else kind.lower())
            got = repr(self.tok.value) if self.tok.kind != EOF else "end of input"
            self.error("expected %s, found %s" % (want, got))
        return t

    def at_atom(self, name) -> bool:
        return self.tok.kind == ATOM and self.tok.value == name

    # -- types -------------------------------------------------------------

    def parse_type(self) -> TypeExpr:
        left = self._type_applied()
        if self.accept(PUNCT, "->"):
            return ArrowType(left, self.parse_type())
        return left

    def _type_applied(self) -> TypeExpr:
        head = self._type_atomic()
        if isinstance(head, KindType):
            args = []
            while self.tok.kind == ATOM or (self.tok.kind == PUNCT and self.tok.value == "("):
                args.append(self._type_atomic())
            if args:
                return KindType(head.name, tuple(args))
        return head

    def _type_atomic(self) -> TypeExpr:
        if self.accept(PUNCT, "("):
            t = self.parse_type()
            self.expect(PUNCT, ")")
            return t
        tok = self.expect(ATOM, what="a type")
        if tok.value in BASE_TYPES:
            return BaseType(tok.value)
        return KindType(tok.value)

    # -- directive helpers ---------------------------------------------------

    def _directive_names(self, line) -> list:
        """Names following a '#'-style directive, up to end of line or '.'."""
        names = []
        while True:
            if self.accept(PUNCT, ","):
                continue
            t = self.tok
            if t.kind == ATOM and t.line == line:
                names.append(self.advance().value)
            else:
                break
        self.accept(PUNCT, ".")
        return names

    def _keyword_names(self) -> list:
        names = [self.expect(ATOM, what="a name").value]
        while self.accept(PUNCT, ","):
            names.append(self.expect(ATOM, what="a name").value)
        self.expect(PUNCT, ".")
        return names

    def _lib_name(self) -> str:
        # library names may carry a namespace prefix, e.g. host:test
        parts = [self.expect(ATOM, what="library name").value]
        while self.accept(PUNCT, ":"):
            parts.append(self.expect(ATOM, what="library name part").value)
        return ":".join(parts)

    # -- signature files -----------------------------------------------------

    def parse_signature(self) -> SignatureAst:
        sig_name = None
        lib_name = None
        externs = []
        regcl_names = []  # (name, pos)
        while self.tok.kind != EOF:
            t = self.tok
            if t.kind == DIRECTIVE and t.value == "sig":
                self.advance()
                sig_name = self.expect(ATOM, what="signature name").value
                self.accept(PUNCT, ".")
            elif t.kind == DIRECTIVE and t.value == "lib":
                self.advance()
                lib_name = self._lib_name()
                self.accept(PUNCT, ".")
            elif t.kind == DIRECTIVE and t.value == "regcl":
                line = t.line
                self.advance()
                regcl_names += [(n, (t.line, t.col)) for n in self._directive_names(line)]
            elif self.at_atom("sig"):
                self.advance()
                sig_name = self.expect(ATOM, what="signature name").value
                self.expect(PUNCT, ".")
            elif self.at_atom("lib"):
                self.advance()
                lib_name = self._lib_name()
                self.expect(PUNCT, ".")
            elif self.at_atom("regcl"):
                self.advance()
                regcl_names += [(n, (t.line, t.col)) for n in self._keyword_names()]
            elif self.at_atom("extern"):
                self.advance()
                self.expect(ATOM, "type")
                lp = self.expect(ATOM, what="predicate name")
                cn = self.expect(ATOM, what="entry symbol")
                ty = self.parse_type()
                self.expect(PUNCT, ".")
                externs.append(ExternDecl(lp.value, cn.value, ty, (lp.line, lp.col)))
            else:
                self.error("expected a signature declaration")
        if sig_name is None:
            self.error("signature file has no 'sig' declaration")
        if lib_name is None:
            self.error("signature file has no '#lib' declaration")
        seen = set()
        for d in externs:
            if d.lp_name in seen:
                raise ParseError(Diagnostic("duplicate extern predicate %r" % d.lp_name,
                                            self.filename, d.pos[0], d.pos[1]))
            seen.add(d.lp_name)
            if not is_predicate_type(d.type):
                raise ParseError(Diagnostic(
                    "extern %r has non-predicate type %s (must end in 'o')"
                    % (d.lp_name, format_type(d.type)),
                    self.filename, d.pos[0], d.pos[1]))
        for name, pos in regcl_names:
            if name not in seen:
                raise ParseError(Diagnostic("regcl of undeclared predicate %r" % name,
                                            self.filename, pos[0], pos[1]))
        return SignatureAst(sig_name, lib_name, externs,
                            {n for n, _ in regcl_names}, self.filename)

    # -- module files ----------------------------------------------------------

    def parse_module(self) -> ModuleAst:
        module_name = None
        accumulates = []
        accum_externs = []
        local_sig = []
        clauses = []
        while self.tok.kind != EOF:
            t = self.tok
            if self.at_atom("module"):
                self.advance()
                module_name = self.expect(ATOM, what="module name").value
                self.expect(PUNCT, ".")
            elif self.at_atom("accumulate"):
                self.advance()
                accumulates += self._keyword_names()
            elif self.at_atom("accum_extern"):
                self.advance()
                accum_externs += self._keyword_names()
            elif t.kind == DIRECTIVE and t.value in ("accumulate", "accum_extern"):
                self.advance()
                names = self._directive_names(t.line)
                if t.value == "accumulate":
                    accumulates += names
                else:
                    accum_externs += names
            elif self.at_atom("type") and self.toks[self.i + 1].kind == ATOM:
                self.advance()
                name = self.expect(ATOM, what="predicate name")
                ty = self.parse_type()
                self.expect(PUNCT, ".")
                local_sig.append((name.value, ty, (name.line, name.col)))
            elif t.kind == ATOM:
                clauses.append(self._clause())
            else:
                self.error("expected a declaration or clause")
        if module_name is None:
            module_name = "main"
        return ModuleAst(module_name, accumulates, accum_externs,
                         local_sig, clauses, self.filename)

    def _clause(self) -> Clause:
        head_tok = self.expect(ATOM, what="predicate name")
        head_args = self._goal_args()
        body = []
        if self.accept(PUNCT, ":-"):
            body.append(self._goal())
            while self.accept(PUNCT, ","):
                body.append(self._goal())
        self.expect(PUNCT, ".")
        return Clause(head_tok.value, head_args, tuple(body),
                      (head_tok.line, head_tok.col))

    def _goal(self) -> Goal:
        tok = self.expect(ATOM, what="a goal")
        return Goal(tok.value, self._goal_args(), (tok.line, tok.col))

    def _goal_args(self) -> tuple:
        if self.tok.kind == PUNCT and self.tok.value == "(":
            self.advance()
            args = [self._term()]
            while self.accept(PUNCT, ","):
                args.append(self._term())
            self.expect(PUNCT, ")")
            return tuple(args)
        # juxtaposed arguments: one simple term per argument position
        args = []
        while self.tok.kind in _TERM_STARTERS or (self.tok.kind == PUNCT and self.tok.value == "("):
            args.append(self._term())
        return tuple(args)

    def _term(self) -> TermPat:
        t = self.tok
        if t.kind == VAR:
            self.advance()
            return PVar(t.value)
        if t.kind == INT:
            self.advance()
            return PInt(t.value)
        if t.kind == REAL:
            self.advance()
            return PReal(t.value)
        if t.kind == STR:
            self.advance()
            return PStr(t.value)
        if t.kind == ATOM:
            self.advance()
            if self.tok.kind == PUNCT and self.tok.value == "(":
                self.advance()
                args = [self._term()]
                while self.accept(PUNCT, ","):
                    args.append(self._term())
                self.expect(PUNCT, ")")
                return PCmp(t.value, tuple(args))
            return PAtom(t.value)
        if t.kind == PUNCT and t.value == "(":
            self.advance()
            inner = self._term()
            self.expect(PUNCT, ")")
            return inner
        self.error("expected a term")

    def parse_query(self) -> list:
        goals = [self._goal()]
        while self.accept(PUNCT, ","):
            goals.append(self._goal())
        self.accept(PUNCT, ".")
        self.expect(EOF, what="end of query")
        return goals

    # -- spec files ---------------------------------------------------------------

    def parse_spec(self) -> SpecAst:
        spec_name = None
        lib_name = None
        kinds = []
        constructors = []
        native_maps = []
        pred_decls = []  # (lp, entry, type, pos)
        regcl_names = []
        while self.tok.kind != EOF:
            t = self.tok
            if self.at_atom("spec") or (t.kind == DIRECTIVE and t.value == "spec"):
                self.advance()
                spec_name = self.expect(ATOM, what="spec name").value
                self.accept(PUNCT, ".") if t.kind == DIRECTIVE else self.expect(PUNCT, ".")
            elif self.at_atom("lib") or (t.kind == DIRECTIVE and t.value == "lib"):
                self.advance()
                lib_name = self._lib_name()
                self.accept(PUNCT, ".") if t.kind == DIRECTIVE else self.expect(PUNCT, ".")
            elif self.at_atom("kind"):
                self.advance()
                name = self.expect(ATOM, what="kind name").value
                if self.tok.kind == INT:
                    arity = self.advance().value
                else:
                    # `kind pair type -> type -> type.` form: arity = arrow count
                    ty = self.parse_type()
                    arity = len(type_domains(ty))
                self.expect(PUNCT, ".")
                kinds.append((name, arity))
            elif self.at_atom("type"):
                self.advance()
                name = self.expect(ATOM, what="constructor name").value
                ty = self.parse_type()
                self.expect(PUNCT, ".")
                constructors.append((name, ty))
            elif self.at_atom("map"):
                self.advance()
                native_maps.append(self._native_map())
            elif self.at_atom("pred"):
                self.advance()
                lp = self.expect(ATOM, what="predicate name")
                entry = self.expect(ATOM, what="entry symbol base").value
                ty = self.parse_type()
                self.expect(PUNCT, ".")
                pred_decls.append((lp.value, entry, ty, (lp.line, lp.col)))
            elif self.at_atom("regcl"):
                self.advance()
                regcl_names += self._keyword_names()
            else:
                self.error("expected a spec declaration")
        if spec_name is None or lib_name is None:
            self.error("spec file must declare 'spec <name>.' and 'lib <name>.'")
        regcl_set = set(regcl_names)
        preds = [SpecPred(lp, entry, ty, lp in regcl_set)
                 for lp, entry, ty, _ in pred_decls]
        ast = SpecAst(spec_name, lib_name, kinds, constructors,
                      native_maps, preds, self.filename)
        self._validate_spec(ast, pred_decls)
        return ast

    def _native_map(self) -> NativeMap:
        kname = self.expect(ATOM, what="kind name").value
        kargs = []
        while not self.at_atom("record"):
            kargs.append(self._type_atomic())
        self.expect(ATOM, "record")
        rec = self.expect(ATOM, what="record name").value
        self.expect(PUNCT, "{")
        fields = []
        while True:
            fname = self.expect(ATOM, what="field name").value
            fty = self._type_atomic()
            fields.append((fname, fty))
            if not self.accept(PUNCT, ","):
                break
        self.expect(PUNCT, "}")
        self.expect(PUNCT, ".")
        return NativeMap(kname, tuple(kargs), rec, tuple(fields))

    def _validate_spec(self, ast: SpecAst, pred_decls):
        kind_arities = dict(ast.kinds)
        mapped = {m.kind_name for m in ast.native_maps}
        for m in ast.native_maps:
            if m.kind_name not in kind_arities:
                self.error("map for undeclared kind %r" % m.kind_name)
            ctors = [c for c, ty in ast.constructors
                     if isinstance(type_codomain(ty), KindType)
                     and type_codomain(ty).name == m.kind_name]
            if len(ctors) != 1:
                raise ParseError(Diagnostic(
                    "mapped kind %r must have exactly one constructor (has %d)"
                    % (m.kind_name, len(ctors)), self.filename))
        for lp, entry, ty, pos in pred_decls:
            for dom in type_domains(ty):
                for k in _kinds_in(dom):
                    if k not in mapped:
                        raise ParseError(Diagnostic(
                            "predicate %r uses kind %r without a native map" % (lp, k),
                            self.filename, pos[0], pos[1]))


def _kinds_in(t: TypeExpr):
    if isinstance(t, KindType):
        yield t.name
        for a in t.args:
            yield from _kinds_in(a)
    elif isinstance(t, ArrowType):
        yield from _kinds_in(t.dom)
        yield from _kinds_in(t.cod)


# --------------------------------------------------------------------------
# Entry points and formatters


def parse_signature(source: str, filename: str = "<input>") -> SignatureAst:
    return Parser(source, filename).parse_signature()


def parse_module(source: str, filename: str = "<input>") -> ModuleAst:
    return Parser(source, filename).parse_module()


def parse_spec(source: str, filename: str = "<input>") -> SpecAst:
    return Parser(source, filename).parse_spec()


def parse_query(source: str, filename: str = "<query>") -> list:
    return Parser(source, filename).parse_query()


def format_signature(sig: SignatureAst) -> str:
    lines = ["sig %s." % sig.sig_name, "#lib %s." % sig.lib_name, ""]
    for d in sig.externs:
        lines.append("extern type %s %s %s." % (d.lp_name, d.c_name, format_type(d.type)))
    if sig.regcl:
        # declaration order, not set order, for stable output
        ordered = [d.lp_name for d in sig.externs if d.lp_name in sig.regcl]
        lines.append("regcl %s." % ", ".join(ordered))
    return "\n".join(lines) + "\n"
