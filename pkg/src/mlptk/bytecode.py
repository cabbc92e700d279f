"""Bytecode image model, instruction set, and the .lpx wire format.

An image is a segmented container: constant pool, term-template pool,
extern table, predicate table, code.  The serialized form is normative
and documented in docs/bytecode.md: little-endian, magic `MLPX`, u16
version, then the five segments in fixed order, each prefixed by a u32
entry count.  Strings are u32 length + UTF-8 bytes, opcodes one byte,
register/index operands u16, labels and code offsets u32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

from .diagnostics import Diagnostic, ToolError

FORMAT_MAGIC = b"MLPX"
FORMAT_VERSION = 1
MAX_REGISTERS = 64

# lib_name prefix marking in-process libraries resolved without the
# platform loader (see loader.resolve_host)
HOST_LIB_PREFIX = "host:"


class BytecodeError(ToolError):
    def __init__(self, message):
        super().__init__(Diagnostic(message))


class Op(IntEnum):
    ALLOCATE = 0x01       # a = save-slot count
    DEALLOCATE = 0x02
    CALL = 0x03           # a = const idx of name symbol, b = arity
    EXECUTE = 0x04        # a = const idx of name symbol, b = arity
    PROCEED = 0x05
    TRY_ME_ELSE = 0x06    # a = code offset of alternative, b = saved-register count
    RETRY_ME_ELSE = 0x07  # a = code offset of alternative
    TRUST_ME = 0x08
    FAIL = 0x09
    GET_TEMPLATE = 0x0A   # a = template idx, b = register
    PUT_TEMPLATE = 0x0B   # a = template idx, b = register
    MOVE_REG = 0x0C       # a = source register, b = destination register
    STORE_ENV = 0x0D      # a = register, b = env save slot
    LOAD_ENV = 0x0E       # a = env save slot, b = register
    INTRINSIC = 0x0F      # a = intrinsic id
    CALL_EXTERN = 0x10    # a = extern table index (handle index after load)
    EXECUTE_EXTERN = 0x11 # a = extern table index (handle index after load)
    HALT = 0x12


class Intrinsic(IntEnum):
    SOLVE = 0
    NOT = 1
    EVAL = 2
    LT = 3
    GT = 4
    LE = 5
    GE = 6
    EQ_NUM = 7


INTRINSIC_NAMES = {
    Intrinsic.SOLVE: "solve",
    Intrinsic.NOT: "not",
    Intrinsic.EVAL: "eval",
    Intrinsic.LT: "lt",
    Intrinsic.GT: "gt",
    Intrinsic.LE: "le",
    Intrinsic.GE: "ge",
    Intrinsic.EQ_NUM: "eq_num",
}

# (opcode, operand-width spec): H = u16, I = u32
_OPERANDS = {
    Op.ALLOCATE: "H",
    Op.DEALLOCATE: "",
    Op.CALL: "HH",
    Op.EXECUTE: "HH",
    Op.PROCEED: "",
    Op.TRY_ME_ELSE: "IH",
    Op.RETRY_ME_ELSE: "I",
    Op.TRUST_ME: "",
    Op.FAIL: "",
    Op.GET_TEMPLATE: "HH",
    Op.PUT_TEMPLATE: "HH",
    Op.MOVE_REG: "HH",
    Op.STORE_ENV: "HH",
    Op.LOAD_ENV: "HH",
    Op.INTRINSIC: "H",
    Op.CALL_EXTERN: "H",
    Op.EXECUTE_EXTERN: "H",
    Op.HALT: "",
}


@dataclass(frozen=True)
class Instruction:
    op: Op
    a: int = 0
    b: int = 0


# Constant pool entries are tagged pairs: ("sym"|"int"|"real"|"str", value).
CONST_TAGS = ("sym", "int", "real", "str")


class Template:
    """Term template node.  Leaves are clause-local variable slots or
    constant-pool references; interior nodes are compounds."""
    __slots__ = ()


@dataclass(frozen=True)
class TSlot(Template):
    slot: int


@dataclass(frozen=True)
class TConst(Template):
    const: int


@dataclass(frozen=True)
class TCmp(Template):
    functor_const: int
    args: tuple


@dataclass(frozen=True)
class ExternEntry:
    lib_name: str
    entry_symbol: str
    pred_name: str
    arity: int
    regcl: bool


@dataclass(frozen=True)
class PredEntry:
    name: str
    arity: int
    offset: int


@dataclass
class BytecodeImage:
    version: int = FORMAT_VERSION
    const_pool: list = field(default_factory=list)
    template_pool: list = field(default_factory=list)
    extern_table: list = field(default_factory=list)
    predicate_table: list = field(default_factory=list)
    code: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, BytecodeImage):
            return NotImplemented
        return (self.version == other.version
                and self.const_pool == other.const_pool
                and self.template_pool == other.template_pool
                and self.extern_table == other.extern_table
                and self.predicate_table == other.predicate_table
                and self.code == other.code)


def shift_template(t: Template, const_off: int) -> Template:
    """Rebase every constant-pool reference inside a template."""
    if isinstance(t, TSlot):
        return t
    if isinstance(t, TConst):
        return TConst(t.const + const_off)
    return TCmp(t.functor_const + const_off,
                tuple(shift_template(a, const_off) for a in t.args))


# --------------------------------------------------------------------------
# Validation


def _template_refs(t: Template):
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, TConst):
            yield ("const", n.const)
        elif isinstance(n, TCmp):
            yield ("const", n.functor_const)
            stack.extend(n.args)
        elif isinstance(n, TSlot):
            yield ("slot", n.slot)
        else:
            raise BytecodeError("unknown template node %r" % (n,))


def validate(img: BytecodeImage) -> None:
    """Eagerly check all cross-segment references; raise BytecodeError."""
    n_const = len(img.const_pool)
    n_tmpl = len(img.template_pool)
    n_ext = len(img.extern_table)
    n_code = len(img.code)
    for i, entry in enumerate(img.const_pool):
        if not (isinstance(entry, tuple) and len(entry) == 2 and entry[0] in CONST_TAGS):
            raise BytecodeError("const pool entry %d malformed: %r" % (i, entry))
    for i, t in enumerate(img.template_pool):
        for kind, ref in _template_refs(t):
            if kind == "const" and not 0 <= ref < n_const:
                raise BytecodeError("template %d references const %d (pool size %d)"
                                    % (i, ref, n_const))
    for e in img.extern_table:
        if not e.entry_symbol:
            raise BytecodeError("extern entry for %s has empty entry symbol" % e.pred_name)
        if e.arity < 0:
            raise BytecodeError("extern entry for %s has negative arity" % e.pred_name)
    for p in img.predicate_table:
        if not 0 <= p.offset < n_code:
            raise BytecodeError("predicate %s/%d offset %d out of range"
                                % (p.name, p.arity, p.offset))
    for i, ins in enumerate(img.code):
        op = ins.op
        if op in (Op.GET_TEMPLATE, Op.PUT_TEMPLATE):
            if not 0 <= ins.a < n_tmpl:
                raise BytecodeError("instruction %d: template index %d out of range" % (i, ins.a))
            if not 1 <= ins.b <= MAX_REGISTERS:
                raise BytecodeError("instruction %d: register A%d out of range" % (i, ins.b))
        elif op in (Op.CALL, Op.EXECUTE):
            if not 0 <= ins.a < n_const:
                raise BytecodeError("instruction %d: const index %d out of range" % (i, ins.a))
            if img.const_pool[ins.a][0] != "sym":
                raise BytecodeError("instruction %d: call target const is not a symbol" % i)
        elif op in (Op.CALL_EXTERN, Op.EXECUTE_EXTERN):
            if not 0 <= ins.a < n_ext:
                raise BytecodeError("instruction %d: extern index %d >= table length %d"
                                    % (i, ins.a, n_ext))
        elif op in (Op.TRY_ME_ELSE, Op.RETRY_ME_ELSE):
            if not 0 <= ins.a < n_code:
                raise BytecodeError("instruction %d: label %d out of range" % (i, ins.a))
        elif op in (Op.MOVE_REG,):
            if not (1 <= ins.a <= MAX_REGISTERS and 1 <= ins.b <= MAX_REGISTERS):
                raise BytecodeError("instruction %d: register out of range" % i)
        elif op == Op.STORE_ENV:
            if not 1 <= ins.a <= MAX_REGISTERS:
                raise BytecodeError("instruction %d: register out of range" % i)
        elif op == Op.LOAD_ENV:
            if not 1 <= ins.b <= MAX_REGISTERS:
                raise BytecodeError("instruction %d: register out of range" % i)
        elif op == Op.INTRINSIC:
            if ins.a not in list(Intrinsic):
                raise BytecodeError("instruction %d: unknown intrinsic id %d" % (i, ins.a))


# --------------------------------------------------------------------------
# Serialization


class _Writer:
    def __init__(self):
        self.parts = []

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u16(self, v):
        if not 0 <= v <= 0xFFFF:
            raise BytecodeError("operand %d does not fit in u16" % v)
        self.parts.append(struct.pack("<H", v))

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def i64(self, v):
        self.parts.append(struct.pack("<q", v))

    def f64(self, v):
        self.parts.append(struct.pack("<d", v))

    def string(self, s: str):
        data = s.encode("utf-8")
        self.u32(len(data))
        self.parts.append(data)

    def bytes(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n, what):
        if self.pos + n > len(self.data):
            raise BytecodeError("truncated %s at byte %d" % (what, self.pos))
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what="field"):
        return struct.unpack("<B", self._take(1, what))[0]

    def u16(self, what="field"):
        return struct.unpack("<H", self._take(2, what))[0]

    def u32(self, what="field"):
        return struct.unpack("<I", self._take(4, what))[0]

    def i64(self, what="field"):
        return struct.unpack("<q", self._take(8, what))[0]

    def f64(self, what="field"):
        return struct.unpack("<d", self._take(8, what))[0]

    def string(self, what="string"):
        n = self.u32(what + " length")
        return self._take(n, what).decode("utf-8")


def _write_template(w: _Writer, t: Template):
    if isinstance(t, TSlot):
        w.u8(0)
        w.u16(t.slot)
    elif isinstance(t, TConst):
        w.u8(1)
        w.u16(t.const)
    elif isinstance(t, TCmp):
        w.u8(2)
        w.u16(t.functor_const)
        w.u16(len(t.args))
        for a in t.args:
            _write_template(w, a)
    else:
        raise BytecodeError("unknown template node %r" % (t,))


def _read_template(r: _Reader, depth=0) -> Template:
    if depth > 64:
        raise BytecodeError("template nesting too deep")
    tag = r.u8("template tag")
    if tag == 0:
        return TSlot(r.u16("template slot"))
    if tag == 1:
        return TConst(r.u16("template const"))
    if tag == 2:
        functor = r.u16("template functor")
        arity = r.u16("template arity")
        if arity == 0:
            raise BytecodeError("compound template with zero arity")
        return TCmp(functor, tuple(_read_template(r, depth + 1) for _ in range(arity)))
    raise BytecodeError("unknown template tag %d" % tag)


_CONST_TAG_CODE = {"sym": 0, "int": 1, "real": 2, "str": 3}
_CONST_CODE_TAG = {v: k for k, v in _CONST_TAG_CODE.items()}


def serialize(img: BytecodeImage) -> bytes:
    validate(img)
    w = _Writer()
    w.parts.append(FORMAT_MAGIC)
    w.u16(img.version)
    w.u32(len(img.const_pool))
    for tag, val in img.const_pool:
        w.u8(_CONST_TAG_CODE[tag])
        if tag in ("sym", "str"):
            w.string(val)
        elif tag == "int":
            w.i64(val)
        else:
            w.f64(val)
    w.u32(len(img.template_pool))
    for t in img.template_pool:
        _write_template(w, t)
    w.u32(len(img.extern_table))
    for e in img.extern_table:
        w.string(e.lib_name)
        w.string(e.entry_symbol)
        w.string(e.pred_name)
        w.u16(e.arity)
        w.u8(1 if e.regcl else 0)
    w.u32(len(img.predicate_table))
    for p in img.predicate_table:
        w.string(p.name)
        w.u16(p.arity)
        w.u32(p.offset)
    w.u32(len(img.code))
    for ins in img.code:
        w.u8(int(ins.op))
        widths = _OPERANDS[ins.op]
        for width, operand in zip(widths, (ins.a, ins.b)):
            (w.u16 if width == "H" else w.u32)(operand)
    return w.bytes()


def deserialize(data: bytes) -> BytecodeImage:
    r = _Reader(data)
    magic = r._take(4, "magic")
    if magic != FORMAT_MAGIC:
        raise BytecodeError("bad magic %r (expected %r)" % (magic, FORMAT_MAGIC))
    version = r.u16("version")
    if version != FORMAT_VERSION:
        raise BytecodeError("unsupported format version %d" % version)
    img = BytecodeImage(version=version)
    n = r.u32("const pool count")
    for _ in range(n):
        code = r.u8("const tag")
        if code not in _CONST_CODE_TAG:
            raise BytecodeError("unknown const tag %d" % code)
        tag = _CONST_CODE_TAG[code]
        if tag in ("sym", "str"):
            img.const_pool.append((tag, r.string("const")))
        elif tag == "int":
            img.const_pool.append((tag, r.i64("const")))
        else:
            img.const_pool.append((tag, r.f64("const")))
    n = r.u32("template pool count")
    for _ in range(n):
        img.template_pool.append(_read_template(r))
    n = r.u32("extern table count")
    for _ in range(n):
        lib = r.string("lib name")
        sym = r.string("entry symbol")
        pred = r.string("pred name")
        arity = r.u16("extern arity")
        regcl = r.u8("regcl flag")
        if regcl not in (0, 1):
            raise BytecodeError("bad regcl flag %d" % regcl)
        img.extern_table.append(ExternEntry(lib, sym, pred, arity, bool(regcl)))
    n = r.u32("predicate table count")
    for _ in range(n):
        name = r.string("pred name")
        arity = r.u16("pred arity")
        offset = r.u32("pred offset")
        img.predicate_table.append(PredEntry(name, arity, offset))
    n = r.u32("code count")
    for _ in range(n):
        opcode = r.u8("opcode")
        try:
            op = Op(opcode)
        except ValueError:
            raise BytecodeError("unknown opcode 0x%02x" % opcode)
        widths = _OPERANDS[op]
        operands = [0, 0]
        for k, width in enumerate(widths):
            operands[k] = r.u16("operand") if width == "H" else r.u32("operand")
        img.code.append(Instruction(op, operands[0], operands[1]))
    if r.pos != len(data):
        raise BytecodeError("%d trailing bytes after image" % (len(data) - r.pos))
    validate(img)
    return img


# --------------------------------------------------------------------------
# Disassembly


def _format_template(img: BytecodeImage, t: Template) -> str:
    if isinstance(t, TSlot):
        return "?%d" % t.slot
    if isinstance(t, TConst):
        tag, val = img.const_pool[t.const]
        return str(val) if tag != "str" else '"%s"' % val
    return "%s(%s)" % (img.const_pool[t.functor_const][1],
                       ", ".join(_format_template(img, a) for a in t.args))


def disassemble_instruction(img: BytecodeImage, ins: Instruction) -> str:
    op = ins.op
    if op == Op.ALLOCATE:
        return "allocate %d" % ins.a
    if op == Op.DEALLOCATE:
        return "deallocate"
    if op in (Op.CALL, Op.EXECUTE):
        name = img.const_pool[ins.a][1]
        return "%s %s/%d" % ("call" if op == Op.CALL else "execute", name, ins.b)
    if op == Op.PROCEED:
        return "proceed"
    if op == Op.TRY_ME_ELSE:
        return "try_me_else @%d" % ins.a
    if op == Op.RETRY_ME_ELSE:
        return "retry_me_else @%d" % ins.a
    if op == Op.TRUST_ME:
        return "trust_me"
    if op == Op.FAIL:
        return "fail"
    if op in (Op.GET_TEMPLATE, Op.PUT_TEMPLATE):
        mnem = "get_template" if op == Op.GET_TEMPLATE else "put_template"
        return "%s t%d, A%d ; %s" % (mnem, ins.a, ins.b,
                                     _format_template(img, img.template_pool[ins.a]))
    if op == Op.MOVE_REG:
        return "move_reg A%d, A%d" % (ins.a, ins.b)
    if op == Op.STORE_ENV:
        return "store_env A%d, e%d" % (ins.a, ins.b)
    if op == Op.LOAD_ENV:
        return "load_env e%d, A%d" % (ins.a, ins.b)
    if op == Op.INTRINSIC:
        return "intrinsic %s" % INTRINSIC_NAMES[Intrinsic(ins.a)]
    if op in (Op.CALL_EXTERN, Op.EXECUTE_EXTERN):
        mnem = "call_extern" if op == Op.CALL_EXTERN else "execute_extern"
        e = img.extern_table[ins.a]
        return "%s %d ; %s/%d @ %s:%s" % (mnem, ins.a, e.pred_name, e.arity,
                                          e.lib_name, e.entry_symbol)
    if op == Op.HALT:
        return "halt"
    raise BytecodeError("unknown opcode %r" % op)


def disassemble(img: BytecodeImage) -> str:
    entry_points = {}
    for p in img.predicate_table:
        entry_points.setdefault(p.offset, []).append("%s/%d" % (p.name, p.arity))
    lines = []
    for i, ins in enumerate(img.code):
        for label in entry_points.get(i, ()):
            lines.append("%s:" % label)
        lines.append("  %4d  %s" % (i, disassemble_instruction(img, ins)))
    return "\n".join(lines) + ("\n" if lines else "")
