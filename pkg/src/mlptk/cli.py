"""The `mlp` command: compile, link, run, inspect, stubgen.

Stage boundaries are file-based: compile and link produce .lpx images,
run loads one and executes queries.  Diagnostics go to stderr, program
output to stdout.  Exit codes: 0 success, 1 error, 2 query with no
answers.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, bytecode, frontend, linker, loader, stubgen, vm
from .diagnostics import ToolError


def _fail(messages, code=1):
    if not isinstance(messages, (list, tuple)):
        messages = [messages]
    for m in messages:
        print(str(m), file=sys.stderr)
    return code


def _read_text(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _read_image(path):
    with open(path, "rb") as f:
        return bytecode.deserialize(f.read())


def _find_on_path(name, dirs, exts):
    for d in dirs:
        for ext in exts:
            p = os.path.join(d, name + ext)
            if os.path.isfile(p):
                return p
    return None


def cmd_compile(args):
    try:
        mod = frontend.parse_module(_read_text(args.module), args.module)
    except OSError as exc:
        return _fail("cannot read %s: %s" % (args.module, exc.strerror))
    except ToolError as exc:
        return _fail(exc.diagnostics)

    search = list(args.sig_path) + [os.path.dirname(os.path.abspath(args.module))]
    sigs = {}
    accum_modules = {}
    try:
        for name in mod.accum_externs:
            p = _find_on_path(name, search, (".sig",))
            if p is None:
                return _fail("cannot find signature %s.sig for accum_extern "
                             "(searched: %s)" % (name, ", ".join(search)))
            sigs[name] = frontend.parse_signature(_read_text(p), p)
        for name in mod.accumulates:
            p = _find_on_path(name, search, (".mod",))
            if p is None:
                return _fail("cannot find module %s.mod for accumulate "
                             "(searched: %s)" % (name, ", ".join(search)))
            accum_modules[name] = frontend.parse_module(_read_text(p), p)
    except ToolError as exc:
        return _fail(exc.diagnostics)

    try:
        from .compiler import compile_module
        img = compile_module(mod, sigs, accum_modules,
                             conservative_regs=args.conservative_regs)
    except ToolError as exc:
        return _fail(exc.diagnostics)

    out = args.output or os.path.splitext(args.module)[0] + ".lpx"
    with open(out, "wb") as f:
        f.write(bytecode.serialize(img))
    return 0


def cmd_link(args):
    images = []
    try:
        for p in args.inputs:
            images.append(_read_image(p))
    except OSError as exc:
        return _fail("cannot read %s: %s" % (p, exc.strerror))
    except ToolError as exc:
        return _fail(exc.diagnostics)
    try:
        out_img = linker.link(images)
    except ToolError as exc:
        return _fail(exc.diagnostics)
    with open(args.output, "wb") as f:
        f.write(bytecode.serialize(out_img))
    return 0


def _lib_paths(args):
    paths = list(args.lib_path)
    env = os.environ.get("MLP_LIB_PATH")
    if env:
        paths += [p for p in env.split(":") if p]
    return paths


def cmd_run(args):
    try:
        img = _read_image(args.program)
    except OSError as exc:
        return _fail("cannot read %s: %s" % (args.program, exc.strerror))
    except ToolError as exc:
        return _fail(exc.diagnostics)
    try:
        goals = frontend.parse_query(args.query)
    except ToolError as exc:
        return _fail(exc.diagnostics)
    try:
        prog = loader.load(img, search_paths=_lib_paths(args))
    except loader.LoaderError as exc:
        return _fail(exc)

    machine = vm.Machine(prog, max_steps=args.max_steps)
    count = 0
    try:
        for ans in machine.solve(goals):
            if count:
                print(";")
            print(vm.format_answer(ans))
            count += 1
            if not args.all:
                break
    except ToolError as exc:
        return _fail(exc.diagnostics)
    except vm.BudgetExhausted as exc:
        return _fail(exc)
    except vm.MachineError as exc:
        return _fail(exc)
    if count == 0:
        print("no", file=sys.stderr)
        return 2
    return 0


def cmd_inspect(args):
    try:
        img = _read_image(args.file)
    except OSError as exc:
        return _fail("cannot read %s: %s" % (args.file, exc.strerror))
    except ToolError as exc:
        return _fail(exc.diagnostics)

    show_all = not (args.externs or args.code or args.header)
    if args.header or show_all:
        print("magic: %s  version: %d" % (bytecode.FORMAT_MAGIC.decode(),
                                          bytecode.FORMAT_VERSION))
        print("constants: %d  templates: %d  externs: %d  predicates: %d  "
              "instructions: %d"
              % (len(img.const_pool), len(img.template_pool),
                 len(img.extern_table), len(img.predicate_table),
                 len(img.code)))
    if args.externs or show_all:
        for i, e in enumerate(img.extern_table):
            print("extern %d: %s/%d  lib=%s  symbol=%s  regcl=%s"
                  % (i, e.pred_name, e.arity, e.lib_name, e.entry_symbol,
                     "yes" if e.regcl else "no"))
    if args.code or show_all:
        print(bytecode.disassemble(img), end="")
    return 0


def cmd_stubgen(args):
    try:
        spec = frontend.parse_spec(_read_text(args.spec), args.spec)
        outputs = stubgen.generate_all(spec)
    except OSError as exc:
        return _fail("cannot read %s: %s" % (args.spec, exc.strerror))
    except ToolError as exc:
        return _fail(exc.diagnostics)
    except stubgen.StubgenError as exc:
        return _fail(exc)
    os.makedirs(args.output, exist_ok=True)
    for name, content in outputs.items():
        with open(os.path.join(args.output, name), "w", encoding="utf-8") as f:
            f.write(content)
        print(os.path.join(args.output, name))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="mlp",
                                 description="miniature logic-programming toolchain")
    ap.add_argument("--version", action="version", version="mlp " + __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a module to bytecode")
    p.add_argument("module")
    p.add_argument("--sig-path", action="append", default=[], metavar="DIR",
                   help="directory searched for .sig and .mod dependencies")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--conservative-regs", action="store_true",
                   help="treat every call as register-clobbering")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("link", help="link bytecode images into one")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_link)

    p = sub.add_parser("run", help="load a program and run a query")
    p.add_argument("program")
    p.add_argument("-q", "--query", required=True)
    p.add_argument("--lib-path", action="append", default=[], metavar="DIR")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--all", action="store_true",
                   help="print every answer instead of the first")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("inspect", help="dump a bytecode file")
    p.add_argument("file")
    p.add_argument("--externs", action="store_true")
    p.add_argument("--code", action="store_true")
    p.add_argument("--header", action="store_true")
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("stubgen", help="generate signature and wrapper stubs")
    p.add_argument("spec")
    p.add_argument("-o", "--output", required=True, metavar="DIR")
    p.set_defaults(fn=cmd_stubgen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
