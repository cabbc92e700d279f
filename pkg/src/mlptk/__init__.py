"""mlptk: a miniature logic-programming toolchain.

Compile clause modules to bytecode, link images, load them (resolving
extern predicates against shared libraries or in-process host
namespaces), and run queries on a register-based abstract machine.
"""

__version__ = "0.1.0"
