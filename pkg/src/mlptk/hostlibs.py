"""Built-in `host:` pseudo-library namespaces.

These resolve in-process without touching the platform loader, so the
whole toolchain test surface runs with no compiled plugin.  Callables
take the current HostApi and follow the same contract native entry
points do: read inputs with get_*, produce outputs with return_*, and
reject inputs with fail().
"""

from __future__ import annotations

from .hostapi import HostApi
from .terms import Int

_NAMESPACES: dict[str, dict] = {}


def register_host_callable(lib_name: str, symbol: str, fn) -> None:
    if not lib_name.startswith("host:"):
        raise ValueError("host library names must start with 'host:'")
    _NAMESPACES.setdefault(lib_name, {})[symbol] = fn


def host_namespace(lib_name: str):
    return _NAMESPACES.get(lib_name)


def host_callable(lib_name: str, symbol: str):
    ns = _NAMESPACES.get(lib_name)
    if ns is None:
        return None
    return ns.get(symbol)


# -- host:test -- plugins exercised by the primary test suite ---------------


def _echo_int(api: HostApi):
    api.return_int(2, api.get_int(1))


def _echo_real(api: HostApi):
    api.return_real(2, api.get_real(1))


def _echo_str(api: HostApi):
    api.return_string(2, api.get_string(1))


def _dec_int(api: HostApi):
    api.return_int(2, api.get_int(1) - 1)


def _add_int(api: HostApi):
    api.return_int(3, api.get_int(1) + api.get_int(2))


def _always_fail(api: HostApi):
    api.fail()


def _check_positive(api: HostApi):
    if api.get_int(1) <= 0:
        api.fail()


def _noop(api: HostApi):
    pass


def _clobber_args(api: HostApi):
    # Deliberately register-clobbering: computes like add_int but tramples
    # every argument register on the way out.  Must be declared regcl.
    total = api.get_int(1) + api.get_int(2)
    api.return_int(3, total)
    m = api._machine
    for i in range(min(8, len(m.regs))):
        m.regs[i] = Int(-999)


register_host_callable("host:test", "echo_int", _echo_int)
register_host_callable("host:test", "echo_real", _echo_real)
register_host_callable("host:test", "echo_str", _echo_str)
register_host_callable("host:test", "dec_int", _dec_int)
register_host_callable("host:test", "add_int", _add_int)
register_host_callable("host:test", "always_fail", _always_fail)
register_host_callable("host:test", "check_positive", _check_positive)
register_host_callable("host:test", "noop", _noop)
register_host_callable("host:test", "clobber_args", _clobber_args)

# Callables that preserve argument registers (everything except the
# designated clobbering one); the preservation harness iterates these.
PRESERVING_TEST_SYMBOLS = ("echo_int", "echo_real", "echo_str", "dec_int",
                           "add_int", "always_fail", "check_positive", "noop")
CLOBBERING_TEST_SYMBOL = "clobber_args"


# -- host:intrinsics -- in-simulator helpers mirrored as host callables -----


def _host_sin(api: HostApi):
    import math
    api.return_real(2, math.sin(api.get_real(1)))


def _host_abs_int(api: HostApi):
    api.return_int(2, abs(api.get_int(1)))


register_host_callable("host:intrinsics", "sin", _host_sin)
register_host_callable("host:intrinsics", "abs_int", _host_abs_int)
