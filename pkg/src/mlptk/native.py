"""ctypes bridge for native plugins: the host call table handed to
`mlp_init`, matching include/mlp_plugin.h slot for slot.

Callbacks route to the host API bound to the machine currently inside
an extern invocation.  They must never let a Python exception cross the
C boundary; faults are recorded on the machine and surface as failure.
"""

from __future__ import annotations

import ctypes

from . import hostapi

_GET_INT = ctypes.CFUNCTYPE(ctypes.c_int64, ctypes.c_int32)
_GET_REAL = ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_int32)
_GET_STRING_LEN = ctypes.CFUNCTYPE(ctypes.c_int64, ctypes.c_int32)
_GET_STRING = ctypes.CFUNCTYPE(ctypes.c_int64, ctypes.c_int32,
                               ctypes.POINTER(ctypes.c_char), ctypes.c_int64)
_RETURN_INT = ctypes.CFUNCTYPE(None, ctypes.c_int32, ctypes.c_int64)
_RETURN_REAL = ctypes.CFUNCTYPE(None, ctypes.c_int32, ctypes.c_double)
_RETURN_STRING = ctypes.CFUNCTYPE(None, ctypes.c_int32,
                                  ctypes.POINTER(ctypes.c_char), ctypes.c_int64)
_FAIL = ctypes.CFUNCTYPE(None)


class MlpHostTable(ctypes.Structure):
    # Slot order is normative and versioned; see include/mlp_plugin.h.
    _fields_ = [
        ("api_version", ctypes.c_uint32),
        ("get_int", _GET_INT),
        ("get_real", _GET_REAL),
        ("get_string_len", _GET_STRING_LEN),
        ("get_string", _GET_STRING),
        ("return_int", _RETURN_INT),
        ("return_real", _RETURN_REAL),
        ("return_string", _RETURN_STRING),
        ("fail", _FAIL),
    ]


def _guard(default):
    def wrap(fn):
        def call(*args):
            try:
                return fn(hostapi.current_api(), *args)
            except Exception:
                try:
                    hostapi.current_api().fail()
                except Exception:
                    pass
                return default
        return call
    return wrap


@_guard(0)
def _cb_get_int(api, i):
    return api.get_int(i)


@_guard(0.0)
def _cb_get_real(api, i):
    return api.get_real(i)


@_guard(0)
def _cb_get_string_len(api, i):
    return api.get_string_len(i)


@_guard(0)
def _cb_get_string(api, i, buf, cap):
    data = api.get_string(i)
    n = min(len(data), max(cap, 0))
    ctypes.memmove(buf, data, n)
    return n


@_guard(None)
def _cb_return_int(api, i, v):
    api.return_int(i, v)


@_guard(None)
def _cb_return_real(api, i, v):
    api.return_real(i, v)


@_guard(None)
def _cb_return_string(api, i, data, length):
    api.return_string(i, ctypes.string_at(data, length))


@_guard(None)
def _cb_fail(api):
    api.fail()


_TABLE = None
_KEEPALIVE = []


def host_table() -> MlpHostTable:
    """The process-wide table passed to every plugin's mlp_init."""
    global _TABLE
    if _TABLE is None:
        slots = [
            _GET_INT(_cb_get_int),
            _GET_REAL(_cb_get_real),
            _GET_STRING_LEN(_cb_get_string_len),
            _GET_STRING(_cb_get_string),
            _RETURN_INT(_cb_return_int),
            _RETURN_REAL(_cb_return_real),
            _RETURN_STRING(_cb_return_string),
            _FAIL(_cb_fail),
        ]
        _KEEPALIVE.extend(slots)
        _TABLE = MlpHostTable(hostapi.API_VERSION, *slots)
    return _TABLE
