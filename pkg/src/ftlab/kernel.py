"""Backend selection for the simulation engine.

The compiled module is used when it imports; otherwise, or when the environment
variable ``FTLAB_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
pure-Python engine is used.  Both expose the same functions and constants.
"""

import os

from ftlab import _kernel_py

_force_python = os.environ.get("FTLAB_PURE_PYTHON", "") not in ("", "0")

compiled = None
if not _force_python:
    try:
        from ftlab import _kernel as compiled
    except ImportError:
        compiled = None

impl = compiled if compiled is not None else _kernel_py
BACKEND = impl.BACKEND

ONEMAX = _kernel_py.ONEMAX
LEADINGONES = _kernel_py.LEADINGONES
MST = _kernel_py.MST
INIT_WORST = _kernel_py.INIT_WORST
INIT_UNIFORM = _kernel_py.INIT_UNIFORM
INIT_GIVEN = _kernel_py.INIT_GIVEN

run_single = impl.run_single
run_batch = impl.run_batch
simulate = _kernel_py.simulate


def backends():
    """Mapping of available backend names to modules."""
    out = {"python": _kernel_py}
    if compiled is not None:
        out["cython"] = compiled
    return out
