"""Slot-by-slot channel/age simulation.

The hot loop has two interchangeable implementations: a Cython
extension (built at install time) and a pure-Python mirror. The
compiled one is selected at import when present; both consume the same
slot-indexed random arrays and produce identical metrics. Use
``aoisim.bench`` to compare their throughput.
"""

from . import _kernel_py
from ._engine import (COVERAGE_SEED, CycleLog, KernelState, RunMetrics,
                      finalize, run, streams)

try:
    from . import _kernel_cy
    HAVE_COMPILED = True
except ImportError:  # built without the extension; fall back
    _kernel_cy = None
    HAVE_COMPILED = False

ACTIVE_KERNEL = "compiled" if HAVE_COMPILED else "python"


def get_kernel(name=None):
    """Resolve a kernel name to its run_block driver.

    ``None``/"auto" picks the compiled kernel when available.
    """
    if name in (None, "auto"):
        name = ACTIVE_KERNEL
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel is not built; reinstall "
                               "with the extension or use kernel='python'")
        return _kernel_cy.run_block
    if name == "python":
        return _kernel_py.run_block
    raise ValueError(f"unknown kernel {name!r}")


__all__ = ["run", "finalize", "streams", "RunMetrics", "CycleLog",
           "KernelState", "get_kernel", "HAVE_COMPILED", "ACTIVE_KERNEL",
           "COVERAGE_SEED"]
