"""Hot-loop backends for the fused simulate-and-learn segment runner.

The compiled Cython kernel is preferred when present; the pure-numpy
implementation is the fallback. Selection happens once at import and can
be pinned with the ``BELIEFGRAPH_KERNELS`` environment variable
(``compiled`` or ``python``). Both backends implement the same
``run_segment`` contract and agree to floating-point roundoff.
"""
import os

_requested = os.environ.get("BELIEFGRAPH_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "compiled", "c"):
    try:
        from ._loop_cy import run_segment

        BACKEND = "compiled"
    except ImportError:
        if _requested in ("compiled", "c"):
            raise
        from ._loop_py import run_segment

        BACKEND = "python"
elif _requested in ("python", "py"):
    from ._loop_py import run_segment

    BACKEND = "python"
else:
    raise ImportError(
        f"unknown BELIEFGRAPH_KERNELS value {_requested!r}; "
        "use 'auto', 'compiled', or 'python'"
    )

__all__ = ["run_segment", "BACKEND"]
