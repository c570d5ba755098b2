"""Kernel backend selection.

The compiled extension is preferred when importable; set SIGDEX_FORCE_PY=1
to pin the pure-python twin (used by the kernel comparison benchmark and
by CI environments without a compiler).
"""

import os

if os.environ.get("SIGDEX_FORCE_PY"):
    from sigdex import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from sigdex import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        from sigdex import _pykernels as _impl

        BACKEND = "python"

spline_eval = _impl.spline_eval
sigmoid_fill = _impl.sigmoid_fill
pairwise_sum = _impl.pairwise_sum
locate_window = _impl.locate_window
next_free_right = _impl.next_free_right
next_occupied = _impl.next_occupied
prev_occupied = _impl.prev_occupied
