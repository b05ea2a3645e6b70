"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set ``BATCHSTATE_PURE=1`` to force the pure-Python kernels even when the
compiled core is installed (useful for debugging and benchmarking).
"""

import os

from batchstate._kernels import _pure

if os.environ.get("BATCHSTATE_PURE", "") not in ("", "0"):
    impl = _pure
    USING_COMPILED = False
else:
    try:
        from batchstate._kernels import _core as impl
        USING_COMPILED = True
    except ImportError:
        impl = _pure
        USING_COMPILED = False

FIT_PLATEAU = _pure.FIT_PLATEAU
FIT_MAX_ITERS = _pure.FIT_MAX_ITERS
FIT_DIVERGED = _pure.FIT_DIVERGED
FIT_STALLED = _pure.FIT_STALLED

bt_factor = impl.bt_factor
bt_solve = impl.bt_solve
henon_smooth_loss_grad = impl.henon_smooth_loss_grad
henon_smooth_loss = impl.henon_smooth_loss
henon_full_loss = impl.henon_full_loss
henon_fit = impl.henon_fit
