"""Kernel backend selection.

The compiled extension (comrp._kernels._native) is preferred when it
imported cleanly; the numpy fallback is used otherwise. Set
COMRP_FORCE_FALLBACK=1 to skip the extension, e.g. for benchmarking the
two against each other.
"""

import os

from . import fallback as _fallback

if os.environ.get("COMRP_FORCE_FALLBACK"):
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

pairwise_sq_dists = _impl.pairwise_sq_dists
tred2 = _impl.tred2
tqli = _impl.tqli
lloyd_assign = _impl.lloyd_assign

__all__ = ["BACKEND", "pairwise_sq_dists", "tred2", "tqli", "lloyd_assign"]
