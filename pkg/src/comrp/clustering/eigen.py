"""Dense symmetric eigensolver: Householder tridiagonalization followed by
implicit-shift QL, with eigenvalues ascending and orthonormal eigenvectors.

The heavy loops live in comrp._kernels (compiled when available)."""

import numpy as np

from .. import _kernels
from ..errors import NoConvergence, NotSymmetric

SYMMETRY_TOL = 1e-9
MAX_QL_SWEEPS = 50


def eig_symmetric(a, max_sweeps=MAX_QL_SWEEPS):
    """Eigendecomposition of a symmetric matrix.

    Returns (w, v) with w ascending and a @ v[:, i] == w[i] * v[:, i].
    Symmetry is required within SYMMETRY_TOL relative to the largest entry.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("empty matrix")
    asym = float(np.abs(a - a.T).max())
    if asym > SYMMETRY_TOL * max(1.0, float(np.abs(a).max())):
        raise NotSymmetric(f"max |A - A^T| = {asym:g}")
    a = 0.5 * (a + a.T)
    d, e, q = _kernels.tred2(a)
    try:
        return _kernels.tqli(d, e, q, max_sweeps)
    except RuntimeError as exc:
        raise NoConvergence(str(exc)) from exc
