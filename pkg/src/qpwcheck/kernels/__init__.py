"""Hot numerical kernels with a compiled core and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are selected. Setting the environment
variable ``QPWCHECK_PURE_PYTHON=1`` forces the fallback.

Both backends expose the same three functions:

``symmetric_tensor_mix(phases, weights, D)``
    weighted sum of tensor products of symmetric-state projectors, returned on
    the difference grid (see :func:`expand_difference_grid`);
``symmetric_fidelities(diag_sums, phases)``
    <Phi|rho|Phi> for a batch of symmetric states;
``first_failure(pass_prob, uniforms)``
    first failed round of each simulated session.
"""
import os
from types import SimpleNamespace

import numpy as np

from . import _pykernels

_python = SimpleNamespace(
    name="python",
    symmetric_tensor_mix=_pykernels.symmetric_tensor_mix,
    symmetric_fidelities=_pykernels.symmetric_fidelities,
    first_failure=_pykernels.first_failure,
)

try:
    from . import _ckernels
except ImportError:
    _ckernels = None
    _cython = None
else:
    _cython = SimpleNamespace(
        name="cython",
        symmetric_tensor_mix=_ckernels.symmetric_tensor_mix,
        symmetric_fidelities=_ckernels.symmetric_fidelities,
        first_failure=_ckernels.first_failure,
    )

if _cython is not None and not os.environ.get("QPWCHECK_PURE_PYTHON"):
    _active = _cython
else:
    _active = _python

BACKEND = _active.name
symmetric_tensor_mix = _active.symmetric_tensor_mix
symmetric_fidelities = _active.symmetric_fidelities
first_failure = _active.first_failure


def available_backends():
    return [b.name for b in (_cython, _python) if b is not None]


def get_backend(name):
    """Return the namespace of kernels for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _python
    if name == "cython":
        if _cython is None:
            raise ImportError("compiled kernels are not built")
        return _cython
    raise ValueError(f"unknown backend {name!r}")


def diagonal_sums(matrix):
    """g[Δ + D - 1] = sum of matrix[l, m] over l - m = Δ."""
    m = np.asarray(matrix, dtype=np.complex128)
    D = m.shape[0]
    # np.trace offset k sums m[i, i + k], i.e. l - m = -k
    return np.array([np.trace(m, offset=-delta) for delta in range(-(D - 1), D)])


def expand_difference_grid(grid, D, k):
    """Scatter a difference-grid array into the full D^k x D^k matrix."""
    width = 2 * D - 1
    l = np.indices((D,) * k).reshape(k, -1)  # (k, D^k), row-major multi-index
    diff = l[:, :, None] - l[:, None, :] + (D - 1)  # (k, D^k, D^k)
    flat = np.zeros(diff.shape[1:], dtype=np.int64)
    for f in range(k):
        flat = flat * width + diff[f]
    return np.asarray(grid)[flat]
