"""Pure numpy implementations of the hot kernels.

These are the reference semantics; ``_ckernels.pyx`` must agree with them to
floating-point rounding.
"""
import numpy as np

# rows per block when materializing (K, (2D-1)^k) phase products
_BLOCK = 4096


def symmetric_tensor_mix(phases, weights, D):
    """Difference-grid form of sum_t w_t (x)_k |Phi(theta_tk)><Phi(theta_tk)|.

    A symmetric-state projector has entries exp(i theta (l - m)) / D, so a
    tensor product of them depends only on the difference vector
    (l_1 - m_1, ..., l_k - m_k). Returns the flat array G over that grid,
    offset so index 0 of each axis is difference -(D - 1).
    """
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    K, k = phases.shape
    width = 2 * D - 1
    delta = np.arange(-(D - 1), D, dtype=np.float64)
    out = np.zeros(width**k, dtype=np.complex128)
    for start in range(0, K, _BLOCK):
        ph = phases[start:start + _BLOCK]
        acc = np.exp(1j * ph[:, 0, None] * delta[None, :])
        for f in range(1, k):
            e = np.exp(1j * ph[:, f, None] * delta[None, :])
            acc = (acc[:, :, None] * e[:, None, :]).reshape(ph.shape[0], -1)
        out += weights[start:start + _BLOCK] @ acc
    return out / float(D) ** k


def symmetric_fidelities(diag_sums, phases):
    """<Phi(theta)| rho |Phi(theta)> for each phase, given rho's diagonal sums.

    ``diag_sums[Δ + D - 1]`` is the sum of rho[l, m] over l - m = Δ.
    """
    g = np.asarray(diag_sums, dtype=np.complex128)
    D = (g.shape[0] + 1) // 2
    delta = np.arange(-(D - 1), D, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    out = np.empty(phases.shape[0], dtype=np.float64)
    for start in range(0, phases.shape[0], _BLOCK):
        ph = phases[start:start + _BLOCK]
        out[start:start + _BLOCK] = (np.exp(-1j * ph[:, None] * delta[None, :]) @ g).real / D
    return out


def first_failure(pass_prob, uniforms):
    """Index of the first round with uniform >= pass probability, else -1."""
    fails = np.asarray(uniforms) >= np.asarray(pass_prob)
    idx = np.argmax(fails, axis=1).astype(np.int64)
    idx[~fails.any(axis=1)] = -1
    return idx
