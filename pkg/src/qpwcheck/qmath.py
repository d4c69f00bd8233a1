"""Dense complex linear algebra for small quantum states.

States are stored as plain numpy arrays wrapped in two light immutable
classes, :class:`StateVector` and :class:`DensityMatrix`. Everything is dense;
the largest operator handled is capped by :data:`DIM_CAP`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionCapError, DimensionMismatchError, InvalidStateError

NORM_TOL = 1e-12
EIG_TOL = 1e-9
PSD_TOL = 1e-10
IMAG_TOL = 1e-10

#: Largest dense operator dimension any routine will build.
DIM_CAP = 4096
#: Above this dimension the PSD check on construction is skipped (it needs a
#: full eigendecomposition); Hermiticity and trace are always checked.
PSD_CHECK_MAX_DIM = 256


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


class StateVector:
    """Normalized complex amplitude vector."""

    __slots__ = ("_amps",)

    def __init__(self, amplitudes, *, validate: bool = True):
        amps = _frozen(np.ravel(amplitudes))
        if validate:
            if amps.size == 0:
                raise InvalidStateError("empty state vector")
            if not np.all(np.isfinite(amps)):
                raise InvalidStateError("non-finite amplitude")
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise InvalidStateError(f"state not normalized: |v|^2 = {norm!r}")
        self._amps = amps

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        a = np.asarray(amplitudes, dtype=np.complex128).ravel()
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, dim: int, k: int) -> "StateVector":
        a = np.zeros(dim, dtype=np.complex128)
        a[k] = 1.0
        return cls(a)

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def dim(self) -> int:
        return self._amps.shape[0]

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("_m",)

    def __init__(self, matrix, *, validate: bool = True):
        m = _frozen(matrix)
        if validate:
            _check_density(m)
        self._m = m

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @classmethod
    def from_state(cls, v: StateVector) -> "DensityMatrix":
        return outer(v)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._m).real)

    def purity(self) -> float:
        return trace_product(self, self)

    def eigh(self):
        return np.linalg.eigh(self._m)

    def is_valid(self, psd: bool = True) -> bool:
        try:
            _check_density(self._m, psd=psd, psd_max_dim=None)
        except InvalidStateError:
            return False
        return True

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


def _check_density(m: np.ndarray, psd: bool = True, psd_max_dim: int | None = PSD_CHECK_MAX_DIM):
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidStateError(f"density matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidStateError("non-finite matrix entry")
    herm_err = float(np.max(np.abs(m - m.conj().T)))
    if herm_err > NORM_TOL:
        raise InvalidStateError(f"matrix not Hermitian (max deviation {herm_err:.3e})")
    tr = np.trace(m)
    if abs(tr - 1.0) > NORM_TOL:
        raise InvalidStateError(f"trace is {tr!r}, expected 1")
    if psd and (psd_max_dim is None or m.shape[0] <= psd_max_dim):
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise InvalidStateError(f"matrix not PSD (min eigenvalue {lo:.3e})")


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, DensityMatrix):
        return a.matrix
    if isinstance(a, StateVector):
        return outer(a).matrix
    return np.asarray(a, dtype=np.complex128)


def as_density(a) -> DensityMatrix:
    """Coerce a StateVector or DensityMatrix to a DensityMatrix."""
    if isinstance(a, DensityMatrix):
        return a
    if isinstance(a, StateVector):
        return outer(a)
    return DensityMatrix(a)


def outer(v: StateVector) -> DensityMatrix:
    """Projector |v><v|."""
    a = v.amplitudes
    return DensityMatrix(np.outer(a, a.conj()), validate=False)


def trace_product(a, b) -> float:
    """tr(a b) for density matrices; the imaginary residue must vanish."""
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise DimensionMismatchError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    # tr(AB) = sum_ij A_ij B_ji
    val = np.einsum("ij,ji->", ma, mb)
    if abs(val.imag) > IMAG_TOL:
        raise InvalidStateError(f"trace product has imaginary part {val.imag:.3e}")
    return float(val.real)


def tensor(a: DensityMatrix, b: DensityMatrix, *, cap: int | None = None) -> DensityMatrix:
    """Kronecker product a (x) b."""
    cap = DIM_CAP if cap is None else cap
    dim = a.dim * b.dim
    if dim > cap:
        raise DimensionCapError(f"tensor dimension {dim} exceeds cap {cap}")
    return DensityMatrix(np.kron(a.matrix, b.matrix), validate=False)


def tensor_power(a: DensityMatrix, k: int, *, cap: int | None = None) -> DensityMatrix:
    out = a
    for _ in range(k - 1):
        out = tensor(out, a, cap=cap)
    return out


def max_eigenvalue(a) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    m = _as_matrix(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidStateError(f"expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
        raise InvalidStateError("max_eigenvalue requires a Hermitian matrix")
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0].real)
    try:
        w = scipy.linalg.eigh(m, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    except np.linalg.LinAlgError:
        # the subset driver (?syevr) can fail on exactly degenerate spectra
        w = scipy.linalg.eigh(m, eigvals_only=True, driver="evd")
    return float(w[-1])


def scale_mix(matrices: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    """Convex combination sum_k w_k rho_k."""
    if len(matrices) == 0 or len(matrices) != len(weights):
        raise ValueError("need one weight per matrix and at least one matrix")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
        raise ValueError("weights must be non-negative and sum to 1")
    dims = {m.dim for m in matrices}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed dimensions {sorted(dims)}")
    stack = np.stack([m.matrix for m in matrices])
    return DensityMatrix(np.tensordot(w, stack, axes=1))


def fidelity(a, b) -> float:
    """tr(rho sigma); equals |<a|b>|^2 for pure states."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.dim != b.dim:
            raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    return trace_product(a, b)


def random_pure_state(dim: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector.normalized(z)
