"""Dense complex matrix helpers, density matrices and postselection projectors.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; the small
wrapper types below only exist to carry validated invariants.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    NotHermitianError,
    NotPositiveError,
    TraceError,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = -1e-10


def as_matrix(x):
    """Return ``x`` as a square complex128 array, raising on bad shape."""
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def _same_dim(x, y):
    x, y = as_matrix(x), as_matrix(y)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def hermiticity_residual(m):
    m = as_matrix(m)
    return float(np.max(np.abs(m - m.conj().T)))


def min_eigenvalue(m):
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    m = as_matrix(m)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def commutator(x, y):
    x, y = _same_dim(x, y)
    return x @ y - y @ x


def anticommutator(x, y):
    x, y = _same_dim(x, y)
    return x @ y + y @ x


def double_commutator_diagonal(d, rho):
    """Entrywise ``[D, [D, rho]]_ij = (d_i - d_j)**2 * rho_ij`` for ``D = diag(d)``."""
    rho = as_matrix(rho)
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.shape[0] != rho.shape[0]:
        raise DimensionError(
            f"diagonal of length {d.size} does not match matrix dimension {rho.shape[0]}"
        )
    diff = d[:, None] - d[None, :]
    return diff**2 * rho


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


@dataclass(frozen=True, eq=False)
class Postselection:
    """Projector ``P_f = f f^dagger`` onto the unit vector ``f``."""

    vector: np.ndarray
    projector: np.ndarray

    @property
    def dim(self):
        return self.vector.shape[0]


def validate_density(m):
    """Check the three density-matrix invariants and wrap ``m``.

    Raises the specific :class:`~ctxvalues.errors.DensityMatrixError`
    subclass for the first violated invariant (Hermiticity, then trace,
    then positivity), with the residual attached.
    """
    m = as_matrix(m)
    herm = hermiticity_residual(m)
    if herm > HERMITIAN_TOL:
        raise NotHermitianError(f"state is not Hermitian: max |rho - rho^H| = {herm:.3g}", herm)
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceError(f"state: trace {tr.real:.6g} ≠ 1", abs(tr - 1.0))
    lam = min_eigenvalue(m)
    if lam < POSITIVITY_TOL:
        raise NotPositiveError(f"state has negative eigenvalue {lam:.6g}", -lam)
    m = m.copy()
    m.setflags(write=False)
    return DensityMatrix(m)


def projector_from_vector(f):
    f = np.asarray(f, dtype=np.complex128).ravel()
    norm = np.linalg.norm(f)
    if f.size == 0 or norm == 0.0:
        raise DimensionError("postselection vector must be nonzero")
    f = f / norm
    p = np.outer(f, f.conj())
    f.setflags(write=False)
    p.setflags(write=False)
    return Postselection(f, p)
