"""Dense complex-matrix kernel for the small Hilbert spaces used here.

Everything operates on plain ``numpy`` arrays of complex128.  The package
only ever builds 2x2 and 4x4 matrices (one or two qubits), so these are
thin contract-checked wrappers around LAPACK via ``numpy.linalg``.
"""

from __future__ import annotations

import numpy as np

from .errors import NegativityError, NonHermitianError

HERM_TOL = 1e-9
SQRT_NEG_TOL = 1e-6


def herm_defect(m: np.ndarray) -> float:
    """Max entrywise deviation |M - M^dag|."""
    return float(np.max(np.abs(m - m.conj().T)))


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    return herm_defect(m) <= tol


def require_hermitian(m: np.ndarray, tol: float = HERM_TOL, what: str = "matrix") -> None:
    d = herm_defect(m)
    if d > tol:
        raise NonHermitianError(f"{what} is not Hermitian: max |M - M^dag| = {d:.3e} > {tol:.1e}")


def hermitian_eig(m: np.ndarray, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector columns) such that
    ``m = V @ diag(w) @ V^dag``.
    """
    require_hermitian(m, tol)
    w, v = np.linalg.eigh(m)
    return w, v


def matrix_sqrt_psd(m: np.ndarray, neg_tol: float = SQRT_NEG_TOL) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix.

    Eigenvalues in [-neg_tol, 0) are treated as rounding noise and clamped
    to zero; anything below -neg_tol raises :class:`NegativityError`.
    """
    w, v = hermitian_eig(m)
    if w[0] < -neg_tol:
        raise NegativityError(
            f"matrix has eigenvalue {w[0]:.3e} < -{neg_tol:.1e}; not PSD"
        )
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, first-factor-major index ordering."""
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, keep: str) -> np.ndarray:
    """Reduced state of one qubit of a two-qubit density matrix.

    ``keep`` is ``"A"`` (first tensor factor) or ``"B"`` (second).
    """
    if rho.shape != (4, 4):
        raise ValueError(f"partial_trace expects a 4x4 matrix, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "A":
        return np.trace(r, axis1=1, axis2=3)
    if keep == "B":
        return np.trace(r, axis1=0, axis2=2)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
