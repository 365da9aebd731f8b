"""Dense complex matrix primitives shared by the whole package.

Everything operates on plain numpy ``complex128`` arrays.  The helpers here
are the only place where hermiticity / positivity predicates, eigensolves and
matrix exponentials are implemented; the rest of the package goes through
these functions so that tolerances are applied consistently.

Default tolerances (all overridable per call):

* ``TOL_HERM``  - hermiticity and projection defects
* ``TOL_TRACE`` - trace normalization of densities
* ``TOL_PSD``   - how negative the smallest eigenvalue may be
* ``TOL_EIG``   - relative eigenpair residuals
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-9
TOL_EIG = 1e-9

# switch to scaling-and-squaring when the eigenvector basis is worse than this
EXPM_COND_LIMIT = 1e6


class EigenSolveError(RuntimeError):
    """Eigensolver failure; ``partial`` carries whatever was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def as_operator(a) -> np.ndarray:
    """Validate a square, finite complex matrix and return it as complex128."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix contains non-finite entries")
    return a


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def frob(a) -> float:
    """Frobenius norm; the default distance between operators here."""
    return float(np.linalg.norm(a))


def hermiticity_defect(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - adjoint(a)))) if a.size else 0.0


def is_hermitian(a, tol: float = TOL_HERM) -> bool:
    return hermiticity_defect(a) <= tol


def psd_check(a, tol: float = TOL_PSD):
    """Decide positive semidefiniteness of a Hermitian matrix.

    Returns ``(verdict, min_eigenvalue)`` where the verdict is true iff the
    smallest eigenvalue is >= -tol.  Raises on inputs that are not Hermitian
    within ``tol``.
    """
    a = as_operator(a)
    if not is_hermitian(a, max(tol, TOL_HERM)):
        raise ValueError(
            f"not Hermitian: defect {hermiticity_defect(a):.3e} exceeds tolerance"
        )
    w = np.linalg.eigvalsh(0.5 * (a + adjoint(a)))
    min_eig = float(w[0])
    return min_eig >= -tol, min_eig


def validate_density(
    rho,
    tol_herm: float = TOL_HERM,
    tol_psd: float = TOL_PSD,
    tol_trace: float = TOL_TRACE,
) -> np.ndarray:
    """Check the density-matrix invariants and return the matrix."""
    rho = as_operator(rho)
    defect = hermiticity_defect(rho)
    if defect > tol_herm:
        raise ValueError(f"density not Hermitian: defect {defect:.3e}")
    ok, min_eig = psd_check(rho, tol_psd)
    if not ok:
        raise ValueError(f"density not PSD: min eigenvalue {min_eig:.3e}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > tol_trace:
        raise ValueError(f"density trace {tr} is not 1")
    return rho


def projection_rank(p, tol_herm: float = TOL_HERM, tol_psd: float = TOL_PSD) -> int:
    """Verify that ``p`` is an orthogonal projection and return its rank."""
    p = as_operator(p)
    if hermiticity_defect(p) > tol_herm:
        raise ValueError("projection is not Hermitian")
    if frob(p @ p - p) > max(tol_herm, 1e-10) * max(1.0, frob(p)):
        raise ValueError("matrix is not idempotent")
    w = np.linalg.eigvalsh(0.5 * (p + adjoint(p)))
    if np.any(np.minimum(np.abs(w), np.abs(w - 1.0)) > max(tol_psd, 1e-9)):
        raise ValueError("projection eigenvalues are not all 0 or 1")
    return int(np.sum(w > 0.5))


def vectorize(x) -> np.ndarray:
    """Column-stacking vectorization: vec([[a,b],[c,d]]) = (a, c, b, d)."""
    x = as_operator(x)
    return x.reshape(-1, order="F").copy()


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`.  Length must be a perfect square."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d, order="F").copy()


def expm(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(t*a)``.

    Diagonalizes ``a`` when the eigenvector basis is well conditioned
    (condition number below ``EXPM_COND_LIMIT``); falls back to
    scaling-and-squaring otherwise.  For the small dense problems in this
    package robustness matters more than speed.
    """
    a = as_operator(a)
    if not np.isfinite(t):
        raise ValueError("time parameter must be finite")
    if a.shape[0] == 0:
        return a.copy()
    try:
        w, v = np.linalg.eig(a)
        cond = np.linalg.cond(v)
        if np.isfinite(cond) and cond < EXPM_COND_LIMIT:
            v_inv = np.linalg.inv(v)
            # the cond gate alone misses near-defective cases; require the
            # decomposition to actually reconstruct the matrix
            if frob((v * w) @ v_inv - a) <= 1e-12 * max(1.0, frob(a)):
                return (v * np.exp(t * w)) @ v_inv
    except np.linalg.LinAlgError:
        pass
    return sla.expm(t * a)


def eig_general(a, tol: float = TOL_EIG):
    """All eigenpairs of a general complex matrix.

    Returns ``(eigenvalues, eigenvectors)`` with unit-norm right eigenvectors
    as columns, sorted by descending real part (descending imaginary part as
    tie break, so the output is deterministic).  Residuals
    ``||a v - lambda v||`` are checked against ``tol * max(1, ||a||)``.
    """
    a = as_operator(a)
    try:
        w, v = sla.eig(a)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:  # pragma: no cover
        raise EigenSolveError(f"eigensolver did not converge: {exc}") from exc
    norms = np.linalg.norm(v, axis=0)
    norms[norms == 0] = 1.0
    v = v / norms
    order = np.lexsort((-w.imag, -w.real))
    w, v = w[order], v[:, order]
    scale = max(1.0, frob(a))
    residual = np.linalg.norm(a @ v - v * w, axis=0)
    if np.max(residual, initial=0.0) > tol * scale:
        raise EigenSolveError(
            f"eigenpair residual {np.max(residual):.3e} exceeds {tol * scale:.3e}",
            partial=(w, v),
        )
    return w, v
