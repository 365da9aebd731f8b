"""GKLS models and their generators as explicit superoperator matrices.

The vectorization convention for the whole package is fixed here: column
stacking, so that ``vec(A X B) = kron(B.T, A) vec(X)``.  The Schroedinger
(state-evolution) matrix is the primary object; the Heisenberg matrix is its
conjugate transpose, which realizes the trace pairing
``tr(x T_t(y)) = tr(T_t*(x) y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as op
from .operators import adjoint, devectorize, frob, vectorize

SCHRODINGER = "schrodinger"
HEISENBERG = "heisenberg"


@dataclass(frozen=True)
class ModelSpec:
    """A GKLS model: Hamiltonian, jump operators, distinguished projection.

    ``p0`` must be an orthogonal projection onto a strict, nontrivial
    subspace; its rank is validated and cached at construction.
    """

    dim: int
    hamiltonian: np.ndarray
    jump_ops: tuple
    p0: np.ndarray
    label: str = ""
    p0_rank: int = field(init=False)

    def __post_init__(self):
        h = op.as_operator(self.hamiltonian)
        if h.shape[0] != self.dim:
            raise ValueError("hamiltonian dimension mismatch")
        if not op.is_hermitian(h, op.TOL_HERM):
            raise ValueError(
                f"hamiltonian not Hermitian: defect {op.hermiticity_defect(h):.3e}"
            )
        jumps = tuple(op.as_operator(l) for l in self.jump_ops)
        for l in jumps:
            if l.shape[0] != self.dim:
                raise ValueError("jump operator dimension mismatch")
        p0 = op.as_operator(self.p0)
        if p0.shape[0] != self.dim:
            raise ValueError("p0 dimension mismatch")
        rank = op.projection_rank(p0)
        if rank == 0 or rank == self.dim:
            raise ValueError(f"p0 rank {rank} must be strictly between 0 and {self.dim}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", jumps)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p0_rank", rank)

    @property
    def p0_perp(self) -> np.ndarray:
        return np.eye(self.dim) - self.p0

    def effective_drift(self) -> np.ndarray:
        """G = -iH - (1/2) sum_l L_l^dag L_l, the no-jump drift operator."""
        g = -1j * self.hamiltonian
        for l in self.jump_ops:
            g = g - 0.5 * (adjoint(l) @ l)
        return g


@dataclass(frozen=True)
class Superop:
    """A d^2 x d^2 matrix realizing a superoperator under column stacking."""

    mat: np.ndarray
    picture: str
    dim: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return devectorize(self.mat @ vectorize(x))


def left_mul(a: np.ndarray) -> np.ndarray:
    """Superoperator matrix of x -> a x."""
    d = a.shape[0]
    return np.kron(np.eye(d), a)


def right_mul(b: np.ndarray) -> np.ndarray:
    """Superoperator matrix of x -> x b."""
    d = b.shape[0]
    return np.kron(b.T, np.eye(d))


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator matrix of x -> a x b."""
    return np.kron(b.T, a)


def gkls_matrix(hamiltonian, jump_ops, picture: str = SCHRODINGER) -> np.ndarray:
    """Raw GKLS generator matrix without ModelSpec validation.

    Schroedinger picture: L*(rho) = -i[H, rho] + sum_l (L rho L^dag
    - 1/2 {L^dag L, rho}).  The Heisenberg matrix is the conjugate transpose.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    m = -1j * (left_mul(h) - right_mul(h))
    for l in jump_ops:
        l = np.asarray(l, dtype=complex)
        k = adjoint(l) @ l
        m = m + sandwich(l, adjoint(l)) - 0.5 * (left_mul(k) + right_mul(k))
    if picture == SCHRODINGER:
        return m
    if picture == HEISENBERG:
        return adjoint(m)
    raise ValueError(f"unknown picture {picture!r}")


def build_generator(spec: ModelSpec, picture: str = SCHRODINGER) -> Superop:
    """GKLS generator of ``spec`` as a Superop, with picture invariant checked."""
    m = gkls_matrix(spec.hamiltonian, spec.jump_ops, picture)
    ident = vectorize(np.eye(spec.dim))
    scale = max(1.0, frob(m))
    if picture == SCHRODINGER:
        defect = np.linalg.norm(ident.conj() @ m)
    else:
        defect = np.linalg.norm(m @ ident)
    if defect > op.TOL_EIG * scale:
        raise RuntimeError(f"generator violates picture invariant: defect {defect:.3e}")
    return Superop(mat=m, picture=picture, dim=spec.dim)


def apply_semigroup(gen: Superop, t: float, x: np.ndarray) -> np.ndarray:
    """exp(t * gen) applied to the operator x.  Semigroup only: t >= 0."""
    if t < 0:
        raise ValueError("semigroup is defined for t >= 0 only")
    if t == 0:
        return op.as_operator(x).copy()
    return devectorize(op.expm(gen.mat, t) @ vectorize(x))


def duality_check(spec: ModelSpec, t: float, x: np.ndarray, y: np.ndarray) -> float:
    """| tr(x T_t(y)) - tr(T_t*(x) y) | for the model's two pictures."""
    heis = build_generator(spec, HEISENBERG)
    schr = build_generator(spec, SCHRODINGER)
    lhs = complex(np.trace(op.as_operator(x) @ apply_semigroup(heis, t, y)))
    rhs = complex(np.trace(apply_semigroup(schr, t, x) @ op.as_operator(y)))
    return abs(lhs - rhs)


def choi_matrix(superop_mat: np.ndarray) -> np.ndarray:
    """Choi matrix of the map realized by ``superop_mat``.

    C = sum_{ij} |i><j| (x) Phi(|i><j|); the map is completely positive iff
    C is PSD.
    """
    d2 = superop_mat.shape[0]
    d = int(round(d2**0.5))
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            block = devectorize(superop_mat @ vectorize(e))
            c[i * d : (i + 1) * d, j * d : (j + 1) * d] = block
    return c


# ---------------------------------------------------------------------------
# Two-qubit fixtures: one decaying site, or decay on both sites.
# ---------------------------------------------------------------------------

def _two_qubit_pieces(omega: float):
    ket0 = np.array([[1.0], [0.0]], dtype=complex)
    ket1 = np.array([[0.0], [1.0]], dtype=complex)
    lower = ket0 @ ket1.conj().T  # |0><1|
    eye2 = np.eye(2, dtype=complex)
    s1m = np.kron(lower, eye2)
    s2m = np.kron(eye2, lower)
    s1p, s2p = adjoint(s1m), adjoint(s2m)
    h = 0.5 * omega * (s1p @ s2m + s1m @ s2p)
    p0 = np.zeros((4, 4), dtype=complex)
    p0[0, 0] = 1.0  # |00><00|
    return h, s1m, s2m, p0


def two_qubit_site1(omega: float = 1.0) -> ModelSpec:
    """Exchange Hamiltonian with decay on the first qubit only."""
    h, s1m, _, p0 = _two_qubit_pieces(omega)
    return ModelSpec(
        dim=4, hamiltonian=h, jump_ops=(s1m,), p0=p0,
        label=f"two_qubit_site1(omega={omega:g})",
    )


def two_qubit_both(omega: float = 1.0) -> ModelSpec:
    """Exchange Hamiltonian with decay on both qubits."""
    h, s1m, s2m, p0 = _two_qubit_pieces(omega)
    return ModelSpec(
        dim=4, hamiltonian=h, jump_ops=(s1m, s2m), p0=p0,
        label=f"two_qubit_both(omega={omega:g})",
    )


FIXTURE_FAMILIES = {
    "two_qubit_site1": two_qubit_site1,
    "two_qubit_both": two_qubit_both,
}
