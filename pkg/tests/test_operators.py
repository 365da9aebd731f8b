import numpy as np
import pytest
import scipy.linalg as sla

from qsslab import operators as op


def random_complex(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def test_as_operator_rejects_bad_input():
    with pytest.raises(ValueError):
        op.as_operator(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        op.as_operator(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        op.as_operator(np.array([[np.inf * 1j, 0], [0, 1]]))
    out = op.as_operator([[1, 0], [0, 1]])
    assert out.dtype == complex


def test_hermiticity_helpers():
    a = np.array([[1.0, 2.0 + 1j], [2.0 - 1j, 3.0]])
    assert op.is_hermitian(a)
    assert op.hermiticity_defect(a) == 0.0
    b = a.copy()
    b[0, 1] += 1e-6
    assert not op.is_hermitian(b)
    assert op.hermiticity_defect(b) == pytest.approx(1e-6, rel=1e-6)


def test_psd_check_verdicts():
    ok, mn = op.psd_check(np.diag([1.0, 0.0, 2.0]).astype(complex))
    assert ok and mn == pytest.approx(0.0, abs=1e-14)
    ok, mn = op.psd_check(np.diag([1.0, -1e-3]).astype(complex))
    assert not ok and mn == pytest.approx(-1e-3)
    with pytest.raises(ValueError, match="not Hermitian"):
        op.psd_check(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_validate_density():
    rho = np.diag([0.25, 0.75]).astype(complex)
    op.validate_density(rho)
    with pytest.raises(ValueError, match="trace"):
        op.validate_density(2 * rho)
    with pytest.raises(ValueError, match="PSD"):
        op.validate_density(np.diag([1.5, -0.5]).astype(complex))
    with pytest.raises(ValueError, match="Hermitian"):
        op.validate_density(np.array([[0.5, 0.3], [0.0, 0.5]]))


def test_projection_rank():
    p = np.diag([1.0, 0.0, 1.0]).astype(complex)
    assert op.projection_rank(p) == 2
    assert op.projection_rank(np.eye(3, dtype=complex)) == 3
    with pytest.raises(ValueError):
        op.projection_rank(np.diag([0.5, 1.0]).astype(complex))
    with pytest.raises(ValueError):
        op.projection_rank(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_vectorize_column_stacking():
    x = np.array([[1.0, 3.0], [2.0, 4.0]], dtype=complex)
    assert np.array_equal(op.vectorize(x), np.array([1, 2, 3, 4], dtype=complex))
    assert np.array_equal(op.devectorize(op.vectorize(x)), x)
    with pytest.raises(ValueError, match="perfect square"):
        op.devectorize(np.zeros(5))


def test_vectorize_kron_identity():
    # vec(A X B) = kron(B.T, A) vec(X)
    rng = np.random.default_rng(11)
    for _ in range(25):
        d = rng.integers(2, 5)
        a, b, x = (random_complex(rng, d) for _ in range(3))
        lhs = op.vectorize(a @ x @ b)
        rhs = np.kron(b.T, a) @ op.vectorize(x)
        assert np.linalg.norm(lhs - rhs) < 1e-12


def test_expm_matches_scipy():
    rng = np.random.default_rng(23)
    for _ in range(20):
        d = rng.integers(2, 6)
        a = random_complex(rng, d)
        t = float(rng.uniform(0.1, 2.0))
        assert np.linalg.norm(op.expm(a, t) - sla.expm(t * a)) < 1e-9 * np.linalg.norm(
            sla.expm(t * a)
        )


def test_expm_defective_fallback():
    # Jordan block: eigendecomposition is useless, must fall back
    a = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    out = op.expm(a, 2.0)
    assert np.allclose(out, np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_expm_rejects_bad_time():
    with pytest.raises(ValueError):
        op.expm(np.eye(2), np.inf)


def test_eig_general_sorted_and_accurate():
    rng = np.random.default_rng(37)
    for _ in range(20):
        d = rng.integers(2, 6)
        a = random_complex(rng, d)
        w, v = op.eig_general(a)
        assert np.all(np.diff(w.real) <= 1e-12)
        for j in range(d):
            assert np.linalg.norm(a @ v[:, j] - w[j] * v[:, j]) < 1e-9 * max(
                1.0, np.linalg.norm(a)
            )
            assert np.linalg.norm(v[:, j]) == pytest.approx(1.0, abs=1e-12)


def test_eig_general_known_spectrum():
    a = np.diag([3.0, -1.0, 2.0]).astype(complex)
    w, _ = op.eig_general(a)
    assert np.allclose(w, [3.0, 2.0, -1.0])
