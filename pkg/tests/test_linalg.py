import numpy as np
import pytest

from qfilter.errors import NegativityError, NonHermitianError
from qfilter.linalg import hermitian_eig, kron, matrix_sqrt_psd, partial_trace
from qfilter.model import IDENTITY_2, SIGMA_X, SIGMA_Z


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def random_psd(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return a @ a.conj().T


class TestHermitianEig:
    def test_identity(self):
        w, _ = hermitian_eig(np.eye(2, dtype=complex))
        assert np.allclose(w, [1, 1])

    def test_sigma_z(self):
        w, v = hermitian_eig(SIGMA_Z)
        assert np.allclose(w, [-1, 1])
        # ascending order puts |1> (eigenvalue -1) first
        assert abs(v[1, 0]) == pytest.approx(1.0)
        assert abs(v[0, 1]) == pytest.approx(1.0)

    def test_sigma_x(self):
        w, v = hermitian_eig(SIGMA_X)
        assert np.allclose(w, [-1, 1])
        for col, sign in ((0, -1), (1, 1)):
            vec = v[:, col]
            ratio = vec[1] / vec[0]
            assert ratio == pytest.approx(sign, abs=1e-12)
            assert np.linalg.norm(vec) == pytest.approx(1.0)

    @pytest.mark.parametrize("dim", [2, 4])
    def test_reconstruction(self, dim):
        rng = np.random.default_rng(10 + dim)
        for _ in range(200):
            m = random_hermitian(rng, dim)
            w, v = hermitian_eig(m)
            assert np.all(np.diff(w) >= 0)
            assert np.max(np.abs((v * w) @ v.conj().T - m)) <= 1e-10 * max(1, np.abs(m).max())

    def test_rejects_non_hermitian(self):
        m = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(NonHermitianError):
            hermitian_eig(m)


class TestMatrixSqrtPsd:
    def test_identity(self):
        assert np.allclose(matrix_sqrt_psd(np.eye(2, dtype=complex)), np.eye(2))

    def test_diagonal(self):
        r = matrix_sqrt_psd(np.diag([4.0, 9.0]).astype(complex))
        assert np.allclose(r, np.diag([2.0, 3.0]))

    @pytest.mark.parametrize("dim", [2, 4])
    def test_multiply_back(self, dim):
        rng = np.random.default_rng(20 + dim)
        for _ in range(500):
            m = random_psd(rng, dim)
            r = matrix_sqrt_psd(m)
            assert np.max(np.abs(r @ r - m)) <= 1e-8 * max(1.0, np.abs(m).max())
            assert np.max(np.abs(r - r.conj().T)) <= 1e-10

    def test_clamps_rounding_noise(self):
        m = np.diag([1.0, -1e-9]).astype(complex)
        r = matrix_sqrt_psd(m)
        assert r[1, 1] == 0

    def test_negativity_error(self):
        with pytest.raises(NegativityError):
            matrix_sqrt_psd(np.diag([1.0, -1e-3]).astype(complex))


class TestKron:
    def test_zz_diagonal(self):
        assert np.allclose(kron(SIGMA_Z, SIGMA_Z), np.diag([1, -1, -1, 1]))

    def test_identity(self):
        assert np.allclose(kron(IDENTITY_2, IDENTITY_2), np.eye(4))

    def test_index_ordering(self):
        m = kron(SIGMA_X, IDENTITY_2)
        assert m[0, 2] == 1
        assert m[0, 1] == 0

    def test_trace_multiplicative(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = random_hermitian(rng, 2)
            b = random_hermitian(rng, 2)
            assert np.trace(kron(a, b)) == pytest.approx(np.trace(a) * np.trace(b), abs=1e-12)


class TestPartialTrace:
    def test_product_state(self):
        rng = np.random.default_rng(4)
        ra = random_psd(rng, 2)
        ra /= np.trace(ra)
        rb = random_psd(rng, 2)
        rb /= np.trace(rb)
        assert np.max(np.abs(partial_trace(kron(ra, rb), "A") - ra)) <= 1e-12
        assert np.max(np.abs(partial_trace(kron(ra, rb), "B") - rb)) <= 1e-12

    def test_bell_state(self):
        v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
        rho = np.outer(v, v.conj())
        for side in ("A", "B"):
            assert np.allclose(partial_trace(rho, side), np.eye(2) / 2)

    def test_maximally_mixed(self):
        assert np.allclose(partial_trace(np.eye(4, dtype=complex) / 4, "B"), np.eye(2) / 2)

    def test_trace_preserved(self):
        rng = np.random.default_rng(5)
        rho = random_psd(rng, 4)
        rho /= np.trace(rho)
        assert np.trace(partial_trace(rho, "A")).real == pytest.approx(1.0, abs=1e-12)
