import math

import numpy as np
import pytest

from spectralab import kernels as K
from spectralab.errors import NoConvergence, NotHermitian, SingularMatrix

from conftest import random_complex, random_hermitian


class TestLU:
    def test_identity(self):
        lu = K.lu_factor(np.eye(3))
        assert np.array_equal(lu.l_factor, np.eye(3))
        assert np.array_equal(lu.u_factor, np.eye(3))
        assert np.array_equal(lu.permutation, np.arange(3))
        assert lu.sign == 1

    def test_permutation_matrix(self):
        lu = K.lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert lu.sign == -1
        assert np.allclose(np.abs(np.diag(lu.u_factor)), [1.0, 1.0])
        assert list(lu.permutation) == [1, 0]

    def test_reconstruction_random_8x8(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(-1, 1, (8, 8)) + 1j * rng.uniform(-1, 1, (8, 8))
        a /= np.maximum(np.abs(a), 1.0)  # entries in the unit disc
        lu = K.lu_factor(a)
        resid = np.linalg.norm(a[lu.permutation] - lu.l_factor @ lu.u_factor)
        assert resid <= 1e-12 * np.linalg.norm(a)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrix):
            K.lu_factor(np.ones((3, 3)))

    def test_singular_no_raise_flag(self):
        lu = K.lu_factor(np.ones((3, 3)), raise_on_singular=False)
        assert lu.min_pivot < 1e-14 * lu.scale

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            K.lu_factor(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestSolve:
    def test_scalar(self):
        lu = K.lu_factor(np.array([[2.0]]))
        assert K.solve(lu, np.array([[4.0]]))[0, 0] == 2.0

    def test_identity_case(self):
        rng = np.random.default_rng(1)
        b = random_complex(rng, 4, 2)
        lu = K.lu_factor(np.eye(4))
        assert np.array_equal(K.solve(lu, b), b)

    def test_back_substitution(self):
        lu = K.lu_factor(np.array([[1.0, 1.0], [0.0, 1.0]]))
        x = K.solve(lu, np.array([[1.0], [1.0]]))
        assert np.allclose(x[:, 0], [0.0, 1.0])

    @pytest.mark.parametrize("n", [2, 5, 13])
    def test_residual_bound(self, n):
        rng = np.random.default_rng(n)
        a = random_complex(rng, n)
        b = random_complex(rng, n, 3)
        x = K.solve(K.lu_factor(a), b)
        resid = np.linalg.norm(a @ x - b)
        assert resid <= 1e-10 * np.linalg.norm(a) * max(np.linalg.norm(x), 1.0)


class TestLogDet:
    def test_identity(self):
        ld = K.log_det(K.lu_factor(np.eye(4)))
        assert ld.log_modulus == 0.0 and ld.phase == 0.0

    def test_single_imaginary_entry(self):
        ld = K.log_det(K.lu_factor(np.array([[2j]])))
        assert math.isclose(ld.log_modulus, math.log(2.0))
        assert math.isclose(ld.phase, math.pi / 2)

    def test_swap_gives_minus_one(self):
        ld = K.log_det(K.lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]])))
        assert math.isclose(ld.log_modulus, 0.0, abs_tol=1e-15)
        assert math.isclose(ld.phase, math.pi)

    def test_phase_in_half_open_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            ld = K.log_det(K.lu_factor(random_complex(rng, 5)))
            assert -math.pi < ld.phase <= math.pi

    def test_product_rule(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a, b = random_complex(rng, 6), random_complex(rng, 6)
            la = K.log_det(K.lu_factor(a))
            lb = K.log_det(K.lu_factor(b))
            lab = K.log_det(K.lu_factor(a @ b))
            assert math.isclose(lab.log_modulus, la.log_modulus + lb.log_modulus,
                                rel_tol=1e-9, abs_tol=1e-9)
            dphi = math.remainder(la.phase + lb.phase - lab.phase, 2 * math.pi)
            assert abs(dphi) < 1e-9

    def test_overflow_immunity(self):
        ld = K.log_det(K.lu_factor(np.diag(np.full(400, 3.0))))
        assert math.isclose(ld.log_modulus, 400 * math.log(3.0))

    def test_zero_pivot_raises(self):
        lu = K.lu_factor(np.zeros((2, 2)), raise_on_singular=False)
        with pytest.raises(SingularMatrix):
            K.log_det(lu)


class TestHermitianEig:
    def test_diagonal_sorted(self):
        eig = K.hermitian_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(eig.eigenvalues, [1.0, 2.0, 3.0])
        perm = np.abs(eig.eigenvectors)
        assert np.allclose(perm, np.eye(3)[:, [1, 2, 0]])

    def test_two_by_two(self):
        eig = K.hermitian_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(eig.eigenvalues, [-1.0, 1.0])
        s = 1 / math.sqrt(2)
        for k, expect in ((0, np.array([s, -s])), (1, np.array([s, s]))):
            v = eig.eigenvectors[:, k]
            assert min(np.linalg.norm(v - expect), np.linalg.norm(v + expect)) < 1e-10

    @pytest.mark.parametrize("n", [2, 5, 12, 30])
    def test_construct_then_recover(self, n):
        rng = np.random.default_rng(n + 100)
        q, _ = np.linalg.qr(random_complex(rng, n))  # oracle-side unitary
        lam = np.sort(rng.normal(size=n))
        h = q @ np.diag(lam) @ q.conj().T
        eig = K.hermitian_eig(h)
        assert np.max(np.abs(eig.eigenvalues - lam)) <= 1e-10 * np.linalg.norm(h)

    @pytest.mark.parametrize("n", [3, 9, 21])
    def test_residual_and_unitarity(self, n):
        rng = np.random.default_rng(n)
        h = random_hermitian(rng, n)
        eig = K.hermitian_eig(h)
        v = eig.eigenvectors
        scale = np.linalg.norm(h)
        assert np.linalg.norm(h @ v - v @ np.diag(eig.eigenvalues)) <= 1e-10 * scale
        assert np.linalg.norm(v.conj().T @ v - np.eye(n)) <= 1e-10

    def test_trace_consistency(self):
        rng = np.random.default_rng(5)
        h = random_hermitian(rng, 7)
        eig = K.hermitian_eig(h)
        assert abs(np.sum(eig.eigenvalues) - np.trace(h).real) <= 1e-10 * np.linalg.norm(h)

    def test_logdet_consistency_posdef(self):
        rng = np.random.default_rng(6)
        a = random_complex(rng, 6)
        h = a @ a.conj().T + 6 * np.eye(6)
        eig = K.hermitian_eig(h)
        ld = K.log_det(K.lu_factor(h))
        assert math.isclose(ld.log_modulus, float(np.sum(np.log(eig.eigenvalues))),
                            rel_tol=1e-10, abs_tol=1e-10)
        assert abs(ld.phase) < 1e-10

    def test_not_hermitian_raises(self):
        with pytest.raises(NotHermitian):
            K.hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_no_convergence_reports(self):
        rng = np.random.default_rng(9)
        h = random_hermitian(rng, 6)
        with pytest.raises(NoConvergence) as info:
            K.hermitian_eig(h, max_sweeps=0)
        assert info.value.dim == 6
        assert info.value.residual > 0.0


class TestNorms:
    def test_identity(self):
        fro, op = K.norms(np.eye(5))
        assert math.isclose(fro, math.sqrt(5)) and math.isclose(op, 1.0)

    def test_diag(self):
        fro, op = K.norms(np.diag([3.0, 4.0]))
        assert math.isclose(fro, 5.0) and math.isclose(op, 4.0, rel_tol=1e-7)

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        u = random_complex(rng, 6, 1)
        v = random_complex(rng, 4, 1)
        a = u @ v.conj().T
        expect = np.linalg.norm(u) * np.linalg.norm(v)
        fro, op = K.norms(a)
        assert math.isclose(fro, expect, rel_tol=1e-12)
        assert math.isclose(op, expect, rel_tol=1e-7)

    def test_zero(self):
        assert K.norms(np.zeros((3, 3))) == (0.0, 0.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_inequalities(self, seed):
        rng = np.random.default_rng(seed)
        a = random_complex(rng, rng.integers(1, 9), rng.integers(1, 9))
        fro, op = K.norms(a)
        m = min(a.shape)
        assert op <= fro * (1 + 1e-9)
        assert fro <= math.sqrt(m) * op * (1 + 1e-7)


class TestHessenberg:
    @pytest.mark.parametrize("n", [1, 2, 3, 8, 15])
    def test_logdet_matches_dense_route(self, n):
        rng = np.random.default_rng(n + 40)
        b = random_complex(rng, n)
        h = K.hessenberg(b)
        # Hessenberg structure
        assert np.allclose(np.tril(h, -2), 0.0)
        for s in (0.4 + 0.2j, -2.0 + 0.0j, 1.5j, 0.0):
            lm, ph, _ = K.hess_logdet_batch(h, [s])
            dense = K.log_det(K.lu_factor(np.eye(n) + s * b, raise_on_singular=False))
            assert math.isclose(lm[0], dense.log_modulus, rel_tol=1e-10, abs_tol=1e-10)
            assert abs(math.remainder(ph[0] - dense.phase, 2 * math.pi)) < 1e-10

    def test_exact_zero_determinant(self):
        h = K.hessenberg(np.diag([1.0, 2.0]).astype(complex))
        lm, ph, piv = K.hess_logdet_batch(h, [-1.0])
        assert lm[0] == -np.inf and piv[0] == 0.0
