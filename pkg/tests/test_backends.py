"""Compiled core and pure-Python fallback must agree on the same inputs."""

import numpy as np
import pytest

from spectralab.kernels import _fallback

from conftest import random_complex, random_hermitian

_core = pytest.importorskip("spectralab.kernels._core")


@pytest.mark.parametrize("n", [1, 2, 4, 9, 16])
def test_lu_agreement(n):
    rng = np.random.default_rng(n)
    a = np.ascontiguousarray(random_complex(rng, n))
    lu1, p1, s1, m1 = _fallback.lu_factor(a)
    lu2, p2, s2, m2 = _core.lu_factor(a)
    assert np.array_equal(p1, p2)
    assert s1 == s2
    assert np.linalg.norm(lu1 - lu2) <= 1e-13 * max(np.linalg.norm(a), 1)
    assert abs(m1 - m2) <= 1e-13 * max(m1, 1e-300)


@pytest.mark.parametrize("n", [2, 5, 11])
def test_solve_agreement(n):
    rng = np.random.default_rng(n + 1)
    a = np.ascontiguousarray(random_complex(rng, n))
    b = np.ascontiguousarray(random_complex(rng, n, 3))
    lu1, p1, _, _ = _fallback.lu_factor(a)
    lu2, p2, _, _ = _core.lu_factor(a)
    x1 = _fallback.lu_solve(lu1, p1, b)
    x2 = _core.lu_solve(lu2, p2, b)
    assert np.linalg.norm(x1 - x2) <= 1e-12 * max(np.linalg.norm(x1), 1)


@pytest.mark.parametrize("n", [1, 2, 6, 13])
def test_eigh_agreement(n):
    rng = np.random.default_rng(n + 2)
    h = np.ascontiguousarray(random_hermitian(rng, n))
    d1, e1, q1 = _fallback.tridiagonalize(h)
    d2, e2, q2 = _core.tridiagonalize(h)
    scale = max(np.linalg.norm(h), 1.0)
    assert np.max(np.abs(d1 - d2)) <= 1e-12 * scale
    assert np.max(np.abs(e1 - e2)) <= 1e-12 * scale if n > 1 else True
    assert np.linalg.norm(q1 - q2) <= 1e-11 * scale
    w1, v1, f1, _ = _fallback.tql_implicit(d1, e1, q1, 30)
    w2, v2, f2, _ = _core.tql_implicit(d2, e2, q2, 30)
    assert f1 == f2 == -1
    assert np.max(np.abs(np.sort(w1) - np.sort(w2))) <= 1e-11 * scale


@pytest.mark.parametrize("n", [1, 3, 8, 14])
def test_hessenberg_logdet_agreement(n):
    rng = np.random.default_rng(n + 3)
    b = np.ascontiguousarray(random_complex(rng, n))
    h1 = _fallback.hessenberg(b)
    h2 = _core.hessenberg(b)
    assert np.linalg.norm(h1 - h2) <= 1e-11 * max(np.linalg.norm(b), 1)
    ss = np.ascontiguousarray(random_complex(rng, 7, 1).ravel())
    lm1, ph1, pv1 = _fallback.hess_logdet(h1, ss)
    lm2, ph2, pv2 = _core.hess_logdet(h1, ss)
    assert np.max(np.abs(lm1 - lm2)) <= 1e-11 * np.max(1 + np.abs(lm1))
    assert np.max(np.abs(ph1 - ph2)) <= 1e-11
    assert np.max(np.abs(pv1 - pv2)) <= 1e-11 * np.max(1 + pv1)
