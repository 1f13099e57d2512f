"""Dense complex linear-algebra kernels.

Factorization, solves, log-scaled determinants, a deterministic Hermitian
eigensolver (Householder tridiagonalization + implicit-shift QL) and the
Hessenberg machinery backing cheap determinant sweeps. The heavy loops live
in a compiled extension when available; a pure-Python twin is selected at
import time otherwise (or when SPECTRALAB_PURE_PYTHON=1).
"""

from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass

import numpy as np

from ..errors import NoConvergence, NotHermitian, SingularMatrix
from ..tolerances import DEFAULT, Tolerances

if os.environ.get("SPECTRALAB_PURE_PYTHON") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl


def backend_name() -> str:
    return _impl.BACKEND_NAME


def as_cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and normalize to a C-contiguous complex128 2-D array."""
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix with positive shape, got {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a).ravel()))


@dataclass(frozen=True)
class LUFactor:
    """Packed partial-pivot factorization P A = L U."""

    lu: np.ndarray
    piv: np.ndarray
    sign: int
    min_pivot: float
    scale: float  # ||A||_F at factorization time

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    @property
    def l_factor(self) -> np.ndarray:
        out = np.tril(self.lu, -1)
        np.fill_diagonal(out, 1.0)
        return out

    @property
    def u_factor(self) -> np.ndarray:
        return np.triu(self.lu)

    @property
    def permutation(self) -> np.ndarray:
        perm = np.arange(self.n)
        for k, p in enumerate(self.piv):
            if p != k:
                perm[[k, p]] = perm[[p, k]]
        return perm


@dataclass(frozen=True)
class LogDet:
    log_modulus: float
    phase: float  # in (-pi, pi]

    @property
    def value(self) -> complex:
        return cmath.exp(complex(self.log_modulus, self.phase))


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns


def lu_factor(a, raise_on_singular: bool = True, tol: Tolerances = DEFAULT) -> LUFactor:
    """Partial-pivot LU of a square complex matrix."""
    arr = as_cmatrix(a)
    n = arr.shape[0]
    if arr.shape[1] != n:
        raise ValueError(f"square matrix required, got {arr.shape}")
    scale = frobenius(arr)
    lu, piv, sign, min_pivot = _impl.lu_factor(arr)
    fac = LUFactor(lu=lu, piv=piv, sign=sign, min_pivot=min_pivot, scale=scale)
    if raise_on_singular and min_pivot < tol.singular_pivot * max(scale, 1e-300):
        raise SingularMatrix(
            f"pivot {min_pivot:.3e} below {tol.singular_pivot:g} * ||A||_F = "
            f"{tol.singular_pivot * scale:.3e}",
            min_pivot=min_pivot,
        )
    return fac


def solve(lu: LUFactor, b, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Solve A X = B from a packed factorization."""
    arr = np.ascontiguousarray(b, dtype=np.complex128)
    if arr.shape[0] != lu.n:
        raise ValueError(f"rhs has {arr.shape[0]} rows, matrix is {lu.n}x{lu.n}")
    if lu.min_pivot < tol.singular_pivot * max(lu.scale, 1e-300):
        raise SingularMatrix("factorization is singular", min_pivot=lu.min_pivot)
    return _impl.lu_solve(lu.lu, lu.piv, arr)


def log_det(lu: LUFactor) -> LogDet:
    """Determinant in log form: det = exp(log_modulus + i*phase)."""
    diag = np.diagonal(lu.lu)
    mags = np.abs(diag)
    if np.any(mags == 0.0):
        raise SingularMatrix("zero pivot: determinant is exactly 0", min_pivot=0.0)
    log_modulus = float(np.sum(np.log(mags)))
    phase = float(np.sum(np.arctan2(diag.imag, diag.real)))
    if lu.sign < 0:
        phase += math.pi
    w = math.remainder(phase, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return LogDet(log_modulus=log_modulus, phase=w)


def hermitian_eig(h, tol: Tolerances = DEFAULT, max_sweeps: int | None = None) -> HermitianEig:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    arr = as_cmatrix(h)
    n = arr.shape[0]
    if arr.shape[1] != n:
        raise ValueError(f"square matrix required, got {arr.shape}")
    scale = frobenius(arr)
    resid = frobenius(arr - arr.conj().T)
    if resid > tol.hermiticity * max(scale, 1e-300):
        raise NotHermitian(
            f"||H - H*||_F = {resid:.3e} exceeds {tol.hermiticity:g} * ||H||_F")
    herm = np.ascontiguousarray(0.5 * (arr + arr.conj().T))
    d, e, q = _impl.tridiagonalize(herm)
    sweeps = tol.eig_max_sweeps if max_sweeps is None else max_sweeps
    w, v, fail, residual = _impl.tql_implicit(d, e, q, sweeps)
    if fail >= 0:
        raise NoConvergence(
            f"QL failed to converge at index {fail} of a {n}x{n} matrix "
            f"(off-diagonal residual {residual:.3e})",
            dim=n, residual=residual)
    order = np.argsort(w, kind="stable")
    return HermitianEig(eigenvalues=np.ascontiguousarray(w[order]),
                        eigenvectors=np.ascontiguousarray(v[:, order]))


def norms(a, tol: Tolerances = DEFAULT) -> tuple[float, float]:
    """(Frobenius norm, operator 2-norm). The operator norm comes from power
    iteration on A*A to relative accuracy ``tol.operator_norm_rel``.
    """
    arr = as_cmatrix(a)
    fro = frobenius(arr)
    if fro == 0.0:
        return 0.0, 0.0
    m = min(arr.shape)
    op2 = _power_iteration(arr, tol.operator_norm_rel)
    # a second deterministic start guards against an orthogonal first start
    lower = fro / math.sqrt(m)
    if math.sqrt(op2) < lower * (1.0 - 1e-10):
        op2b = _power_iteration(arr, tol.operator_norm_rel, alternate=True)
        op2 = max(op2, op2b)
    return fro, math.sqrt(op2)


def _power_iteration(arr: np.ndarray, rel: float, alternate: bool = False) -> float:
    n = arr.shape[1]
    v = np.abs(arr).sum(axis=0).astype(np.complex128)
    v += np.arange(1, n + 1) * (1.0 / (1000.0 * n))
    if alternate:
        v = v * ((-1.0) ** np.arange(n)) + 1j * np.arange(1, n + 1) / n
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.ones(n, dtype=np.complex128)
        nv = math.sqrt(n)
    v /= nv
    rho = 0.0
    for _ in range(10000):
        w = arr.conj().T @ (arr @ v)
        rho_new = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(rho_new - rho) <= rel * max(abs(rho_new), 1e-300):
            return rho_new
        rho = rho_new
    return rho


def hessenberg(a) -> np.ndarray:
    """Unitary similarity reduction to upper Hessenberg form (determinant
    of I + s*A is preserved)."""
    arr = as_cmatrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError("square matrix required")
    return _impl.hessenberg(arr)


def hess_logdet_batch(h, s_values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log|det|, arg det, min pivot) of I + s*H for each s; H upper
    Hessenberg. log|det| is -inf where the determinant is exactly zero.
    """
    sv = np.ascontiguousarray(np.atleast_1d(s_values), dtype=np.complex128)
    return _impl.hess_logdet(np.ascontiguousarray(h, dtype=np.complex128), sv)
