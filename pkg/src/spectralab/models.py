"""Operator models (H0, F, J) on a finite-dimensional space.

A model is the quadruple of a Hermitian energy operator H0, an invertible
rigging F, a Hermitian coupling form J and an open interval of interest.
The perturbation is V = F* J F and the coupled operator H_r = H0 + r V.
No finite-dimensional model proves anything about continuum boundary-value
behavior; the zoo here only lets experiments report it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels
from .errors import InvalidConfig, NonHermitianInput
from .tolerances import DEFAULT, Tolerances

KINDS = ("explicit", "diagonal", "schrodinger1d", "jacobi", "rank_one")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass
class ModelConfig:
    kind: str
    interval: tuple[float, float]
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        if not isinstance(doc, dict):
            raise InvalidConfig("model config must be a JSON object")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise InvalidConfig(f"unknown model kind {kind!r}", field="kind")
        interval = doc.get("interval")
        if (not isinstance(interval, (list, tuple)) or len(interval) != 2
                or not all(isinstance(v, (int, float)) for v in interval)):
            raise InvalidConfig("interval must be [a, b]", field="interval")
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise InvalidConfig(f"interval must satisfy a < b, got ({a}, {b})", field="interval")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise InvalidConfig("seed must be a non-negative integer", field="seed")
        params = {k: v for k, v in doc.items() if k not in ("kind", "interval", "seed")}
        return cls(kind=kind, interval=(a, b), params=params, seed=seed)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "interval": list(self.interval), "seed": self.seed}
        doc.update(self.params)
        return doc


@dataclass
class OperatorModel:
    dim: int
    h0: np.ndarray
    f: np.ndarray
    j: np.ndarray
    interval: tuple[float, float]
    kind: str = "explicit"
    seed: int = 0

    def __post_init__(self):
        for name in ("h0", "f", "j"):
            arr = kernels.as_cmatrix(getattr(self, name), name)
            if arr.shape != (self.dim, self.dim):
                raise InvalidConfig(f"{name} must be {self.dim}x{self.dim}, got {arr.shape}",
                                    field=name)
            setattr(self, name, _freeze(arr))
        self._cache: dict[str, Any] = {}

    @property
    def v(self) -> np.ndarray:
        """Perturbation V = F* J F."""
        if "v" not in self._cache:
            v = self.f.conj().T @ self.j @ self.f
            self._cache["v"] = _freeze(0.5 * (v + v.conj().T))
        return self._cache["v"]

    def h0_eig(self) -> kernels.HermitianEig:
        if "h0_eig" not in self._cache:
            self._cache["h0_eig"] = kernels.hermitian_eig(self.h0)
        return self._cache["h0_eig"]

    def spectrum_distance(self, lam: float) -> float:
        w = self.h0_eig().eigenvalues
        return float(np.min(np.abs(w - lam)))


@dataclass(frozen=True)
class PerturbedOperator:
    r: float
    h_r: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    hermiticity_h0: float
    hermiticity_j: float
    f_min_pivot: float
    f_gram_min_eig: float
    interval_ok: bool
    passed: bool
    reasons: tuple[str, ...]


def _reals(seq, name) -> np.ndarray:
    try:
        arr = np.asarray(seq, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{name} must be a real array", field=name) from exc
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidConfig(f"{name} must be a non-empty 1-D array", field=name)
    return arr


def _complex_entries(doc, name) -> np.ndarray:
    """Parse nested JSON numbers / [re, im] pairs into a complex array."""
    def conv(x):
        if isinstance(x, (int, float)):
            return complex(x)
        if isinstance(x, (list, tuple)) and len(x) == 2 and all(
                isinstance(v, (int, float)) for v in x):
            return complex(x[0], x[1])
        raise InvalidConfig(f"{name}: entries must be numbers or [re, im] pairs", field=name)
    try:
        rows = [[conv(x) for x in row] for row in doc]
    except TypeError as exc:
        raise InvalidConfig(f"{name} must be a nested array", field=name) from exc
    return np.array(rows, dtype=np.complex128)


def _complex_vector(doc, name) -> np.ndarray:
    def conv(x):
        if isinstance(x, (int, float)):
            return complex(x)
        if isinstance(x, (list, tuple)) and len(x) == 2 and all(
                isinstance(v, (int, float)) for v in x):
            return complex(x[0], x[1])
        raise InvalidConfig(f"{name}: entries must be numbers or [re, im] pairs", field=name)
    if not isinstance(doc, (list, tuple)) or len(doc) == 0:
        raise InvalidConfig(f"{name} must be a non-empty array", field=name)
    return np.array([conv(x) for x in doc], dtype=np.complex128)


def centered_sites(n: int) -> np.ndarray:
    """Lattice coordinates n_k = k - (N-1)/2, symmetric about 0."""
    return np.arange(n, dtype=np.float64) - (n - 1) / 2.0


def rigging_weights(n: int, alpha: float) -> np.ndarray:
    """Polynomially decaying weights w_k = (1 + n_k^2)^(-alpha)."""
    sites = centered_sites(n)
    return (1.0 + sites**2) ** (-alpha)


def _rank_one_f(vector: np.ndarray, scale: float = 1e-6) -> np.ndarray:
    """Square invertible F whose first row is conj(vector); the remaining
    rows are an orthogonal completion shrunk to the given norm, so that
    J = diag(sign, 0, ..) makes V = sign * v v* exactly.
    """
    n = vector.shape[0]
    nv = float(np.linalg.norm(vector))
    if nv == 0.0:
        raise InvalidConfig("rank_one vector must be nonzero", field="vector")
    target = np.conj(vector) / nv
    if n == 1:
        return np.array([[np.conj(vector[0])]], dtype=np.complex128)
    # Householder reflector mapping e1 to `target`; its rows are orthonormal
    w = target.copy()
    w[0] -= 1.0
    wn2 = float(np.real(np.vdot(w, w)))
    if wn2 < 1e-30:
        u = np.eye(n, dtype=np.complex128)
    else:
        u = np.eye(n, dtype=np.complex128) - 2.0 * np.outer(w, w.conj()) / wn2
    # row 0 of u is target* ... we want row 0 = conj(vector)/nv, so build F
    # from u with its first row replaced exactly and the rest scaled down.
    rows = [np.conj(vector)]
    for k in range(1, n):
        rows.append(scale * u[:, k].conj())
    return np.array(rows, dtype=np.complex128)


def build_model(cfg: ModelConfig, tol: Tolerances = DEFAULT) -> OperatorModel:
    """Construct an operator model from a config; deterministic per config."""
    p = cfg.params
    kind = cfg.kind
    if kind == "diagonal":
        spec = _reals(p.get("spectrum"), "spectrum")
        n = spec.size
        f_diag = _reals(p.get("f_diag", [1.0] * n), "f_diag")
        j_diag = _reals(p.get("j_diag", [1.0] * n), "j_diag")
        if f_diag.size != n or j_diag.size != n:
            raise InvalidConfig("f_diag/j_diag must match spectrum length", field="f_diag")
        h0 = np.diag(spec).astype(np.complex128)
        f = np.diag(f_diag).astype(np.complex128)
        j = np.diag(j_diag).astype(np.complex128)
    elif kind == "schrodinger1d":
        n = p.get("n")
        if not isinstance(n, int) or n < 2:
            raise InvalidConfig("schrodinger1d needs lattice size n >= 2", field="n")
        pot = p.get("potential", 0.0)
        if isinstance(pot, (int, float)):
            v0 = np.full(n, float(pot))
        else:
            v0 = _reals(pot, "potential")
            if v0.size != n:
                raise InvalidConfig(f"potential length {v0.size} != n = {n}", field="potential")
        alpha = float(p.get("alpha", 0.5))
        h0 = np.zeros((n, n), dtype=np.complex128)
        np.fill_diagonal(h0, 2.0 + v0)
        idx = np.arange(n - 1)
        h0[idx, idx + 1] = -1.0
        h0[idx + 1, idx] = -1.0
        f = np.diag(rigging_weights(n, alpha)).astype(np.complex128)
        j_diag = _reals(p.get("j_diag", [1.0] * n), "j_diag")
        if j_diag.size != n:
            raise InvalidConfig("j_diag must have length n", field="j_diag")
        j = np.diag(j_diag).astype(np.complex128)
    elif kind == "jacobi":
        diag = _reals(p.get("diagonal"), "diagonal")
        off = _reals(p.get("off_diagonal"), "off_diagonal")
        n = diag.size
        if off.size != n - 1:
            raise InvalidConfig("off_diagonal must have length len(diagonal) - 1",
                                field="off_diagonal")
        h0 = np.diag(diag).astype(np.complex128)
        idx = np.arange(n - 1)
        h0[idx, idx + 1] = off
        h0[idx + 1, idx] = off
        f_diag = _reals(p.get("f_diag", [1.0] * n), "f_diag")
        j_diag = _reals(p.get("j_diag", [1.0] * n), "j_diag")
        if f_diag.size != n or j_diag.size != n:
            raise InvalidConfig("f_diag/j_diag must match diagonal length", field="f_diag")
        f = np.diag(f_diag).astype(np.complex128)
        j = np.diag(j_diag).astype(np.complex128)
    elif kind == "rank_one":
        spec = _reals(p.get("spectrum"), "spectrum")
        vec = _complex_vector(p.get("vector"), "vector")
        n = spec.size
        if vec.size != n:
            raise InvalidConfig("vector length must match spectrum length", field="vector")
        if np.linalg.norm(vec) == 0.0:
            raise InvalidConfig("rank_one vector must be nonzero", field="vector")
        sign = p.get("sign", 1)
        if sign not in (1, -1):
            raise InvalidConfig("sign must be +1 or -1", field="sign")
        h0 = np.diag(spec).astype(np.complex128)
        f = _rank_one_f(vec)
        j = np.zeros((n, n), dtype=np.complex128)
        j[0, 0] = sign
    elif kind == "explicit":
        h0 = _complex_entries(p.get("h0"), "h0")
        f = _complex_entries(p.get("f"), "f")
        j = _complex_entries(p.get("j"), "j")
        n = h0.shape[0]
        if h0.shape != (n, n) or f.shape != (n, n) or j.shape != (n, n):
            raise InvalidConfig("h0, f, j must be square matrices of equal size", field="h0")
    else:
        raise InvalidConfig(f"unknown model kind {kind!r}", field="kind")

    for name, arr in (("h0", h0), ("j", j)):
        scale = max(kernels.frobenius(arr), 1e-300)
        if kernels.frobenius(arr - arr.conj().T) > tol.hermiticity * scale:
            raise NonHermitianInput(f"{name} is not Hermitian within {tol.hermiticity:g}")
    return OperatorModel(dim=n, h0=h0, f=f, j=j, interval=cfg.interval,
                         kind=kind, seed=cfg.seed)


def validate(model: OperatorModel, tol: Tolerances = DEFAULT) -> ValidationReport:
    """Premise checks: Hermitian h0 and j, invertible rigging, sane interval."""
    reasons = []
    sh = max(kernels.frobenius(model.h0), 1e-300)
    res_h0 = kernels.frobenius(model.h0 - model.h0.conj().T) / sh
    if res_h0 > tol.hermiticity:
        reasons.append(f"h0 hermiticity residual {res_h0:.3e}")
    sj = max(kernels.frobenius(model.j), 1e-300)
    res_j = kernels.frobenius(model.j - model.j.conj().T) / sj
    if res_j > tol.hermiticity:
        reasons.append(f"j hermiticity residual {res_j:.3e}")
    fac = kernels.lu_factor(model.f, raise_on_singular=False)
    gram_min = 0.0
    if fac.min_pivot <= tol.rigging_min_pivot:
        reasons.append("rigging kernel nontrivial")
    else:
        gram = model.f.conj().T @ model.f
        gram_min = float(kernels.hermitian_eig(gram, tol).eigenvalues[0])
        if gram_min <= tol.rigging_min_pivot**2:
            reasons.append("rigging kernel nontrivial")
    a, b = model.interval
    interval_ok = a < b
    if not interval_ok:
        reasons.append(f"interval ({a}, {b}) is empty")
    return ValidationReport(
        hermiticity_h0=res_h0,
        hermiticity_j=res_j,
        f_min_pivot=fac.min_pivot,
        f_gram_min_eig=gram_min,
        interval_ok=interval_ok,
        passed=not reasons,
        reasons=tuple(reasons),
    )


def perturbed(model: OperatorModel, r: float) -> PerturbedOperator:
    """H_r = H0 + r * F* J F, Hermitian by construction."""
    if not math.isfinite(r):
        raise ValueError("coupling r must be finite")
    h = model.h0 + r * model.v
    h = 0.5 * (h + h.conj().T)
    return PerturbedOperator(r=float(r), h_r=_freeze(h))


def scalar_a(interval=(-1.0, 1.0)) -> OperatorModel:
    """1x1 model with H0 = [0], F = [1], J = [1]; T(s, z) = 1/(s - z)."""
    return build_model(ModelConfig("diagonal", interval, {"spectrum": [0.0]}))


def rank1_c(interval=(-1.0, 1.0)) -> OperatorModel:
    """Rank-one model on diag(-1, 1) with vector (1, 1)/sqrt(2); the
    perturbation determinant is 1 - s*z/(z^2 - 1)."""
    s = 1.0 / math.sqrt(2.0)
    return build_model(ModelConfig("rank_one", interval,
                                   {"spectrum": [-1.0, 1.0], "vector": [s, s]}))
