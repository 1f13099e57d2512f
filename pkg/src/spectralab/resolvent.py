"""Sandwiched resolvent T_z(H_s) = F (H_s - z)^{-1} F* by two routes, and a
numerical probe of boundary-value behavior as y -> 0+.

Boundary values in reports are produced by extrapolation from y > 0; a
solve at y = 0 happens only when a caller explicitly asks for an off-axis
boundary point far from the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CouplingResonanceHit, SingularMatrix
from .models import OperatorModel, perturbed
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class SpectralParameter:
    lam: float
    y: float

    def __post_init__(self):
        if self.y < 0.0:
            raise ValueError("y must be >= 0 (lower half-plane via conjugation)")

    @property
    def z(self) -> complex:
        return complex(self.lam, self.y)


@dataclass(frozen=True)
class SandwichValue:
    t: np.ndarray
    s: float
    z: SpectralParameter
    route: str  # "direct" | "identity"


@dataclass(frozen=True)
class LapReport:
    lambda_grid: np.ndarray
    y_schedule: np.ndarray
    increments: np.ndarray        # shape (n_lambda, n_y - 1), operator norms
    limits: np.ndarray            # extrapolated boundary matrices, (n_lambda, n, n)
    converged: np.ndarray         # bool per lambda
    continuity: float             # max adjacent-lambda op-norm difference at y_min
    level_spacing: np.ndarray     # distance from each lambda to spec(H0)
    tol_lap: float
    monotone_steps: int


def _resolve_z(model: OperatorModel, s: float, z: SpectralParameter,
               tol: Tolerances) -> complex:
    if z.y == 0.0:
        h = perturbed(model, s).h_r
        w = kernels.hermitian_eig(h, tol).eigenvalues
        if float(np.min(np.abs(w - z.lam))) <= 1e-8:
            raise SingularMatrix(
                f"lambda = {z.lam} is within 1e-8 of spec(H_s); no boundary solve")
    return z.z


def sandwiched_direct(model: OperatorModel, s: float, z: SpectralParameter,
                      tol: Tolerances = DEFAULT) -> SandwichValue:
    """T_z(H_s) = F (H_s - z)^{-1} F* by a direct factor-and-solve."""
    zz = _resolve_z(model, s, z, tol)
    h = perturbed(model, s).h_r
    a = h - zz * np.eye(model.dim)
    lu = kernels.lu_factor(a, tol=tol)
    x = kernels.solve(lu, model.f.conj().T, tol)
    return SandwichValue(t=model.f @ x, s=float(s), z=z, route="direct")


def sandwiched_t0(model: OperatorModel, z: complex,
                  tol: Tolerances = DEFAULT) -> np.ndarray:
    """Unperturbed T_z(H0) as a bare matrix (helper used across modules)."""
    a = model.h0 - z * np.eye(model.dim)
    lu = kernels.lu_factor(a, tol=tol)
    return model.f @ kernels.solve(lu, model.f.conj().T, tol)


def sandwiched_identity(model: OperatorModel, s: float, z: SpectralParameter,
                        tol: Tolerances = DEFAULT) -> SandwichValue:
    """Same value through the resolvent identity
    T_z(H_s) = T_z(H0) (I + s J T_z(H0))^{-1}; the cross-check route.

    Raises CouplingResonanceHit when I + s J T0 is numerically singular,
    i.e. s sits (near) a coupling resonance point of z.
    """
    zz = _resolve_z(model, 0.0, z, tol)  # boundary guard is on spec(H0) here
    t0 = sandwiched_t0(model, zz, tol)
    m = np.eye(model.dim) + s * (model.j @ t0)
    try:
        lu = kernels.lu_factor(m.T.copy(), tol=tol)
    except SingularMatrix as exc:
        raise CouplingResonanceHit(
            f"I + sJT0 numerically singular at s = {s}: s is (near) a "
            f"resonance point of z = {zz}") from exc
    t = kernels.solve(lu, t0.T.copy(), tol).T
    return SandwichValue(t=np.ascontiguousarray(t), s=float(s), z=z, route="identity")


def imaginary_part(t: np.ndarray) -> np.ndarray:
    """Matrix imaginary part (T - T*) / 2i, Hermitian."""
    return (t - t.conj().T) / 2j


def lap_probe(model: OperatorModel, lambda_grid, y_schedule, s: float = 0.0,
              tol: Tolerances = DEFAULT) -> LapReport:
    """Cauchy-increment probe of T at s along a decreasing y schedule.

    A lambda is flagged converged when the last increment is below
    tol.lap_converged and the increments decrease monotonically over the
    final tol.lap_monotone_steps steps. The extrapolated limit is linear in
    y from the last two rungs. Finite dimension makes the limit trivial off
    the (discrete) spectrum; the level-spacing column is the honesty knob.
    """
    lg = np.asarray(lambda_grid, dtype=np.float64)
    ys = np.asarray(y_schedule, dtype=np.float64)
    if lg.ndim != 1 or lg.size == 0:
        raise ValueError("lambda_grid must be a non-empty 1-D array")
    if ys.ndim != 1 or ys.size < 2 or np.any(np.diff(ys) >= 0) or ys[-1] <= 0:
        raise ValueError("y_schedule must be strictly decreasing and positive")
    n = model.dim
    nl, ny = lg.size, ys.size
    increments = np.zeros((nl, ny - 1))
    limits = np.zeros((nl, n, n), dtype=np.complex128)
    converged = np.zeros(nl, dtype=bool)
    last_vals = np.zeros((nl, n, n), dtype=np.complex128)
    for i, lam in enumerate(lg):
        prev = None
        prev2 = None
        for k, y in enumerate(ys):
            t = sandwiched_direct(model, s, SpectralParameter(float(lam), float(y)), tol).t
            if prev is not None:
                increments[i, k - 1] = kernels.norms(t - prev, tol)[1]
            prev2 = prev
            prev = t
        # linear-in-y extrapolation from the last two rungs
        y1, y0 = ys[-2], ys[-1]
        limits[i] = prev + (prev - prev2) * (y0 / (y1 - y0))
        last_vals[i] = prev
        tail = increments[i, -tol.lap_monotone_steps:]
        converged[i] = bool(
            increments[i, -1] < tol.lap_converged
            and np.all(np.diff(tail) < 0.0))
    continuity = 0.0
    for i in range(nl - 1):
        continuity = max(continuity,
                         kernels.norms(last_vals[i + 1] - last_vals[i], tol)[1])
    spacing = np.array([model.spectrum_distance(float(l)) for l in lg])
    return LapReport(lambda_grid=lg, y_schedule=ys, increments=increments,
                     limits=limits, converged=converged, continuity=continuity,
                     level_spacing=spacing, tol_lap=tol.lap_converged,
                     monotone_steps=tol.lap_monotone_steps)
