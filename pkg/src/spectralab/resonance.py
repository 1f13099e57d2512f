"""Coupling-plane calculus: the perturbation determinant d(s, z) =
det(I + s J T_z(H0)), resonance points as its zeros (argument principle +
quadtree + Newton), Riesz operators by contour quadrature, the Laurent
remainder, vertical trajectory tracking, impacting classification, and the
local resonance index.

Zeros are found from determinants, never from a non-Hermitian eigenvalue
problem. For many evaluations at one z the engine reduces B = J T0 to
Hessenberg form once (a unitary similarity, determinant preserved) so each
sample costs O(n^2); the dense LU + log-det route stays as the public
`perturbation_determinant` and the two are cross-checked in the tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import (BoundaryZero, ContourCrossesPole, EvaluationAtPole,
                     NewtonStall, QuadratureNoConvergence, SingularMatrix,
                     UnstableCount)
from .models import OperatorModel
from .resolvent import SpectralParameter, sandwiched_t0
from .tolerances import DEFAULT, Tolerances


def _as_z(z) -> complex:
    if isinstance(z, SpectralParameter):
        return z.z
    return complex(z)


def _as_param(z) -> SpectralParameter:
    if isinstance(z, SpectralParameter):
        return z
    z = complex(z)
    return SpectralParameter(z.real, z.imag)


@dataclass(frozen=True)
class Box:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate box {self}")

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max),
                       0.5 * (self.im_min + self.im_max))

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def max_side(self) -> float:
        return max(self.width, self.height)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, s: complex, slack: float = 0.0) -> bool:
        return (self.re_min - slack <= s.real <= self.re_max + slack
                and self.im_min - slack <= s.imag <= self.im_max + slack)

    def split(self, fx: float, fy: float) -> list["Box"]:
        xm = self.re_min + fx * self.width
        ym = self.im_min + fy * self.height
        return [Box(self.re_min, xm, self.im_min, ym),
                Box(xm, self.re_max, self.im_min, ym),
                Box(self.re_min, xm, ym, self.im_max),
                Box(xm, self.re_max, ym, self.im_max)]

    def quarter_points(self) -> list[complex]:
        c = self.center
        dx, dy = 0.25 * self.width, 0.25 * self.height
        return [c + complex(sx * dx, sy * dy)
                for sx in (-1.0, 1.0) for sy in (-1.0, 1.0)]

    def boundary_point(self, t: float) -> complex:
        """Perimeter point for t in [0, 4): edges bottom, right, top, left."""
        t = t % 4.0
        k = int(t)
        f = t - k
        if k == 0:
            return complex(self.re_min + f * self.width, self.im_min)
        if k == 1:
            return complex(self.re_max, self.im_min + f * self.height)
        if k == 2:
            return complex(self.re_max - f * self.width, self.im_max)
        return complex(self.re_min, self.im_max - f * self.height)

    @classmethod
    def from_sequence(cls, seq) -> "Box":
        a = [float(v) for v in seq]
        if len(a) != 4:
            raise ValueError("box must be [re_min, re_max, im_min, im_max]")
        return cls(*a)


@dataclass(frozen=True)
class DetValue:
    """Perturbation determinant in log form; `value` is None on overflow."""
    log_modulus: float
    phase: float

    @property
    def value(self) -> complex | None:
        if abs(self.log_modulus) < 300.0:
            return cmath.exp(complex(self.log_modulus, self.phase))
        return None

    def __complex__(self) -> complex:
        v = self.value
        if v is None:
            raise OverflowError(f"determinant log-modulus {self.log_modulus:.1f} "
                                "out of complex range")
        return v


@dataclass(frozen=True)
class ResonancePoint:
    r: complex
    multiplicity: int
    riesz: np.ndarray | None
    det_residual: float
    z: SpectralParameter

    def riesz_rank(self, tol: Tolerances = DEFAULT) -> int:
        """Singular values of K above 1e-8 * ||K||_op, via K*K."""
        if self.riesz is None:
            raise ValueError("point carries no Riesz operator")
        gram = self.riesz.conj().T @ self.riesz
        w = kernels.hermitian_eig(gram, tol).eigenvalues
        sv = np.sqrt(np.clip(w, 0.0, None))
        if sv[-1] == 0.0:
            return 0
        return int(np.sum(sv > 1e-8 * sv[-1]))


class LocateResult:
    """Resonance points plus the diagnostics locate never drops silently."""

    def __init__(self, points, unresolved, boundary_scale):
        self.points: list[ResonancePoint] = points
        self.unresolved: list[Box] = unresolved
        self.boundary_scale: float = boundary_scale

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


class CouplingScan:
    """Determinant engine for one (model, z): Hessenberg-compressed
    evaluations of d(s) = det(I + s J T0), windings and Newton refinement."""

    def __init__(self, model: OperatorModel, z, tol: Tolerances = DEFAULT):
        self.model = model
        self.zp = _as_param(z)
        self.z = self.zp.z
        self.tol = tol
        if self.zp.y == 0.0 and model.spectrum_distance(self.zp.lam) <= 1e-8:
            raise SingularMatrix(
                f"z = {self.z} sits on spec(H0); determinant engine undefined")
        self.t0 = sandwiched_t0(model, self.z, tol)
        self.b = model.j @ self.t0
        self.hess = kernels.hessenberg(self.b)

    def logdet(self, s_values):
        """(log|d|, arg d, min pivot) arrays for an array of couplings."""
        return kernels.hess_logdet_batch(self.hess, np.asarray(s_values, dtype=np.complex128))

    def det_scaled(self, s_values) -> tuple[np.ndarray, float]:
        """d values scaled by exp(-L); returns (values, L)."""
        lm, ph, _ = self.logdet(s_values)
        finite = lm[np.isfinite(lm)]
        L = float(np.max(finite)) if finite.size else 0.0
        vals = np.where(np.isfinite(lm), np.exp(lm - L), 0.0) * np.exp(1j * ph)
        return vals, L

    def abs_det(self, s: complex) -> float:
        lm, _, _ = self.logdet([s])
        if not math.isfinite(lm[0]):
            return 0.0
        return math.exp(min(lm[0], 300.0))

    # -- winding numbers ---------------------------------------------------

    def _winding(self, param_to_point, t_lo: float, t_hi: float, n0: int) -> int:
        tol = self.tol
        ts = list(np.linspace(t_lo, t_hi, n0, endpoint=False)) + [t_hi]
        pts = np.array([param_to_point(t) for t in ts], dtype=np.complex128)
        lm, ph, _ = self.logdet(pts)
        if np.any(~np.isfinite(lm)) or np.any(lm < math.log(tol.boundary_min_det)):
            raise BoundaryZero("determinant vanishes on the contour")
        samples = list(zip(ts, ph, lm))
        total_evals = len(samples)
        while True:
            inserts = []
            for i in range(len(samples) - 1):
                d = _principal(samples[i + 1][1] - samples[i][1])
                if abs(d) > tol.phase_step_max:
                    inserts.append(0.5 * (samples[i][0] + samples[i + 1][0]))
            if not inserts:
                break
            total_evals += len(inserts)
            if total_evals > tol.contour_sample_cap:
                raise BoundaryZero(
                    f"phase unresolved after {total_evals} contour samples "
                    "(zero on or near the contour)")
            pts = np.array([param_to_point(t) for t in inserts], dtype=np.complex128)
            lm, ph, _ = self.logdet(pts)
            if np.any(~np.isfinite(lm)) or np.any(lm < math.log(tol.boundary_min_det)):
                raise BoundaryZero("determinant below floor on the contour")
            for t, p, m in zip(inserts, ph, lm):
                samples.append((t, p, m))
            samples.sort(key=lambda x: x[0])
        total = 0.0
        for i in range(len(samples) - 1):
            total += _principal(samples[i + 1][1] - samples[i][1])
        w = total / (2.0 * math.pi)
        wi = int(round(w))
        if abs(w - wi) > 0.25:
            raise BoundaryZero(f"winding {w:.3f} is not near an integer")
        self._last_boundary_scale = math.exp(min(max(s[2] for s in samples), 300.0))
        return wi

    def winding_box(self, box: Box, n0: int = 32) -> int:
        return self._winding(box.boundary_point, 0.0, 4.0, n0)

    def winding_circle(self, center: complex, radius: float, n0: int = 32) -> int:
        def to_point(t):
            return center + radius * cmath.exp(2j * math.pi * t)
        return self._winding(to_point, 0.0, 1.0, n0)

    # -- Newton refinement ---------------------------------------------------

    def refine(self, seed: complex, multiplicity: int = 1) -> tuple[complex, bool]:
        """Multiplicity-aware Newton on d with finite-difference derivative.
        Returns the iterate of smallest |d| and a convergence flag."""
        tol = self.tol
        s = complex(seed)
        best = (math.inf, s)
        small_steps = 0
        converged = False
        for _ in range(tol.newton_max_iter):
            h = tol.fd_step * (1.0 + abs(s))
            vals, _ = self.det_scaled([s, s + h, s - h])
            d0, dp, dm = vals
            a0 = abs(d0)
            if a0 < best[0]:
                best = (a0, s)
            dprime = (dp - dm) / (2.0 * h)
            if dprime == 0.0:
                break
            step = -multiplicity * d0 / dprime
            s = s + step
            if abs(step) <= tol.newton_step_tol * (1.0 + abs(s)):
                small_steps += 1
                if small_steps >= 2:
                    converged = True
                    break
            else:
                small_steps = 0
        # final polish: keep the argmin-|d| iterate among a few extra steps
        for _ in range(3):
            h = tol.fd_step * (1.0 + abs(s))
            vals, _ = self.det_scaled([s, s + h, s - h])
            d0, dp, dm = vals
            if abs(d0) < best[0]:
                best = (abs(d0), s)
            dprime = (dp - dm) / (2.0 * h)
            if dprime == 0.0:
                break
            s = s - multiplicity * d0 / dprime
        if not converged:
            converged = best[0] < math.inf and abs(s - best[1]) <= \
                1e-8 * (1.0 + abs(best[1]))
        return best[1], converged


def _principal(dphi: float) -> float:
    w = math.remainder(dphi, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


# --------------------------------------------------------------------------
# public operations


def perturbation_determinant(model: OperatorModel, s, z,
                             tol: Tolerances = DEFAULT) -> DetValue:
    """d(s, z) = det(I + s J T_z(H0)) through the dense LU + log-det route."""
    zp = _as_param(z)
    if zp.y == 0.0 and model.spectrum_distance(zp.lam) <= 1e-8:
        raise SingularMatrix("T_z(H0) unavailable: z on spec(H0)")
    t0 = sandwiched_t0(model, zp.z, tol)
    m = np.eye(model.dim) + complex(s) * (model.j @ t0)
    lu = kernels.lu_factor(m, raise_on_singular=False, tol=tol)
    ld = kernels.log_det(lu)
    return DetValue(log_modulus=ld.log_modulus, phase=ld.phase)


def count_resonances(model: OperatorModel, z, box, tol: Tolerances = DEFAULT,
                     scan: CouplingScan | None = None) -> int:
    """Zeros of d(., z) inside the box, counted with multiplicity, by the
    argument principle along the box boundary."""
    if not isinstance(box, Box):
        box = Box.from_sequence(box)
    if scan is None:
        scan = CouplingScan(model, z, tol)
    return scan.winding_box(box)


def _merge_clusters(roots: list[tuple[complex, int]], threshold: float):
    merged = [list(r) for r in sorted(roots, key=lambda t: (t[0].real, t[0].imag))]
    changed = True
    while changed:
        changed = False
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                if abs(merged[i][0] - merged[j][0]) < threshold:
                    mi, mj = merged[i][1], merged[j][1]
                    pos = (merged[i][0] * mi + merged[j][0] * mj) / (mi + mj)
                    merged[i] = [pos, mi + mj]
                    del merged[j]
                    changed = True
                    break
            if changed:
                break
    return [(p, m) for p, m in merged]


_SPLIT_FRACTIONS = ((0.5, 0.5), (0.53, 0.47), (0.47, 0.56), (0.41, 0.59),
                    (0.61, 0.43), (0.57, 0.53))


def locate_resonances(model: OperatorModel, z, box, tol: Tolerances = DEFAULT,
                      compute_riesz: bool = True,
                      scan: CouplingScan | None = None) -> LocateResult:
    """Quadtree isolation of the zeros of d(., z) in the box, Newton
    refinement, cluster merging, and (by default) a Riesz operator per point.
    Sub-boxes Newton cannot resolve are returned as diagnostics."""
    if not isinstance(box, Box):
        box = Box.from_sequence(box)
    if scan is None:
        scan = CouplingScan(model, z, tol)
    total = scan.winding_box(box)
    boundary_scale = getattr(scan, "_last_boundary_scale", 1.0)
    roots: list[tuple[complex, int]] = []
    unresolved: list[Box] = []
    stack: list[tuple[Box, int, int]] = [(box, total, 0)]
    while stack:
        b, w, depth = stack.pop()
        if w == 0:
            continue
        if w == 1 or b.max_side < tol.cluster_threshold or depth >= tol.quadtree_depth_cap:
            found = False
            for seed in [b.center] + b.quarter_points():
                s_hat, ok = scan.refine(seed, w)
                if ok and b.contains(s_hat, slack=max(b.max_side, tol.cluster_threshold)):
                    roots.append((s_hat, w))
                    found = True
                    break
            if not found:
                unresolved.append(b)
            continue
        placed = False
        for fx, fy in _SPLIT_FRACTIONS:
            children = b.split(fx, fy)
            try:
                ws = [scan.winding_box(c) for c in children]
            except BoundaryZero:
                continue
            if sum(ws) != w:
                continue
            for c, wc in zip(children, ws):
                if wc:
                    stack.append((c, wc, depth + 1))
            placed = True
            break
        if not placed:
            unresolved.append(b)
    merged = _merge_clusters(roots, tol.cluster_threshold)
    merged = [(p, m) for p, m in merged if box.contains(p, slack=tol.cluster_threshold)]
    points = []
    for pos, mult in merged:
        resid = scan.abs_det(pos)
        k = None
        if compute_riesz:
            k = _riesz_from_scan(model, scan, pos, mult,
                                 _default_radius(pos, merged, box), tol)
        points.append(ResonancePoint(r=pos, multiplicity=mult, riesz=k,
                                     det_residual=resid, z=scan.zp))
    points.sort(key=lambda p: (p.r.real, p.r.imag))
    return LocateResult(points, unresolved, boundary_scale)


def _default_radius(pos: complex, merged, box: Box) -> float:
    sep = min((abs(pos - q) for q, _ in merged if q != pos), default=math.inf)
    r = 0.1 * (1.0 + abs(pos))
    r = min(r, 0.45 * sep, 0.9 * box.diagonal)
    return max(r, 1e-9)


def _t_of_s(model: OperatorModel, z: complex, s: complex,
            tol: Tolerances) -> np.ndarray:
    """T_z(H_s) for complex coupling s, by the direct solve."""
    a = model.h0 + s * model.v - z * np.eye(model.dim)
    lu = kernels.lu_factor(a, tol=tol)
    return model.f @ kernels.solve(lu, model.f.conj().T, tol)


def _riesz_from_scan(model: OperatorModel, scan: CouplingScan, r: complex,
                     multiplicity: int, radius: float,
                     tol: Tolerances) -> np.ndarray:
    last_exc = None
    for _ in range(4):
        try:
            return _riesz_quadrature(model, scan, r, radius, tol.contour_nodes,
                                     tol, expect=multiplicity)
        except (ContourCrossesPole, QuadratureNoConvergence, SingularMatrix) as exc:
            last_exc = exc
            radius *= 0.5
    raise last_exc


def _riesz_quadrature(model: OperatorModel, scan: CouplingScan, r: complex,
                      radius: float, nodes: int, tol: Tolerances,
                      expect: int | None = None) -> np.ndarray:
    w_outer = scan.winding_circle(r, radius)
    if w_outer < 1:
        raise ContourCrossesPole(
            f"no resonance point inside the contour of radius {radius:g} at {r}")
    w_inner = scan.winding_circle(r, 0.25 * radius)
    if w_inner != w_outer:
        raise ContourCrossesPole(
            f"annulus between {0.25 * radius:g} and {radius:g} around {r} "
            "contains another resonance point")
    if expect is not None and w_outer != expect:
        raise ContourCrossesPole(
            f"contour encloses winding {w_outer}, expected {expect}")
    n = model.dim
    m = nodes
    acc = np.zeros((n, n), dtype=np.complex128)
    evaluated = {}

    def node_value(theta: float) -> np.ndarray:
        if theta not in evaluated:
            s = r + radius * cmath.exp(1j * theta)
            evaluated[theta] = _t_of_s(model, scan.z, s, tol) * cmath.exp(1j * theta)
        return evaluated[theta]

    prev = None
    while m <= tol.contour_node_cap:
        acc = np.zeros((n, n), dtype=np.complex128)
        for jj in range(m):
            acc += node_value(2.0 * math.pi * jj / m)
        k = (radius / m) * acc
        if prev is not None:
            diff = kernels.frobenius(k - prev)
            if diff <= tol.contour_rel * max(kernels.frobenius(k), 1e-300):
                return k
        prev = k
        m *= 2
    raise QuadratureNoConvergence(
        f"Riesz quadrature not converged at {tol.contour_node_cap} nodes",
        achieved=kernels.frobenius(k - prev) if prev is not None else None)


def riesz_operator(model: OperatorModel, z, r: complex, radius: float,
                   nodes: int | None = None,
                   tol: Tolerances = DEFAULT) -> np.ndarray:
    """Contour-quadrature Riesz operator K_z(r) = (1/2 pi i) \\oint T_z(H_s) ds
    over the circle |s - r| = radius, trapezoid nodes doubled until stable.
    The circle must isolate exactly one resonance point (checked by winding)."""
    scan = CouplingScan(model, z, tol)
    return _riesz_quadrature(model, scan, complex(r), float(radius),
                             nodes or tol.contour_nodes, tol)


def laurent_remainder(model: OperatorModel, s, z, points,
                      tol: Tolerances = DEFAULT) -> np.ndarray:
    """T_z(H_s) minus the supplied simple-pole terms (s - r_j)^{-1} K_j."""
    zp = _as_param(z)
    s = complex(s)
    total = _t_of_s(model, zp.z, s, tol)
    for p in points:
        if abs(s - p.r) <= tol.pole_eval_guard * (1.0 + abs(p.r)):
            raise EvaluationAtPole(f"s = {s} coincides with resonance point {p.r}")
        if p.riesz is None:
            raise ValueError("resonance point carries no Riesz operator")
        total = total - p.riesz / (s - p.r)
    return total


# --------------------------------------------------------------------------
# trajectory tracking along vertical segments z = lambda + i y


@dataclass
class Branch:
    points: list[tuple[float, complex]]
    multiplicity: int = 1
    impacting: bool = False
    branching_suspected: bool = False
    lost: bool = False
    _prev_dy: float = field(default=0.0, repr=False)
    _prev_disp: float = field(default=-1.0, repr=False)  # <0: no step yet

    @property
    def endpoint(self) -> complex:
        """Linear-in-y extrapolation of the branch to y = 0."""
        if len(self.points) == 1:
            return self.points[-1][1]
        (y1, r1), (y0, r0) = self.points[-2], self.points[-1]
        return (r0 * y1 - r1 * y0) / (y1 - y0)

    def at_y(self, y: float) -> complex:
        """Branch position at y: exact rung, linear interpolation between
        rungs, or endpoint-anchored extrapolation below the ladder."""
        ys = [p[0] for p in self.points]
        for yy, rr in self.points:
            if yy == y:
                return rr
        if y < ys[-1]:
            e = self.endpoint
            y0, r0 = self.points[-1]
            return e + (r0 - e) * (y / y0)
        if y > ys[0]:
            return self.points[0][1]
        for i in range(len(self.points) - 1):
            y_hi, r_hi = self.points[i]
            y_lo, r_lo = self.points[i + 1]
            if y_lo <= y <= y_hi:
                f = (y - y_lo) / (y_hi - y_lo)
                return r_lo + f * (r_hi - r_lo)
        return self.points[-1][1]


@dataclass
class TrajectorySet:
    lam: float
    ladder: list[float]
    branches: list[Branch]
    box: Box
    y0: float
    y_min: float
    shrink: float
    delta: float | None = None
    window: tuple[float, float] | None = None


def _locate_positions(model, lam, y, box, tol, cache=None):
    key = y
    if cache is not None and key in cache:
        return cache[key]
    res = locate_resonances(model, complex(lam, y), box, tol, compute_riesz=False)
    out = [(p.r, p.multiplicity) for p in res.points]
    if cache is not None:
        cache[key] = out
    return out


def _advance(model, lam, box, branches, y_from, y_to, depth, tol, cache):
    """Move all active branches from rung y_from to rung y_to, halving the
    step (inserting intermediate rungs) up to the cap on match failure.
    Returns the list of realized rungs appended (in decreasing order)."""
    candidates = _locate_positions(model, lam, y_to, box, tol, cache)
    active = [b for b in branches if not b.lost]
    dy = y_from - y_to
    radii = {}
    for b in active:
        if b._prev_disp >= 0.0 and b._prev_dy > 0.0:
            scaled = b._prev_disp * (dy / b._prev_dy)
        else:
            scaled = tol.first_step_fraction * box.diagonal
        radii[id(b)] = tol.match_step_factor * (scaled + tol.match_floor)
    pairs = []
    for bi, b in enumerate(active):
        last = b.points[-1][1]
        for ci, (pos, mult) in enumerate(candidates):
            pairs.append((abs(pos - last), bi, ci))
    pairs.sort()
    capacity = [m for _, m in candidates]
    assigned: dict[int, int] = {}
    claimed: dict[int, list[int]] = {}
    for dist, bi, ci in pairs:
        if bi in assigned:
            continue
        if dist > radii[id(active[bi])]:
            continue
        if capacity[ci] <= 0:
            continue
        assigned[bi] = ci
        capacity[ci] -= active[bi].multiplicity
        claimed.setdefault(ci, []).append(bi)
    failed = [bi for bi in range(len(active)) if bi not in assigned]
    if failed and depth < tol.halving_cap:
        y_mid = 0.5 * (y_from + y_to)
        rungs = _advance(model, lam, box, branches, y_from, y_mid, depth + 1, tol, cache)
        rungs += _advance(model, lam, box, branches, y_mid, y_to, depth + 1, tol, cache)
        return rungs
    for bi, ci in assigned.items():
        b = active[bi]
        pos, _ = candidates[ci]
        disp = abs(pos - b.points[-1][1])
        b.points.append((y_to, pos))
        b._prev_dy = dy
        b._prev_disp = disp
        if len(claimed.get(ci, [])) >= 2:
            for bj in claimed[ci]:
                active[bj].branching_suspected = True
    for bi in failed:
        b = active[bi]
        last = b.points[-1][1]
        near_taken = any(
            abs(candidates[ci][0] - last) <= tol.cluster_threshold * 10.0
            for ci in assigned.values())
        if near_taken:
            b.branching_suspected = True
        b.lost = True
    # points with spare capacity start new branches (entered the box)
    for ci, (pos, mult) in enumerate(candidates):
        taken = sum(active[bi].multiplicity for bi in claimed.get(ci, []))
        if taken < mult:
            branches.append(Branch(points=[(y_to, pos)], multiplicity=mult - taken))
    return [y_to]


def track_trajectories(model: OperatorModel, lam: float,
                       y0: float | None = None, y_min: float | None = None,
                       shrink: float | None = None, box=None,
                       tol: Tolerances = DEFAULT) -> TrajectorySet:
    """Follow the resonance points of z = lam + i y down the geometric ladder
    y0 * shrink^k, nearest-neighbor matching with adaptive step halving.
    Failures are flagged (branching_suspected / lost), never hidden."""
    y0 = tol.y0_default if y0 is None else float(y0)
    y_min = tol.y_min_default if y_min is None else float(y_min)
    shrink = tol.shrink_default if shrink is None else float(shrink)
    if not (0.0 < shrink < 1.0):
        raise ValueError("shrink must be in (0, 1)")
    if not (y0 > y_min > 0.0):
        raise ValueError("need y0 > y_min > 0")
    if box is None:
        raise ValueError("a coupling-plane box is required")
    if not isinstance(box, Box):
        box = Box.from_sequence(box)
    cache: dict = {}
    first = _locate_positions(model, lam, y0, box, tol, cache)
    branches = [Branch(points=[(y0, pos)], multiplicity=mult) for pos, mult in first]
    ladder = [y0]
    y_prev = y0
    k = 1
    while True:
        y_next = y0 * shrink**k
        if y_next < y_min * (1.0 - 1e-12):
            break
        ladder += _advance(model, lam, box, branches, y_prev, y_next, 0, tol, cache)
        y_prev = y_next
        k += 1
    return TrajectorySet(lam=float(lam), ladder=ladder, branches=branches,
                         box=box, y0=y0, y_min=y_min, shrink=shrink)


def _distance_to_window(r: complex, window: tuple[float, float]) -> float:
    lo, hi = window
    if r.real < lo:
        dx = lo - r.real
    elif r.real > hi:
        dx = r.real - hi
    else:
        dx = 0.0
    return math.hypot(dx, r.imag)


def classify_impacting(traj: TrajectorySet, window: tuple[float, float] = (0.0, 1.0),
                       delta: float | None = None,
                       tol: Tolerances = DEFAULT) -> TrajectorySet:
    """Flag a branch impacting when it (or its extrapolated endpoint) comes
    within delta of the real coupling window. The exact membership test of
    the theory is undecidable numerically; delta is always reported."""
    delta = tol.impacting_delta if delta is None else float(delta)
    out_branches = []
    for b in traj.branches:
        dmin = min(_distance_to_window(r, window) for _, r in b.points)
        dmin = min(dmin, _distance_to_window(b.endpoint, window))
        out_branches.append(replace(b, impacting=dmin <= delta,
                                    points=list(b.points)))
    return replace(traj, branches=out_branches, delta=delta, window=window)


# --------------------------------------------------------------------------
# local resonance index


@dataclass(frozen=True)
class ResonanceIndexReport:
    lam: float
    r: float
    n_plus: int
    n_minus: int
    index: int
    y_probe: float
    match_radius: float


def _index_counts(points, pairs_slope, r, y, tol):
    n_plus = n_minus = 0
    radius_used = tol.index_radius_factor * y * 1.0 + tol.index_radius_floor
    for pos, mult in points:
        slope = pairs_slope.get(pos, max(abs(pos.imag) / y, 1.0))
        radius = tol.index_radius_factor * y * slope + tol.index_radius_floor
        radius_used = max(radius_used, radius)
        if abs(pos - r) < radius:
            if pos.imag > 0.0:
                n_plus += mult
            elif pos.imag < 0.0:
                n_minus += mult
    return n_plus, n_minus, radius_used


def resonance_index(model: OperatorModel, lam: float, r: float, y_probe: float,
                    box, tol: Tolerances = DEFAULT) -> ResonanceIndexReport:
    """Signed count of resonance points approaching the real coupling r from
    the upper minus the lower half-plane, probed at z = lam + i y_probe.
    Stability under one halving of y_probe is checked; UnstableCount if the
    counts move."""
    if y_probe <= 0.0:
        raise ValueError("y_probe must be positive")
    if not isinstance(box, Box):
        box = Box.from_sequence(box)
    pts_full = _locate_positions(model, lam, y_probe, box, tol)
    pts_half = _locate_positions(model, lam, 0.5 * y_probe, box, tol)
    # slope estimates |dr/dy| from matched pairs
    slope = {}
    slope_half = {}
    for pos, mult in pts_full:
        if pts_half:
            near = min(pts_half, key=lambda t: abs(t[0] - pos))
            s_est = abs(near[0] - pos) / (0.5 * y_probe)
            slope[pos] = max(s_est, abs(pos.imag) / y_probe, 1e-6)
            slope_half[near[0]] = slope[pos]
    np1, nm1, rad1 = _index_counts(pts_full, slope, r, y_probe, tol)
    np2, nm2, _ = _index_counts(pts_half, slope_half, r, 0.5 * y_probe, tol)
    if np1 - nm1 != np2 - nm2:
        raise UnstableCount(
            f"index changed under halving of y_probe: {np1 - nm1} vs {np2 - nm2} "
            f"at (lambda, r) = ({lam}, {r})")
    return ResonanceIndexReport(lam=float(lam), r=float(r), n_plus=np1,
                                n_minus=nm1, index=np1 - nm1,
                                y_probe=float(y_probe), match_radius=rad1)
