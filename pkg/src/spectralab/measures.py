"""Spectral projections of H_r, Stone-formula functionals and their
holomorphic/pole splitting, compact-set selection, and stability scans.

Finite-dimensional convention: the singular part of the spectral measure is
the whole spectral measure (all spectrum is pure point), so E^(s)_K is the
full eigenprojection onto eigenvalues in K. The absolutely continuous
component only shows up through the Stone/Laurent split diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (BoundaryZero, BudgetExceeded, InvalidConfig,
                     MissingTrajectoryData, QuadratureNoConvergence,
                     UnstableCount)
from .models import OperatorModel, perturbed
from .resolvent import SpectralParameter, imaginary_part, sandwiched_direct
from .resonance import (Box, CouplingScan, TrajectorySet, _riesz_from_scan,
                        _t_of_s, classify_impacting, track_trajectories)
from .tolerances import DEFAULT, Tolerances


class KSet:
    """Finite union of closed intervals, kept sorted and disjoint."""

    def __init__(self, intervals):
        ivs = []
        for a, b in intervals:
            a, b = float(a), float(b)
            if not a <= b:
                raise ValueError(f"interval [{a}, {b}] is empty")
            ivs.append((a, b))
        ivs.sort()
        merged: list[tuple[float, float]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        self.intervals: tuple[tuple[float, float], ...] = tuple(merged)

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return any(a - slack <= x <= b + slack for a, b in self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __repr__(self):
        return f"KSet({list(self.intervals)})"


@dataclass(frozen=True)
class SpectralProjection:
    r: float
    k_set: KSet
    projector: np.ndarray
    eigenvalues_in_k: np.ndarray


@dataclass(frozen=True)
class TestFunction:
    """Piecewise-linear real test function supported on a KSet, zero at every
    interval endpoint (no Stone end-point terms by construction)."""

    k_set: KSet
    nodes: tuple[np.ndarray, ...]   # one grid per interval, ascending
    values: tuple[np.ndarray, ...]  # matching samples

    def __post_init__(self):
        if len(self.nodes) != len(self.k_set.intervals):
            raise InvalidConfig("one node grid per interval required")
        for (a, b), xs, vs in zip(self.k_set.intervals, self.nodes, self.values):
            if xs.ndim != 1 or xs.size < 2 or vs.shape != xs.shape:
                raise InvalidConfig("each interval needs >= 2 matched nodes/values")
            if not (math.isclose(xs[0], a) and math.isclose(xs[-1], b)):
                raise InvalidConfig("node grid must span its interval exactly")
            if np.any(np.diff(xs) <= 0):
                raise InvalidConfig("nodes must be strictly increasing")
            if vs[0] != 0.0 or vs[-1] != 0.0:
                raise InvalidConfig("test function must vanish at interval endpoints")
            if not np.all(np.isfinite(vs)):
                raise InvalidConfig("test function values must be finite")

    def __call__(self, x: float) -> float:
        for (a, b), xs, vs in zip(self.k_set.intervals, self.nodes, self.values):
            if a <= x <= b:
                return float(np.interp(x, xs, vs))
        return 0.0

    @property
    def max_abs(self) -> float:
        return max(float(np.max(np.abs(vs))) for vs in self.values)

    @classmethod
    def tent(cls, center: float, halfwidth: float, height: float) -> "TestFunction":
        a, b = center - halfwidth, center + halfwidth
        return cls(KSet([(a, b)]),
                   (np.array([a, center, b]),),
                   (np.array([0.0, height, 0.0]),))

    @classmethod
    def zero(cls, k_set: KSet) -> "TestFunction":
        return cls(k_set,
                   tuple(np.array([a, b]) for a, b in k_set),
                   tuple(np.zeros(2) for _ in k_set.intervals))

    @classmethod
    def from_samples(cls, k_set: KSet, nodes, values) -> "TestFunction":
        return cls(k_set, tuple(np.asarray(n, dtype=float) for n in nodes),
                   tuple(np.asarray(v, dtype=float) for v in values))


@dataclass(frozen=True)
class StoneReport:
    r: float
    y_schedule: np.ndarray
    values: tuple[np.ndarray, ...]
    reference: np.ndarray
    errors: np.ndarray
    est_order: float


@dataclass(frozen=True)
class StabilityScanReport:
    k_set: KSet
    r_grid: np.ndarray
    hs_values: np.ndarray
    eig_counts: np.ndarray
    max_hs: float
    exclusions: tuple = ()


@dataclass(frozen=True)
class KSelection:
    k_set: KSet
    exclusions: tuple            # (lambda, reason, halfwidth) triples
    measure_removed: float
    epsilon: float
    margin: float
    trajectories: tuple = field(default=(), repr=False)


# --------------------------------------------------------------------------
# projections


def spectral_projection(model: OperatorModel, r: float, k_set: KSet,
                        tol: Tolerances = DEFAULT) -> SpectralProjection:
    """Eigenprojection of H_r onto eigenvalues in the closed set (membership
    with the fixed closed-interval slack)."""
    h = perturbed(model, r).h_r
    eig = kernels.hermitian_eig(h, tol)
    members = np.array([k_set.contains(float(w), tol.eig_membership)
                        for w in eig.eigenvalues])
    v = eig.eigenvectors[:, members]
    proj = v @ v.conj().T
    return SpectralProjection(r=float(r), k_set=k_set,
                              projector=np.ascontiguousarray(proj),
                              eigenvalues_in_k=eig.eigenvalues[members])


def weighted_projection_hs(model: OperatorModel, r: float, k_set: KSet,
                           tol: Tolerances = DEFAULT) -> float:
    """Hilbert-Schmidt (Frobenius) norm of F E_K(H_r)."""
    p = spectral_projection(model, r, k_set, tol)
    return kernels.frobenius(model.f @ p.projector)


# --------------------------------------------------------------------------
# adaptive Simpson over the linear pieces of a test function


class _QuadBudget:
    def __init__(self, cap):
        self.cap = cap
        self.used = 0
        self.worst = 0.0

    def spend(self, n=1):
        self.used += n
        if self.used > self.cap:
            raise QuadratureNoConvergence(
                f"quadrature evaluation cap {self.cap} exceeded",
                achieved=self.worst)


def _simpson(a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adapt(fn, a, b, fa, fm, fb, whole, tol_abs, depth, budget):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    budget.spend(2)
    flm = fn(lm)
    frm = fn(rm)
    left = _simpson(a, m, fa, flm, fm)
    right = _simpson(m, b, fm, frm, fb)
    delta = left + right - whole
    err = kernels.frobenius(delta[0])
    if err <= 15.0 * tol_abs or depth >= 28:
        budget.worst = max(budget.worst, err / 15.0)
        return left + right + delta / 15.0
    return (_adapt(fn, a, m, fa, flm, fm, left, 0.5 * tol_abs, depth + 1, budget)
            + _adapt(fn, m, b, fm, frm, fb, right, 0.5 * tol_abs, depth + 1, budget))


def _integrate_stack(fn, phi: TestFunction, stack_depth: int,
                     tol: Tolerances) -> np.ndarray:
    """Integrate a matrix-stack integrand over the linear pieces of phi.
    Refinement is keyed on stack[0]; pieces where phi vanishes identically
    contribute nothing and are skipped."""
    pieces = []
    for xs, vs in zip(phi.nodes, phi.values):
        for i in range(xs.size - 1):
            if vs[i] == 0.0 and vs[i + 1] == 0.0:
                continue
            pieces.append((float(xs[i]), float(xs[i + 1])))
    if not pieces:
        probe = fn(phi.k_set.intervals[0][0])
        return np.zeros_like(probe)
    total_len = sum(b - a for a, b in pieces)
    budget = _QuadBudget(tol.stone_eval_cap)
    # coarse pass fixes the scale for the relative target
    coarse = None
    cached = []
    for a, b in pieces:
        budget.spend(3)
        fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
        piece = _simpson(a, b, fa, fm, fb)
        cached.append((fa, fm, fb, piece))
        coarse = piece if coarse is None else coarse + piece
    scale = 1.0 + kernels.frobenius(coarse[0])
    out = None
    for (a, b), (fa, fm, fb, piece) in zip(pieces, cached):
        tol_abs = tol.stone_quad_rel * scale * (b - a) / total_len
        part = _adapt(fn, a, b, fa, fm, fb, piece, tol_abs, 0, budget)
        out = part if out is None else out + part
    return out


# --------------------------------------------------------------------------
# Stone functionals


def stone_functional(model: OperatorModel, r: float, phi: TestFunction,
                     y: float, tol: Tolerances = DEFAULT) -> np.ndarray:
    """(1/pi) integral of phi(l) Im T_{l+iy}(H_r) dl over supp(phi)."""
    if y <= 0.0:
        raise ValueError("y must be positive")

    def fn(lam: float) -> np.ndarray:
        t = sandwiched_direct(model, r, SpectralParameter(lam, y), tol).t
        return (phi(lam) / math.pi) * imaginary_part(t)[None, :, :]

    return _integrate_stack(fn, phi, 1, tol)[0]


def stone_reference(model: OperatorModel, r: float, phi: TestFunction,
                    tol: Tolerances = DEFAULT) -> np.ndarray:
    """F phi(H_r) F* assembled from the eigendecomposition."""
    h = perturbed(model, r).h_r
    eig = kernels.hermitian_eig(h, tol)
    n = model.dim
    out = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        w = phi(float(eig.eigenvalues[k]))
        if w != 0.0:
            fv = model.f @ eig.eigenvectors[:, k]
            out += w * np.outer(fv, fv.conj())
    return out


def stone_convergence(model: OperatorModel, r: float, phi: TestFunction,
                      y_schedule, tol: Tolerances = DEFAULT) -> StoneReport:
    """Stone-formula values along a decreasing y schedule against the
    eigendecomposition reference; reports the error curve and the estimated
    convergence order from the last two rungs."""
    ys = np.asarray(y_schedule, dtype=np.float64)
    if ys.ndim != 1 or ys.size < 2 or np.any(np.diff(ys) >= 0) or ys[-1] <= 0:
        raise ValueError("y_schedule must be strictly decreasing and positive")
    ref = stone_reference(model, r, phi, tol)
    values = tuple(stone_functional(model, r, phi, float(y), tol) for y in ys)
    errors = np.array([kernels.frobenius(v - ref) for v in values])
    if errors[-1] > 0.0 and errors[-2] > 0.0:
        est = math.log(errors[-2] / errors[-1]) / math.log(ys[-2] / ys[-1])
    else:
        est = float("nan")
    return StoneReport(r=float(r), y_schedule=ys, values=values, reference=ref,
                       errors=errors, est_order=est)


class _NodeSplitter:
    """Per-quadrature-node pole data: impacting branch seeds from the nearest
    tracked lambda, Newton-polished at the node, with Riesz operators."""

    def __init__(self, model, trajectories, y, tol):
        self.model = model
        self.tol = tol
        self.y = float(y)
        self.trajs = [t for t in trajectories if t.branches]
        if not trajectories:
            raise MissingTrajectoryData("no trajectory sets supplied")
        lams = sorted(t.lam for t in trajectories)
        self.lo = lams[0]
        self.hi = lams[-1]
        spacing = max((b - a for a, b in zip(lams, lams[1:])), default=0.0)
        self.reach = spacing if spacing > 0.0 else 0.0

    def poles_at(self, lam: float):
        if lam < self.lo - self.reach - 1e-12 or lam > self.hi + self.reach + 1e-12:
            raise MissingTrajectoryData(
                f"lambda = {lam} outside tracked range [{self.lo}, {self.hi}]")
        if not self.trajs:
            return []
        near = min(self.trajs, key=lambda t: abs(t.lam - lam))
        seeds = [(b.at_y(self.y), b.multiplicity)
                 for b in near.branches if b.impacting]
        if not seeds:
            return []
        scan = CouplingScan(self.model, complex(lam, self.y), self.tol)
        polished = []
        for seed, mult in seeds:
            pos, ok = scan.refine(seed, mult)
            if not ok:
                pos = seed
            if all(abs(pos - q) > self.tol.cluster_threshold for q, _, _ in polished):
                polished.append((pos, mult, None))
        out = []
        merged = [(q, m) for q, m, _ in polished]
        for pos, mult, _ in polished:
            sep = min((abs(pos - q) for q, _ in merged if q != pos),
                      default=math.inf)
            radius = max(min(0.1 * (1.0 + abs(pos)), 0.45 * sep), 1e-9)
            k = _riesz_from_scan(self.model, scan, pos, mult, radius, self.tol)
            out.append((pos, k))
        return out


def split_stone(model: OperatorModel, r: float, phi: TestFunction, y: float,
                trajectories, tol: Tolerances = DEFAULT):
    """Split the Stone integrand through the coupling-plane Laurent expansion
    at s = r: ac part from Im of the remainder, pole part from
    Im sum (r - r_j(l+iy))^{-1} K_j over that node's impacting points.
    Returns (ac_part, pole_part); their sum equals stone_functional on the
    same panels up to roundoff."""
    if y <= 0.0:
        raise ValueError("y must be positive")
    splitter = _NodeSplitter(model, trajectories, y, tol)
    n = model.dim

    def fn(lam: float) -> np.ndarray:
        t = _t_of_s(model, complex(lam, y), complex(r), tol)
        poles = splitter.poles_at(lam)
        pole_mat = np.zeros((n, n), dtype=np.complex128)
        for pos, k in poles:
            pole_mat += k / (r - pos)
        remainder = t - pole_mat
        w = phi(lam) / math.pi
        return np.stack([w * imaginary_part(t),
                         w * imaginary_part(remainder),
                         w * imaginary_part(pole_mat)])

    out = _integrate_stack(fn, phi, 3, tol)
    return out[1], out[2]


# --------------------------------------------------------------------------
# compact-set selection and stability scan


def select_compact_K(model: OperatorModel, interval, epsilon: float,
                     lambda_grid, tracking: dict | None = None,
                     tol: Tolerances = DEFAULT) -> KSelection:
    """Choose a compact K inside the open interval with |I \\ K| <= epsilon.

    Margins of epsilon/4 are shaved off both endpoints; open neighborhoods
    are then excised around every lambda whose tracked impacting branches
    misbehave (branching suspected or lost). Impacting resonances alone do
    not trigger an excision: the Laurent split handles those.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if not 0.0 < epsilon < (b - a):
        raise ValueError("epsilon must lie in (0, |I|)")
    tracking = dict(tracking or {})
    box = tracking.get("box")
    if box is None:
        raise ValueError("tracking params must include a coupling-plane box")
    if not isinstance(box, Box):
        box = Box.from_sequence(box)
    window = tuple(tracking.get("window", (0.0, 1.0)))
    delta = tracking.get("delta")
    lg = np.asarray(lambda_grid, dtype=np.float64)
    if lg.ndim != 1 or lg.size == 0:
        raise ValueError("lambda_grid must be a non-empty 1-D array")
    trouble = []
    trajs = []
    for lam in lg:
        try:
            t = track_trajectories(model, float(lam), tracking.get("y0"),
                                   tracking.get("y_min"), tracking.get("shrink"),
                                   box, tol)
        except BoundaryZero:
            # a point rides the box boundary at this lambda: excise it
            trouble.append((float(lam), "tracking_failed"))
            continue
        t = classify_impacting(t, window, delta, tol)
        trajs.append(t)
        reasons = []
        for br in t.branches:
            if br.impacting and (br.branching_suspected or br.lost):
                reasons.append("branching_suspected" if br.branching_suspected
                               else "lost")
        if reasons:
            trouble.append((float(lam), "+".join(sorted(set(reasons)))))
    margin = epsilon / 4.0
    budget = epsilon / 2.0
    exclusions = []
    if trouble:
        halfwidth = max(budget / (2.0 * len(trouble)), tol.excision_floor)
        needed = 2.0 * margin + 2.0 * halfwidth * len(trouble)
        if 2.0 * halfwidth * len(trouble) > budget * (1.0 + 1e-12):
            raise BudgetExceeded(
                f"{len(trouble)} troubled lambdas need measure "
                f"{needed:.3e} > epsilon = {epsilon:g}", needed=needed)
        exclusions = [(lam, reason, halfwidth) for lam, reason in trouble]
    # assemble K = [a+margin, b-margin] minus the open exclusion neighborhoods
    lo, hi = a + margin, b - margin
    cuts = sorted((lam - hw, lam + hw) for lam, _, hw in exclusions)
    pieces = []
    cur = lo
    for c0, c1 in cuts:
        if c1 <= lo or c0 >= hi:
            continue
        if c0 > cur:
            pieces.append((cur, min(c0, hi)))
        cur = max(cur, c1)
        if cur >= hi:
            break
    if cur < hi:
        pieces.append((cur, hi))
    pieces = [(x0, x1) for x0, x1 in pieces if x1 > x0]
    k_set = KSet(pieces) if pieces else KSet([])
    removed = (b - a) - k_set.measure
    return KSelection(k_set=k_set, exclusions=tuple(exclusions),
                      measure_removed=removed, epsilon=epsilon, margin=margin,
                      trajectories=tuple(trajs))


def stability_scan(model: OperatorModel, k_set: KSet, r_grid,
                   exclusions=(), tol: Tolerances = DEFAULT) -> StabilityScanReport:
    """||F E_K(H_r)||_HS and eigenvalue counts over a coupling grid."""
    rg = np.asarray(r_grid, dtype=np.float64)
    if rg.ndim != 1 or rg.size == 0:
        raise ValueError("r_grid must be a non-empty 1-D array")
    rg = np.sort(rg)
    hs = np.zeros(rg.size)
    counts = np.zeros(rg.size, dtype=np.int64)
    for i, r in enumerate(rg):
        p = spectral_projection(model, float(r), k_set, tol)
        hs[i] = kernels.frobenius(model.f @ p.projector)
        counts[i] = p.eigenvalues_in_k.size
    return StabilityScanReport(k_set=k_set, r_grid=rg, hs_values=hs,
                               eig_counts=counts,
                               max_hs=float(np.max(hs)) if hs.size else 0.0,
                               exclusions=tuple(exclusions))


# --------------------------------------------------------------------------
# eigenvalue-crossing oracle


def crossing_count(model: OperatorModel, lam: float, s_from: float, s_to: float,
                   steps: int = 64, tol: Tolerances = DEFAULT) -> int:
    """Signed count (+1 upward) of eigenvalues of H_s crossing the level lam
    as s runs from s_from to s_to, from sign changes on a refining s-grid."""
    if s_from == s_to:
        return 0
    flip = 1
    if s_from > s_to:
        s_from, s_to = s_to, s_from
        flip = -1
    scale = max(kernels.frobenius(model.h0), 1.0)
    for s_end in (s_from, s_to):
        w = kernels.hermitian_eig(perturbed(model, s_end).h_r, tol).eigenvalues
        if float(np.min(np.abs(w - lam))) <= 1e-12 * scale:
            raise ValueError(f"lambda = {lam} is an eigenvalue of H_s at s = {s_end}")

    cache: dict[float, np.ndarray] = {}

    def eigs(s: float) -> np.ndarray:
        if s not in cache:
            cache[s] = kernels.hermitian_eig(perturbed(model, s).h_r, tol).eigenvalues
        return cache[s]

    def count_on(n_intervals: int, shift: float) -> int:
        xs = np.linspace(s_from, s_to, n_intervals + 1)
        if shift != 0.0:
            inner = xs[1:-1] + shift * (xs[1] - xs[0])
            xs = np.concatenate([[xs[0]], inner, [xs[-1]]])
        total = 0
        prev = eigs(float(xs[0])) - lam
        for x in xs[1:]:
            cur = eigs(float(x)) - lam
            if np.any(np.abs(cur) <= 1e-13 * scale):
                raise _GridHit()
            up = np.sum((prev < 0) & (cur > 0))
            dn = np.sum((prev > 0) & (cur < 0))
            total += int(up) - int(dn)
            prev = cur
        return total

    n = max(int(steps), 2)
    last = None
    for _ in range(12):
        try:
            cur = count_on(n, 0.0)
        except _GridHit:
            try:
                cur = count_on(n, 1e-3)
            except _GridHit:
                raise UnstableCount(
                    f"eigenvalue tangency at the grid near lambda = {lam}")
        if last is not None and cur == last:
            return flip * cur
        last = cur
        n *= 2
    raise UnstableCount(
        f"crossing count did not stabilize by {n} grid intervals")


class _GridHit(Exception):
    pass
