"""Convexified weights and grid checkers for strong pseudoconvexity.

Surfaces are oriented level sets ``{phi = 0}`` with a distinguished base
point; weights are the quadratic convexifications built from a surface and
a parameter ``A``.  The checkers sample the sign conditions on iterated
Poisson brackets over finite grids in the conic set ``{xi_a = 0}`` and
report slacks, never certificates: a verdict means "verified at this
resolution".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symbols import SymbolPoly, conjugate_weight, poisson_bracket, sphere_points

__all__ = [
    "ConvexificationError",
    "ConvexifiedWeight",
    "GeometryRadii",
    "GridSpec",
    "LevelSetReport",
    "OrientedSurface",
    "SlackReport",
    "check_function_pseudoconvexity",
    "check_surface_pseudoconvexity",
    "convexify",
    "find_convexification_A",
    "surface_from_json",
    "surface_to_json",
    "sweep_fgh",
    "verify_level_set_geometry",
    "weight_from_json",
    "weight_to_json",
]


class ConvexificationError(RuntimeError):
    """No admissible convexification parameter in the sweep range."""

    def __init__(self, message, worst_point=None, report=None):
        super().__init__(message)
        self.worst_point = worst_point
        self.report = report


class OrientedSurface:
    """Oriented hypersurface ``{phi = 0}`` through ``x0`` with ``phi(x0)=0``."""

    def __init__(self, value, grad, hess, x0):
        self.x0 = np.asarray(x0, dtype=float)
        self._value = value
        self._grad = grad
        self._hess = hess
        if abs(self.value(self.x0)) > 1e-10:
            raise ValueError("phi(x0) must vanish")
        if np.linalg.norm(self.grad(self.x0)) < 1e-12:
            raise ValueError("grad phi(x0) must not vanish")

    def value(self, x):
        return float(self._value(np.asarray(x, dtype=float)))

    def grad(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def hess(self, x):
        return np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float)

    @staticmethod
    def plane(normal, x0):
        """The oriented plane ``{(x - x0).normal = 0}``."""
        normal = np.asarray(normal, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        n = len(normal)
        return OrientedSurface(
            lambda x: float(np.dot(x - x0, normal)),
            lambda x: normal,
            lambda x: np.zeros((n, n)),
            x0,
        )


class ConvexifiedWeight:
    """Quadratic weight built from a surface's first-order data at ``x0``.

    psi(x) = d.g0 + A (d.g0)^2 + (1/2) d^T H0 d - |d|^2 / A,   d = x - x0,
    with g0 the surface gradient and H0 its Hessian at the base point.
    """

    def __init__(self, A: float, x0, g0, H0):
        if A <= 0:
            raise ValueError("A must be positive")
        self.A = float(A)
        self.x0 = np.asarray(x0, dtype=float)
        self.g0 = np.asarray(g0, dtype=float)
        self.H0 = np.asarray(H0, dtype=float)
        n = len(self.x0)
        # constant Hessian: H0 + 2A g0 g0^T - (2/A) I
        self._hess = self.H0 + 2 * self.A * np.outer(self.g0, self.g0) - (2.0 / self.A) * np.eye(n)

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        dg = float(np.dot(d, self.g0))
        return dg + self.A * dg * dg + 0.5 * float(d @ self.H0 @ d) - float(np.dot(d, d)) / self.A

    def grad(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        dg = float(np.dot(d, self.g0))
        return self.g0 + 2 * self.A * dg * self.g0 + self.H0 @ d - 2.0 * d / self.A

    def hess(self, x):
        return self._hess

    def values(self, X):
        """Vectorised evaluation, ``X`` of shape (N, n)."""
        D = np.asarray(X, dtype=float) - self.x0
        dg = D @ self.g0
        quad = np.einsum("ij,jk,ik->i", D, self.H0, D)
        return dg + self.A * dg * dg + 0.5 * quad - np.einsum("ij,ij->i", D, D) / self.A


def convexify(surface: OrientedSurface, A: float) -> ConvexifiedWeight:
    """Quadratic convexification of an oriented surface at its base point."""
    if A <= 0:
        raise ValueError("A must be positive")
    x0 = surface.x0
    return ConvexifiedWeight(A, x0, surface.grad(x0), surface.hess(x0))


def surface_to_json(surface: OrientedSurface, g=None, H=None) -> dict:
    """Serialize a quadratic surface as its polynomial coefficient record.

    ``g`` and ``H`` default to the values at the base point, which describes
    the surface exactly when its defining function is quadratic.
    """
    x0 = surface.x0
    g = surface.grad(x0) if g is None else np.asarray(g, dtype=float)
    H = surface.hess(x0) if H is None else np.asarray(H, dtype=float)
    return {"kind": "quadratic-surface", "x0": x0.tolist(),
            "gradient": g.tolist(), "hessian": H.tolist()}


def surface_from_json(doc: dict) -> OrientedSurface:
    if doc.get("kind") != "quadratic-surface":
        raise ValueError("not a quadratic surface record")
    x0 = np.asarray(doc["x0"], dtype=float)
    g = np.asarray(doc["gradient"], dtype=float)
    H = np.asarray(doc["hessian"], dtype=float)
    return OrientedSurface(
        lambda x: float((x - x0) @ g + 0.5 * (x - x0) @ H @ (x - x0)),
        lambda x: g + H @ (x - x0),
        lambda x: H,
        x0,
    )


def weight_to_json(w: ConvexifiedWeight) -> dict:
    return {"kind": "convexified-weight", "A": w.A, "x0": w.x0.tolist(),
            "g0": w.g0.tolist(), "H0": w.H0.tolist()}


def weight_from_json(doc: dict) -> ConvexifiedWeight:
    if doc.get("kind") != "convexified-weight":
        raise ValueError("not a convexified weight record")
    return ConvexifiedWeight(doc["A"], doc["x0"], doc["g0"], doc["H0"])


@dataclass
class GridSpec:
    """Sampling resolution for the pseudoconvexity checkers.

    Directions come from a sphere lattice; the large-parameter ratios
    ``tau / |xi|`` are sampled log-uniformly and each pair is normalised to
    the joint unit sphere (the tested quantities are homogeneous).  The
    pure point ``(xi, tau) = (0, 1)`` is always included.
    """

    directions: int = 4096
    tau_ratios: np.ndarray = field(
        default_factory=lambda: np.logspace(-3, 3, 25)
    )
    active_tol: float = 5e-2

    def tau_pairs(self, nb_dirs: np.ndarray):
        """Yield (Xi_unit, tau_unit) arrays on the joint sphere."""
        out = []
        for rho in self.tau_ratios:
            s = math.sqrt(1.0 + rho * rho)
            out.append((nb_dirs / s, rho / s))
        return out


@dataclass
class ConditionReport:
    vacuous: bool
    min_slack: float | None
    active_count: int
    worst_point: tuple | None
    scale: float

    def passes(self, margin: float = 0.0) -> bool:
        return self.vacuous or (self.min_slack is not None and self.min_slack >= margin)


@dataclass
class SlackReport:
    limit_condition: ConditionReport       # tau -> 0+ bracket condition
    parameter_condition: ConditionReport   # tau > 0 conjugated condition

    def passes(self, margin: float = 0.0) -> bool:
        return self.limit_condition.passes(margin) and self.parameter_condition.passes(margin)

    @property
    def min_slack(self) -> float:
        slacks = [
            c.min_slack
            for c in (self.limit_condition, self.parameter_condition)
            if not c.vacuous and c.min_slack is not None
        ]
        return min(slacks) if slacks else math.inf


def _conic_directions(p: SymbolPoly, grid: GridSpec) -> np.ndarray:
    """Unit directions in ``{xi_a = 0}``, embedded in C^n (empty if n_b = 0)."""
    if p.nb == 0:
        return np.zeros((0, p.n))
    dirs_b = sphere_points(p.nb, grid.directions)
    dirs = np.zeros((dirs_b.shape[0], p.n))
    dirs[:, p.na:] = dirs_b
    return dirs


def _limit_condition(p, weight, x0, grid, with_bracket_constraint):
    """Sign of Re {pbar, {p, w}} on {p = 0} (optionally also {p, w} = 0)."""
    dirs = _conic_directions(p, grid)
    if dirs.shape[0] == 0:
        return ConditionReport(True, None, 0, None, 0.0)
    w = SymbolPoly.from_weight(weight, p.na, p.nb)
    inner = poisson_bracket(p, w)
    outer = poisson_bracket(p.conjugate(), inner)
    taus = np.zeros(dirs.shape[0])
    pv = p.eval_many(x0, dirs, taus)
    scale = float(np.abs(pv).max(initial=0.0))
    active = np.abs(pv) <= grid.active_tol * max(scale, 1e-300)
    if with_bracket_constraint:
        bv = inner.eval_many(x0, dirs, taus)
        bscale = float(np.abs(bv).max(initial=0.0))
        active &= np.abs(bv) <= grid.active_tol * max(bscale, 1e-300)
    if not active.any():
        return ConditionReport(True, None, 0, None, scale)
    q = np.real(outer.eval_many(x0, dirs[active], taus[active.nonzero()[0]] * 0.0))
    worst = int(np.argmin(q))
    worst_xi = dirs[active][worst]
    return ConditionReport(False, float(q.min()), int(active.sum()), (tuple(worst_xi), 0.0), scale)


def _parameter_condition(p, weight, x0, grid, with_bracket_constraint):
    """Sign of (1/(i tau)) {pbar_w, p_w} on {p_w = 0} for tau > 0.

    Activity of the side constraint ``{p_w, w} = 0`` is tested relative to
    ``tau`` because its imaginary part vanishes linearly as ``tau -> 0``
    (that limit is the separate limit condition).
    """
    dirs = _conic_directions(p, grid)
    pure = np.zeros((1, p.n))
    w_sym = SymbolPoly.from_weight(weight, p.na, p.nb)
    min_slack = math.inf
    active_total = 0
    worst_point = None
    vacuous = True
    scale_seen = 0.0
    pairs = grid.tau_pairs(dirs) if dirs.shape[0] else []
    pairs += [(pure, 1.0)]
    for Xi, tau in pairs:
        pw = conjugate_weight(p, weight, tau)
        pwbar = pw.conjugate()
        taus = np.full(Xi.shape[0], tau)
        pv = pw.eval_many(x0, Xi, taus)
        scale = float(np.abs(pv).max(initial=0.0))
        scale_seen = max(scale_seen, scale)
        active = np.abs(pv) <= grid.active_tol * max(scale, 1e-300)
        if with_bracket_constraint:
            bv = poisson_bracket(pw, w_sym).eval_many(x0, Xi, taus)
            bscale = float(np.abs(bv).max(initial=0.0))
            active &= np.abs(bv) <= grid.active_tol * tau * max(bscale, 1e-300)
        if not active.any():
            continue
        vacuous = False
        bracket = poisson_bracket(pwbar, pw)
        q = np.real(bracket.eval_many(x0, Xi[active], taus[active]) / (1j * tau))
        active_total += int(active.sum())
        lo = float(q.min())
        if lo < min_slack:
            min_slack = lo
            worst_point = (tuple(Xi[active][int(np.argmin(q))]), tau)
    if vacuous:
        return ConditionReport(True, None, 0, None, scale_seen)
    return ConditionReport(False, min_slack, active_total, worst_point, scale_seen)


def check_surface_pseudoconvexity(p: SymbolPoly, surface: OrientedSurface, grid: GridSpec | None = None) -> SlackReport:
    """Sampled strong-pseudoconvexity conditions for an oriented surface.

    Both conditions carry the side constraint ``{., phi} = 0``; each is
    reported vacuous when no grid point is constraint-active.
    """
    grid = grid or GridSpec()
    x0 = surface.x0
    return SlackReport(
        _limit_condition(p, surface, x0, grid, with_bracket_constraint=True),
        _parameter_condition(p, surface, x0, grid, with_bracket_constraint=True),
    )


def check_function_pseudoconvexity(p: SymbolPoly, psi: ConvexifiedWeight, grid: GridSpec | None = None) -> SlackReport:
    """Sampled strong-pseudoconvexity conditions for a weight function.

    Unlike the surface version there is no ``{., psi} = 0`` side constraint.
    """
    grid = grid or GridSpec()
    x0 = psi.x0
    return SlackReport(
        _limit_condition(p, psi, x0, grid, with_bracket_constraint=False),
        _parameter_condition(p, psi, x0, grid, with_bracket_constraint=False),
    )


def find_convexification_A(
    p: SymbolPoly,
    surface: OrientedSurface,
    grid: GridSpec | None = None,
    A_range: tuple[float, float] = (1.0, 4096.0),
    margin: float = 1e-6,
) -> float:
    """Smallest sampled convexification parameter passing the function check.

    Sweeps ``A in {A_min 2^k}`` up to ``A_max`` and returns the first value
    whose convexified weight has every condition vacuous or with slack at
    least ``margin``.  Raises :class:`ConvexificationError` otherwise.
    """
    grid = grid or GridSpec()
    A_min, A_max = A_range
    if not (0 < A_min <= A_max):
        raise ValueError("invalid A range")
    worst = None
    worst_report = None
    A = A_min
    while A <= A_max * (1 + 1e-12):
        report = check_function_pseudoconvexity(p, convexify(surface, A), grid)
        if report.passes(margin):
            return A
        bad = min(
            (c for c in (report.limit_condition, report.parameter_condition) if not c.passes(margin)),
            key=lambda c: c.min_slack if c.min_slack is not None else math.inf,
        )
        if worst is None or (bad.min_slack is not None and bad.min_slack < worst[0]):
            worst = (bad.min_slack, bad.worst_point, A)
            worst_report = report
        A *= 2.0
    raise ConvexificationError(
        f"no admissible A in [{A_min}, {A_max}]: worst slack {worst[0]:.3e} "
        f"at point {worst[1]} (A={worst[2]})",
        worst_point=worst[1],
        report=worst_report,
    )


def sweep_fgh(f, g, h, A_range=(1.0, 2 ** 40), margin: float = 0.0):
    """Brute-force sweep for the three-function compactness bound.

    Given sampled values on a compact set with ``f >= 0`` and ``g > 0`` on
    ``{f = 0}``, find the smallest ``A = A_min 2^k`` with
    ``min(g + A f - h / A) > margin`` and return ``(A, achieved_min)``.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    A = A_range[0]
    while A <= A_range[1]:
        c = float((g + A * f - h / A).min())
        if c > margin:
            return A, c
        A *= 2.0
    raise ConvexificationError("no admissible A in the sweep range")


@dataclass
class GeometryRadii:
    """Level-set geometry radii around a base point."""

    R: float
    rho: float
    r: float
    delta: float
    eta: float
    eta1: float
    eta2: float

    def __post_init__(self):
        if not (self.r < self.R):
            raise ValueError("need r < R")
        if min(self.rho, self.delta, self.eta) <= 0:
            raise ValueError("rho, delta, eta must be positive")


@dataclass
class LevelSetReport:
    radii: GeometryRadii
    margins: dict
    witness: tuple | None

    @property
    def ok(self) -> bool:
        return self.witness is None


def _ball_samples(x0, R, n, count, rng):
    """Quasi-dense sample of the closed ball.

    Grid plus uniform fill plus a radially graded cloud near the base point
    (the inner radius of the level band is a feature there).
    """
    per_axis = max(3, int(round(count ** (1.0 / n))))
    axes = [np.linspace(-R, R, per_axis)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= R]
    extra = rng.uniform(-R, R, size=(count, n))
    extra = extra[np.linalg.norm(extra, axis=1) <= R]
    dirs = rng.standard_normal((count // 2, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    graded = dirs * (R * rng.uniform(0, 1, count // 2) ** 4)[:, None]
    return np.vstack([pts, extra, graded]) + np.asarray(x0, dtype=float)


def verify_level_set_geometry(
    phi: OrientedSurface,
    psi: ConvexifiedWeight,
    R: float,
    eta: float,
    eta1: float,
    eta2: float,
    samples: int = 20000,
    seed: int = 0,
    shrink: float = 0.005,
) -> LevelSetReport:
    """Sampled certification of the local level-set geometry.

    Finds ``rho`` and ``r`` such that on the sample cloud of ``B(x0, R)``:

    1. ``{phi <= rho} & {psi >= -eta}`` stays inside ``B(x0, R/8)``;
    2. ``{psi >= eta1}`` is contained in ``{phi > rho}``;
    3. ``B(x0, r)`` is contained in ``{-eta2 < psi < eta2}``.

    Margins are sampled quantities ("verified at this resolution"); a
    violated inclusion yields a witness point instead.
    """
    rng = np.random.default_rng(seed)
    x0 = psi.x0
    n = len(x0)
    pts = _ball_samples(x0, R, n, samples, rng)
    dist = np.linalg.norm(pts - x0, axis=1)
    phiv = np.array([phi.value(x) for x in pts])
    psiv = psi.values(pts)

    # rho from inclusion 2: smallest phi over {psi >= eta1} in the closed ball
    mask1 = psiv >= eta1
    if mask1.any():
        m1 = float(phiv[mask1].min())
        if m1 <= 0:
            w = pts[mask1][int(np.argmin(phiv[mask1]))]
            return LevelSetReport(
                GeometryRadii(R, eta / 2, R / 16, eta / 9, eta, eta1, eta2),
                {},
                tuple(w),
            )
        rho = 0.5 * min(eta, m1)
        margin2 = m1 - rho
    else:
        rho = 0.5 * eta
        margin2 = math.inf

    # inclusion 1 with this rho
    mask0 = (phiv <= rho) & (psiv >= -eta)
    if mask0.any():
        worst = float(dist[mask0].max())
        margin1 = R / 8 - worst
        if margin1 < 0:
            w = pts[mask0][int(np.argmax(dist[mask0]))]
            return LevelSetReport(
                GeometryRadii(R, rho, R / 16, eta / 9, eta, eta1, eta2), {}, tuple(w)
            )
    else:
        margin1 = R / 8

    # r from inclusion 3: shrink below the nearest |psi| >= eta2 sample
    hot = np.abs(psiv) >= eta2
    r_cap = float(dist[hot].min()) if hot.any() else R
    r = (1.0 - shrink) * min(r_cap, R / 2)
    inside = dist <= r
    margin3 = float(eta2 - np.abs(psiv[inside]).max()) if inside.any() else eta2

    radii = GeometryRadii(R, rho, r, eta / 9, eta, eta1, eta2)
    return LevelSetReport(
        radii, {"ball": margin1, "level": margin2, "core": margin3}, None
    )
