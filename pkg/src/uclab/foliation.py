"""Executable geometry for sweeping a region by graph leaves.

A foliation is a family of graphs ``x_n = G(x', eps)`` over a base domain,
strictly increasing in the sweep parameter.  This module certifies leaf
noncharacteristicity for wave / Schrodinger-type symbols, extracts finite
ball covers with ordered overlap intervals in the sweep parameter, checks
the chain inclusions those covers must satisfy, and emits a replayable
derivation schedule propagating low-frequency dependence facts from a
collar of the bottom leaf to the whole swept region.

Open sets are descriptor objects (balls, collars, level sets, tubes and
finite unions); inclusions between them are decided by dense sampling with
a margin, never claimed as proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ball",
    "BallCover",
    "BoundaryCollar",
    "CoverError",
    "DependenceGraph",
    "EllipseDomain",
    "Fact",
    "GraphFoliation",
    "IntervalDomain",
    "LeafCover",
    "LevelUpper",
    "MissingFactError",
    "NoncharReport",
    "Region",
    "RegionIntersection",
    "RegionUnion",
    "Schedule",
    "replay_json",
    "schedule_to_json",
    "build_dependence_graph",
    "check_cover_inclusions",
    "check_noncharacteristic",
    "extract_cover",
    "propagate_dependence",
    "ramp_profile",
    "replay",
    "wave_foliation",
]


class CoverError(RuntimeError):
    pass


class MissingFactError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# base domains
# ---------------------------------------------------------------------------


class IntervalDomain:
    """Base domain [a, b] in R^1."""

    def __init__(self, a: float, b: float):
        if b <= a:
            raise ValueError("empty interval")
        self.a, self.b = float(a), float(b)
        self.dim = 1

    def contains(self, xp):
        xp = np.atleast_2d(xp)
        return (xp[:, 0] >= self.a) & (xp[:, 0] <= self.b)

    def boundary_distance(self, xp):
        xp = np.atleast_2d(xp)
        return np.minimum(xp[:, 0] - self.a, self.b - xp[:, 0])

    def sample(self, n):
        return np.linspace(self.a, self.b, n).reshape(-1, 1)

    def sample_boundary(self):
        return np.array([[self.a], [self.b]])


class EllipseDomain:
    """Base domain ``sum (x_i / a_i)^2 <= 1`` in R^(n-1)."""

    def __init__(self, semiaxes):
        self.semiaxes = np.asarray(semiaxes, dtype=float)
        if (self.semiaxes <= 0).any():
            raise ValueError("semiaxes must be positive")
        self.dim = len(self.semiaxes)

    def _rho(self, xp):
        xp = np.atleast_2d(xp)
        return np.sqrt(np.sum((xp / self.semiaxes) ** 2, axis=1))

    def contains(self, xp):
        return self._rho(xp) <= 1.0

    def boundary_distance(self, xp):
        # conservative Euclidean estimate through the radial coordinate
        return (1.0 - self._rho(np.atleast_2d(xp))) * self.semiaxes.min()

    def sample(self, n):
        if self.dim == 1:
            return np.linspace(-self.semiaxes[0], self.semiaxes[0], n).reshape(-1, 1)
        if self.dim == 2:
            per = max(4, int(math.sqrt(n)))
            rho = np.linspace(0, 1, per)
            out = [np.zeros((1, 2))]
            for r in rho[1:]:
                m = max(6, int(2 * math.pi * r * per))
                th = np.linspace(0, 2 * math.pi, m, endpoint=False)
                out.append(np.stack([r * self.semiaxes[0] * np.cos(th),
                                     r * self.semiaxes[1] * np.sin(th)], axis=1))
            return np.vstack(out)
        raise NotImplementedError("base domains up to dimension 2")

    def sample_boundary(self, n: int = 256):
        if self.dim == 1:
            return np.array([[-self.semiaxes[0]], [self.semiaxes[0]]])
        th = np.linspace(0, 2 * math.pi, n, endpoint=False)
        return np.stack([self.semiaxes[0] * np.cos(th), self.semiaxes[1] * np.sin(th)], axis=1)


# ---------------------------------------------------------------------------
# region descriptors
# ---------------------------------------------------------------------------


class Region:
    """Open-set descriptor with a signed inclusion margin (positive inside)."""

    name: str = ""

    def margin(self, pts) -> np.ndarray:
        raise NotImplementedError

    def contains(self, pts):
        return self.margin(pts) > 0


@dataclass
class Ball(Region):
    center: np.ndarray
    radius: float
    name: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    def margin(self, pts):
        pts = np.atleast_2d(pts)
        return self.radius - np.linalg.norm(pts - self.center, axis=1)

    def sample(self, n, rng):
        d = len(self.center)
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0, 1, n) ** (1.0 / d)
        return self.center + v * r[:, None]


@dataclass
class BoundaryCollar(Region):
    """Collar ``{dist(x', D) < width} x {x_n < height}`` around the bottom leaf."""

    domain: object
    width: float
    height: float
    name: str = ""

    def margin(self, pts):
        pts = np.atleast_2d(pts)
        xp, xn = pts[:, :-1], pts[:, -1]
        bd = self.domain.boundary_distance(xp)
        inside = self.domain.contains(xp)
        horiz = np.where(inside, self.width, self.width + bd)  # bd < 0 outside
        return np.minimum(horiz, self.height - xn)


@dataclass
class LevelUpper(Region):
    """Super-level set ``{phi_eps > rho}`` of a foliation height function."""

    fol: "GraphFoliation"
    eps: float
    rho: float
    name: str = ""

    def margin(self, pts):
        pts = np.atleast_2d(pts)
        phi = self.fol.phi(pts, self.eps)
        return (phi - self.rho) / self.fol.phi_lipschitz


@dataclass
class GraphTube(Region):
    """Leaf tube ``{G(x', lo) < x_n < G(x', hi)}`` over the closed base."""

    fol: "GraphFoliation"
    lo: float
    hi: float
    name: str = ""

    def margin(self, pts):
        pts = np.atleast_2d(pts)
        xp, xn = pts[:, :-1], pts[:, -1]
        g_lo = self.fol.G(xp, self.lo)
        g_hi = self.fol.G(xp, self.hi)
        vert = np.minimum(xn - g_lo, g_hi - xn)
        return vert / self.fol.phi_lipschitz


@dataclass
class RegionUnion(Region):
    parts: list
    name: str = ""

    def margin(self, pts):
        return np.max(np.stack([p.margin(pts) for p in self.parts]), axis=0)


@dataclass
class RegionIntersection(Region):
    parts: list
    name: str = ""

    def margin(self, pts):
        return np.min(np.stack([p.margin(pts) for p in self.parts]), axis=0)

    def sample(self, n, rng):
        """Rejection sampling through the first sampleable part."""
        base = next(p for p in self.parts if hasattr(p, "sample"))
        out = []
        for _ in range(40):
            pts = base.sample(n, rng)
            pts = pts[self.margin(pts) > 0]
            out.append(pts)
            if sum(len(p) for p in out) >= n:
                break
        pts = np.vstack(out)
        if len(pts) == 0:
            raise CoverError(f"region {self.name or self!r} looks empty under sampling")
        return pts[:n]


def sampled_inclusion(inner_pts, outer: Region):
    """Margin of sampled points inside a descriptor; negative means a witness."""
    m = outer.margin(inner_pts)
    i = int(np.argmin(m))
    return float(m[i]), tuple(np.atleast_2d(inner_pts)[i])


# ---------------------------------------------------------------------------
# foliation
# ---------------------------------------------------------------------------


class GraphFoliation:
    """Graphs ``x_n = G(x', eps)`` over a base domain, increasing in ``eps``.

    ``G`` must vanish at ``eps = 0``, be (uniformly) Lipschitz in ``eps``,
    positive on the open base for positive ``eps`` and nonpositive outside
    it (an extension to a neighborhood of the base is required so level
    sets make sense off the base).  Invariants are sampled at construction.
    """

    def __init__(self, domain, G, eta: float = 0.1, C_G: float | None = None,
                 grad_norm: float | None = None, samples: int = 400,
                 boundary_vanishing: bool = True):
        self.domain = domain
        self._G = G
        self.eta = float(eta)
        xp = domain.sample(samples)
        eps_list = np.linspace(0.0, 1.0, 21)
        vals = np.stack([self.G(xp, e) for e in eps_list])
        if np.abs(vals[0]).max() > 1e-10:
            raise ValueError("G(., 0) must vanish")
        interior = domain.boundary_distance(xp) > 1e-6
        diffs = np.diff(vals, axis=0)
        if (diffs[:, interior] <= 0).any():
            bad = np.argwhere(diffs[:, interior] <= 0)[0]
            raise ValueError(f"G not strictly increasing in eps near sample {bad}")
        if (vals[1:, interior] <= 0).any():
            raise ValueError("G must be positive on the open base for eps > 0")
        if boundary_vanishing:
            onb = domain.sample_boundary()
            if np.abs(self.G(onb, 1.0)).max() > 1e-8:
                raise ValueError("G must vanish on the base boundary")
        self.C_G = C_G if C_G is not None else float(np.abs(diffs).max() / (eps_list[1] - eps_list[0]))
        if grad_norm is None:
            h = 1e-5
            worst = 0.0
            for k in range(domain.dim):
                d = np.zeros(domain.dim)
                d[k] = h
                gk = (self.G(xp + d, 0.7) - self.G(xp - d, 0.7)) / (2 * h)
                worst = max(worst, float(np.abs(gk).max()))
            grad_norm = math.sqrt(1.0 + worst * worst)
        self.phi_lipschitz = float(grad_norm)

    def G(self, xp, eps):
        return np.asarray(self._G(np.atleast_2d(xp), float(eps)), dtype=float)

    def phi(self, pts, eps):
        """Height function ``phi_eps(x) = G(x', eps) - x_n``."""
        pts = np.atleast_2d(pts)
        return self.G(pts[:, :-1], eps) - pts[:, -1]

    def leaf_points(self, eps, n=400):
        xp = self.domain.sample(n)
        return np.column_stack([xp, self.G(xp, eps)])

    def leaf_tube(self, lo, hi, name=""):
        return GraphTube(self, lo, hi, name=name)


def ramp_profile(alpha: float):
    """Even C^1 profile with unit peak, zero at +-1 and slope capped by alpha.

    A cubic ramp of width ``c = 2 (alpha - 1) / alpha`` turns the slope on
    smoothly from 0, then the profile descends at the constant slope
    ``-alpha``; feasible for every ``alpha > 1``.
    """
    if alpha <= 1:
        raise ValueError("profile needs alpha > 1")
    c = 2.0 * (alpha - 1.0) / alpha

    def ramp_int(u):
        # integral of the smoothstep 3t^2-2t^3 from 0 to u (u in [0,1])
        u = np.clip(u, 0.0, 1.0)
        return u ** 3 - 0.5 * u ** 4

    def psi(s):
        s = np.abs(np.asarray(s, dtype=float))
        # slope magnitude alpha * S(s/c) with S the smoothstep
        out_inner = 1.0 - alpha * c * ramp_int(np.minimum(s, c) / c)
        drop_c = alpha * c * ramp_int(1.0)  # = alpha c / 2
        return np.where(s <= c, out_inner, 1.0 - drop_c - alpha * (s - c))

    def dpsi(s):
        s_arr = np.asarray(s, dtype=float)
        a = np.abs(s_arr)
        u = np.clip(a / c, 0.0, 1.0)
        mag = alpha * (3 * u ** 2 - 2 * u ** 3)
        mag = np.where(a > c, alpha, mag)
        return -np.sign(s_arr) * mag

    # normalisation check: psi(1) must be 0 by construction
    # 1 - alpha c/2 - alpha (1 - c) = 1 - alpha + alpha c/2 = 1 - alpha + (alpha-1) = 0
    return psi, dpsi


def wave_foliation(l0: float, t0: float, b: float, alpha: float, profile=None,
                   w_dim: int = 1, eta: float = 0.05) -> GraphFoliation:
    """Lens-shaped foliation over the ellipse ``(w/b)^2 + (t/t0)^2 <= 1``.

    ``G(t, w, eps) = eps l0 psi(sqrt((w/b)^2 + (t/t0)^2))`` with an even
    profile ``psi``, ``psi(0)=1``, ``psi(+-1)=0`` and ``|psi'| <= alpha``;
    admissible only when ``1 < alpha < t0 / l0``.  Outside the base the
    profile continues linearly downward so level sets are globally defined.
    """
    if not (0 < l0 and 0 < b):
        raise ValueError("need positive scales")
    if not (1.0 < alpha < t0 / l0):
        raise ValueError(f"need 1 < alpha < t0/l0 = {t0 / l0:.4g}")
    if profile is None:
        psi, dpsi = ramp_profile(alpha)
    else:
        psi, dpsi = profile
        s = np.linspace(-1, 1, 2001)
        vals = psi(s)
        if abs(vals[0]) > 1e-9 or abs(vals[-1]) > 1e-9:
            raise ValueError(f"profile must vanish at +-1 (got {vals[0]:.3g}, {vals[-1]:.3g})")
        if abs(psi(np.array([0.0]))[0] - 1.0) > 1e-9:
            raise ValueError("profile must peak at 1")
        if np.abs(vals - vals[::-1]).max() > 1e-9:
            raise ValueError("profile must be even")
        if (vals < -1e-12).any():
            raise ValueError("profile must be nonnegative on [-1, 1]")
        slopes = np.abs(dpsi(s))
        if slopes.max() > alpha * (1 + 1e-9):
            i = int(np.argmax(slopes))
            raise ValueError(f"profile slope {slopes.max():.4g} exceeds alpha at s = {s[i]:.4g}")

    semi = np.array([t0] + [b] * w_dim)
    domain = EllipseDomain(semi)

    def psi_ext(s):
        s = np.asarray(s, dtype=float)
        inside = np.clip(s, 0.0, 1.0)
        base = psi(inside)
        return np.where(s <= 1.0, base, -alpha * (s - 1.0))

    def G(xp, eps):
        rho = np.sqrt(np.sum((np.atleast_2d(xp) / semi) ** 2, axis=1))
        return eps * l0 * psi_ext(rho)

    fol = GraphFoliation(domain, G, eta=eta)
    fol.l0, fol.t0, fol.b, fol.alpha = l0, t0, b, alpha
    fol.profile = (psi, dpsi)
    return fol


# ---------------------------------------------------------------------------
# noncharacteristicity
# ---------------------------------------------------------------------------


@dataclass
class NoncharReport:
    min_slack: float
    worst_point: tuple
    b_used: float
    kind: str

    @property
    def passed(self):
        return self.min_slack > 0


def _symbol_at_gradient(fol, metric, kind, eps_grid, base_n):
    """Evaluate the principal symbol on leaf conormals over the sweep grid."""
    worst = math.inf
    worst_pt = None
    h = 1e-6
    for eps in eps_grid:
        xp = fol.domain.sample(base_n)
        xn = fol.G(xp, eps)
        grads = []
        for k in range(fol.domain.dim):
            d = np.zeros(fol.domain.dim)
            d[k] = h
            grads.append((fol.G(xp + d, eps) - fol.G(xp - d, eps)) / (2 * h))
        dG = np.stack(grads, axis=1)  # d phi / d x' ; d phi / d x_n = -1
        for i in range(len(xp)):
            gt = dG[i, 0]               # time direction is the first base axis
            gw = dG[i, 1:]              # transverse base directions
            xi_space = np.concatenate([gw, [-1.0]])
            m = metric(xp[i][1:], xn[i])
            quad = float(xi_space @ m @ xi_space)
            if kind == "wave":
                val = -gt * gt + quad
                slack = val  # needs >= eta > 0
            elif kind == "schrodinger":
                val = -quad
                slack = -0.5 - val  # needs val <= -1/2
            else:
                raise ValueError(kind)
            if slack < worst:
                worst = slack
                worst_pt = (float(eps), *map(float, xp[i]), float(xn[i]))
    return worst, worst_pt


def check_noncharacteristic(fol: GraphFoliation, metric, kind: str,
                            eps_grid=None, base_n: int = 300,
                            b_min: float = 1e-3, threshold: float = 0.0) -> NoncharReport:
    """Sign of the principal symbol on leaf conormals over the sweep.

    ``metric(w, x_n)`` returns the spatial quadratic form (positive
    definite); wave symbols must stay >= ``threshold`` above zero, the
    dispersive kind must stay below ``-1/2``.  When the check fails the
    transverse width ``b`` is halved (rebuilding the foliation) until it
    passes or undercuts ``b_min``.
    """
    eps_grid = np.linspace(0.0, 1.0, 11) if eps_grid is None else np.asarray(eps_grid)
    current = fol
    while True:
        slack, pt = _symbol_at_gradient(current, metric, kind, eps_grid, base_n)
        if slack > threshold:
            return NoncharReport(slack, pt, getattr(current, "b", math.nan), kind)
        b = getattr(current, "b", None)
        if b is None or b / 2 < b_min:
            raise CoverError(
                f"no admissible transverse width above {b_min}: worst slack {slack:.4g} at {pt}"
            )
        current = wave_foliation(current.l0, current.t0, b / 2, current.alpha,
                                 profile=current.profile, w_dim=current.domain.dim - 1,
                                 eta=current.eta)


# ---------------------------------------------------------------------------
# covers
# ---------------------------------------------------------------------------


@dataclass
class LeafCover:
    eps: float
    centers: np.ndarray
    r: np.ndarray
    R: np.ndarray
    rho: np.ndarray
    rho_leaf: float
    g: float
    coverage_margin: float


@dataclass
class BallCover:
    fol: GraphFoliation
    eps0: float
    leaves: list  # LeafCover, ordered by eps_j - g_j
    R_cap: float

    @property
    def eps_list(self):
        return [lf.eps for lf in self.leaves]

    def ordering_ok(self):
        """Overlap ordering: each next lower end sits inside the union so far."""
        lows = [lf.eps - lf.g for lf in self.leaves]
        highs = [lf.eps + lf.g for lf in self.leaves]
        for k in range(len(self.leaves) - 1):
            if not lows[k] <= lows[k + 1]:
                return False
            if not lows[k + 1] < max(highs[: k + 1]):
                return False
        return True

    def coverage_ok(self):
        lo = self.eps0
        for lf in self.leaves:
            if lf.eps - lf.g > lo:
                return False
            lo = max(lo, lf.eps + lf.g)
        return lo > 1.0


def _cover_leaf(fol, eps, oracle, R_cap, leaf_n, boundary_clear):
    pts = fol.leaf_points(eps, leaf_n)
    centers, rs, Rs, rhos = [], [], [], []
    covered = np.zeros(len(pts), dtype=bool)
    dropped_clearance = np.full(len(pts), -math.inf)
    for i in range(len(pts)):
        if covered[i]:
            continue
        x = pts[i]
        r, R, rho = oracle(x, eps)
        if 4 * R > R_cap * (1 + 1e-12):
            R = R_cap / 4
        if boundary_clear and x[-1] < 4 * R:
            # dropped: its 4R-ball would touch the bottom face; the collar
            # around the bottom leaf is responsible for this zone instead
            covered[i] = True
            dropped_clearance[i] = 4 * R - x[-1]
            continue
        centers.append(x)
        rs.append(r)
        Rs.append(R)
        rhos.append(rho)
        covered |= np.linalg.norm(pts - x, axis=1) <= r * (1 - 1e-9)
    if not centers:
        raise CoverError(f"no admissible centers on the leaf eps={eps}")
    centers = np.array(centers)
    rs, Rs, rhos = map(np.array, (rs, Rs, rhos))
    # sampled coverage margin on a finer leaf sample
    fine = fol.leaf_points(eps, 2 * leaf_n + 1)
    depth = np.max(rs[None, :] - np.linalg.norm(fine[:, None, :] - centers[None, :, :], axis=2), axis=1)
    if boundary_clear:
        # near the bottom face, clearance below the dropped 4R-balls counts
        Rmin = float(Rs.min())
        depth = np.maximum(depth, 4 * Rmin - fine[:, -1])
    rho_leaf = float(rhos.min())
    # distance from the leaf to the complement of (union of balls) cap {phi < rho}
    dist = np.minimum(depth, rho_leaf / fol.phi_lipschitz)
    g = float(dist.min()) / (2 * fol.C_G)
    if g <= 0:
        raise CoverError(f"leaf eps={eps}: sampled tube width nonpositive")
    return LeafCover(eps, centers, rs, Rs, rhos, rho_leaf, g, float(depth.min()))


def extract_cover(fol: GraphFoliation, oracle, eps0: float = 0.05,
                  R_cap: float = math.inf, leaf_n: int = 200,
                  n_candidates: int = 40, boundary_clear: bool = False) -> BallCover:
    """Finite leaf selection with ball covers and ordered overlap intervals.

    ``oracle(x, eps) -> (r, R, rho)`` supplies per-center radii.  Selection
    is greedy: among candidate levels whose overlap interval reaches the
    currently covered part of [0, 1], take the one extending farthest.  The
    overlap ordering property is asserted on the result (its failure
    indicates a bug, not bad data).
    """
    cache: dict[float, LeafCover] = {}

    def leaf(e):
        if e not in cache:
            cache[e] = _cover_leaf(fol, e, oracle, R_cap, leaf_n, boundary_clear)
        return cache[e]

    chosen = []
    lo = eps0
    cand = np.linspace(eps0 / 2, 1.0, n_candidates)
    guard = 0
    while lo <= 1.0:
        guard += 1
        if guard > 10 * n_candidates:
            raise CoverError("cover loop failed to terminate")
        reach = [(leaf(e).g + e, e) for e in cand if e - leaf(e).g < lo]
        if not reach:
            raise CoverError(f"coverage gap: nothing reaches below {lo:.4g}")
        hi, e_star = max(reach)
        if hi <= lo:
            raise CoverError(f"coverage stalls at {lo:.4g}")
        chosen.append(leaf(e_star))
        cand = cand[cand != e_star]
        lo = hi
    chosen.sort(key=lambda lf: (lf.eps - lf.g, -(lf.eps + lf.g)))
    # prune ties on the lower endpoint, keeping the larger upper end
    pruned = []
    for lf in chosen:
        if pruned and abs((lf.eps - lf.g) - (pruned[-1].eps - pruned[-1].g)) < 1e-12:
            continue
        pruned.append(lf)
    cover = BallCover(fol, eps0, pruned, R_cap)
    if not cover.coverage_ok():
        raise CoverError("pruning broke the sweep coverage")
    if not cover.ordering_ok():
        raise CoverError("overlap ordering violated; cover construction bug")
    return cover


def check_cover_inclusions(cover: BallCover, omega1: Region, n_samples: int = 4000,
                           seed: int = 0):
    """Chain inclusions: each level-set piece sits inside earlier ball unions.

    For leaf ``j`` (0-based over the selected leaves) and each of its
    centers, the set ``{phi_(eps_j) > rho_j} cap B(x, 4R)`` must land
    inside ``omega1`` together with the radius-``r`` balls of the leaves
    strictly before it (``omega1`` alone for the first leaf).  Returns
    per-leaf margins with witnesses on violation.
    """
    rng = np.random.default_rng(seed)
    fol = cover.fol
    results = []
    for j, leaf in enumerate(cover.leaves):
        prev_balls = [
            Ball(c, r)
            for lf in cover.leaves[:j]
            for c, r in zip(lf.centers, lf.r)
        ]
        rhs = RegionUnion([omega1] + prev_balls)
        worst = math.inf
        witness = None
        for c, R4 in zip(leaf.centers, 4 * leaf.R):
            ball = Ball(c, R4)
            pts = ball.sample(n_samples, rng)
            phi = fol.phi(pts, leaf.eps)
            sel = pts[phi > leaf.rho_leaf]
            if len(sel) == 0:
                continue
            m, w = sampled_inclusion(sel, rhs)
            if m < worst:
                worst, witness = m, w
        results.append({"k": j, "margin": worst, "witness": witness if worst < 0 else None})
    return results


# ---------------------------------------------------------------------------
# dependence graph and schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fact:
    """Dependence fact: the left cluster is controlled by the right one."""

    lhs: tuple  # region names
    rhs: tuple
    strong: bool

    def __str__(self):
        op = "<:" if self.strong else "<~"
        return f"({', '.join(self.lhs)}) {op} ({', '.join(self.rhs)})"


RULES = {
    "local-estimate",
    "inclusion",
    "union",
    "product",
    "strong-inclusion",
    "transitivity",
}


@dataclass
class Step:
    rule: str
    premises: list  # indices into the fact list (or inclusion-witness keys)
    conclusion: Fact


class DependenceGraph:
    """Named regions plus base facts and sampled-inclusion edges."""

    def __init__(self):
        self.regions: dict[str, Region] = {}
        self.base_facts: list[tuple[Fact, str]] = []
        self.inclusions: dict[tuple[str, str], float] = {}  # (inner, outer) -> margin

    def add_region(self, name: str, region: Region):
        region.name = name
        self.regions[name] = region

    def add_base_fact(self, lhs: str, rhs: str, provenance: str = "local-estimate"):
        if provenance not in RULES:
            raise ValueError(f"unknown provenance {provenance}")
        if lhs not in self.regions or rhs not in self.regions:
            raise MissingFactError(f"unknown region in base fact {lhs} <: {rhs}")
        self.base_facts.append((Fact((lhs,), (rhs,), True), provenance))

    def add_inclusion(self, inner: str, outer: str, n_samples: int = 3000, seed: int = 0,
                      margin: float | None = None):
        """Record ``inner`` compactly included in ``outer`` (sampled unless given)."""
        if margin is None:
            rng = np.random.default_rng(seed)
            region = self.regions[inner]
            if not hasattr(region, "sample"):
                raise TypeError(f"region {inner} is not sampleable; pass an explicit margin")
            pts = region.sample(n_samples, rng)
            margin, witness = sampled_inclusion(pts, self.regions[outer])
            if margin <= 0:
                raise CoverError(f"inclusion {inner} in {outer} fails at {witness}")
        self.inclusions[(inner, outer)] = float(margin)

    def has_inclusion(self, inner, outer):
        return (inner, outer) in self.inclusions


@dataclass
class Schedule:
    steps: list
    facts: list  # all facts, base first
    target: Fact


def _find_fact(facts, fact):
    for i, f in enumerate(facts):
        if f == fact:
            return i
    return None


def propagate_dependence(graph: DependenceGraph, cover: BallCover, targets) -> Schedule:
    """Derivation schedule ending in ``[U0 cup balls] <: V0``.

    Requires in the graph: base facts ``U[i,j] <: V[i,j]`` for every cover
    ball, the chain inclusions ``V[i,k+1] in E_k`` (from
    :func:`check_cover_inclusions`), ``omega[i,j] in U[i,j]``, and
    ``U0 in W0 in V0``.  Every step names its rule; the result replays
    mechanically from the base facts.
    """
    U0, V0 = targets
    leaves = cover.leaves
    facts: list[Fact] = []
    steps: list[Step] = []

    def emit(rule, premises, fact):
        idx = _find_fact(facts, fact)
        if idx is None:
            facts.append(fact)
            steps.append(Step(rule, premises, fact))
        return _find_fact(facts, fact)

    def need_base(lhs, rhs):
        f = Fact((lhs,), (rhs,), True)
        for bf, prov in graph.base_facts:
            if bf == f:
                return emit(prov, [], f)
        raise MissingFactError(f"missing base fact {lhs} <: {rhs}")

    def need_inclusion(inner, outer):
        if not graph.has_inclusion(inner, outer):
            raise MissingFactError(f"missing inclusion {inner} in {outer}")
        return f"{inner} in {outer}"

    def strong_inclusion(inner, outer):
        key = need_inclusion(inner, outer)
        return emit("strong-inclusion", [key], Fact((inner,), (outer,), True))

    def transitive(i1, i2):
        f1, f2 = facts[i1], facts[i2]
        if f1.rhs != f2.lhs:
            raise MissingFactError(f"transitivity mismatch: {f1} then {f2}")
        return emit("transitivity", [i1, i2], Fact(f1.lhs, f2.rhs, True))

    W0 = f"{U0}+half"
    if W0 not in graph.regions:
        raise MissingFactError(f"missing intermediate region {W0}")
    i_u0w0 = strong_inclusion(U0, W0)
    i_w0v0 = strong_inclusion(W0, V0)
    i_u0v0 = transitive(i_u0w0, i_w0v0)

    proven: dict[str, int] = {}  # U[i,j] name -> fact index of U <: V0

    def union_name(k):
        names = [U0] + [
            f"omega[{i},{j}]"
            for j in range(1, k + 1)
            for i in range(len(leaves[j - 1].centers))
        ]
        return "E[%d]" % k, names

    for k in range(len(leaves)):
        j = k + 1
        ename, members = union_name(k)
        if ename not in graph.regions:
            raise MissingFactError(f"missing union region {ename}")
        # E_k <: (W0, U[i,j<=k]) by the union rule over member inclusions
        incl_keys = [need_inclusion(U0, W0)]
        rhs_names = [W0]
        for jj in range(1, k + 1):
            for ii in range(len(leaves[jj - 1].centers)):
                incl_keys.append(need_inclusion(f"omega[{ii},{jj}]", f"U[{ii},{jj}]"))
                rhs_names.append(f"U[{ii},{jj}]")
        i_union = emit("union", incl_keys, Fact((ename,), tuple(rhs_names), True))
        # (W0, U[i,j<=k]) <: V0 by the product rule with common target
        comp = [i_w0v0] + [proven[f"U[{ii},{jj}]"] for jj in range(1, k + 1)
                           for ii in range(len(leaves[jj - 1].centers))]
        i_prod = emit("product", comp, Fact(tuple(rhs_names), (V0,), True))
        i_ek = transitive(i_union, i_prod)
        # each V[i,k+1] lands in E_k, so U[i,k+1] <: V0
        for i in range(len(leaves[k].centers)):
            vn, un = f"V[{i},{j}]", f"U[{i},{j}]"
            i_vin = strong_inclusion(vn, ename)
            i_vv0 = transitive(i_vin, i_ek)
            i_base = need_base(un, vn)
            proven[un] = transitive(i_base, i_vv0)

    # final union over everything
    ename, members = union_name(len(leaves))
    if ename not in graph.regions:
        raise MissingFactError(f"missing union region {ename}")
    incl_keys = [need_inclusion(U0, W0)]
    rhs_names = [W0]
    for jj in range(1, len(leaves) + 1):
        for ii in range(len(leaves[jj - 1].centers)):
            incl_keys.append(need_inclusion(f"omega[{ii},{jj}]", f"U[{ii},{jj}]"))
            rhs_names.append(f"U[{ii},{jj}]")
    i_union = emit("union", incl_keys, Fact((ename,), tuple(rhs_names), True))
    comp = [i_w0v0] + [proven[n] for n in rhs_names[1:]]
    i_prod = emit("product", comp, Fact(tuple(rhs_names), (V0,), True))
    i_final = transitive(i_union, i_prod)
    return Schedule(steps, facts, facts[i_final])


def build_dependence_graph(cover: BallCover, omega1: Region, omega_mid: Region,
                           omega_hat: Region, n_samples: int = 3000, seed: int = 0) -> DependenceGraph:
    """Assemble the region graph a propagation schedule needs.

    ``omega1 in omega_mid in omega_hat`` are the collar, an intermediate
    enlargement and the target neighborhood.  Adds, for every cover ball,
    the regions ``omega[i,j] = B(x, r)``, ``U[i,j] = B(x, 2r)`` and
    ``V[i,j] = {phi > rho} cap B(x, 4R)``, the partial unions ``E[k]``, the
    sampled inclusions between them, and the base dependence facts
    ``U[i,j] <: V[i,j]`` standing for the local estimate at each center.
    """
    g = DependenceGraph()
    fol = cover.fol
    g.add_region("U0", omega1)
    g.add_region("U0+half", omega_mid)
    g.add_region("V0", omega_hat)
    g.add_inclusion("U0", "U0+half", margin=_collar_gap(omega1, omega_mid))
    g.add_inclusion("U0+half", "V0", margin=_collar_gap(omega_mid, omega_hat))
    rng = np.random.default_rng(seed)
    union_parts = [omega1]
    for j, leaf in enumerate(cover.leaves, start=1):
        for i, (c, r, R, rho) in enumerate(zip(leaf.centers, leaf.r, leaf.R, leaf.rho)):
            g.add_region(f"omega[{i},{j}]", Ball(c, float(r)))
            g.add_region(f"U[{i},{j}]", Ball(c, 2 * float(r)))
            g.add_region(
                f"V[{i},{j}]",
                RegionIntersection(
                    [LevelUpper(fol, leaf.eps, float(rho)), Ball(c, 4 * float(R))]
                ),
            )
            g.add_inclusion(f"omega[{i},{j}]", f"U[{i},{j}]", margin=float(r))
            g.add_base_fact(f"U[{i},{j}]", f"V[{i},{j}]")
    for k in range(len(cover.leaves) + 1):
        parts = [g.regions["U0"]] + [
            g.regions[f"omega[{i},{jj}]"]
            for jj in range(1, k + 1)
            for i in range(len(cover.leaves[jj - 1].centers))
        ]
        g.add_region(f"E[{k}]", RegionUnion(parts))
    for j, leaf in enumerate(cover.leaves, start=1):
        for i in range(len(leaf.centers)):
            g.add_inclusion(f"V[{i},{j}]", f"E[{j - 1}]", n_samples=n_samples,
                            seed=int(rng.integers(1 << 31)))
    return g


def _collar_gap(inner: Region, outer: Region) -> float:
    """Margin of one collar-like region inside a strictly larger one."""
    gaps = []
    for attr in ("width", "height", "radius"):
        a, b = getattr(inner, attr, None), getattr(outer, attr, None)
        if a is not None and b is not None:
            gaps.append(b - a)
    if not gaps or min(gaps) <= 0:
        raise CoverError("collar regions are not strictly nested")
    return float(min(gaps))


def schedule_to_json(schedule: Schedule, graph: DependenceGraph) -> dict:
    """Self-contained verification record for the standalone replayer.

    Carries the derivation steps plus the sampled facts they rest on (base
    dependence facts, inclusion margins and union memberships), so a reader
    without the region objects can still re-check the derivation.
    """

    def fact_doc(f: Fact):
        return {"lhs": list(f.lhs), "rhs": list(f.rhs), "strong": f.strong}

    unions = {}
    for name, region in graph.regions.items():
        parts = getattr(region, "parts", None)
        if parts is not None:
            unions[name] = [getattr(p, "name", "") for p in parts]
    return {
        "kind": "dependence-schedule",
        "version": 1,
        "target": fact_doc(schedule.target),
        "steps": [
            {"rule": s.rule, "premises": list(s.premises), "conclusion": fact_doc(s.conclusion)}
            for s in schedule.steps
        ],
        "base_facts": [fact_doc(f) for f, _ in graph.base_facts],
        "inclusions": {f"{a} in {b}": m for (a, b), m in graph.inclusions.items()},
        "unions": unions,
    }


def replay_json(doc: dict) -> bool:
    """Mechanically re-check a serialized schedule record."""
    if doc.get("kind") != "dependence-schedule":
        raise ValueError("not a schedule record")

    def fact_of(d):
        return Fact(tuple(d["lhs"]), tuple(d["rhs"]), bool(d["strong"]))

    base = {fact_of(d) for d in doc["base_facts"]}
    inclusions = dict(doc["inclusions"])
    unions = doc["unions"]
    derived: list[Fact] = []
    for raw in doc["steps"]:
        rule = raw["rule"]
        premises = raw["premises"]
        conclusion = fact_of(raw["conclusion"])
        if rule not in RULES:
            return False
        for p in premises:
            if isinstance(p, int):
                if p >= len(derived):
                    return False
            elif inclusions.get(p, -1.0) <= 0:
                return False
        if rule == "local-estimate":
            if conclusion not in base:
                return False
        elif rule == "strong-inclusion":
            inner, _, outer = premises[0].partition(" in ")
            if conclusion != Fact((inner,), (outer,), True):
                return False
        elif rule == "transitivity":
            a, b = (derived[i] for i in premises)
            if a.rhs != b.lhs or conclusion != Fact(a.lhs, b.rhs, True):
                return False
        elif rule == "union":
            inners = [p.partition(" in ")[0] for p in premises]
            outers = [p.partition(" in ")[2] for p in premises]
            if tuple(outers) != conclusion.rhs or len(conclusion.lhs) != 1:
                return False
            members = unions.get(conclusion.lhs[0])
            if members is None or not set(inners) <= set(members):
                return False
        elif rule == "product":
            parts = [derived[i] for i in premises]
            if any(f.rhs != (conclusion.rhs[0],) for f in parts):
                return False
            if tuple(n for f in parts for n in f.lhs) != conclusion.lhs:
                return False
        derived.append(conclusion)
    return fact_of(doc["target"]) in derived


def replay(schedule: Schedule, graph: DependenceGraph) -> bool:
    """Mechanically re-check a schedule from the graph's base facts.

    Each step's premises must already be derived (or recorded as base facts
    / sampled inclusions with positive margin) and the step's rule must be
    one of the allowed ones with well-formed shapes.
    """
    derived: list[Fact] = []
    base = {f for f, _ in graph.base_facts}
    for step in schedule.steps:
        if step.rule not in RULES:
            return False
        for p in step.premises:
            if isinstance(p, int):
                if p >= len(derived):
                    return False
            else:
                inner, _, outer = p.partition(" in ")
                if graph.inclusions.get((inner, outer), -1.0) <= 0:
                    return False
        if step.rule == "local-estimate":
            if step.conclusion not in base:
                return False
        elif step.rule == "strong-inclusion":
            if len(step.premises) != 1 or not isinstance(step.premises[0], str):
                return False
            inner, _, outer = step.premises[0].partition(" in ")
            if step.conclusion != Fact((inner,), (outer,), True):
                return False
        elif step.rule == "transitivity":
            a, b = (derived[i] for i in step.premises)
            if a.rhs != b.lhs or step.conclusion != Fact(a.lhs, b.rhs, True):
                return False
        elif step.rule == "union":
            inners = [p.partition(" in ")[0] for p in step.premises]
            outers = [p.partition(" in ")[2] for p in step.premises]
            if tuple(outers) != step.conclusion.rhs or len(step.conclusion.lhs) != 1:
                return False
            union_region = graph.regions.get(step.conclusion.lhs[0])
            if union_region is None:
                return False
            member_names = {getattr(p, "name", "") for p in getattr(union_region, "parts", [])}
            if member_names and not set(inners) <= member_names:
                return False
        elif step.rule == "product":
            parts = [derived[i] for i in step.premises]
            if any(f.rhs != (step.conclusion.rhs[0],) for f in parts):
                return False
            lhs = tuple(n for f in parts for n in f.lhs)
            if lhs != step.conclusion.lhs:
                return False
        derived.append(step.conclusion)
    return schedule.target in derived
