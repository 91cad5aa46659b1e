"""Polynomial symbol algebra in phase space.

A symbol is a polynomial in the frequency variables ``(xi, tau)`` whose
coefficients are functions of the spatial point ``x``.  Coefficients carry
closed-form derivatives supplied by the caller (value / gradient / Hessian),
so Poisson brackets are exact up to rounding: no numeric differentiation
happens inside the bracket.

The spatial variables split as ``x = (x_a, x_b)`` with ``n = n_a + n_b``;
frequency multi-indices are tuples ``(alpha_1, ..., alpha_n, j)`` where the
last entry is the power of the scalar parameter ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Coefficient",
    "MissingDerivativeError",
    "PhasePoint",
    "SymbolPoly",
    "conjugate_weight",
    "eval_symbol",
    "poisson_bracket",
    "principal_normality_defect",
    "sphere_points",
]


class MissingDerivativeError(ValueError):
    """A coefficient was asked for a derivative it does not provide."""


class Coefficient:
    """Spatial coefficient with caller-supplied closed-form derivatives.

    ``value(x)`` is mandatory; ``grad(x)`` and ``hess(x)`` are optional and
    raise :class:`MissingDerivativeError` when absent but required.
    Composite coefficients produced by the algebra (sums, products,
    spatial derivatives) propagate derivatives by the usual calculus rules,
    to the order the operands support.
    """

    __slots__ = ("_value", "_grad", "_hess")

    def __init__(self, value, grad=None, hess=None):
        self._value = value
        self._grad = grad
        self._hess = hess

    @staticmethod
    def constant(c: complex, n: int) -> "Coefficient":
        zero_g = np.zeros(n, dtype=complex)
        zero_h = np.zeros((n, n), dtype=complex)
        return Coefficient(lambda x: c, lambda x: zero_g, lambda x: zero_h)

    @property
    def has_grad(self) -> bool:
        return self._grad is not None

    @property
    def has_hess(self) -> bool:
        return self._hess is not None

    def value(self, x) -> complex:
        return complex(self._value(x))

    def grad(self, x) -> np.ndarray:
        if self._grad is None:
            raise MissingDerivativeError("coefficient provides no gradient")
        return np.asarray(self._grad(x), dtype=complex)

    def hess(self, x) -> np.ndarray:
        if self._hess is None:
            raise MissingDerivativeError("coefficient provides no Hessian")
        return np.asarray(self._hess(x), dtype=complex)

    # -- calculus on coefficients ------------------------------------

    def conj(self) -> "Coefficient":
        g = (lambda x: np.conj(self.grad(x))) if self.has_grad else None
        h = (lambda x: np.conj(self.hess(x))) if self.has_hess else None
        return Coefficient(lambda x: np.conj(self.value(x)), g, h)

    def scale(self, s: complex) -> "Coefficient":
        g = (lambda x: s * self.grad(x)) if self.has_grad else None
        h = (lambda x: s * self.hess(x)) if self.has_hess else None
        return Coefficient(lambda x: s * self.value(x), g, h)

    def add(self, other: "Coefficient") -> "Coefficient":
        g = None
        if self.has_grad and other.has_grad:
            g = lambda x: self.grad(x) + other.grad(x)
        h = None
        if self.has_hess and other.has_hess:
            h = lambda x: self.hess(x) + other.hess(x)
        return Coefficient(lambda x: self.value(x) + other.value(x), g, h)

    def mul(self, other: "Coefficient") -> "Coefficient":
        g = None
        if self.has_grad and other.has_grad:
            g = lambda x: self.grad(x) * other.value(x) + self.value(x) * other.grad(x)
        h = None
        if self.has_hess and other.has_hess:
            def h(x, a=self, b=other):
                ga, gb = a.grad(x), b.grad(x)
                return (
                    a.hess(x) * b.value(x)
                    + b.hess(x) * a.value(x)
                    + np.outer(ga, gb)
                    + np.outer(gb, ga)
                )
        return Coefficient(lambda x: self.value(x) * other.value(x), g, h)

    def partial(self, k: int) -> "Coefficient":
        """Spatial derivative in direction ``k`` (loses one derivative order)."""
        if not self.has_grad:
            raise MissingDerivativeError("coefficient provides no gradient")
        g = (lambda x: self.hess(x)[k, :]) if self.has_hess else None
        return Coefficient(lambda x: self.grad(x)[k], g, None)


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(x, xi, tau)`` with real base point and complex covector."""

    x: np.ndarray
    xi: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=complex))
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


class SymbolPoly:
    """Polynomial in ``(xi, tau)`` with spatially varying coefficients.

    ``table`` maps multi-indices ``(alpha, j)`` (length ``n + 1``) to
    :class:`Coefficient` objects.  Every multi-index must have total degree
    at most ``order``.
    """

    def __init__(self, order: int, na: int, nb: int, table: Mapping[tuple, Coefficient]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if na < 0 or nb < 0 or na + nb < 1:
            raise ValueError("invalid dimension split")
        n = na + nb
        tbl = {}
        for idx, coeff in table.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != n + 1 or any(i < 0 for i in idx):
                raise ValueError(f"bad multi-index {idx} for n={n}")
            if sum(idx) > order:
                raise ValueError(f"multi-index {idx} exceeds order {order}")
            if not isinstance(coeff, Coefficient):
                coeff = Coefficient.constant(complex(coeff), n)
            tbl[idx] = coeff
        self.order = order
        self.na = na
        self.nb = nb
        self.table = tbl

    # -- constructors --------------------------------------------------

    @staticmethod
    def from_quadratic_form(M: np.ndarray, na: int, nb: int) -> "SymbolPoly":
        """Constant-coefficient quadratic symbol ``xi^T M xi`` (no tau)."""
        M = np.asarray(M)
        n = na + nb
        if M.shape != (n, n):
            raise ValueError("quadratic form dimension mismatch")
        table: dict[tuple, Coefficient] = {}
        for i in range(n):
            for j in range(n):
                if M[i, j] == 0:
                    continue
                idx = [0] * (n + 1)
                idx[i] += 1
                idx[j] += 1
                key = tuple(idx)
                c = table.get(key)
                add = complex(M[i, j])
                table[key] = Coefficient.constant(
                    add if c is None else c.value(None) + add, n
                )
        return SymbolPoly(2, na, nb, table)

    @staticmethod
    def wave(na: int, nb: int, metric: np.ndarray | None = None) -> "SymbolPoly":
        """Wave-type symbol ``|xi_a|^2 - <metric xi_b, xi_b>`` (flat by default)."""
        n = na + nb
        M = np.zeros((n, n))
        M[:na, :na] = np.eye(na)
        g = np.eye(nb) if metric is None else np.asarray(metric, dtype=float)
        M[na:, na:] = -g
        return SymbolPoly.from_quadratic_form(M, na, nb)

    @staticmethod
    def from_weight(weight, na: int, nb: int) -> "SymbolPoly":
        """Wrap a scalar spatial function (value/grad/hess) as a degree-0 entry."""
        n = na + nb
        coeff = Coefficient(
            lambda x: weight.value(x),
            (lambda x: weight.grad(x)) if hasattr(weight, "grad") else None,
            (lambda x: weight.hess(x)) if hasattr(weight, "hess") else None,
        )
        return SymbolPoly(1, na, nb, {tuple([0] * (n + 1)): coeff})

    # -- structure -----------------------------------------------------

    @property
    def n(self) -> int:
        return self.na + self.nb

    def is_pure_degree(self) -> bool:
        degrees = {sum(idx) for idx in self.table}
        return len(degrees) == 1 and degrees == {self.order}

    def conjugate(self) -> "SymbolPoly":
        return SymbolPoly(
            self.order, self.na, self.nb, {k: c.conj() for k, c in self.table.items()}
        )

    def _add_term(self, table: dict, idx: tuple, coeff: Coefficient):
        if idx in table:
            table[idx] = table[idx].add(coeff)
        else:
            table[idx] = coeff

    def d_xi(self, k: int) -> "SymbolPoly":
        """Derivative in frequency (tau counts as index ``n``)."""
        table: dict[tuple, Coefficient] = {}
        for idx, coeff in self.table.items():
            if idx[k] == 0:
                continue
            new = list(idx)
            new[k] -= 1
            self._add_term(table, tuple(new), coeff.scale(idx[k]))
        order = max(1, self.order - 1)
        return SymbolPoly(order, self.na, self.nb, table)

    def d_x(self, k: int) -> "SymbolPoly":
        table = {idx: coeff.partial(k) for idx, coeff in self.table.items()}
        return SymbolPoly(self.order, self.na, self.nb, table)

    def mul(self, other: "SymbolPoly") -> "SymbolPoly":
        if (self.na, self.nb) != (other.na, other.nb):
            raise ValueError("dimension split mismatch")
        table: dict[tuple, Coefficient] = {}
        for ia, ca in self.table.items():
            for ib, cb in other.table.items():
                idx = tuple(a + b for a, b in zip(ia, ib))
                self._add_term(table, idx, ca.mul(cb))
        return SymbolPoly(self.order + other.order, self.na, self.nb, table)

    # -- evaluation ------------------------------------------------------

    def eval(self, pt: PhasePoint) -> complex:
        return eval_symbol(self, pt)

    def eval_many(self, x0, Xi: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at a fixed base point ``x0``.

        ``Xi`` has shape ``(N, n)`` (complex allowed), ``tau`` shape ``(N,)``.
        Coefficients are evaluated once at ``x0``.
        """
        Xi = np.atleast_2d(np.asarray(Xi, dtype=complex))
        tau = np.asarray(tau, dtype=float)
        if Xi.shape[1] != self.n:
            raise ValueError("covector dimension mismatch")
        out = np.zeros(Xi.shape[0], dtype=complex)
        for idx, coeff in self.table.items():
            c = coeff.value(x0)
            term = np.full(Xi.shape[0], c, dtype=complex)
            for k in range(self.n):
                if idx[k]:
                    term = term * Xi[:, k] ** idx[k]
            if idx[self.n]:
                term = term * tau ** idx[self.n]
            out += term
        return out


def eval_symbol(sym: SymbolPoly, pt: PhasePoint) -> complex:
    """Pointwise evaluation ``sum coeff(x) xi^alpha tau^j``."""
    if pt.xi.shape != (sym.n,):
        raise ValueError(f"covector has dimension {pt.xi.shape}, expected ({sym.n},)")
    return complex(sym.eval_many(pt.x, pt.xi[None, :], np.array([pt.tau]))[0])


def poisson_bracket(p: SymbolPoly, q: SymbolPoly, axes: Iterable[int] | None = None) -> SymbolPoly:
    """Poisson bracket ``{p, q} = sum_k d_xi_k p . d_x_k q - d_x_k p . d_xi_k q``.

    ``axes`` restricts the bracket to a subset of the spatial directions
    (default: all of them).  ``tau`` is a parameter and never differentiated.
    """
    if (p.na, p.nb) != (q.na, q.nb):
        raise ValueError("dimension split mismatch")
    n = p.n
    axes = range(n) if axes is None else list(axes)
    result: SymbolPoly | None = None
    for k in axes:
        term = p.d_xi(k).mul(q.d_x(k))
        neg = p.d_x(k).mul(q.d_xi(k))
        piece_table: dict[tuple, Coefficient] = dict(term.table)
        for idx, coeff in neg.table.items():
            if idx in piece_table:
                piece_table[idx] = piece_table[idx].add(coeff.scale(-1))
            else:
                piece_table[idx] = coeff.scale(-1)
        piece = SymbolPoly(term.order, p.na, p.nb, piece_table)
        if result is None:
            result = piece
        else:
            table = dict(result.table)
            for idx, coeff in piece.table.items():
                if idx in table:
                    table[idx] = table[idx].add(coeff)
                else:
                    table[idx] = coeff
            result = SymbolPoly(max(result.order, piece.order), p.na, p.nb, table)
    if result is None:
        raise ValueError("empty bracket axis set")
    return result


def _shift_by_weight(p: SymbolPoly, weight, s: float) -> SymbolPoly:
    """Substitute ``xi -> xi + i*s*grad(weight)(x)`` into ``p``.

    Coefficient derivatives propagate through the weight's gradient and
    Hessian; third derivatives of the weight are assumed to vanish (exact
    for the quadratic convexified weights), so Hessians of the shifted
    coefficients are available whenever the weight supplies its Hessian.
    """
    n = p.n

    def grad_power_coeff(base: Coefficient, powers: tuple, scalar: complex) -> Coefficient:
        # coefficient  scalar * base(x) * prod_k (d_k weight)(x)^powers[k]
        def value(x):
            g = np.asarray(weight.grad(x), dtype=complex)
            v = scalar * base.value(x)
            for k, m in enumerate(powers):
                if m:
                    v = v * g[k] ** m
            return v

        grad = None
        if base.has_grad and hasattr(weight, "hess"):
            def grad(x):
                g = np.asarray(weight.grad(x), dtype=complex)
                H = np.asarray(weight.hess(x), dtype=complex)
                prod = np.ones((), dtype=complex)
                for k, m in enumerate(powers):
                    if m:
                        prod = prod * g[k] ** m
                out = scalar * base.grad(x) * prod
                bval = scalar * base.value(x)
                for k, m in enumerate(powers):
                    if not m:
                        continue
                    partial = np.ones((), dtype=complex)
                    for k2, m2 in enumerate(powers):
                        e = m2 - (1 if k2 == k else 0)
                        if e:
                            partial = partial * g[k2] ** e
                    out = out + bval * m * partial * H[k, :]
                return out

        hess = None
        if base.has_hess and hasattr(weight, "hess"):
            # valid when the weight is quadratic (vanishing third derivatives)
            def hess(x):
                g = np.asarray(weight.grad(x), dtype=complex)
                H = np.asarray(weight.hess(x), dtype=complex)

                def prod_except(skips):
                    out = np.ones((), dtype=complex)
                    for k2, m2 in enumerate(powers):
                        e = m2 - skips.get(k2, 0)
                        if e:
                            out = out * g[k2] ** e
                    return out

                P = prod_except({})
                bval = base.value(x)
                bgrad = base.grad(x)
                out = scalar * base.hess(x) * P
                for k, m in enumerate(powers):
                    if not m:
                        continue
                    Pk = m * prod_except({k: 1})
                    out = out + scalar * (
                        np.outer(bgrad, Pk * H[k, :]) + np.outer(Pk * H[k, :], bgrad)
                    )
                for k, m in enumerate(powers):
                    if not m:
                        continue
                    for k2, m2 in enumerate(powers):
                        factor = m * (m2 - (1 if k2 == k else 0))
                        if factor:
                            out = out + scalar * bval * factor * prod_except(
                                {k: 1, k2: 1}
                            ) * np.outer(H[k, :], H[k2, :])
                return out

        return Coefficient(value, grad, hess)

    table: dict[tuple, Coefficient] = {}
    for idx, coeff in p.table.items():
        alpha = idx[:n]
        jtau = idx[n]
        # expand prod_k (xi_k + i s g_k)^alpha_k by multinomials
        def expand(k: int, beta: list, gpow: list, scalar: complex):
            if k == n:
                new_idx = tuple(beta) + (jtau,)
                c = grad_power_coeff(coeff, tuple(gpow), scalar)
                if new_idx in table:
                    table[new_idx] = table[new_idx].add(c)
                else:
                    table[new_idx] = c
                return
            for b in range(alpha[k] + 1):
                m = alpha[k] - b
                expand(
                    k + 1,
                    beta + [b],
                    gpow + [m],
                    scalar * math.comb(alpha[k], b) * (1j * s) ** m,
                )

        expand(0, [], [], 1.0 + 0.0j)
    return SymbolPoly(p.order, p.na, p.nb, table)


def conjugate_weight(p: SymbolPoly, psi, tau: float) -> SymbolPoly:
    """Weight-conjugated symbol ``p_psi(x, xi) = p(x, xi + i tau grad(psi)(x))``.

    ``psi`` is any object exposing ``grad(x)`` (and ``hess(x)`` when
    downstream brackets need coefficient gradients).  At ``tau = 0`` the
    result equals ``p``.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return _shift_by_weight(p, psi, tau)


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points on the unit sphere of R^dim, shape (count, dim).

    dim 1 gives {-1, +1}; dim 2 a uniform angle grid; dim 3 a Fibonacci
    lattice; higher dimensions fall back to seeded Gaussian normalisation.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if dim == 3:
        # Fibonacci lattice: z stratified, azimuth by the golden angle
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = np.pi * (1 + math.sqrt(5.0)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def principal_normality_defect(
    p: SymbolPoly,
    region: tuple,
    grid: int,
    sphere_count: int = 256,
    zero_tol: float = 1e-12,
) -> float:
    """Largest sampled ratio ``|{pbar, p}| / (|p| |xi_b|^{m-1})`` on ``xi_a = 0``.

    ``region`` is a per-axis ``(min, max)`` box in x, sampled with ``grid``
    points per axis; ``xi_b`` runs over a unit-sphere lattice.  Returns
    ``inf`` when the denominator vanishes but the numerator does not.
    """
    if grid < 1:
        raise ValueError("grid resolution must be positive")
    region = [tuple(map(float, ax)) for ax in region]
    if len(region) != p.n:
        raise ValueError("region dimension mismatch")
    bracket = poisson_bracket(p.conjugate(), p)
    axes = [np.linspace(lo, hi, grid) for lo, hi in region]
    mesh = np.meshgrid(*axes, indexing="ij") if p.n > 1 else [axes[0]]
    xs = np.stack([m.ravel() for m in mesh], axis=1)
    if p.nb == 0:
        dirs = np.zeros((1, 0))
    else:
        dirs = sphere_points(p.nb, sphere_count)
    Xi = np.zeros((dirs.shape[0], p.n), dtype=complex)
    Xi[:, p.na :] = dirs
    taus = np.zeros(dirs.shape[0])
    worst = 0.0
    scale = 0.0
    for x in xs:
        pv = np.abs(p.eval_many(x, Xi, taus))
        scale = max(scale, float(pv.max(initial=0.0)))
    for x in xs:
        num = np.abs(bracket.eval_many(x, Xi, taus))
        den = np.abs(p.eval_many(x, Xi, taus))  # |xi_b|^{m-1} = 1 on the sphere
        bad = (den <= zero_tol * max(scale, 1.0)) & (num > zero_tol * max(scale, 1.0))
        if bad.any():
            return math.inf
        ok = den > zero_tol * max(scale, 1.0)
        if ok.any():
            worst = max(worst, float((num[ok] / den[ok]).max()))
    return worst
