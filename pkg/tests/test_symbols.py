import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uclab.symbols import (
    Coefficient,
    MissingDerivativeError,
    PhasePoint,
    SymbolPoly,
    conjugate_weight,
    eval_symbol,
    poisson_bracket,
    principal_normality_defect,
    sphere_points,
)


def wave_1p1():
    return SymbolPoly.wave(1, 1)


class QuadraticWeight:
    """psi(x) = x . A x with closed-form derivatives."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x)

    def grad(self, x):
        return 2.0 * self.A @ np.asarray(x, dtype=float)

    def hess(self, x):
        return 2.0 * self.A


def linear_weight(g):
    g = np.asarray(g, dtype=float)

    class W:
        def value(self, x):
            return float(np.dot(x, g))

        def grad(self, x):
            return g

        def hess(self, x):
            return np.zeros((len(g), len(g)))

    return W()


def coeff_x(k, n):
    """Coefficient equal to the k-th coordinate."""
    e = np.zeros(n)
    e[k] = 1.0
    return Coefficient(lambda x: x[k], lambda x: e, lambda x: np.zeros((n, n)))


def random_symbol(seed, order=2, na=1, nb=1):
    rng = np.random.default_rng(seed)
    n = na + nb
    table = {}
    for _ in range(4):
        idx = tuple(int(i) for i in rng.integers(0, 2, size=n + 1))
        if sum(idx) > order:
            continue
        a, b, c = rng.standard_normal(3)
        table[idx] = Coefficient(
            lambda x, a=a, b=b, c=c: a + b * x[0] + c * x[-1] ** 2,
            lambda x, b=b, c=c: np.array([b] + [0.0] * (n - 2) + [2 * c * x[-1]]),
            lambda x, c=c: np.diag([0.0] * (n - 1) + [2 * c]),
        )
    if not table:
        table[tuple([0] * (n + 1))] = Coefficient.constant(1.0, n)
    return SymbolPoly(order, na, nb, table)


def test_eval_monomial():
    p = wave_1p1()
    assert eval_symbol(p, PhasePoint([0.2, -0.7], [1.0, 0.0])) == 1.0


def test_eval_conic_slice_never_zero():
    # on the conic set the wave symbol is minus the squared transverse part
    p = wave_1p1()
    for xb in (0.5, -2.0, 3.0):
        v = eval_symbol(p, PhasePoint([0.0, 0.0], [0.0, xb]))
        assert v == -(xb**2) < 0


def test_eval_complex_argument():
    p = SymbolPoly.from_quadratic_form(np.array([[1.0]]), 0, 1)
    v = eval_symbol(p, PhasePoint([1.0], [1 + 2j], 1.0))
    assert v == (1 + 2j) ** 2 == (-3 + 4j)


def test_eval_dimension_mismatch():
    p = wave_1p1()
    with pytest.raises(ValueError):
        eval_symbol(p, PhasePoint([0.0], [1.0], 0.0))


def test_bracket_canonical_pair():
    q = SymbolPoly(1, 1, 1, {(0, 0, 0): coeff_x(0, 2)})
    pxi = SymbolPoly(1, 1, 1, {(1, 0, 0): Coefficient.constant(1.0, 2)})
    br = poisson_bracket(pxi, q)
    for seed in range(3):
        rng = np.random.default_rng(seed)
        pt = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        assert eval_symbol(br, pt) == pytest.approx(1.0, abs=1e-14)


def test_bracket_constant_coefficients_vanish():
    p = SymbolPoly.from_quadratic_form(np.diag([1.0, -1.0]), 1, 1)
    q = SymbolPoly.from_quadratic_form(np.diag([2.0, 3.0]), 1, 1)
    br = poisson_bracket(p, q)
    pt = PhasePoint([0.3, 0.4], [1.0, -2.0])
    assert eval_symbol(br, pt) == pytest.approx(0.0, abs=1e-14)


def test_double_bracket_weighted_square():
    # p = xi^2 conjugated by x^2: (1/(i tau)) {conj, itself} = 16 (xi^2 + 4 tau^2 x^2)
    p = SymbolPoly.from_quadratic_form(np.array([[1.0]]), 0, 1)
    w = QuadraticWeight(np.array([[1.0]]))
    pw = conjugate_weight(p, w, 1.0)
    br = poisson_bracket(pw.conjugate(), pw)
    v = eval_symbol(br, PhasePoint([1.0], [0.0], 1.0)) / 1j
    assert v == pytest.approx(64.0, rel=1e-12)
    v2 = eval_symbol(br, PhasePoint([0.5], [1.5], 1.0)) / 1j
    assert v2 == pytest.approx(16 * (1.5**2 + 4 * 0.25), rel=1e-12)


def test_conjugate_weight_zero_shift():
    p = wave_1p1()
    w = linear_weight([0.0, 1.0])
    pw = conjugate_weight(p, w, 0.0)
    for seed in range(3):
        rng = np.random.default_rng(seed)
        pt = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        assert eval_symbol(pw, pt) == pytest.approx(eval_symbol(p, pt), abs=1e-14)


def test_conjugate_weight_direct_substitution():
    p = wave_1p1()
    pw = conjugate_weight(p, linear_weight([0.0, 1.0]), 1.0)
    assert eval_symbol(pw, PhasePoint([0.0, 0.0], [0.0, 0.0], 1.0)) == pytest.approx(1.0)


def test_conjugate_weight_consistency():
    # evaluating the conjugated table at real xi equals evaluating p at the
    # shifted complex covector
    p = random_symbol(5)
    w = QuadraticWeight(np.array([[0.7, 0.1], [0.1, -0.3]]))
    tau = 0.8
    pw = conjugate_weight(p, w, tau)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.standard_normal(2)
        xi = rng.standard_normal(2)
        lhs = eval_symbol(pw, PhasePoint(x, xi, tau))
        rhs = eval_symbol(p, PhasePoint(x, xi + 1j * tau * w.grad(x), tau))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_wave_bracket_imaginary_part():
    # bracket of a quadratic-form symbol with a weight, at the shifted
    # covector: imaginary part is twice the form on the weight gradient
    p = wave_1p1()
    g = np.array([0.4, 1.3])
    w = linear_weight(g)
    br = poisson_bracket(p, SymbolPoly.from_weight(w, 1, 1))
    M = np.diag([1.0, -1.0])
    rng = np.random.default_rng(1)
    for _ in range(4):
        xi = rng.standard_normal(2)
        v = eval_symbol(br, PhasePoint([0.0, 0.0], xi + 1j * g, 0.0))
        assert v.imag == pytest.approx(2 * float(g @ M @ g), rel=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_bracket_antisymmetry(seed):
    p = random_symbol(seed)
    q = random_symbol(seed + 1)
    b1 = poisson_bracket(p, q)
    b2 = poisson_bracket(q, p)
    rng = np.random.default_rng(seed)
    pt = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    v1, v2 = eval_symbol(b1, pt), eval_symbol(b2, pt)
    assert v1 == pytest.approx(-v2, rel=1e-12, abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_bracket_leibniz(seed):
    p = random_symbol(seed)
    q = random_symbol(seed + 1)
    r = random_symbol(seed + 2)
    lhs = poisson_bracket(p, q.mul(r))
    rhs1 = poisson_bracket(p, q).mul(r)
    rhs2 = q.mul(poisson_bracket(p, r))
    rng = np.random.default_rng(seed)
    pt = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    lv = eval_symbol(lhs, pt)
    rv = eval_symbol(rhs1, pt) + eval_symbol(rhs2, pt)
    assert lv == pytest.approx(rv, rel=1e-10, abs=1e-10)


def test_bracket_missing_gradient_rejected():
    bare = Coefficient(lambda x: x[0])
    p = SymbolPoly(1, 1, 1, {(0, 0, 0): bare})
    q = SymbolPoly(1, 1, 1, {(1, 0, 0): Coefficient.constant(1.0, 2)})
    with pytest.raises(MissingDerivativeError):
        poisson_bracket(q, p)


@pytest.mark.parametrize("s", [2.0, 0.5, 10.0])
def test_homogeneity_pure_degree(s):
    p = wave_1p1()
    assert p.is_pure_degree()
    rng = np.random.default_rng(4)
    xi = rng.standard_normal(2)
    a = eval_symbol(p, PhasePoint([0.1, 0.2], s * xi, 0.0))
    b = s**2 * eval_symbol(p, PhasePoint([0.1, 0.2], xi, 0.0))
    assert a == pytest.approx(b, rel=1e-12)


def test_defect_real_constant_symbol():
    assert principal_normality_defect(wave_1p1(), [(-1, 1), (-1, 1)], 5) == 0.0


def test_defect_metric_wave():
    g = np.array([[2.0, 0.3], [0.3, 1.0]])
    p = SymbolPoly.wave(1, 2, metric=g)
    assert principal_normality_defect(p, [(-1, 1)] * 3, 3, sphere_count=64) == 0.0


def test_defect_complex_first_order():
    # p = xi + i x in one dimension: bracket 2i, |p| = 1 at (x, xi) = (0, 1)
    p = SymbolPoly(
        1,
        0,
        1,
        {
            (1, 0): Coefficient.constant(1.0, 1),
            (0, 0): Coefficient(
                lambda x: 1j * x[0], lambda x: np.array([1j]), lambda x: np.zeros((1, 1))
            ),
        },
    )
    assert principal_normality_defect(p, [(-1, 1)], 21) == pytest.approx(2.0, rel=1e-12)


def test_sphere_points_shapes_and_norms():
    for dim in (1, 2, 3, 4):
        pts = sphere_points(dim, 64)
        assert pts.shape[1] == dim
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_order_and_degree_validation():
    with pytest.raises(ValueError):
        SymbolPoly(0, 1, 1, {})
    with pytest.raises(ValueError):
        SymbolPoly(1, 1, 1, {(1, 1, 1): Coefficient.constant(1.0, 2)})


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_bracket_bilinearity(seed):
    p = random_symbol(seed)
    q = random_symbol(seed + 1)
    r = random_symbol(seed + 2)
    rng = np.random.default_rng(seed)
    c = float(rng.uniform(0.5, 2.0))
    scale = SymbolPoly(1, 1, 1, {(0, 0, 0): Coefficient.constant(c, 2)})
    lhs = poisson_bracket(p, q.mul(scale))
    rhs = poisson_bracket(p, q)
    pt = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    assert eval_symbol(lhs, pt) == pytest.approx(c * eval_symbol(rhs, pt), rel=1e-12, abs=1e-12)
    # additivity through a merged table
    table = dict(poisson_bracket(p, q).table)
    for idx, coeff in poisson_bracket(p, r).table.items():
        table[idx] = table[idx].add(coeff) if idx in table else coeff
    merged = SymbolPoly(4, 1, 1, table)
    qr_table = dict(q.table)
    for idx, coeff in r.table.items():
        qr_table[idx] = qr_table[idx].add(coeff) if idx in qr_table else coeff
    qr = SymbolPoly(max(q.order, r.order), 1, 1, qr_table)
    assert eval_symbol(poisson_bracket(p, qr), pt) == pytest.approx(
        eval_symbol(merged, pt), rel=1e-12, abs=1e-12)


def test_conjugated_bracket_against_finite_difference_oracle():
    # variable-coefficient symbol through the whole pipeline (weight shift,
    # conjugate, bracket), checked against central differences of direct
    # evaluations; the oracle never touches the symbolic derivative tables
    from uclab.pseudoconvex import ConvexifiedWeight

    def a_val(x):
        return 1.0 + 0.3 * np.sin(x[1])

    def a_grad(x):
        return np.array([0.0, 0.3 * np.cos(x[1])])

    def a_hess(x):
        return np.array([[0.0, 0.0], [0.0, -0.3 * np.sin(x[1])]])

    p = SymbolPoly(2, 1, 1, {
        (2, 0, 0): Coefficient.constant(1.0, 2),
        (0, 2, 0): Coefficient(lambda x: -a_val(x), lambda x: -a_grad(x), lambda x: -a_hess(x)),
    })
    w = ConvexifiedWeight(2.0, [0.1, -0.2], [0.4, 1.1], [[0.3, 0.1], [0.1, -0.2]])
    tau = 0.7
    pw = conjugate_weight(p, w, tau)
    B = poisson_bracket(pw.conjugate(), pw)

    def raw_pw(x, xi):
        z = np.asarray(xi, dtype=complex) + 1j * tau * w.grad(x)
        return z[0] ** 2 - a_val(x) * z[1] ** 2

    def raw_pbar(x, xi):
        return np.conj(raw_pw(np.asarray(x, dtype=float), np.conj(np.asarray(xi, dtype=complex))))

    def fd_bracket(x, xi, h=1e-6):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=complex)
        total = 0.0 + 0.0j
        for k in range(2):
            dx = np.zeros(2)
            dx[k] = h
            dxi = np.zeros(2, dtype=complex)
            dxi[k] = h
            total += (
                (raw_pbar(x, xi + dxi) - raw_pbar(x, xi - dxi)) * (raw_pw(x + dx, xi) - raw_pw(x - dx, xi))
                - (raw_pbar(x + dx, xi) - raw_pbar(x - dx, xi)) * (raw_pw(x, xi + dxi) - raw_pw(x, xi - dxi))
            ) / (4 * h * h)
        return total

    rng = np.random.default_rng(0)
    for _ in range(8):
        x = rng.standard_normal(2)
        xi = rng.standard_normal(2)
        sym = eval_symbol(B, PhasePoint(x, xi, tau))
        fd = fd_bracket(x, xi)
        assert abs(sym - fd) <= 1e-8 * max(1.0, abs(fd))
