"""Acceptance gate: every criterion runs standalone at its stated tolerance.

Each test prints one verdict line (criterion, measured quantity, elapsed
seconds) so a plain ``pytest -s tests/test_acceptance.py`` doubles as the
sign-off run.
"""

import math
import time

import numpy as np

from uclab.seeding import rng_for


def _verdict(num, name, ok, detail, t0, budget):
    elapsed = time.time() - t0
    line = f"ACCEPTANCE {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail} ({elapsed:.1f}s, budget {budget}s)"
    print(line)
    assert ok, line
    assert elapsed < budget, f"criterion {num} exceeded its runtime budget: {elapsed:.1f}s"


def test_criterion_1_kernel_identities():
    from uclab.quadrant import kernel_identities_check

    t0 = time.time()
    rng = rng_for(1, 0)
    worst = 0.0
    for _ in range(100):
        x, y = rng.uniform(0.1, 10.0, 2)
        _, _, errs = kernel_identities_check(float(x), float(y), tol=1e-8)
        worst = max(worst, *errs)
    _verdict(1, "kernel moment identities", worst <= 1e-8,
             f"max relative error {worst:.2e}", t0, 10)


def test_criterion_2_harmonicity_order():
    from uclab.quadrant import BoundaryTrace, CallableTrace, green_extend

    t0 = time.time()
    rng = rng_for(2, 0)

    def random_trace(k):
        # curvature bounded away from zero so the five-point residual sits
        # well above the quadrature noise floor
        a, b = rng.uniform(0.5, 1.0, 2)
        w1, w2 = rng.uniform(0.9, 1.6, 2)
        Yc = 6.0

        def fn(e, a=a, b=b, w1=w1, w2=w2):
            e = np.minimum(e, Yc)
            return a * np.sin(w1 * e) / w1 + b * np.cos(w2 * e)

        return CallableTrace(fn, a + b * w2, plateau_from=Yc)

    worst_order = math.inf
    for trial in range(3):
        tr = BoundaryTrace(random_trace(2 * trial), random_trace(2 * trial + 1))
        # nearer the edges the extension's fourth derivative stays well above
        # the quadrature noise floor of the residual measurement
        for (x0, y0) in ((0.8, 0.35), (0.5, 0.3)):
            laps = []
            for h in (1 / 64, 1 / 128, 1 / 256):
                pts = np.array([[x0, y0], [x0 + h, y0], [x0 - h, y0],
                                [x0, y0 + h], [x0, y0 - h]])
                v = green_extend(tr, pts, method="quad")
                laps.append(abs((v[1] + v[2] + v[3] + v[4] - 4 * v[0]) / h**2))
            orders = [math.log2(laps[i] / laps[i + 1]) for i in range(2)]
            worst_order = min(worst_order, *orders)
    _verdict(2, "five-point residual order of the harmonic extension",
             worst_order >= 1.8, f"observed order {worst_order:.3f}", t0, 60)


def test_criterion_3_barrier_certification():
    from uclab.quadrant import BarrierParams, barrier_certify

    t0 = time.time()
    R, delta, kappa, eps, c1 = 1.0, 0.1, 1.0, 1.0, 1.0
    probe = BarrierParams(R, delta, kappa, eps, c1, beta=1e-12)
    d = probe.d0 / 2
    probe2 = BarrierParams(R, delta, kappa, eps, c1, beta=1e-12, d=d)
    params = BarrierParams(R, delta, kappa, eps, c1, beta=probe2.beta0 / 2, d=d)
    rep = barrier_certify(params, h=params.d / 256)
    _verdict(3, "barrier margin on the annulus", rep.passed and rep.margin >= 0.0,
             f"margin {rep.margin:.3e} over {rep.samples} samples "
             f"(d0={params.d0:.3e}, beta0={params.beta0:.3e})", t0, 120)


def test_criterion_4_mollifier_decay_suite():
    from uclab.mollify import GridFunction, measure_decay

    t0 = time.time()
    oks, details = [], []
    for d in (0.5, 1.0, 2.0):
        box = [(-4.0 * d - 2.0, 5.0 * d + 4.0)]
        n = 2048
        f1 = GridFunction.from_callable(box, (n,), lambda x: ((x >= 0) & (x <= d)).astype(float), [0])
        f2 = GridFunction.from_callable(box, (n,), lambda x: ((x >= 2 * d) & (x <= 3 * d)).astype(float), [0])
        sweep = (16.0 / d**2) * np.array([1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
        rep = measure_decay("disjoint_support", {"f1": f1, "f2": f2, "d": d}, sweep)
        oks.append(rep.passed and abs(rep.slope - (-d * d / 4)) <= 0.2 * d * d / 4)
        details.append(f"d={d}: slope {rep.slope:.4f} vs {-d*d/4:.4f}")

    rep_w = measure_decay("weighted_cutoff",
                          {"D": 0.0, "taus": [5.0, 10.0, 20.0, 40.0], "factor": 1.1},
                          [50.0, 100.0, 200.0, 400.0])
    oks.append(rep_w.passed)
    details.append(f"cutoff C={rep_w.extras['fitted_C']:.3g}")

    grid = GridFunction.from_callable([(-8.0, 8.0)], (2048,), lambda x: np.exp(-x * x), [0])
    rep_l = measure_decay("low_high_split",
                          {"grid": grid, "eps": 0.5, "tau": 4.0, "mus": [16.0, 32.0, 64.0]},
                          [64.0, 128.0, 256.0, 512.0])
    oks.append(rep_l.passed and rep_l.extras["worst_excess"] <= 0.0)
    details.append(f"split excess {rep_l.extras['worst_excess']:.2e}")
    _verdict(4, "mollifier decay suite", all(oks), "; ".join(details), t0, 120)


def test_criterion_5_pseudoconvexity():
    from uclab.pseudoconvex import (GridSpec, OrientedSurface,
                                    check_function_pseudoconvexity,
                                    check_surface_pseudoconvexity, convexify,
                                    find_convexification_A)
    from uclab.symbols import SymbolPoly

    t0 = time.time()
    p = SymbolPoly.wave(1, 2)
    grid = GridSpec(directions=4096)
    rng = rng_for(5, 0)
    ok = True
    details = []
    planes = 0
    while planes < 5:
        nu = rng.standard_normal(3)
        nu /= np.linalg.norm(nu)
        if abs(nu[0] ** 2 - nu[1] ** 2 - nu[2] ** 2) < 0.1:
            continue
        planes += 1
        surf = OrientedSurface.plane(nu, [0.0, 0.0, 0.0])
        rep = check_surface_pseudoconvexity(p, surf, grid)
        ok &= rep.passes(0.0)
        A = find_convexification_A(p, surf, grid, (1.0, 4096.0), margin=1e-6)
        post = check_function_pseudoconvexity(p, convexify(surf, A), grid)
        ok &= math.isfinite(A) and post.passes(1e-6)
        details.append(f"A={A:g}")
    _verdict(5, "wave pseudoconvexity on random noncharacteristic planes", ok,
             ", ".join(details), t0, 60)


def test_criterion_6_foliation_engine():
    from uclab.foliation import (BoundaryCollar, GraphFoliation, IntervalDomain,
                                 build_dependence_graph, check_cover_inclusions,
                                 check_noncharacteristic, extract_cover,
                                 propagate_dependence, replay, wave_foliation)

    t0 = time.time()
    fol = wave_foliation(1.0, 1.2, b=0.15, alpha=1.1)
    flat_metric = lambda w, xn: np.eye(np.atleast_1d(w).size + 1)
    rep = check_noncharacteristic(fol, flat_metric, "wave", base_n=400)
    closed = 1.0 - (1.1 / 1.2) ** 2
    ok1 = rep.min_slack >= 0.1 and abs(rep.min_slack - closed) <= 0.02 * closed

    dom = IntervalDomain(0.0, 1.0)

    def flatG(xp, e):
        xp = np.atleast_2d(xp)
        outside = np.maximum.reduce([np.zeros(len(xp)), xp[:, 0] - 1.0, -xp[:, 0]])
        return e - 4.0 * outside

    # the pinch slope lives outside the swept tube; the height function is
    # 1-Lipschitz where the leaves live, which the constructor accepts as an
    # explicit bound
    flat = GraphFoliation(dom, flatG, boundary_vanishing=False, grad_norm=1.0)
    rng = rng_for(6, 0)
    ok2 = True
    for _ in range(20):
        r = float(rng.uniform(0.45, 0.8))
        R = float(rng.uniform(0.08, 0.12))
        rho = float(rng.uniform(0.3, 0.5))
        cover = extract_cover(flat, lambda x, e, r=r, R=R, rho=rho: (r, R, rho),
                              eps0=0.06, R_cap=4 * R, leaf_n=80, n_candidates=24)
        ok2 &= cover.coverage_ok() and cover.ordering_ok()

    cover = extract_cover(flat, lambda x, e: (0.75, 0.12, 0.42),
                          eps0=0.06, R_cap=0.48, leaf_n=80, n_candidates=24)
    omega1 = BoundaryCollar(dom, width=0.55, height=0.055)
    incl = check_cover_inclusions(cover, omega1, n_samples=2000, seed=6)
    graph = build_dependence_graph(cover, omega1,
                                   BoundaryCollar(dom, 0.65, 0.12),
                                   BoundaryCollar(dom, 0.8, 0.2), seed=6)
    sched = propagate_dependence(graph, cover, ("U0", "V0"))
    replays = replay(sched, graph)
    incl_ok = all(r["margin"] > 0 for r in incl)
    ok3 = len(cover.leaves) == 3 and replays and incl_ok
    _verdict(6, "foliation engine",
             ok1 and ok2 and ok3,
             f"slack {rep.min_slack:.4f} (closed {closed:.4f}); 20 oracles ok={ok2}; "
             f"{len(cover.leaves)}-leaf schedule of {len(sched.steps)} steps "
             f"replays={replays} inclusions={incl_ok}",
             t0, 60)


def test_criterion_7_conservation_and_closed_forms():
    from uclab.pdelab import (ControlProblem, IntervalGeometry, RectangleGeometry,
                              StatePair, observe, solve)

    t0 = time.time()
    geo = IntervalGeometry(1.0, 64)
    pb = ControlProblem(geo, 2.5, ("boundary", 0))
    rng = rng_for(7, 0)
    data = StatePair(rng.standard_normal(64), rng.standard_normal(64))
    tr = solve(pb, data, "wave")

    def energy(t):
        c, cp = tr(t)
        return float(np.sum(geo.lam * np.abs(c) ** 2) + np.sum(np.abs(cp) ** 2))

    e0 = energy(0.0)
    drift_w = max(abs(energy(t) - e0) / e0 for t in np.linspace(0, pb.T, 41))
    trs = solve(pb, data, "schrodinger")
    m0 = float(np.linalg.norm(trs(0.0)))
    drift_s = max(abs(float(np.linalg.norm(trs(t))) - m0) / m0
                  for t in np.linspace(0, pb.T, 21))

    rect = RectangleGeometry(math.pi, math.pi, 20, 20)
    pbr = ControlProblem(rect, 2.5, ("boundary", "x0"))
    worst_q = 0.0
    for m in (4, 8, 16):
        d = StatePair.from_mode(rect, rect.mode_index(1, m))
        q = observe(solve(pbr, d, "wave"), pbr) ** 2 / d.norm_energy(rect) ** 2
        want = pbr.T / (math.pi * (1 + m * m))
        worst_q = max(worst_q, abs(q / want - 1.0))
    ok = drift_w < 1e-10 and drift_s < 1e-10 and worst_q <= 0.05
    _verdict(7, "conservation and side-observation closed forms", ok,
             f"energy drift {drift_w:.1e}, mass drift {drift_s:.1e}, "
             f"worst quotient error {worst_q:.3%}", t0, 120)


def test_criterion_8_filtered_stability():
    from uclab.pdelab import ControlProblem, IntervalGeometry, RectangleGeometry, filtered_stability

    t0 = time.time()
    rect = RectangleGeometry(math.pi, math.pi, 9, 9)
    pbr = ControlProblem(rect, 2.5, ("boundary", "x0"))
    mus = np.unique(np.round(rect.omega, 9))[:40]
    rep = filtered_stability(pbr, mus)
    ok_bound, worst = rep.bound_check(pbr, slack=1.05)

    geo = IntervalGeometry(1.0, 48)
    pbi = ControlProblem(geo, 2.5, ("boundary", 0))
    rep_i = filtered_stability(pbi, geo.omega[:14])
    ok = ok_bound and rep_i.kappa_hat <= 0.05
    _verdict(8, "filtered stability envelopes", ok,
             f"rectangle envelope ratio {worst:.3f} (kappa={rep.kappa_hat:.3f}); "
             f"interval kappa {rep_i.kappa_hat:.4f}", t0, 600)


def test_criterion_9_control_cost():
    from uclab.pdelab import (ControlProblem, IntervalGeometry, RectangleGeometry,
                              StatePair, hum_control)

    t0 = time.time()
    eps_list = (0.3, 0.1, 0.03, 0.01)
    geo = IntervalGeometry(1.0, 48)
    pbi = ControlProblem(geo, 2.5, ("boundary", 0))
    di = StatePair.from_mode(geo, 2)
    int_costs = []
    every_met = True
    for e in eps_list:
        res = hum_control(pbi, di, e)
        every_met &= res.met
        int_costs.append(res.cost)
    plateau = int_costs[-1] / int_costs[0]

    rect = RectangleGeometry(math.pi, math.pi, 6, 10)
    pbr = ControlProblem(rect, 2.5, ("boundary", "x0"))
    dr = StatePair.from_mode(rect, rect.mode_index(1, 8))
    rect_costs = []
    for e in eps_list:
        res = hum_control(pbr, dr, e)
        every_met &= res.met
        rect_costs.append(res.cost)
    slope = float(np.polyfit([1 / e for e in eps_list], np.log(rect_costs), 1)[0])
    mono = bool(np.all(np.diff(rect_costs) >= -1e-12))
    ok = every_met and plateau < 3.0 and mono and slope >= 0.0
    _verdict(9, "approximate control cost", ok,
             f"every deviation target met={every_met}; interval plateau ratio "
             f"{plateau:.2f}; rectangle slope {slope:.3f} monotone={mono}", t0, 600)


def test_criterion_10_log_stability_constants():
    from uclab.pdelab import log_stability_constants

    t0 = time.time()
    lsc = log_stability_constants(1.0, 1.0, 1.0, 1.0)
    xs = np.exp(np.linspace(math.log(1e-10), 0.0, 400001))
    vals = np.sqrt(xs * (1 + xs)) * (np.log(1.0 / xs + 1.0) / 2.0)
    oracle = 2.0 * max(float(vals.max()) + 1.0, 1.0)
    rel = abs(lsc.D1 - oracle) / oracle

    rng = rng_for(10, 0)
    mu_grid = np.geomspace(1.0, 500.0, 600)
    viol = 0
    for _ in range(10000):
        c = float(rng.uniform(0.1, 10.0))
        b = float(rng.uniform(1e-9, 1.0)) * c
        mu_x = max(1.0, math.log(c / b + 1.0) / 2.0)
        grid = np.append(mu_grid, mu_x)
        amax = min(float(np.min(np.exp(grid) * b + c / grid)), c)
        a = float(rng.uniform(0.0, 1.0)) * amax
        if a <= 0:
            continue
        r1, r2 = lsc.apply(a, b, c)
        viol += (a > r1 * (1 + 1e-12)) + (c > r2 * (1 + 1e-12))
    ok = rel <= 0.02 and viol == 0
    _verdict(10, "logarithmic stability constants", ok,
             f"D1={lsc.D1:.4f} (oracle {oracle:.4f}, rel {rel:.1e}); "
             f"violations {viol}/10000", t0, 10)
