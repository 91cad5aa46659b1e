import math

import numpy as np
import pytest

from uclab.foliation import (
    BoundaryCollar,
    CoverError,
    GraphFoliation,
    IntervalDomain,
    MissingFactError,
    build_dependence_graph,
    check_cover_inclusions,
    check_noncharacteristic,
    extract_cover,
    propagate_dependence,
    ramp_profile,
    replay,
    wave_foliation,
)

FLAT_METRIC = lambda w, xn: np.eye(np.atleast_1d(w).size + 1)


def flat_foliation(M=4.0):
    dom = IntervalDomain(0.0, 1.0)

    def G(xp, e):
        xp = np.atleast_2d(xp)
        outside = np.maximum.reduce([np.zeros(len(xp)), xp[:, 0] - 1.0, -xp[:, 0]])
        return e - M * outside

    return dom, GraphFoliation(dom, G, boundary_vanishing=False)


def cos_profile():
    psi = lambda s: np.cos(np.pi * np.asarray(s) / 2.0)
    dpsi = lambda s: -np.pi / 2.0 * np.sin(np.pi * np.asarray(s) / 2.0)
    return psi, dpsi


# -- profiles and foliation construction --------------------------------------


def test_ramp_profile_constraints():
    for alpha in (1.05, 1.1, 1.6):
        psi, dpsi = ramp_profile(alpha)
        s = np.linspace(-1, 1, 4001)
        assert psi(np.array([0.0]))[0] == pytest.approx(1.0)
        assert abs(psi(np.array([1.0]))[0]) < 1e-12
        assert np.abs(dpsi(s)).max() <= alpha + 1e-12
        assert psi(s).min() >= -1e-12
        assert np.abs(psi(s) - psi(-s)).max() < 1e-12


def test_cos_profile_admissibility():
    # slope pi/2: admissible only when alpha >= pi/2 (and t0/l0 above that)
    with pytest.raises(ValueError):
        wave_foliation(1.0, 1.2, 0.2, 1.1, profile=cos_profile())
    fol = wave_foliation(1.0, 1.7, 0.2, 1.6, profile=cos_profile())
    assert fol.alpha == 1.6


def test_apex_and_rim_values():
    fol = wave_foliation(1.0, 1.2, 0.15, 1.1)
    assert fol.G(np.array([[0.0, 0.0]]), 1.0)[0] == pytest.approx(1.0)
    assert abs(fol.G(np.array([[1.2, 0.0]]), 1.0)[0]) < 1e-12
    assert abs(fol.G(np.array([[0.0, 0.15]]), 1.0)[0]) < 1e-12


def test_alpha_range_validation():
    with pytest.raises(ValueError):
        wave_foliation(1.0, 1.2, 0.1, 1.3)  # alpha >= t0/l0
    with pytest.raises(ValueError):
        wave_foliation(1.0, 1.2, 0.1, 0.9)  # alpha <= 1


# -- leaf noncharacteristicity -------------------------------------------------


def test_wave_slack_closed_form():
    fol = wave_foliation(1.0, 1.2, 0.15, 1.1)
    rep = check_noncharacteristic(fol, FLAT_METRIC, "wave", base_n=400)
    closed = 1.0 - (1.1 / 1.2) ** 2
    assert rep.min_slack >= 0.1
    assert rep.min_slack == pytest.approx(closed, rel=0.02)


def test_dispersive_sign():
    fol = wave_foliation(1.0, 1.2, 0.15, 1.1)
    rep = check_noncharacteristic(fol, FLAT_METRIC, "schrodinger", base_n=200)
    assert rep.passed  # the symbol stays below -1/2 with slack 1/2 at the axis


def test_flat_leaf_is_noncharacteristic():
    # purely flat graphs: the conormal is minus the vertical direction and
    # the wave symbol evaluates to one
    dom = IntervalDomain(0.0, 1.0)
    fol = GraphFoliation(dom, lambda xp, e: np.full(len(np.atleast_2d(xp)), e),
                         boundary_vanishing=False)
    rep = check_noncharacteristic(fol, FLAT_METRIC, "wave", base_n=100)
    assert rep.min_slack == pytest.approx(1.0, abs=1e-6)


def test_transverse_width_halving_failure():
    # a metric that degenerates in the transverse direction defeats every b
    fol = wave_foliation(1.0, 1.2, 0.2, 1.1)
    bad = lambda w, xn: np.diag([1.0, -0.2])  # not positive definite
    with pytest.raises(CoverError):
        check_noncharacteristic(fol, bad, "wave", base_n=60, b_min=0.04)


# -- covers --------------------------------------------------------------------


def test_cover_flat_foliation_counts():
    _, fol = flat_foliation()
    r = 0.3
    oracle = lambda x, e: (r, 0.08, 0.3)
    cover = extract_cover(fol, oracle, eps0=0.08, R_cap=0.32, leaf_n=120, n_candidates=32)
    assert cover.coverage_ok()
    assert cover.ordering_ok()
    for leaf in cover.leaves:
        assert leaf.coverage_margin > 0
        # interval of length 1 covered by radius-r balls centred on the leaf
        assert len(leaf.centers) <= math.ceil(1.0 / r) + 1


def test_cover_ordering_example_intervals():
    # centre list {0.15, 0.4, 0.7, 0.95} with half-width 0.2 and start 0.05:
    # the successive lower ends stay below the running upper reach
    eps = [0.15, 0.4, 0.7, 0.95]
    g = 0.2
    lows = [e - g for e in eps]
    highs = [e + g for e in eps]
    assert lows == sorted(lows)
    for k in range(len(eps) - 1):
        assert lows[k + 1] < max(highs[: k + 1])
    assert lows[0] < 0.05


def test_cover_single_leaf_when_tube_is_wide():
    # huge shell margin on a purely flat sweep: one leaf suffices
    dom = IntervalDomain(0.0, 1.0)
    fol = GraphFoliation(dom, lambda xp, e: np.full(len(np.atleast_2d(xp)), e),
                         boundary_vanishing=False)
    oracle = lambda x, e: (2.4, 0.3, 1.3)
    cover = extract_cover(fol, oracle, eps0=0.2, R_cap=1.2, leaf_n=60, n_candidates=16)
    assert len(cover.leaves) == 1
    assert cover.coverage_ok()


def test_cover_gap_failure():
    _, fol = flat_foliation()
    oracle = lambda x, e: (0.4, 0.08, 0.02)  # tiny shell: tubes too thin
    with pytest.raises(CoverError):
        extract_cover(fol, oracle, eps0=0.01, R_cap=0.32, leaf_n=60, n_candidates=8)


def test_cover_deterministic():
    _, fol = flat_foliation()
    oracle = lambda x, e: (0.6, 0.1, 0.35)
    c1 = extract_cover(fol, oracle, eps0=0.06, R_cap=0.4, leaf_n=80, n_candidates=24)
    c2 = extract_cover(fol, oracle, eps0=0.06, R_cap=0.4, leaf_n=80, n_candidates=24)
    assert c1.eps_list == c2.eps_list
    for a, b in zip(c1.leaves, c2.leaves):
        assert np.array_equal(a.centers, b.centers)


def test_tube_height_inequality():
    dom, fol = flat_foliation()
    oracle = lambda x, e: (0.6, 0.1, 0.35)
    cover = extract_cover(fol, oracle, eps0=0.06, R_cap=0.4, leaf_n=80, n_candidates=24)
    xp = dom.sample(64)
    for lf in cover.leaves:
        lhs = fol.G(xp, lf.eps - lf.g)
        rhs = fol.G(xp, lf.eps) - lf.rho_leaf
        assert np.all(lhs >= rhs - 1e-12)


def test_boundary_avoidance_filter():
    fol = wave_foliation(1.0, 1.2, 0.15, 1.1)
    oracle = lambda x, e: (0.35, 0.05, 0.15)
    from uclab.foliation import _cover_leaf

    leaf = _cover_leaf(fol, 0.35, oracle, 0.2, 200, boundary_clear=True)
    assert np.all(leaf.centers[:, -1] >= 4 * leaf.R - 1e-12)


# -- inclusions and schedules ---------------------------------------------------


def three_leaf_setup():
    dom, fol = flat_foliation()
    oracle = lambda x, e: (0.75, 0.12, 0.42)
    cover = extract_cover(fol, oracle, eps0=0.06, R_cap=0.48, leaf_n=80, n_candidates=24)
    omega1 = BoundaryCollar(dom, width=0.55, height=0.055)
    mid = BoundaryCollar(dom, width=0.65, height=0.12)
    hat = BoundaryCollar(dom, width=0.8, height=0.2)
    return dom, fol, cover, omega1, mid, hat


def test_cover_inclusions_positive_margins():
    _, _, cover, omega1, _, _ = three_leaf_setup()
    res = check_cover_inclusions(cover, omega1, n_samples=2500, seed=0)
    assert len(res) == len(cover.leaves)
    assert all(r["margin"] > 0 for r in res)
    assert all(r["witness"] is None for r in res)


def test_cover_inclusions_violation_witness():
    # without the outside-the-base pinch the level pieces spill horizontally
    # beyond a narrow collar
    dom = IntervalDomain(0.0, 1.0)
    fol = GraphFoliation(dom, lambda xp, e: np.full(len(np.atleast_2d(xp)), e),
                         boundary_vanishing=False)
    oracle = lambda x, e: (0.75, 0.12, 0.42)
    cover = extract_cover(fol, oracle, eps0=0.06, R_cap=0.48, leaf_n=80, n_candidates=24)
    tiny = BoundaryCollar(dom, width=0.05, height=0.05)
    res = check_cover_inclusions(cover, tiny, n_samples=1500, seed=0)
    assert any(r["margin"] < 0 and r["witness"] is not None for r in res)


def test_schedule_replays():
    _, _, cover, omega1, mid, hat = three_leaf_setup()
    graph = build_dependence_graph(cover, omega1, mid, hat)
    sched = propagate_dependence(graph, cover, ("U0", "V0"))
    assert sched.target.rhs == ("V0",)
    assert replay(sched, graph)
    rules = {s.rule for s in sched.steps}
    assert rules <= {"local-estimate", "inclusion", "union", "product",
                     "strong-inclusion", "transitivity"}


def test_schedule_missing_base_fact():
    _, _, cover, omega1, mid, hat = three_leaf_setup()
    graph = build_dependence_graph(cover, omega1, mid, hat)
    graph.base_facts = graph.base_facts[1:]
    with pytest.raises(MissingFactError) as err:
        propagate_dependence(graph, cover, ("U0", "V0"))
    assert "U[0,1]" in str(err.value)


def test_replay_rejects_tampered_schedule():
    _, _, cover, omega1, mid, hat = three_leaf_setup()
    graph = build_dependence_graph(cover, omega1, mid, hat)
    sched = propagate_dependence(graph, cover, ("U0", "V0"))
    from uclab.foliation import Fact

    sched.steps[-1].conclusion = Fact(("E[999]",), ("V0",), True)
    sched.target = sched.steps[-1].conclusion
    assert not replay(sched, graph)


def test_inclusion_single_leaf_uses_collar_alone():
    # first leaf pieces must land in the collar with nothing else
    _, _, cover, omega1, _, _ = three_leaf_setup()
    res = check_cover_inclusions(cover, omega1, n_samples=2000, seed=1)
    assert res[0]["k"] == 0
    assert res[0]["margin"] > 0


def test_graph_rejects_false_inclusion():
    _, _, cover, omega1, mid, hat = three_leaf_setup()
    graph = build_dependence_graph(cover, omega1, mid, hat)
    with pytest.raises(CoverError):
        graph.add_inclusion("U[0,1]", "omega[0,1]")  # a 2r-ball never fits in the r-ball


def test_schedule_json_roundtrip_and_tamper():
    import json

    from uclab.foliation import replay_json, schedule_to_json

    _, _, cover, omega1, mid, hat = three_leaf_setup()
    graph = build_dependence_graph(cover, omega1, mid, hat)
    sched = propagate_dependence(graph, cover, ("U0", "V0"))
    doc = json.loads(json.dumps(schedule_to_json(sched, graph)))
    assert replay_json(doc)
    bad = json.loads(json.dumps(doc))
    bad["steps"][-1]["conclusion"]["lhs"] = ["E[999]"]
    bad["target"]["lhs"] = ["E[999]"]
    assert not replay_json(bad)
    bad2 = json.loads(json.dumps(doc))
    bad2["base_facts"] = bad2["base_facts"][1:]
    assert not replay_json(bad2)


def test_leaf_tube_inside_shell_with_margin():
    # the sampled tube of each selected leaf sits inside the union of its
    # balls intersected with the sub-level shell, with positive margin
    dom, fol, cover, _, _, _ = (*three_leaf_setup(),)[:6]
    from uclab.foliation import Ball, LevelUpper, RegionIntersection, RegionUnion

    for lf in cover.leaves:
        balls = RegionUnion([Ball(c, r) for c, r in zip(lf.centers, lf.r)])
        xp = dom.sample(60)
        for frac in (-0.9, 0.0, 0.9):
            eps_prime = lf.eps + frac * lf.g
            pts = np.column_stack([xp, fol.G(xp, eps_prime)])
            assert balls.margin(pts).min() > 0
            phi = fol.phi(pts, lf.eps)
            assert float((lf.rho_leaf - phi).min()) > 0
