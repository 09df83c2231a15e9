from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rational_vectors
from carnot_kit.catalog import make_abelian, make_g8, make_heisenberg, make_heisxR
from carnot_kit.errors import CarnotError, DimensionMismatch
from carnot_kit.group import GroupPoint, bch_product, dilate, left_invariant_field
from carnot_kit.metrics import (
    Splitting,
    Step2GraphSetup,
    build_D_phi,
    calibrate_triangle_constant,
    cc_upper_bound,
    cone_membership,
    graph_distance_experiment,
    graph_lift_length,
    holonomy_check,
    horizontal_path,
    integrate_ensemble,
    integrate_horizontal,
    intrinsic_lipschitz_check,
    length_comparison_experiment,
    path_endpoint,
    phi_length,
    phi_length_coordinates,
    quasi_distance,
    quasi_norm,
)
from carnot_kit.symbolic import MultiPoly


def P(alg, *coords):
    return GroupPoint(alg, coords)


def random_point(alg, rng, scale=8):
    return GroupPoint(alg, tuple(Fraction(int(v), 4) for v in rng.integers(-scale, scale + 1, alg.n)))


def linear_phi(dim_W, coeffs):
    w = MultiPoly.variables(dim_W)
    return sum((w[i] * c for i, c in enumerate(coeffs)), MultiPoly.zero(dim_W))


# quasi-norm and quasi-distance


def test_quasi_norm_examples(h1, g8):
    assert quasi_norm(GroupPoint.identity(g8)) == 0
    assert quasi_norm(P(g8, 1, 0, 0, 0, 0, 0, 0, 0)) == 1
    assert quasi_norm(P(h1, 0, 0, 1)) == 1
    assert quasi_norm(P(h1, 0, 0, 4)) == pytest.approx(2)
    assert quasi_norm(P(h1, 3, 4, 0)) == pytest.approx(5)
    assert quasi_distance(P(h1, 0, 0, 0), P(h1, 0, 0, 1)) == 1
    with pytest.raises(ValueError):
        quasi_norm([1, 2, 3])


@pytest.mark.parametrize("lam", [2, Fraction(1, 3), Fraction(7, 2)])
@given(rational_vectors(8))
def test_quasi_norm_homogeneous(lam, x):
    p = GroupPoint(make_g8(), x)
    assert quasi_norm(dilate(p, lam)) == pytest.approx(float(lam) * quasi_norm(p), rel=1e-12, abs=1e-300)


@given(rational_vectors(8), rational_vectors(8), rational_vectors(8))
def test_quasi_distance_left_invariant(h, p, q):
    g = make_g8()
    h, p, q = (GroupPoint(g, v) for v in (h, p, q))
    assert quasi_distance(h * p, h * q) == quasi_distance(p, q)
    assert quasi_distance(p, p) == 0


def test_calibration_constant_is_reported(h2):
    rep = calibrate_triangle_constant(h2, samples=2000, seed=1)
    assert 1.0 <= rep.K < 2.0
    assert rep.to_json()["samples"] == 2000


def test_triangle_inequality_within_constant(g8):
    K = calibrate_triangle_constant(g8, samples=2000).K
    rng = np.random.default_rng(5)
    for _ in range(50):
        p, q, r = (random_point(g8, rng) for _ in range(3))
        assert quasi_distance(p, r) <= K * (quasi_distance(p, q) + quasi_distance(q, r)) + 1e-12


# horizontal paths


def test_cc_straight_segment(h1):
    e = GroupPoint.identity(h1)
    assert cc_upper_bound(e, P(h1, 1, 0, 0)) <= 1 + 1e-6
    assert cc_upper_bound(e, e) == 0


def test_cc_vertical_target_near_optimal(h1):
    # the optimal loop enclosing area 1 has length 2 sqrt(pi)
    e = GroupPoint.identity(h1)
    values = [cc_upper_bound(e, P(h1, 0, 0, 1), b) for b in range(4)]
    assert values == sorted(values, reverse=True)
    assert 2 * np.sqrt(np.pi) - 1e-6 <= values[-1] < 2 * np.sqrt(np.pi) * 1.02


def test_horizontal_path_reaches_target(g8):
    rng = np.random.default_rng(2)
    for _ in range(3):
        p, q = random_point(g8, rng), random_point(g8, rng)
        path = horizontal_path(p, q, budget=1)
        end = path_endpoint(g8, path.segments, p.as_float())
        assert np.allclose(end, q.as_float(), atol=1e-7)
        assert path.length >= quasi_distance(p, q) - 1e-9


@pytest.mark.parametrize("alg", [make_heisenberg(1), make_heisenberg(2)], ids=["heis1", "heis2"])
def test_cc_monotone_in_budget(alg):
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, q = random_point(alg, rng), random_point(alg, rng)
        b1, b2 = cc_upper_bound(p, q, 1), cc_upper_bound(p, q, 2)
        assert b2 <= b1 + 1e-12


@pytest.mark.parametrize("lam", [2, 4])
def test_cc_homogeneous(g8, lam):
    rng = np.random.default_rng(9)
    e = GroupPoint.identity(g8)
    for _ in range(3):
        x = random_point(g8, rng)
        ratio = cc_upper_bound(e, dilate(x, lam), 1) / cc_upper_bound(e, x, 1)
        assert abs(ratio / lam - 1) < 0.05


def test_cc_rejects_mixed_groups(h1, h2):
    with pytest.raises(DimensionMismatch):
        cc_upper_bound(GroupPoint.identity(h1), GroupPoint.identity(h2))


# cones


def test_cone_examples(h2):
    rng = np.random.default_rng(4)
    sp = Splitting.first_axis(h2)
    for _ in range(10):
        p = random_point(h2, rng)
        assert cone_membership(p, p, 0, sp)
        assert cone_membership(p, p * P(h2, Fraction(3, 2), 0, 0, 0, 0), Fraction(1, 10), sp)
        w = P(h2, 0, *[Fraction(int(v), 3) for v in rng.integers(-5, 6, 4)])
        if any(w.coords):
            assert not cone_membership(p, p * w, 1000, sp)


def test_splitting_projection_recovers_point(h2):
    sp = Splitting(h2, (1, 1, 0, 0), (1, 0, 0, 0))
    s = P(h2, 2, -1, 3, Fraction(1, 2), 5)
    sw, sh = sp.project(s)
    assert bch_product(sw, sh) == s
    assert sum(a * x for a, x in zip(sp.covector, sw.coords)) == 0
    with pytest.raises(ValueError):
        Splitting(h2, (1, 0, 0, 0), (0, 1, 0, 0))


# graphs over W


def test_setup_rejects_non_step_two(g8):
    with pytest.raises(ValueError):
        Step2GraphSetup(g8)
    with pytest.raises(DimensionMismatch):
        Step2GraphSetup(make_heisenberg(1), MultiPoly.zero(3))


def test_lipschitz_examples(h2):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-1, 1, size=(60, 4))
    flat = Step2GraphSetup(h2)
    for L in (1e-3, 1.0, 10.0):
        assert intrinsic_lipschitz_check(flat, samples, L).ok
    lin = Step2GraphSetup(h2, linear_phi(4, [Fraction(1, 2), Fraction(1, 3), Fraction(-1, 4)]))
    rep = intrinsic_lipschitz_check(lin, samples, 1.0)
    assert rep.ok and rep.empirical_constant < 1.0
    assert not intrinsic_lipschitz_check(lin, samples, 0.5 * rep.empirical_constant).ok
    w = MultiPoly.variables(4)
    steep = Step2GraphSetup(h2, (w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3]) * 50)
    bad = intrinsic_lipschitz_check(steep, samples, 0.1)
    assert not bad.ok and bad.n_violations >= len(bad.violations) > 0
    with pytest.raises(ValueError):
        intrinsic_lipschitz_check(flat, samples)


def test_D_phi_zero_is_restricted_frame(h2):
    D = build_D_phi(Step2GraphSetup(h2))
    subs = [MultiPoly.zero(4)] + MultiPoly.variables(4)
    for j, Dj in zip(range(1, 4), D):
        X = left_invariant_field(h2, j)
        assert list(Dj.coeffs) == [X.coeffs[i].substitute(subs) for i in range(1, 5)]


def test_D_phi_heisenberg_adds_phi_vertical(h2):
    w = MultiPoly.variables(4)
    phi = w[0] * 3 - w[3] + w[1] * w[2]
    D = build_D_phi(Step2GraphSetup(h2, phi))
    subs = [MultiPoly.zero(4)] + w
    for j, Dj in zip(range(1, 4), D):
        base = [left_invariant_field(h2, j).coeffs[i].substitute(subs) for i in range(1, 5)]
        if j == 2:
            base[3] = base[3] + phi
        assert list(Dj.coeffs) == base


def test_velocity_matches_D_phi(h2):
    rng = np.random.default_rng(1)
    w = MultiPoly.variables(4)
    phi = w[0] * w[1] + w[3] * Fraction(1, 2)
    setup = Step2GraphSetup(h2, phi)
    D = build_D_phi(setup)
    for _ in range(5):
        pt = rng.normal(size=4)
        a = rng.normal(size=3)
        expected = sum(a[j] * np.array([float(c.evaluate(pt)) for c in D[j].coeffs]) for j in range(3))
        assert np.allclose(setup.velocity(pt, a), expected)


def test_D_phi_abelian_is_coordinate():
    # B = 0 is not a valid step-2 setup, so check the abelian frame directly
    alg = make_abelian(3)
    for i in range(3):
        assert left_invariant_field(alg, i).coeffs[i] == MultiPoly.const(3, 1)


# integration and lengths


def test_integrator_single_control(h1):
    setup = Step2GraphSetup(h1)
    c = integrate_horizontal(setup, [[1.0]], [1.0])
    assert np.allclose(c.end, [1.0, 0.0])


def test_integrator_straight_line_in_abelian_direction(h2):
    setup = Step2GraphSetup(h2)
    c = integrate_horizontal(setup, [[0.5, 0.0, 0.0]], [2.0])
    assert np.allclose(c.nodes[:, 1:], 0.0)
    assert np.allclose(c.nodes[:, 0], c.times * 0.5)


@pytest.mark.parametrize("side", [1.0, 0.5, 2.0])
def test_holonomy_is_signed_area(h2, side):
    rep = holonomy_check(h2, 1, 3, side)
    assert rep["relative_error"] < 1e-6
    assert abs(abs(rep["integrated"][0]) - side**2) < 1e-6 * side**2


def test_holonomy_rejects_bad_indices(h2):
    with pytest.raises(ValueError):
        holonomy_check(h2, 0, 2)


def test_integrator_errors(h2):
    setup = Step2GraphSetup(h2)
    with pytest.raises(DimensionMismatch):
        integrate_ensemble(setup, np.zeros((1, 1, 2)), 1.0)
    with pytest.raises(ValueError):
        integrate_ensemble(setup, np.zeros((1, 1, 3)), -1.0)
    with pytest.raises(ValueError):
        integrate_ensemble(setup, np.zeros((1, 1, 3)), 1.0, step=0)


def test_phi_length_examples(h2):
    setup = Step2GraphSetup(h2)
    assert phi_length(integrate_horizontal(setup, [[1.0, 0, 0]], [1.0])) == pytest.approx(1.0)
    assert phi_length(integrate_horizontal(setup, [[0.0, 0, 0]], [1.0])) == 0.0
    c = integrate_horizontal(setup, [[0.6, 0.8, 0]], [5.0])
    assert phi_length(c) == pytest.approx(5.0)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_phi_length_two_code_paths_agree(seed):
    rng = np.random.default_rng(seed)
    setup = Step2GraphSetup(make_heisenberg(2), linear_phi(4, rng.integers(-3, 4, 4).tolist()))
    c = integrate_horizontal(setup, rng.normal(size=(5, 3)), rng.uniform(0.1, 0.5, 5), step=1e-2)
    assert phi_length(c) == pytest.approx(phi_length_coordinates(c, setup.m), rel=1e-12)


def test_lift_length_of_straight_segment(h2):
    setup = Step2GraphSetup(h2)
    c = integrate_horizontal(setup, [[0.6, 0.0, 0.8]], [1.0])
    assert len(c.nodes) >= 1000
    assert abs(graph_lift_length(setup, c) - 1.0) < 1e-3
    still = integrate_horizontal(setup, [[0.0, 0, 0]], [1.0])
    assert graph_lift_length(setup, still) == 0.0


@pytest.mark.parametrize("phi_coeffs", [[0, 0, 0, 0], [1, -2, Fraction(1, 2), 0]])
def test_lift_length_grows_under_refinement(h2, phi_coeffs):
    setup = Step2GraphSetup(h2, linear_phi(4, phi_coeffs))
    rng = np.random.default_rng(3)
    curves = integrate_ensemble(setup, rng.normal(size=(8, 4, 3)), 0.25, rng.uniform(-1, 1, (8, 4)), 1e-2)
    for c in curves:
        coarse, fine = graph_lift_length(setup, c, stride=8), graph_lift_length(setup, c, stride=1)
        assert fine >= coarse - 1e-6


def test_lift_length_dominates_distance(h2):
    setup = Step2GraphSetup(h2, linear_phi(4, [Fraction(1, 2), Fraction(1, 3), Fraction(-1, 4), 0]))
    K = calibrate_triangle_constant(h2, samples=2000).K
    rng = np.random.default_rng(8)
    curves = integrate_ensemble(setup, rng.normal(size=(10, 5, 3)), 0.2, rng.uniform(-1, 1, (10, 4)), 1e-2)
    for c in curves:
        ends = setup.lift(np.stack([c.start, c.end]))
        d = quasi_distance(GroupPoint(h2, tuple(Fraction(v) for v in ends[0])), GroupPoint(h2, tuple(Fraction(v) for v in ends[1])))
        assert graph_lift_length(setup, c) >= d / K - 1e-9


# experiments (small ensembles; the acceptance suite runs the full sizes)


def test_length_experiment_flat_ratios_are_one(h2):
    rep = length_comparison_experiment(Step2GraphSetup(h2, L=1.0), n_curves=10, step=1e-2, footprint_samples=30)
    assert rep["pass"]
    assert rep["max_ratio"] == pytest.approx(1.0, abs=1e-6)
    assert rep["summary"]["min"] == pytest.approx(1.0, abs=1e-6)


def test_length_experiment_linear_phi(h2):
    setup = Step2GraphSetup(h2, linear_phi(4, [Fraction(1, 2), Fraction(1, 3), Fraction(-1, 4), 0]), L=3.0)
    rep = length_comparison_experiment(setup, n_curves=10, step=1e-2, footprint_samples=30)
    assert rep["pass"] and rep["lipschitz_ok"] and rep["footprint"]["ok"]
    assert rep["lipschitz_empirical"] <= rep["lipschitz_bound"]


def test_length_experiment_is_deterministic(h2):
    setup = Step2GraphSetup(h2, linear_phi(4, [1, 0, 0, 0]))
    a = length_comparison_experiment(setup, n_curves=5, step=1e-2, seed=3)
    b = length_comparison_experiment(setup, n_curves=5, step=1e-2, seed=3)
    assert a == b


def test_graph_distance_experiment_small(h2):
    setup = Step2GraphSetup(h2, linear_phi(4, [Fraction(1, 2), Fraction(1, 3), Fraction(-1, 4), 0]))
    rep = graph_distance_experiment(setup, n_pairs=5, step=1e-2, budget=1)
    assert rep["pass"] and rep["tau_ok"]
    assert rep["max_endpoint_miss"] < 1e-6
    assert all(p["ratio"] >= 1 / 1.5 for p in rep["pairs"])


def test_graph_distance_flat_ratio_bounded(h2):
    rep = graph_distance_experiment(Step2GraphSetup(h2), n_pairs=5, step=1e-2, budget=1)
    assert rep["pass"] and rep["max_ratio"] < 10


def test_graph_distance_refuses_small_n(h1):
    with pytest.raises(CarnotError):
        graph_distance_experiment(Step2GraphSetup(h1), n_pairs=2)
    with pytest.raises(CarnotError):
        graph_distance_experiment(Step2GraphSetup(make_heisxR(1)), n_pairs=2)
