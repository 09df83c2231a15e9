import warnings
from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from conftest import nonzero_rationals, polys, rationals
from carnot_kit.catalog import (
    every_tangent_sphere,
    lambda_family_witness,
    make_g8,
    make_heisenberg,
    sphere_point_for_covector,
    surface_S,
    surface_S_frame,
    surface_S_point,
)
from carnot_kit.errors import CarnotError, CharacteristicPointError, DimensionMismatch
from carnot_kit.group import GroupPoint, left_invariant_field
from carnot_kit.hypersurface import (
    LevelSurface,
    NotTangentError,
    growth_vector,
    horizontal_gradient,
    induced_distribution,
    is_characteristic,
    scan_characteristic,
    tangent_group,
    vertical_commutator_coefficients,
    y_frame,
)
from carnot_kit.symbolic import MultiPoly


def surface(alg, f):
    return LevelSurface(alg, f)


def xvar(alg, i):
    return MultiPoly.var(alg.n, i)


def test_gradient_examples(g8, h1):
    S = surface_S()
    assert horizontal_gradient(S, surface_S_point(1)) == [1, 0, 1, 0]
    top = surface(g8, xvar(g8, 7))
    assert horizontal_gradient(top, g8.zero()) == [0, 0, 0, 0]
    plane = surface(h1, xvar(h1, 0))
    assert horizontal_gradient(plane, (3, -2, 5)) == [1, 0]


def test_characteristic_examples(h1):
    S = surface(h1, xvar(h1, 2))
    assert is_characteristic(S, (0, 0, 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert not is_characteristic(S, (1, 0, 0))


def test_off_surface_point_warns(h1):
    S = surface(h1, xvar(h1, 2))
    with pytest.warns(UserWarning):
        is_characteristic(S, (1, 0, 1))


@given(st.tuples(*[rationals] * 5), nonzero_rationals)
def test_vertical_surfaces_never_characteristic(p, c):
    # f depends on first-stratum coordinates only: X_1 f = c never vanishes
    h2 = make_heisenberg(2)
    x = MultiPoly.variables(5)
    S = surface(h2, x[0] * c + x[1] * x[1])
    assert S.is_vertical()
    assert any(horizontal_gradient(S, p))


def test_surface_rejects_zero_and_wrong_arity(h1):
    with pytest.raises(ValueError):
        LevelSurface(h1, MultiPoly.zero(3))
    with pytest.raises(DimensionMismatch):
        LevelSurface(h1, MultiPoly.var(2, 0))


def test_surface_json_round_trip():
    S = surface_S()
    T = LevelSurface.from_json(S.to_json())
    assert T.f == S.f and T.algebra == S.algebra
    U = LevelSurface.from_json({"algebra": "g8", "f": S.f.to_json()})
    assert U.algebra == S.algebra


def test_tangent_group_of_S_at_unit_point(g8):
    rep = tangent_group(surface_S(), GroupPoint(g8, surface_S_point(1)))
    expected = [g8.vector({"X1": 1}), g8.vector({"X2": 1, "X0": -1}), g8.vector({"X3": 1})]
    assert rep.subalgebra.same_span(expected + [g8.basis_vector(i) for i in range(4, 8)])
    assert rep.homogeneous_dimension == 12
    assert rep.subalgebra.same_span(lambda_family_witness(-1).closure)
    assert rep.to_json()["dimension"] == 7


@given(nonzero_rationals, nonzero_rationals)
def test_tangent_group_invariant_under_normal_scaling(x2, c):
    # the tangent depends on the level set, not on the defining function
    S = surface_S()
    T = LevelSurface(S.algebra, S.f * c)
    p = surface_S_point(x2)
    assert tangent_group(S, p).subalgebra.same_span(tangent_group(T, p).subalgebra)


def test_tangent_group_refuses_characteristic_point(h1):
    with pytest.raises(CharacteristicPointError):
        tangent_group(surface(h1, xvar(h1, 2)), (0, 0, 0))


def test_scan_examples(h1, g8):
    flat = surface(h1, xvar(h1, 2))
    assert scan_characteristic(flat, [(-1, 1, 3), (-1, 1, 3), 0]) == [(0, 0, 0)]
    axes = [0, (-2, 2, 9), (-3, 3, 7), (-1, 1, 3), 0, 0, 0, 0]
    assert scan_characteristic(surface_S(), axes, solve_for=0) == []
    sphere = every_tangent_sphere(g8)
    pts = [sphere_point_for_covector(g8, c) for c in ([1, 0, 0, 0], [0, 0, 1, 0], [Fraction(3, 5), Fraction(4, 5), 0, 0])]
    assert all(sphere.contains(p) and not is_characteristic(sphere, p) for p in pts)


def test_scan_tolerance_and_errors(h1):
    S = surface(h1, xvar(h1, 2) - xvar(h1, 0) * xvar(h1, 1) * Fraction(1, 2))
    near = scan_characteristic(S, [(-1, 1, 5), (-1, 1, 5), (-1, 1, 5)], tolerance=Fraction(1, 4))
    assert all(abs(S.f.evaluate(p)) <= Fraction(1, 4) for p in near)
    with pytest.raises(DimensionMismatch):
        scan_characteristic(S, [0, 0])
    with pytest.raises(ValueError):
        scan_characteristic(surface(h1, xvar(h1, 0) ** 2), [0, 0, 0], solve_for=0)


def test_induced_distribution_of_vertical_plane(h2):
    S = surface(h2, xvar(h2, 0))
    D = induced_distribution(S, (0, 1, 2, 3, 4))
    assert len(D) == 3
    assert all(v[0] == 0 for v in D)


def test_y_frame_for_coordinate_plane(h2):
    S = surface(h2, xvar(h2, 0))
    Y = y_frame(S)
    X = [left_invariant_field(h2, i) for i in range(4)]
    assert Y == [X[1], X[2], X[3]]
    assert vertical_commutator_coefficients(S)["Y1Y3"] == MultiPoly.const(5, 1)


@given(polys(5, max_degree=2, max_terms=4))
def test_vertical_commutators_match_closed_form(f):
    assume(not f.is_zero())
    S = surface(make_heisenberg(2), f)
    g1, g2, g3, g4 = S.horizontal_gradient_polys
    comm = vertical_commutator_coefficients(S)
    assert comm["Y1Y2"] == (g1 * g2 + g3 * g4) * -2
    assert comm["Y1Y3"] == g1 * g1 + g3 * g3 - g2 * g2 - g4 * g4
    assert comm["Y2Y3"] == (g1 * g4 - g2 * g3) * 2


@given(polys(5, max_degree=2, max_terms=4))
def test_y_frame_is_tangent(f):
    assume(not f.is_zero())
    S = surface(make_heisenberg(2), f)
    for Y in y_frame(S):
        assert Y.apply(f).is_zero()


@pytest.mark.parametrize("n", [3, 4])
def test_y_frame_for_larger_n(n):
    alg = make_heisenberg(n)
    x = MultiPoly.variables(alg.n)
    f = x[0] + x[1] * x[n] + x[2 * n]
    S = surface(alg, f)
    Y = y_frame(S)
    assert len(Y) == 3 * n * (n - 1) // 2
    assert all(V.apply(f).is_zero() for V in Y)
    p = [Fraction(k + 1, 3) for k in range(alg.n)]
    assert len(induced_distribution(S, p)) == 2 * n - 1
    assert growth_vector(S, Y, p, 2) == (2 * n - 1, 2 * n)


def test_y_frame_needs_n_at_least_two(h1, g8):
    with pytest.raises(CarnotError):
        y_frame(surface(h1, xvar(h1, 0)))
    with pytest.raises(CarnotError):
        y_frame(surface_S())


def test_growth_vectors(g8, h2):
    S = surface_S()
    for x2 in (Fraction(1, 2), 2, Fraction(-7, 3)):
        p = surface_S_point(x2, {1: 1, 5: -2, 7: 3})
        assert growth_vector(S, surface_S_frame(), p, 3) == (3, 6, 7)
    plane = surface(h2, xvar(h2, 0))
    assert growth_vector(plane, y_frame(plane), (0, 1, 1, 1, 1), 2) == (3, 4)


def test_growth_vector_errors(g8, h1):
    S = surface_S()
    X0 = left_invariant_field(g8, 0)
    with pytest.raises(NotTangentError):
        growth_vector(S, [X0], surface_S_point(1), 2)
    flat = surface(h1, xvar(h1, 2))
    with pytest.raises(CharacteristicPointError):
        growth_vector(flat, [], (0, 0, 0), 2)
