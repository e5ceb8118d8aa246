"""Oriented lines, the two-form omega, the Liouville form and charts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import line_and_tangents, lines, vec3
from raylines.errors import InvalidTangentError, OutOfChartError, ZeroDirectionError
from raylines.line_space import (
    Chart,
    LineTangent,
    OrientedLine,
    chart_coords,
    chart_line,
    line_distance,
    line_from_point_dir,
    liouville,
    omega,
    retract,
    reverse,
)

Z = np.zeros(3)
ez = np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------- construction

def test_canonical_foot_point():
    L = line_from_point_dir((1.0, 2.0, 7.0), (0, 0, 3))
    np.testing.assert_allclose(L.u, ez)
    np.testing.assert_allclose(L.q, [1.0, 2.0, 0.0])


def test_zero_direction_rejected():
    with pytest.raises(ZeroDirectionError):
        line_from_point_dir(Z, Z)


def test_non_canonical_line_rejected():
    with pytest.raises(ValueError):
        OrientedLine(ez, (0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        OrientedLine((0.0, 0.0, 2.0), Z)


def test_reverse_example():
    L = reverse(OrientedLine(ez, (1.0, 0.0, 0.0)))
    np.testing.assert_array_equal(L.u, [0, 0, -1])
    np.testing.assert_array_equal(L.q, [1, 0, 0])


def test_arrays_read_only():
    L = line_from_point_dir(Z, ez)
    with pytest.raises(ValueError):
        L.q[0] = 1.0


@given(lines())
def test_reverse_is_involution(L):
    assert line_distance(reverse(reverse(L)), L) == 0.0


@given(vec3, vec3.filter(lambda v: np.linalg.norm(v) > 0.1), st.floats(-5, 5))
def test_canonical_form_independent_of_point_on_line(P, v, s):
    a = line_from_point_dir(P, v)
    b = line_from_point_dir(P + s * v, 2.5 * v)
    assert a.isclose(b, 1e-9)
    assert abs(a.q @ a.u) <= 1e-10 * (1 + np.linalg.norm(a.q))


# ---------------------------------------------------------------- omega

def test_omega_single_product_term():
    L = OrientedLine(ez, Z)
    t1 = LineTangent((1.0, 0, 0), Z)
    t2 = LineTangent(Z, (1.0, 0, 0))
    assert omega(L, t1, t2) == 1.0
    assert omega(L, t1, t1) == 0.0
    assert omega(L, t1, LineTangent((0, 0, 5.0), (1.0, 0, 0))) == 1.0


def test_omega_rejects_non_tangent():
    L = OrientedLine(ez, Z)
    with pytest.raises(InvalidTangentError):
        omega(L, LineTangent(Z, ez), LineTangent(Z, Z))


@given(line_and_tangents(3), st.floats(-3, 3), st.floats(-3, 3))
def test_omega_antisymmetric_and_bilinear(data, a, b):
    L, t1, t2, t3 = data
    assert abs(omega(L, t1, t2) + omega(L, t2, t1)) <= 1e-12 * (1 + abs(omega(L, t1, t2)))
    lhs = omega(L, a * t1 + b * t3, t2)
    rhs = a * omega(L, t1, t2) + b * omega(L, t3, t2)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(a * omega(L, t1, t2)) + abs(b * omega(L, t3, t2)))


@given(line_and_tangents(2), st.floats(-10, 10), st.floats(-10, 10))
def test_omega_ignores_dP_along_u(data, s1, s2):
    L, t1, t2 = data
    w = omega(L, t1, t2)
    shifted = omega(L, LineTangent(t1.dP + s1 * L.u, t1.du), LineTangent(t2.dP + s2 * L.u, t2.du))
    assert abs(shifted - w) <= 1e-12 * (1 + abs(w) + 10 * np.linalg.norm(t1.du) + 10 * np.linalg.norm(t2.du))


@given(lines())
def test_omega_nondegenerate_on_chart_basis(L):
    B = Chart.at(L).basis(L)
    W = np.array([[omega(L, a, b) for b in B] for a in B])
    assert all(np.max(np.abs(row)) > 1e-8 for row in W)
    assert abs(np.linalg.det(W)) > 1e-8


# ---------------------------------------------------------------- Liouville

def test_liouville_examples():
    L = OrientedLine(ez, (1.0, 0, 0))
    assert liouville(L, LineTangent(Z, (1.0, 0, 0))) == 1.0
    assert liouville(L, LineTangent((3.0, 1, 0), Z), O=(5, 6, 7)) == 0.0


@given(line_and_tangents(1), vec3, vec3)
def test_liouville_origin_shift_is_linear(data, O1, O2):
    # lambda_O' - lambda_O = (O - O') . du, an exact differential
    L, t = data
    diff = liouville(L, t, O2) - liouville(L, t, O1)
    assert abs(diff - (O1 - O2) @ t.du) <= 1e-12 * (1 + np.abs(O1 - O2).sum() * np.linalg.norm(t.du) * 10)


# ---------------------------------------------------------------- charts

def test_chart_at_base_is_origin():
    L = line_from_point_dir((0.3, -2.0, 1.0), (1.0, 2.0, 0.5))
    np.testing.assert_allclose(Chart.at(L).coords(L), 0.0, atol=1e-15)


def test_chart_aligned_frame():
    ch = Chart.at(OrientedLine(ez, Z), e1=(1.0, 0, 0))
    np.testing.assert_allclose(ch.e2, [0, 1, 0])
    np.testing.assert_array_equal(chart_coords(ch, OrientedLine(ez, (2.0, 3.0, 0))), [0, 0, 2, 3])


def test_chart_rejects_far_directions():
    ch = Chart.at(OrientedLine(ez, Z))
    with pytest.raises(OutOfChartError):
        ch.coords(OrientedLine((1.0, 0, 0), Z))


def test_chart_round_trip_100_lines():
    rng = np.random.default_rng(0)
    base = line_from_point_dir((0.1, 0.2, 0.3), (0.2, -0.3, 1.0))
    ch = Chart.at(base)
    worst = 0.0
    for _ in range(100):
        c = np.concatenate([rng.uniform(-1, 1, 2), rng.uniform(-3, 3, 2)])
        L = chart_line(ch, c)
        worst = max(worst, line_distance(chart_line(ch, ch.coords(L)), L))
        np.testing.assert_allclose(ch.coords(L), c, atol=1e-12)
    assert worst <= 1e-10


@given(lines(), st.tuples(*[st.floats(-1, 1)] * 4).map(np.array))
def test_push_inverts_tangent(L, dc):
    ch = Chart.at(L)
    c = ch.coords(L)
    np.testing.assert_allclose(ch.push(L, ch.tangent(c, dc)), dc, atol=1e-9)


@given(lines(), st.tuples(*[st.floats(-1, 1)] * 4).map(np.array))
def test_tangent_matches_finite_difference_of_chart(L, dc):
    # chart.tangent is analytic; compare omega against an FD curve in coordinates
    ch = Chart.at(L)
    c = ch.coords(L)
    t = ch.tangent(c, dc)
    h = 1e-6
    Lp, Lm = ch.line(c + h * dc), ch.line(c - h * dc)
    du = (Lp.u - Lm.u) / (2 * h)
    dq = (Lp.q - Lm.q) / (2 * h)
    np.testing.assert_allclose(t.du, du, atol=1e-7)
    # dP modulo u: compare components orthogonal to u
    perp = lambda v: v - (v @ L.u) * L.u
    np.testing.assert_allclose(perp(t.dP), perp(dq), atol=1e-6 * (1 + np.linalg.norm(L.q)))


# ---------------------------------------------------------------- retraction

def test_retract_examples():
    L = OrientedLine(ez, Z)
    t = LineTangent((1.0, 0, 0), Z)
    assert retract(L, t, 0.0) is L
    M = retract(L, t, 1.0)
    np.testing.assert_array_equal(M.q, [1, 0, 0])
    np.testing.assert_array_equal(M.u, ez)


@given(line_and_tangents(1))
def test_retract_is_first_order(data):
    # retract agrees with the chart curve to first order: the error is O(eps^2)
    # or better, so halving eps shrinks it by at least ~4x
    L, t = data
    ch = Chart.at(L)
    c0, v = ch.coords(L), ch.push(L, t)
    if np.linalg.norm(v) < 1e-3:
        return
    errs = [np.linalg.norm(ch.coords(retract(L, t, e)) - c0 - e * v) for e in (1e-3, 5e-4)]
    if errs[0] > 1e-12:
        assert errs[0] / errs[1] > 3.5
