"""Reflection and refraction as line maps, system traces, differentials."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import unit3
from raylines.errors import DifferentialUndefined, MissError, TotalInternalReflection
from raylines.line_space import Chart, LineTangent, OrientedLine, line_from_point_dir, reverse
from raylines.optics import (
    LineMap,
    OpticalSystem,
    differential,
    reflect,
    reflect_dirs,
    refract,
    refract_dirs,
    trace,
    trace_many,
)
from raylines.surfaces import Interface, Paraboloid, Plane, SinusoidBump, Sphere

ez = np.array([0.0, 0.0, 1.0])
r2 = np.sqrt(0.5)


def modulo_u(L, t):
    return t.dP - (t.dP @ L.u) * L.u


# ---------------------------------------------------------------- reflection

def test_reflect_normal_incidence():
    L = line_from_point_dir((0.3, 0.4, 2.0), (0, 0, -1))
    M = reflect(L, Plane())
    np.testing.assert_allclose(M.u, ez, atol=1e-15)
    np.testing.assert_allclose(M.q, [0.3, 0.4, 0.0], atol=1e-12)


def test_reflect_oblique():
    L = line_from_point_dir((-1.0, 0, 1.0), (1, 0, -1))
    M = reflect(L, Plane())
    np.testing.assert_allclose(M.u, [r2, 0, r2], atol=1e-15)
    # both lines pass through the origin
    np.testing.assert_allclose(M.q, 0.0, atol=1e-12)


def test_mirror_sign_gives_unit_vector():
    u2 = reflect_dirs(np.array([0, 0, -1.0]), ez)
    np.testing.assert_array_equal(u2, ez)


@given(unit3, unit3)
def test_reflection_law_invariants(u, n):
    if abs(u @ n) < 1e-3:
        return
    u2 = reflect_dirs(u, n)
    assert abs(np.linalg.norm(u2) - 1) <= 1e-10
    assert np.linalg.norm(np.cross(u2 - u, n)) <= 1e-10
    assert abs(u2 @ n + u @ n) <= 1e-10


@given(unit3, unit3)
def test_reflection_involution(u, n):
    u2 = reflect_dirs(u, n)
    np.testing.assert_allclose(reflect_dirs(-u2, n), -u, atol=1e-10)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1.0))
def test_reflected_line_retraces_back(a, b, c):
    S = Sphere((0, 0, -2.0), 1.5)
    L = line_from_point_dir((a, b, 1.0), (0.2 * a, 0.1 * b, -c))
    try:
        M = reflect(L, S)
    except MissError:
        return
    assert reverse(reflect(reverse(M), S)).isclose(L, 1e-9)


# ---------------------------------------------------------------- refraction

def test_refract_normal_incidence():
    for n1, n2 in [(1, 1.5), (1.5, 1), (1, 2.4)]:
        M = refract(line_from_point_dir((0.1, 0, 1.0), (0, 0, -1)), Plane(), n1, n2)
        np.testing.assert_allclose(M.u, [0, 0, -1], atol=1e-15)


def test_refract_45_degrees_into_glass():
    # scalar Snell: sin t2 = sin 45 / 1.5
    s2 = r2 / 1.5
    expected = np.array([s2, 0, -np.sqrt(1 - s2**2)])
    M = refract(line_from_point_dir((-1.0, 0, 1.0), (r2, 0, -r2)), Plane(), 1.0, 1.5)
    np.testing.assert_allclose(M.u, expected, atol=1e-15)
    np.testing.assert_allclose(M.u, [0.4714045, 0, -0.8819171], atol=5e-8)


def test_refract_45_degrees_total_internal_reflection():
    with pytest.raises(TotalInternalReflection):
        refract(line_from_point_dir((-1.0, 0, 1.0), (r2, 0, -r2)), Plane(), 1.5, 1.0)


def test_tir_boundary_counts_as_tir():
    u = np.array([[1.0, 0, 0]])
    _, tir = refract_dirs(u, np.array([[0, 0, 1.0]]), 1.0, 1.0)
    assert tir[0]


@given(unit3, unit3, st.sampled_from([(1.0, 1.5), (1.5, 1.0), (1.0, 2.4), (1.33, 1.0)]))
def test_refraction_tangential_invariant(u, n, idx):
    n1, n2 = idx
    if abs(u @ n) < 1e-3:
        return
    u2, tir = refract_dirs(u[None], n[None], n1, n2)
    if tir[0]:
        return
    u2 = u2[0]
    tan = lambda v: v - (v @ n) * n
    assert np.linalg.norm(n2 * tan(u2) - n1 * tan(u)) <= 1e-10
    assert abs(np.linalg.norm(u2) - 1) <= 1e-12
    # forward branch: stays on the same side of the surface as the incoming ray goes
    assert np.sign(u2 @ n) == np.sign(u @ n)


@given(unit3, unit3)
def test_refraction_equal_indices_is_identity(u, n):
    if abs(u @ n) < 1e-6:
        return
    u2, tir = refract_dirs(u[None], n[None], 1.7, 1.7)
    assert not tir[0]
    np.testing.assert_allclose(u2[0], u, atol=1e-12)


# ---------------------------------------------------------------- traces

def test_trace_single_mirror():
    res = trace(line_from_point_dir((0, 0, 1.0), (0, 0, -1)), OpticalSystem((Interface(Plane(), "reflect"),)),
                start=(0, 0, 1.0))
    np.testing.assert_allclose(res.line.u, ez)
    assert len(res.hits) == 1
    np.testing.assert_allclose(res.hits[0], 0.0, atol=1e-12)
    assert res.lengths == pytest.approx([1.0])


def test_trace_two_parallel_mirrors():
    system = OpticalSystem((Interface(Plane((0, 0, 1.0)), "reflect"), Interface(Plane(), "reflect")))
    res = trace(line_from_point_dir((0.2, 0, 0.5), (0, 0, 1)), system, start=(0.2, 0, 0.5))
    np.testing.assert_allclose(res.line.u, ez, atol=1e-15)
    assert len(res.hits) == 2
    np.testing.assert_allclose(res.hits[1], [0.2, 0, 0], atol=1e-12)


def test_trace_slab_restores_direction():
    system = OpticalSystem((Interface(Plane(), "refract", 1.0, 1.5), Interface(Plane((0, 0, -1.0)), "refract", 1.5, 1.0)))
    u0 = np.array([r2, 0, -r2])
    res = trace(line_from_point_dir((-1.0, 0, 1.0), u0), system, start=(-1.0, 0, 1.0))
    np.testing.assert_allclose(res.line.u, u0, atol=1e-12)
    # lateral offset only: exit point is displaced by tan(t2) per unit thickness
    s2 = r2 / 1.5
    np.testing.assert_allclose(res.hits[1], [s2 / np.sqrt(1 - s2**2), 0, -1], atol=1e-12)
    assert res.optical_path == pytest.approx(np.sqrt(2) + 1.5 / np.sqrt(1 - s2**2), abs=1e-12)


def test_index_chain_enforced():
    with pytest.raises(ValueError):
        OpticalSystem((Interface(Plane(), "refract", 1.0, 1.5), Interface(Plane((0, 0, -1.0)), "refract", 1.3, 1.0)))
    with pytest.raises(ValueError):
        OpticalSystem((Interface(Plane(), "refract", 1.0, 1.5), Interface(Plane((0, 0, -1.0)), "reflect", 1.0)))


def test_trace_many_status_codes():
    system = [Interface(Plane(), "refract", 1.5, 1.0)]
    starts = [[0, 0, 1.0], [0, 0, 1.0], [0, 0, 1.0]]
    dirs = [[0, 0, -1.0], [r2, 0, -r2], [0, 0, 1.0]]
    out = trace_many(starts, dirs, system)
    assert out["status"].tolist() == [0, 3, 1]
    assert out["failed_at"].tolist() == [-1, 0, 0]


# ---------------------------------------------------------------- differentials

def test_differential_identity():
    L = line_from_point_dir((0.5, -0.2, 0.0), (0.1, 0.2, 1.0))
    for t in Chart.at(L).basis(L):
        d = differential(lambda M: M, L, t)
        np.testing.assert_allclose(d.du, t.du, atol=1e-9)
        np.testing.assert_allclose(modulo_u(L, d), modulo_u(L, t), atol=1e-9)


def test_differential_reverse():
    L = line_from_point_dir((0.5, -0.2, 0.0), (0.1, 0.2, 1.0))
    for t in Chart.at(L).basis(L):
        d = differential(reverse, L, t)
        np.testing.assert_allclose(d.du, -t.du, atol=1e-9)
        np.testing.assert_allclose(modulo_u(L, d), modulo_u(L, t), atol=1e-9)


def test_differential_planar_mirror():
    L = line_from_point_dir((0, 0, 1.0), (0, 0, -1))
    d = differential(LineMap(Interface(Plane(), "reflect")), L, LineTangent((1.0, 0, 0), np.zeros(3)))
    np.testing.assert_allclose(d.du, 0.0, atol=1e-9)
    np.testing.assert_allclose(d.dP - d.dP[2] * ez, [1, 0, 0], atol=1e-9)


def test_differential_undefined_at_domain_edge():
    # a ray that barely clips the sphere: the probes fall off it
    L = line_from_point_dir((1.0 - 1e-7, 0, 2.0), (0, 0, -1))
    with pytest.raises(DifferentialUndefined):
        differential(LineMap(Interface(Sphere(), "reflect")), L, LineTangent((1.0, 0, 0), np.zeros(3)), eps=1e-5)


@pytest.mark.parametrize("surface", [Sphere((0, 0, -2.0), 1.5), Paraboloid(), SinusoidBump(0.2, 2.0, 1.5)])
def test_differential_second_order(surface):
    f = LineMap(Interface(surface, "refract", 1.0, 1.5))
    L = line_from_point_dir((0.3, -0.2, 2.0), (0.05, 0.1, -1.0))
    t = Chart.at(L).basis(L)[0] + Chart.at(L).basis(L)[2]
    D = [np.concatenate([d.du, modulo_u(f(L), d)]) for d in (differential(f, L, t, e) for e in (4e-3, 2e-3, 1e-3))]
    limit = (4 * D[2] - D[1]) / 3
    r = np.linalg.norm(D[0] - limit) / np.linalg.norm(D[1] - limit)
    assert 3.0 < r < 5.0
