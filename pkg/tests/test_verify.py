"""Symplecticity checks, Malus checks and the line-space structure suite."""

import numpy as np
import pytest

from raylines.errors import NonNormalFamilyError
from raylines.families import point_source, skew_family
from raylines.line_space import Chart, OrientedLine, line_from_point_dir, omega, reverse
from raylines.optics import LineMap, OpticalSystem, differentials
from raylines.report import emit_report
from raylines.surfaces import Interface, Paraboloid, Plane, SinusoidBump, Sphere
from raylines.verify import (
    LineSampler,
    broken_refract_dirs,
    check_symplectic,
    loop_integral,
    malus_check,
    structure_checks,
)

SAMPLER = LineSampler()
LENS = Sphere((0, 0, -2.0), 1.5)
BUMP = SinusoidBump(0.2, 2.0, 1.5)


def test_plane_mirror_symplectic():
    r = check_symplectic(Interface(Plane(), "reflect"), SAMPLER, 100, 4, 1e-5, 1e-6, seed=0)
    assert r.passed
    assert r.max_residual <= 1e-8
    assert len(r.rows) == 400


def test_plane_refraction_scaled_symplectic():
    r = check_symplectic(Interface(Plane(), "refract", 1.0, 1.5), SAMPLER, 100, 4, 1e-5, 1e-6, seed=0)
    assert r.passed
    assert r.details["n_in"] == 1.0 and r.details["n_out"] == 1.5


def test_unscaled_refraction_is_not_symplectic():
    # without the n2/n1 factor the plain omega is not preserved
    f = LineMap(Interface(Plane(), "refract", 1.0, 1.5))
    rng = np.random.default_rng(5)
    L = SAMPLER.sample(rng)
    B = Chart.at(L).basis(L)
    image, pushed = differentials(f, L, B)
    W0 = np.array([[omega(L, a, b) for b in B] for a in B])
    W1 = np.array([[omega(image, a, b) for b in pushed] for a in pushed])
    np.testing.assert_allclose(1.5 * W1, W0, atol=1e-6)
    assert np.abs(W1 - W0).max() > 0.1


def test_negative_control_fails():
    broken = LineMap(Interface(Plane(), "refract", 1.0, 1.5), refract_rule=broken_refract_dirs)
    r = check_symplectic(broken, SAMPLER, 100, 4, 1e-5, 1e-6, seed=0)
    assert not r.passed
    assert r.max_residual >= 1e-2


def test_tir_samples_are_resampled():
    r = check_symplectic(Interface(LENS, "refract", 1.5, 1.0), LineSampler(half_angle=0.8, half_widths=(1.5, 1.5, 0.5)),
                         30, 2, seed=1)
    assert r.passed
    assert r.samples["resampled"] > 0


def test_inverse_map_scaling():
    # refract n1 -> n2, then send the reversed image back through n2 -> n1;
    # a single-sheet surface so the reversed ray meets the same point
    f = LineMap(Interface(BUMP, "refract", 1.0, 1.5))
    g = LineMap(Interface(BUMP, "refract", 1.5, 1.0))
    rng = np.random.default_rng(2)
    for _ in range(20):
        L = SAMPLER.sample(rng)
        back = reverse(g(reverse(f(L))))
        assert back.isclose(L, 1e-9)
    r = check_symplectic(g, LineSampler(axis=(0, 0, 1)), 50, 4, seed=3)
    assert r.passed and r.details["n_in"] == 1.5 and r.details["n_out"] == 1.0


def test_composition_within_triangle_bound():
    first = Interface(Plane(), "refract", 1.0, 1.5)
    second = Interface(LENS, "refract", 1.5, 1.0)
    r12 = check_symplectic([first, second], SAMPLER, 50, 4, seed=4)
    r1 = check_symplectic(first, SAMPLER, 50, 4, seed=4)
    r2 = check_symplectic(second, SAMPLER, 50, 4, seed=4)
    assert r12.passed
    assert r12.max_residual <= r1.max_residual + r2.max_residual + 1e-8


def test_reports_are_deterministic():
    a = check_symplectic(Interface(Paraboloid(), "reflect"), SAMPLER, 20, 4, seed=7)
    b = check_symplectic(Interface(Paraboloid(), "reflect"), SAMPLER, 20, 4, seed=7)
    assert emit_report(a, "structured") == emit_report(b, "structured")
    c = check_symplectic(Interface(Paraboloid(), "reflect"), SAMPLER, 20, 4, seed=8)
    assert emit_report(a, "structured") != emit_report(c, "structured")


def test_malus_single_mirror():
    F = point_source((0, 0, 1.0), (0, 0, -1.0))
    r = malus_check(F, [Interface(Plane(), "reflect")])
    assert r.passed and r.max_residual <= 1e-9


def test_malus_rejects_non_normal_input():
    with pytest.raises(NonNormalFamilyError):
        malus_check(skew_family(), [Interface(Plane((0, 0, -1.0)), "reflect")])


def test_structure_suite_passes():
    r = structure_checks(seed=0, budget=100)
    assert r.passed
    names = {c.name for c in r.children}
    assert {"dlambda_equals_omega", "origin_shift_exact", "chart_round_trip", "omega_antisymmetry"} <= names


def test_loop_same_origin_is_zero():
    L = line_from_point_dir((0.2, 0.1, 0), (0.1, 0.3, 1))
    corners = np.array([[0, 0, 0, 0], [0.1, 0, 0.2, 0], [0.1, 0.1, 0, 0.3], [0, 0.1, 0.1, 0.1]])
    assert loop_integral(Chart.at(L), corners, (1, 2, 3), (1, 2, 3)) == 0.0


def test_du_zero_tangents_give_zero_forms():
    L = OrientedLine((0, 0, 1.0), (1.0, 2.0, 0))
    ch = Chart.at(L, e1=(1, 0, 0))
    c = ch.coords(L)
    # translations only (no change of direction)
    t1, t2 = ch.tangent(c, [0, 0, 1, 0]), ch.tangent(c, [0, 0, 0, 1])
    assert np.all(t1.du == 0) and np.all(t2.du == 0)
    assert omega(L, t1, t2) == 0.0
    corners = np.array([[0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 1, 1], [0, 0, 0, 1]], dtype=float)
    assert loop_integral(ch, corners, (3, 1, 4)) == 0.0
