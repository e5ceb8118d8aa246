"""Oriented lines as a symplectic manifold, optical maps on it, and
numerical checks that those maps preserve normal ray families."""

from .families import (
    RayFamily,
    is_normal,
    normal_congruence,
    orthogonality_residual,
    point_source,
    pullback_coefficient,
    skew_family,
    transform,
    wavefront,
)
from .line_space import (
    Chart,
    LineTangent,
    OrientedLine,
    chart_coords,
    chart_line,
    line_from_point_dir,
    liouville,
    omega,
    retract,
    reverse,
)
from .optics import LineMap, OpticalSystem, differential, reflect, refract, trace
from .surfaces import Interface, Paraboloid, Plane, SinusoidBump, Sphere, Torus, intersect, normal
from .verify import CheckReport, LineSampler, check_symplectic, malus_check, structure_checks

__version__ = "0.1.0"
