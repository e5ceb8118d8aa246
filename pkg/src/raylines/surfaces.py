"""Smooth implicit surfaces and ray-surface intersection.

Every surface is a level set ``f(x) = 0`` with analytic gradient and
Hessian. All field methods broadcast over leading axes of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar, NamedTuple

import numpy as np

from .errors import DegenerateGradientError, MissError
from .line_space import OrientedLine, perpendicular

BRACKET_STEPS = 256
GRAZING_TOL = 1e-6
DEFAULT_T_MAX = 40.0
_CHUNK = 2048


def _as3(x):
    a = np.array(x, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


def _unit(x):
    a = np.asarray(x, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if not n > 0:
        raise ValueError("zero vector where a direction was expected")
    # already unit: keep the exact bits so serialisation round trips are exact
    if abs(n - 1.0) <= 4 * np.finfo(float).eps:
        return _as3(a)
    return _as3(a / n)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


class ImplicitSurface:
    kind: ClassVar[str]

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def params(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else float(v)
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True, eq=False)
class Plane(ImplicitSurface):
    """``f = (x - point) . n``, ``n`` the unit normal."""

    kind: ClassVar[str] = "plane"
    point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "point", _as3(self.point))
        object.__setattr__(self, "normal", _unit(self.normal))

    def value(self, x):
        return _dot(np.asarray(x) - self.point, self.normal)

    def gradient(self, x):
        return np.broadcast_to(self.normal, np.shape(x)).copy()

    def hessian(self, x):
        return np.zeros(np.shape(x) + (3,))


@dataclass(frozen=True, eq=False)
class Sphere(ImplicitSurface):
    """``f = |x - center|^2 - radius^2``."""

    kind: ClassVar[str] = "sphere"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as3(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def value(self, x):
        d = np.asarray(x) - self.center
        return _dot(d, d) - self.radius**2

    def gradient(self, x):
        return 2.0 * (np.asarray(x) - self.center)

    def hessian(self, x):
        return np.broadcast_to(2.0 * np.eye(3), np.shape(x) + (3,)).copy()


@dataclass(frozen=True, eq=False)
class Paraboloid(ImplicitSurface):
    """``z = rho^2 / (4 focal)`` in the frame with origin ``vertex`` and
    third axis ``axis``; ``f = z - rho^2 / (4 focal)``."""

    kind: ClassVar[str] = "paraboloid"
    vertex: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    focal: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "vertex", _as3(self.vertex))
        object.__setattr__(self, "axis", _unit(self.axis))
        if self.focal == 0 or not np.isfinite(self.focal):
            raise ValueError("paraboloid focal parameter must be finite and nonzero")
        object.__setattr__(self, "focal", float(self.focal))

    def value(self, x):
        d = np.asarray(x) - self.vertex
        z = _dot(d, self.axis)
        return z - (_dot(d, d) - z**2) / (4.0 * self.focal)

    def gradient(self, x):
        d = np.asarray(x) - self.vertex
        z = _dot(d, self.axis)[..., None]
        return self.axis - (d - z * self.axis) / (2.0 * self.focal)

    def hessian(self, x):
        h = -(np.eye(3) - np.outer(self.axis, self.axis)) / (2.0 * self.focal)
        return np.broadcast_to(h, np.shape(x) + (3,)).copy()


@dataclass(frozen=True, eq=False)
class SinusoidBump(ImplicitSurface):
    """``z = height + amplitude sin(wx x) sin(wy y)``."""

    kind: ClassVar[str] = "sinusoid-bump"
    amplitude: float = 0.1
    wx: float = 1.0
    wy: float = 1.0
    height: float = 0.0

    def __post_init__(self):
        for name in ("amplitude", "wx", "wy", "height"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    def value(self, x):
        x = np.asarray(x)
        return x[..., 2] - self.height - self.amplitude * np.sin(self.wx * x[..., 0]) * np.sin(self.wy * x[..., 1])

    def gradient(self, x):
        x = np.asarray(x)
        sx, cx = np.sin(self.wx * x[..., 0]), np.cos(self.wx * x[..., 0])
        sy, cy = np.sin(self.wy * x[..., 1]), np.cos(self.wy * x[..., 1])
        A = self.amplitude
        return np.stack([-A * self.wx * cx * sy, -A * self.wy * sx * cy, np.ones_like(sx)], axis=-1)

    def hessian(self, x):
        x = np.asarray(x)
        sx, cx = np.sin(self.wx * x[..., 0]), np.cos(self.wx * x[..., 0])
        sy, cy = np.sin(self.wy * x[..., 1]), np.cos(self.wy * x[..., 1])
        A = self.amplitude
        H = np.zeros(np.shape(x) + (3,))
        H[..., 0, 0] = A * self.wx**2 * sx * sy
        H[..., 1, 1] = A * self.wy**2 * sx * sy
        H[..., 0, 1] = H[..., 1, 0] = -A * self.wx * self.wy * cx * cy
        return H


@dataclass(frozen=True, eq=False)
class Torus(ImplicitSurface):
    """``f = (|d|^2 + R^2 - r^2)^2 - 4 R^2 (|d|^2 - (d . axis)^2)``."""

    kind: ClassVar[str] = "torus"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    major: float = 1.0
    minor: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "center", _as3(self.center))
        object.__setattr__(self, "axis", _unit(self.axis))
        if not self.major > self.minor > 0:
            raise ValueError("torus radii must satisfy major > minor > 0")
        object.__setattr__(self, "major", float(self.major))
        object.__setattr__(self, "minor", float(self.minor))

    def value(self, x):
        d = np.asarray(x) - self.center
        s = _dot(d, d)
        z = _dot(d, self.axis)
        R2 = self.major**2
        return (s + R2 - self.minor**2) ** 2 - 4.0 * R2 * (s - z**2)

    def gradient(self, x):
        d = np.asarray(x) - self.center
        s = _dot(d, d)[..., None]
        z = _dot(d, self.axis)[..., None]
        R2 = self.major**2
        return 4.0 * (s + R2 - self.minor**2) * d - 8.0 * R2 * (d - z * self.axis)

    def hessian(self, x):
        d = np.asarray(x) - self.center
        s = _dot(d, d)[..., None, None]
        R2 = self.major**2
        eye = np.eye(3)
        aa = np.outer(self.axis, self.axis)
        return 4.0 * (s + R2 - self.minor**2) * eye + 8.0 * d[..., :, None] * d[..., None, :] - 8.0 * R2 * (eye - aa)


SURFACE_KINDS = {cls.kind: cls for cls in (Plane, Sphere, Paraboloid, SinusoidBump, Torus)}


def surface_from_dict(entry: dict) -> ImplicitSurface:
    entry = dict(entry)
    kind = entry.pop("kind")
    return SURFACE_KINDS[kind](**entry)


def evaluate(S: ImplicitSurface, x) -> float:
    return float(S.value(np.asarray(x, dtype=float)))


def normal(S: ImplicitSurface, x) -> np.ndarray:
    g = S.gradient(np.asarray(x, dtype=float))
    n = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(n < 1e-10):
        raise DegenerateGradientError("surface gradient vanishes")
    return g / n


def surface_frame(S: ImplicitSurface):
    """A right-handed frame ``(e1, e2, a)`` adapted to axial surfaces."""
    a = getattr(S, "axis", getattr(S, "normal", np.array([0.0, 0.0, 1.0])))
    e1 = perpendicular(a)
    return e1, np.cross(a, e1), np.asarray(a)


class Hit(NamedTuple):
    t: float
    point: np.ndarray
    grazing: bool


def intersect_many(S: ImplicitSurface, starts, dirs, t_min=0.0, t_max=DEFAULT_T_MAX, steps=BRACKET_STEPS):
    """First root of ``f(start + t dir)`` in ``(t_min, t_max]`` for many rays.

    Returns ``(t, points, found, grazing)``; ``t`` and ``points`` are NaN
    where no sign change was bracketed.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    n = len(starts)
    t_out = np.full(n, np.nan)
    found = np.zeros(n, dtype=bool)
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        t_out[sl], found[sl] = _intersect_chunk(S, starts[sl], dirs[sl], t_min, t_max, steps)
    points = starts + t_out[:, None] * dirs
    grazing = np.zeros(n, dtype=bool)
    if found.any():
        nrm = normal(S, points[found])
        grazing[found] = np.abs(_dot(nrm, dirs[found])) < GRAZING_TOL
    return t_out, points, found, grazing


def _intersect_chunk(S, P, U, t_min, t_max, steps):
    n = len(P)
    span = t_max - t_min
    ts = np.linspace(t_min, t_max, steps + 1)
    f = S.value(P[:, None, :] + ts[None, :, None] * U[:, None, :])
    scale = 1.0 + np.max(np.abs(f), axis=1)
    a, b = f[:, :-1], f[:, 1:]
    change = ((a < 0) & (b >= 0)) | ((a > 0) & (b <= 0))
    found = change.any(axis=1)
    idx = np.argmax(change, axis=1)
    rows = np.arange(n)
    lo = ts[idx].copy()
    hi = ts[idx + 1].copy()
    flo = a[rows, idx].copy()
    g = lambda t: S.value(P + t[:, None] * U)  # noqa: E731

    width_goal = 1e-12 * span
    while np.max(hi - lo) > width_goal:
        mid = 0.5 * (lo + hi)
        fm = g(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)

    # Newton polish on g(t); the bisection bracket guards against wild steps
    t = 0.5 * (lo + hi)
    slack = 16.0 * width_goal
    for _ in range(8):
        x = P + t[:, None] * U
        gv = S.value(x)
        dg = _dot(S.gradient(x), U)
        ok = dg != 0
        step = np.where(ok, -gv / np.where(ok, dg, 1.0), 0.0)
        step = np.where(np.abs(step) <= (hi - lo) + slack, step, 0.0)
        t = t + step
        done = (np.abs(gv) <= 1e-11 * scale) & (np.abs(step) <= 4 * np.finfo(float).eps * (1.0 + np.abs(t)))
        if done.all():
            break
    resid = np.abs(g(t))
    found &= resid <= 1e-9 * scale
    return np.where(found, t, np.nan), found


def intersect(L: OrientedLine, S: ImplicitSurface, t_min=0.0, t_max=DEFAULT_T_MAX, start=None, steps=BRACKET_STEPS) -> Hit:
    """Smallest ``t`` in ``(t_min, t_max]`` with ``start + t u`` on ``S``.

    ``t`` is measured from ``start`` (projected onto ``L``), defaulting to
    the foot point.
    """
    if not t_min < t_max:
        raise ValueError("t_min must be less than t_max")
    origin = L.q if start is None else L.q + (np.asarray(start, dtype=float) @ L.u) * L.u
    t, pts, found, grazing = intersect_many(S, origin[None], L.u[None], t_min, t_max, steps)
    if not found[0]:
        raise MissError("no intersection in the search window")
    return Hit(float(t[0]), pts[0], bool(grazing[0]))


@dataclass(frozen=True, eq=False)
class Interface:
    """A surface together with what it does to light.

    ``n1``/``n2`` are the indices before and after a refraction. For a
    mirror ``n1`` is the index of the surrounding medium and ``n2`` is
    ignored.
    """

    surface: ImplicitSurface
    action: str = "reflect"
    n1: float = 1.0
    n2: float = 1.0
    name: str | None = None

    def __post_init__(self):
        if self.action not in ("reflect", "refract"):
            raise ValueError(f"unknown interface action {self.action!r}")
        for v in (self.n1, self.n2):
            if not (np.isfinite(v) and v >= 1.0):
                raise ValueError("refractive indices must be finite and >= 1")
        if self.action == "reflect":
            object.__setattr__(self, "n2", self.n1)

    @property
    def n_in(self) -> float:
        return self.n1

    @property
    def n_out(self) -> float:
        return self.n2
