"""The manifold of oriented lines in 3-space and its symplectic structure.

A line is stored canonically as ``(u, q)``: unit direction ``u`` and foot
point ``q``, the point of the line nearest the origin, so ``q . u = 0``.
This is the cotangent-bundle picture of the unit sphere with its centre at
the origin: ``u`` is the base point on the sphere and ``q`` (restricted to
the tangent plane at ``u``) is the covector.

A tangent vector at a line is a pair ``(dP, du)`` with ``u . du = 0``. The
``dP`` part is only defined modulo ``u``: sliding the reference point along
the line does not change the tangent vector.

The symplectic form is ``omega(t1, t2) = dP1 . du2 - dP2 . du1`` and the
Liouville form for origin ``O`` is ``lambda_O(t) = (P - O) . du``; their
relation ``d lambda_O = omega`` is checked numerically in ``verify``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidTangentError, OutOfChartError, ZeroDirectionError

UNIT_TOL = 1e-12
CANONICAL_TOL = 1e-10
TANGENT_TOL = 1e-8
EQUAL_TOL = 1e-9
CHART_CAP = 0.1


def _vec(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


def canonicalize(points, dirs):
    """Vectorised ``(P, v) -> (u, q)`` over arrays of shape ``(..., 3)``."""
    points = np.asarray(points, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    u = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    q = points - np.sum(points * u, axis=-1, keepdims=True) * u
    return u, q


@dataclass(frozen=True, eq=False)
class OrientedLine:
    u: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        u, q = _vec(self.u), _vec(self.q)
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(q)):
            raise ValueError("line components must be finite")
        if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
            raise ValueError(f"direction is not unit length: |u| = {np.linalg.norm(u)!r}")
        if abs(q @ u) > CANONICAL_TOL * (1.0 + np.linalg.norm(q)):
            raise ValueError("foot point is not orthogonal to the direction")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "q", q)

    def point(self, t: float) -> np.ndarray:
        return self.q + t * self.u

    def isclose(self, other: "OrientedLine", tol: float = EQUAL_TOL) -> bool:
        return line_distance(self, other) <= tol

    def __repr__(self):
        return f"OrientedLine(u={self.u.tolist()}, q={self.q.tolist()})"


@dataclass(frozen=True, eq=False)
class LineTangent:
    dP: np.ndarray
    du: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dP", _vec(self.dP))
        object.__setattr__(self, "du", _vec(self.du))

    def __add__(self, other):
        return LineTangent(self.dP + other.dP, self.du + other.du)

    def __mul__(self, s):
        return LineTangent(s * self.dP, s * self.du)

    __rmul__ = __mul__

    def __neg__(self):
        return LineTangent(-self.dP, -self.du)

    def __repr__(self):
        return f"LineTangent(dP={self.dP.tolist()}, du={self.du.tolist()})"


def line_from_point_dir(P, v) -> OrientedLine:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not norm > 1e-12:
        raise ZeroDirectionError(f"direction has norm {norm!r}")
    u, q = canonicalize(P, v)
    return OrientedLine(u, q)


def reverse(L: OrientedLine) -> OrientedLine:
    return OrientedLine(-L.u, L.q)


def line_distance(L1: OrientedLine, L2: OrientedLine) -> float:
    return float(max(np.linalg.norm(L1.q - L2.q), np.linalg.norm(L1.u - L2.u)))


def _check_tangent(L: OrientedLine, t: LineTangent):
    if abs(L.u @ t.du) > TANGENT_TOL:
        raise InvalidTangentError(f"u . du = {L.u @ t.du!r} is not zero")


def omega(L: OrientedLine, t1: LineTangent, t2: LineTangent) -> float:
    _check_tangent(L, t1)
    _check_tangent(L, t2)
    return float(t1.dP @ t2.du - t2.dP @ t1.du)


def liouville(L: OrientedLine, t: LineTangent, O=(0.0, 0.0, 0.0)) -> float:
    _check_tangent(L, t)
    return float((L.q - np.asarray(O, dtype=float)) @ t.du)


def retract(L: OrientedLine, t: LineTangent, eps: float) -> OrientedLine:
    """Move ``L`` by ``eps * t`` to first order and re-canonicalise."""
    if eps == 0.0:
        return L
    v = L.u + eps * t.du
    if np.linalg.norm(v) < 1e-12:
        raise ZeroDirectionError("retraction collapsed the direction")
    return line_from_point_dir(L.q + eps * t.dP, v)


def foot_velocity(L: OrientedLine, t: LineTangent) -> np.ndarray:
    """Velocity of the foot point ``q`` along ``t``."""
    return t.dP - (t.dP @ L.u + L.q @ t.du) * L.u


def perpendicular(u) -> np.ndarray:
    """A deterministic unit vector orthogonal to ``u``."""
    u = np.asarray(u, dtype=float)
    axis = np.zeros(3)
    axis[np.argmin(np.abs(u))] = 1.0
    e = axis - (axis @ u) * u
    return e / np.linalg.norm(e)


@dataclass(frozen=True, eq=False)
class Chart:
    """Orthographic chart of lines whose direction lies near ``base.u``.

    Coordinates ``(a, b, g, d)``: ``u = normalize(u0 + a e1 + b e2)`` and
    ``q = q0' + g f1 + d f2`` where ``(f1, f2)`` is ``(e1, e2)`` projected
    onto the plane orthogonal to ``u`` and Gram-Schmidt orthonormalised, and
    ``q0'`` is the base foot point projected onto that plane. The base line
    sits at the origin.
    """

    base: OrientedLine
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        e1, e2 = _vec(self.e1), _vec(self.e2)
        u0 = self.base.u
        for val in (e1 @ u0, e2 @ u0, e1 @ e2, np.linalg.norm(e1) - 1, np.linalg.norm(e2) - 1):
            if abs(val) > UNIT_TOL:
                raise ValueError("chart frame is not orthonormal to the base direction")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @classmethod
    def at(cls, base: OrientedLine, e1=None) -> "Chart":
        if e1 is None:
            e1 = perpendicular(base.u)
        else:
            e1 = np.asarray(e1, dtype=float)
            e1 = e1 - (e1 @ base.u) * base.u
            e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(base.u, e1)
        return cls(base, e1, e2)

    def _frame(self, u):
        g1 = self.e1 - (self.e1 @ u) * u
        n1 = np.linalg.norm(g1)
        f1 = g1 / n1
        h = self.e2 - (self.e2 @ u) * u
        g2 = h - (h @ f1) * f1
        n2 = np.linalg.norm(g2)
        return f1, g2 / n2, (g1, n1, h, g2, n2)

    def _frame_derivative(self, u, du, f1, f2, aux):
        g1, n1, h, g2, n2 = aux
        dg1 = -(self.e1 @ du) * u - (self.e1 @ u) * du
        df1 = (dg1 - (f1 @ dg1) * f1) / n1
        dh = -(self.e2 @ du) * u - (self.e2 @ u) * du
        dg2 = dh - (dh @ f1 + h @ df1) * f1 - (h @ f1) * df1
        df2 = (dg2 - (f2 @ dg2) * f2) / n2
        return df1, df2

    def _check(self, u):
        cos = u @ self.base.u
        if cos <= CHART_CAP:
            raise OutOfChartError(f"u . u0 = {cos!r} is outside the chart")
        return cos

    def coords(self, L: OrientedLine) -> np.ndarray:
        cos = self._check(L.u)
        f1, f2, _ = self._frame(L.u)
        r = L.q - self.base.q
        return np.array([(L.u @ self.e1) / cos, (L.u @ self.e2) / cos, r @ f1, r @ f2])

    def line(self, c) -> OrientedLine:
        c = np.asarray(c, dtype=float)
        w = self.base.u + c[0] * self.e1 + c[1] * self.e2
        u = w / np.linalg.norm(w)
        f1, f2, _ = self._frame(u)
        q0 = self.base.q
        q = c[2] * f1 + c[3] * f2 + q0 - (q0 @ u) * u
        q = q - (q @ u) * u
        return OrientedLine(u, q)

    def push(self, L: OrientedLine, t: LineTangent) -> np.ndarray:
        """Chart-coordinate velocity of the tangent ``t`` at ``L``."""
        _check_tangent(L, t)
        u, du = L.u, t.du
        cos = self._check(u)
        dcos = du @ self.base.u
        da = (du @ self.e1) / cos - (u @ self.e1) * dcos / cos**2
        db = (du @ self.e2) / cos - (u @ self.e2) * dcos / cos**2
        f1, f2, aux = self._frame(u)
        df1, df2 = self._frame_derivative(u, du, f1, f2, aux)
        dq = foot_velocity(L, t)
        r = L.q - self.base.q
        return np.array([da, db, dq @ f1 + r @ df1, dq @ f2 + r @ df2])

    def tangent(self, c, dc) -> LineTangent:
        """Tangent at ``line(c)`` whose chart velocity is ``dc``."""
        c = np.asarray(c, dtype=float)
        dc = np.asarray(dc, dtype=float)
        w = self.base.u + c[0] * self.e1 + c[1] * self.e2
        nw = np.linalg.norm(w)
        u = w / nw
        dw = dc[0] * self.e1 + dc[1] * self.e2
        du = (dw - (u @ dw) * u) / nw
        f1, f2, aux = self._frame(u)
        df1, df2 = self._frame_derivative(u, du, f1, f2, aux)
        q0 = self.base.q
        dq = dc[2] * f1 + dc[3] * f2 + c[2] * df1 + c[3] * df2 - (q0 @ du) * u - (q0 @ u) * du
        return LineTangent(dq, du)

    def basis(self, L: OrientedLine) -> list[LineTangent]:
        c = self.coords(L)
        return [self.tangent(c, row) for row in np.eye(4)]


def chart_coords(chart: Chart, L: OrientedLine) -> np.ndarray:
    return chart.coords(L)


def chart_line(chart: Chart, coords) -> OrientedLine:
    return chart.line(coords)
