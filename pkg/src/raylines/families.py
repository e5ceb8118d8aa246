"""Two-parameter ray families, the normality test and wavefronts.

A family is a smooth map ``(k1, k2) -> (P, u)``: a point on each ray and
its unit direction. Pulling the symplectic form back along it gives

    c(k) dk1 ^ dk2,   c = dP/dk1 . du/dk2 - dP/dk2 . du/dk1,

and the family is normal (admits orthogonal surfaces) exactly when ``c``
vanishes. Equivalently ``u . dP`` is closed, and a wavefront is
``W = P + lam u`` with ``d lam = -u . dP``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import FamilyError, NonNormalFamilyError, RankDeficientError, TraceFailure
from .optics import OK, STATUS_NAMES, OpticalSystem, trace_many
from .surfaces import ImplicitSurface, Paraboloid, Plane, SinusoidBump, Sphere, Torus, surface_frame

FD_STEP = 1e-5
RANK_TOL = 1e-8


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _project(u, v):
    """Component of ``v`` orthogonal to the unit vector ``u``."""
    return v - _dot(u, v)[..., None] * u


@dataclass(frozen=True, eq=False)
class RayFamily:
    """``func(k1, k2) -> (P, u)``, broadcasting over array arguments.

    ``partials(k1, k2) -> (dP/dk1, dP/dk2, du/dk1, du/dk2)`` is optional;
    without it derivatives are central differences with step
    ``fd_step * span`` on each axis.
    """

    func: Callable
    domain: tuple
    partials: Callable | None = None
    name: str = "family"
    params: dict = field(default_factory=dict)
    fd_step: float = FD_STEP

    def __post_init__(self):
        lo1, hi1, lo2, hi2 = map(float, self.domain)
        if not (lo1 < hi1 and lo2 < hi2):
            raise FamilyError("parameter domain is empty")
        object.__setattr__(self, "domain", (lo1, hi1, lo2, hi2))

    def __call__(self, k1, k2):
        return self.func(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))

    @property
    def steps(self):
        lo1, hi1, lo2, hi2 = self.domain
        return self.fd_step * (hi1 - lo1), self.fd_step * (hi2 - lo2)

    def without_partials(self) -> "RayFamily":
        return replace(self, partials=None)

    def inside(self, k1, k2, margin=(0.0, 0.0)):
        lo1, hi1, lo2, hi2 = self.domain
        k1, k2 = np.asarray(k1), np.asarray(k2)
        return (k1 >= lo1 + margin[0]) & (k1 <= hi1 - margin[0]) & (k2 >= lo2 + margin[1]) & (k2 <= hi2 - margin[1])

    def derivatives(self, k1, k2):
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        if self.partials is not None:
            return self.partials(k1, k2)
        h1, h2 = self.steps
        if not np.all(self.inside(k1, k2, (h1 * (1 - 1e-9), h2 * (1 - 1e-9)))):
            raise FamilyError("parameter too close to the domain boundary for finite differences")
        # one batched call for all four probes
        K1 = np.stack([k1 + h1, k1 - h1, k1, k1])
        K2 = np.stack([k2, k2, k2 + h2, k2 - h2])
        P, u = self(K1, K2)
        return (P[0] - P[1]) / (2 * h1), (P[2] - P[3]) / (2 * h2), (u[0] - u[1]) / (2 * h1), (u[2] - u[3]) / (2 * h2)

    def grid(self, n1: int, n2: int):
        """Node coordinates of an ``n1 x n2`` grid, inset for finite differences."""
        if n1 < 3 or n2 < 3:
            raise FamilyError("grids must be at least 3x3")
        lo1, hi1, lo2, hi2 = self.domain
        m1, m2 = self.steps
        return np.linspace(lo1 + 2 * m1, hi1 - 2 * m1, n1), np.linspace(lo2 + 2 * m2, hi2 - 2 * m2, n2)


def pullback_coefficient(F: RayFamily, k1, k2):
    """Coefficient of ``dk1 ^ dk2`` in the pulled-back symplectic form."""
    P1, P2, u1, u2 = F.derivatives(k1, k2)
    c = _dot(P1, u2) - _dot(P2, u1)
    return float(c) if np.ndim(c) == 0 else c


def check_rank(F: RayFamily, k1, k2, tol=RANK_TOL):
    """Raise ``RankDeficientError`` where the family is not a 2-parameter one."""
    P1, P2, u1, u2 = F.derivatives(k1, k2)
    J = np.stack([np.concatenate([P1, u1], -1), np.concatenate([P2, u2], -1)], -1)
    sv = np.linalg.svd(J.reshape(-1, 6, 2), compute_uv=False)[:, 1]
    bad = np.flatnonzero(sv <= tol)
    if len(bad):
        j = bad[0]
        where = (float(np.ravel(np.broadcast_to(k1, np.shape(J)[:-2]))[j]), float(np.ravel(np.broadcast_to(k2, np.shape(J)[:-2]))[j]))
        raise RankDeficientError(f"family has rank < 2 at k = {where}", location=where)
    return sv


@dataclass
class NormalityReport:
    family: str
    shape: tuple
    tol: float
    max_abs: float
    argmax: tuple
    location: tuple
    passed: bool
    k1: np.ndarray = field(repr=False, default=None)
    k2: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)


def is_normal(F: RayFamily, grid=(21, 21), tol=1e-6) -> NormalityReport:
    k1, k2 = F.grid(*grid)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    check_rank(F, K1, K2)
    c = pullback_coefficient(F, K1, K2)
    a = np.abs(c)
    # ties go to the lowest flat index
    j = int(np.argmax(a))
    i1, i2 = np.unravel_index(j, a.shape)
    m = float(a[i1, i2])
    return NormalityReport(
        family=F.name,
        shape=tuple(grid),
        tol=tol,
        max_abs=m,
        argmax=(int(i1), int(i2)),
        location=(float(k1[i1]), float(k2[i2])),
        passed=bool(m <= tol),
        k1=k1,
        k2=k2,
        values=c,
    )


# ---------------------------------------------------------------- built-ins


def _cap_frame(base):
    from .line_space import perpendicular

    base = np.asarray(base, dtype=float)
    base = base / np.linalg.norm(base)
    b1 = perpendicular(base)
    return b1, np.cross(base, b1), base


def point_source(source=(0.0, 0.0, 0.0), base=(0.0, 0.0, 1.0), domain=(-0.3, 0.3, -0.3, 0.3)) -> RayFamily:
    """Rays leaving ``source``; ``(k1, k2)`` are angles on a cap around ``base``.

    ``u = sin k1 b1 + cos k1 (sin k2 b2 + cos k2 base)``: both coordinate
    curves are circles traversed at constant speed.
    """
    S0 = np.asarray(source, dtype=float)
    b1, b2, b3 = _cap_frame(base)

    def func(k1, k2):
        s1, c1 = np.sin(k1)[..., None], np.cos(k1)[..., None]
        s2, c2 = np.sin(k2)[..., None], np.cos(k2)[..., None]
        u = s1 * b1 + c1 * (s2 * b2 + c2 * b3)
        return np.broadcast_to(S0, u.shape).copy(), u

    def partials(k1, k2):
        s1, c1 = np.sin(k1)[..., None], np.cos(k1)[..., None]
        s2, c2 = np.sin(k2)[..., None], np.cos(k2)[..., None]
        zero = np.zeros(np.shape(k1) + (3,))
        u1 = c1 * b1 - s1 * (s2 * b2 + c2 * b3)
        u2 = c1 * (c2 * b2 - s2 * b3)
        return zero, zero.copy(), u1, u2

    return RayFamily(func, domain, partials, name="point_source",
                     params={"source": S0.tolist(), "base": b3.tolist(), "domain": list(domain)})


def _patch(S: ImplicitSurface):
    """Default parametrisation ``(k1, k2) -> (P, dP/dk1, dP/dk2)`` and domain."""
    e1, e2, a = surface_frame(S)
    if isinstance(S, Plane):
        p = S.point

        def patch(k1, k2):
            P = p + k1[..., None] * e1 + k2[..., None] * e2
            return P, np.broadcast_to(e1, P.shape).copy(), np.broadcast_to(e2, P.shape).copy()

        return patch, (-1.0, 1.0, -1.0, 1.0)
    if isinstance(S, Sphere):
        c, r = S.center, S.radius

        def patch(k1, k2):
            s1, c1 = np.sin(k1)[..., None], np.cos(k1)[..., None]
            s2, c2 = np.sin(k2)[..., None], np.cos(k2)[..., None]
            n = s1 * c2 * e1 + s1 * s2 * e2 + c1 * a
            d1 = c1 * c2 * e1 + c1 * s2 * e2 - s1 * a
            d2 = -s1 * s2 * e1 + s1 * c2 * e2
            return c + r * n, r * d1, r * d2

        return patch, (0.4, 1.2, 0.0, 1.0)
    if isinstance(S, Paraboloid):
        v, f = S.vertex, S.focal

        def patch(k1, k2):
            x, y = k1[..., None], k2[..., None]
            P = v + x * e1 + y * e2 + (x**2 + y**2) / (4 * f) * a
            return P, e1 + x / (2 * f) * a, e2 + y / (2 * f) * a

        return patch, (-1.0, 1.0, -1.0, 1.0)
    if isinstance(S, SinusoidBump):
        A, wx, wy, h = S.amplitude, S.wx, S.wy, S.height
        ex, ey, ez = np.eye(3)

        def patch(k1, k2):
            x, y = k1[..., None], k2[..., None]
            P = x * ex + y * ey + (h + A * np.sin(wx * x) * np.sin(wy * y)) * ez
            d1 = ex + A * wx * np.cos(wx * x) * np.sin(wy * y) * ez
            d2 = ey + A * wy * np.sin(wx * x) * np.cos(wy * y) * ez
            return P, d1, d2

        return patch, (-1.0, 1.0, -1.0, 1.0)
    if isinstance(S, Torus):
        c, R, r = S.center, S.major, S.minor

        def patch(k1, k2):
            s1, c1 = np.sin(k1)[..., None], np.cos(k1)[..., None]
            s2, c2 = np.sin(k2)[..., None], np.cos(k2)[..., None]
            radial = c1 * e1 + s1 * e2
            P = c + (R + r * c2) * radial + r * s2 * a
            d1 = (R + r * c2) * (-s1 * e1 + c1 * e2)
            d2 = -r * s2 * radial + r * c2 * a
            return P, d1, d2

        return patch, (0.0, 1.0, 0.2, 1.2)
    raise FamilyError(f"no default patch for surface kind {S.kind!r}")


def normal_congruence(S: ImplicitSurface, domain=None, patch=None, flip=False) -> RayFamily:
    """Normals of ``S`` along a patch ``(k1, k2) -> (P, dP/dk1, dP/dk2)``.

    Directions follow the gradient of the level function (reversed when
    ``flip``). Their derivatives come from the Hessian, so the partials are
    exact.
    """
    default_patch, default_domain = _patch(S)
    patch = patch or default_patch
    domain = domain or default_domain
    sign = -1.0 if flip else 1.0

    def normals(P):
        g = S.gradient(P)
        gn = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.any(gn < 1e-10):
            from .errors import DegenerateGradientError

            raise DegenerateGradientError("surface gradient vanishes on the patch")
        return sign * g / gn, gn

    def func(k1, k2):
        P, _, _ = patch(k1, k2)
        return P, normals(P)[0]

    def partials(k1, k2):
        P, d1, d2 = patch(k1, k2)
        u, gn = normals(P)
        H = S.hessian(P)
        u1 = sign * _project(u, np.einsum("...ij,...j->...i", H, d1)) / gn
        u2 = sign * _project(u, np.einsum("...ij,...j->...i", H, d2)) / gn
        return d1, d2, u1, u2

    return RayFamily(func, domain, partials, name=f"normal_congruence:{S.kind}",
                     params={"surface": S.to_dict(), "domain": list(domain), "flip": flip})


def skew_family(twist=1.0, domain=(0.0, 1.0, 0.0, 1.0)) -> RayFamily:
    """``P = (k1, k2, 0)``, ``u = normalize(-twist k2, twist k1, 1)``.

    Its pullback coefficient is ``-twist (2 + r^2) / (1 + r^2)^(3/2)`` with
    ``r = twist |k|``, nonzero everywhere and largest at ``k = 0``.
    """
    ex, ey, ez = np.eye(3)

    def func(k1, k2):
        w = -twist * k2[..., None] * ex + twist * k1[..., None] * ey + ez
        P = k1[..., None] * ex + k2[..., None] * ey
        return P, w / np.linalg.norm(w, axis=-1, keepdims=True)

    def partials(k1, k2):
        P, u = func(k1, k2)
        w = -twist * k2[..., None] * ex + twist * k1[..., None] * ey + ez
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        u1 = _project(u, np.broadcast_to(twist * ey, u.shape)) / nw
        u2 = _project(u, np.broadcast_to(-twist * ex, u.shape)) / nw
        return np.broadcast_to(ex, P.shape).copy(), np.broadcast_to(ey, P.shape).copy(), u1, u2

    return RayFamily(func, domain, partials, name="skew_family", params={"twist": twist, "domain": list(domain)})


def grid_family(k1, k2, P, u, name="grid") -> RayFamily:
    """Bicubic-spline family through sampled rays on a rectangular grid."""
    from scipy.interpolate import RectBivariateSpline

    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    P = np.asarray(P, dtype=float)
    u = np.asarray(u, dtype=float)
    deg = min(3, len(k1) - 1, len(k2) - 1)
    sp_P = [RectBivariateSpline(k1, k2, P[..., c], kx=deg, ky=deg) for c in range(3)]
    sp_u = [RectBivariateSpline(k1, k2, u[..., c], kx=deg, ky=deg) for c in range(3)]

    def ev(splines, a, b, dx=0, dy=0):
        a, b = np.broadcast_arrays(a, b)
        return np.stack([s.ev(a, b, dx=dx, dy=dy) for s in splines], axis=-1)

    def func(a, b):
        w = ev(sp_u, a, b)
        return ev(sp_P, a, b), w / np.linalg.norm(w, axis=-1, keepdims=True)

    def partials(a, b):
        w = ev(sp_u, a, b)
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        uu = w / nw
        return (
            ev(sp_P, a, b, dx=1),
            ev(sp_P, a, b, dy=1),
            _project(uu, ev(sp_u, a, b, dx=1)) / nw,
            _project(uu, ev(sp_u, a, b, dy=1)) / nw,
        )

    return RayFamily(func, (k1[0], k1[-1], k2[0], k2[-1]), partials, name=name)


BUILTINS = {"point_source": point_source, "normal_congruence": normal_congruence, "skew_family": skew_family}


# ------------------------------------------------------------- transforms


def transform(F: RayFamily, system: OpticalSystem) -> RayFamily:
    """The family of outgoing rays after ``system``.

    Each ray leaves ``P(k)`` along ``u(k)``; the new family uses the last
    hit point and the final direction.
    """
    system = system if isinstance(system, OpticalSystem) else OpticalSystem(tuple(system))
    if not len(system):
        raise ValueError("cannot transform through an empty optical system")

    def func(k1, k2):
        P, u = F(k1, k2)
        shape = P.shape
        out = trace_many(P.reshape(-1, 3), u.reshape(-1, 3), system)
        bad = np.flatnonzero(out["status"] != OK)
        if len(bad):
            j = bad[0]
            kk1, kk2 = np.broadcast_arrays(k1, k2)
            loc = (float(kk1.ravel()[j]), float(kk2.ravel()[j]))
            raise TraceFailure(
                f"{STATUS_NAMES[int(out['status'][j])]} at interface {int(out['failed_at'][j])} for k = {loc}",
                interface=int(out["failed_at"][j]),
                location=loc,
            )
        return out["point"].reshape(shape), out["u"].reshape(shape)

    return RayFamily(func, F.domain, None, name=f"transform({F.name})", params=dict(F.params), fd_step=F.fd_step)


# ------------------------------------------------------------- wavefronts


class WavefrontSample(NamedTuple):
    k: tuple
    lam: float
    point: np.ndarray


@dataclass
class Wavefront:
    """Wavefront reconstructed on a grid by integrating ``d lam = -u . dP``.

    ``lam`` comes from the path that runs along ``k1`` first, ``lam_alt``
    from the path along ``k2`` first; ``discrepancy`` is their largest gap.
    """

    family: str
    k1: np.ndarray
    k2: np.ndarray
    origin: tuple
    lam0: float
    lam: np.ndarray
    lam_alt: np.ndarray
    P: np.ndarray
    u: np.ndarray
    points: np.ndarray
    discrepancy: float

    def samples(self) -> list[WavefrontSample]:
        out = []
        for i, a in enumerate(self.k1):
            for j, b in enumerate(self.k2):
                out.append(WavefrontSample((float(a), float(b)), float(self.lam[i, j]), self.points[i, j]))
        return out


def _edge_integrals(F: RayFamily, k1, k2, axis: int, refine: int):
    """Integral of ``u . dP/dk_axis`` over each grid edge along ``axis``.

    Composite trapezoid on ``refine`` and ``2 refine`` sub-intervals per
    edge, combined by one Richardson step.
    """
    m = 2 * refine
    s = np.linspace(0.0, 1.0, m + 1)
    if axis == 0:
        h = np.diff(k1)
        a = k1[:-1, None, None] + h[:, None, None] * s[None, None, :]
        b = np.broadcast_to(k2[None, :, None], (len(k1) - 1, len(k2), m + 1))
        a = np.broadcast_to(a, b.shape)
        hh = h[:, None]
    else:
        h = np.diff(k2)
        b = k2[None, :-1, None] + h[None, :, None] * s[None, None, :]
        a = np.broadcast_to(k1[:, None, None], (len(k1), len(k2) - 1, m + 1))
        b = np.broadcast_to(b, a.shape)
        hh = h[None, :]
    _, u = F(a, b)
    P1, P2, _, _ = F.derivatives(a, b)
    g = _dot(u, P1 if axis == 0 else P2)
    fine = hh * (g[..., 0] / 2 + g[..., 1:-1].sum(-1) + g[..., -1] / 2) / m
    gc = g[..., ::2]
    coarse = hh * (gc[..., 0] / 2 + gc[..., 1:-1].sum(-1) + gc[..., -1] / 2) / refine
    return (4.0 * fine - coarse) / 3.0


def _staircase(E1, E2, i0, j0, along_k1_first: bool):
    n1, n2 = E1.shape[0] + 1, E2.shape[1] + 1
    # signed cumulative integrals from the origin node along each line
    C1 = np.concatenate([np.zeros((1, n2)), np.cumsum(E1, axis=0)], axis=0)
    C1 = C1 - C1[i0:i0 + 1, :]
    C2 = np.concatenate([np.zeros((n1, 1)), np.cumsum(E2, axis=1)], axis=1)
    C2 = C2 - C2[:, j0:j0 + 1]
    if along_k1_first:
        return C1[:, j0][:, None] + C2
    return C2[i0, :][None, :] + C1


def wavefront(F: RayFamily, k0=None, lam0=0.0, grid=(41, 41), refine=1, loop_tol=None) -> Wavefront:
    """Reconstruct the surface ``P + lam u`` orthogonal to the rays.

    ``k0`` is snapped to the nearest grid node (default: the centre) and
    ``lam(k0) = lam0``. Families whose staircase paths disagree by more than
    ``loop_tol`` (default ``1e-6`` times the grid area) are refused.
    """
    k1, k2 = F.grid(*grid)
    if k0 is None:
        i0, j0 = len(k1) // 2, len(k2) // 2
    else:
        i0, j0 = int(np.argmin(np.abs(k1 - k0[0]))), int(np.argmin(np.abs(k2 - k0[1])))
    E1 = _edge_integrals(F, k1, k2, 0, refine)
    E2 = _edge_integrals(F, k1, k2, 1, refine)
    lam = lam0 - _staircase(E1, E2, i0, j0, True)
    lam_alt = lam0 - _staircase(E1, E2, i0, j0, False)
    gap = float(np.max(np.abs(lam - lam_alt)))
    area = (k1[-1] - k1[0]) * (k2[-1] - k2[0])
    if loop_tol is None:
        loop_tol = 1e-6 * area
    if gap > loop_tol:
        raise NonNormalFamilyError(
            f"path-dependent wavefront (loop residual {gap:.3e} > {loop_tol:.3e}); family is not normal"
        )
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    P, u = F(K1, K2)
    return Wavefront(F.name, k1, k2, (float(k1[i0]), float(k2[j0])), lam0, lam, lam_alt, P, u,
                     P + lam[..., None] * u, gap)


def _d4(f, h, axis):
    """Fourth-order central difference on interior nodes (2-node margin)."""
    f = np.moveaxis(f, axis, 0)
    d = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def orthogonality_residual(F: RayFamily, wf: Wavefront) -> float:
    """Largest ``|u . dW/dk1| + |u . dW/dk2|`` over interior nodes.

    ``dlam`` is differenced on the grid; ``dP`` and ``du`` come from the
    family's own derivatives.
    """
    if len(wf.k1) < 5 or len(wf.k2) < 5:
        raise FamilyError("orthogonality residual needs at least a 5x5 grid")
    h1 = wf.k1[1] - wf.k1[0]
    h2 = wf.k2[1] - wf.k2[0]
    inner = (slice(2, -2), slice(2, -2))
    dl1 = _d4(wf.lam, h1, 0)[:, 2:-2]
    dl2 = _d4(wf.lam, h2, 1)[2:-2, :]
    K1, K2 = np.meshgrid(wf.k1[2:-2], wf.k2[2:-2], indexing="ij")
    P1, P2, u1, u2 = F.derivatives(K1, K2)
    u = wf.u[inner]
    lam = wf.lam[inner][..., None]
    W1 = P1 + dl1[..., None] * u + lam * u1
    W2 = P2 + dl2[..., None] * u + lam * u2
    return float(np.max(np.abs(_dot(u, W1)) + np.abs(_dot(u, W2))))
