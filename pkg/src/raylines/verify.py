"""Numerical checks of the structural claims.

* optical maps are symplectic, with refraction scaling the form by the
  refractive index (``check_symplectic``);
* normal families stay normal after any optical system (``malus_check``);
* identities of the line space itself (``structure_checks``).

Every check returns a ``CheckReport``. Reports are a deterministic function
of their inputs and seed; only ``elapsed`` varies between runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonNormalFamilyError, RayDomainError, SamplingExhausted
from .families import RayFamily, is_normal, transform
from .line_space import (
    Chart,
    LineTangent,
    OrientedLine,
    line_distance,
    line_from_point_dir,
    liouville,
    omega,
    perpendicular,
)
from .optics import LineMap, OpticalSystem, differentials

RESAMPLE_CAP = 1000


@dataclass
class CheckReport:
    name: str
    passed: bool
    max_residual: float
    tol: float
    location: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    seed: int | None = None
    details: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    children: list = field(default_factory=list)
    elapsed: float = 0.0


@dataclass(frozen=True)
class LineSampler:
    """Directions uniform on a cap around ``axis``; a uniform point in the
    box ``center +- half_widths`` fixes where the line passes."""

    axis: tuple = (0.0, 0.0, -1.0)
    half_angle: float = 0.5
    center: tuple = (0.0, 0.0, 0.0)
    half_widths: tuple = (0.5, 0.5, 0.5)

    def sample(self, rng: np.random.Generator) -> OrientedLine:
        a = np.asarray(self.axis, dtype=float)
        a = a / np.linalg.norm(a)
        e1 = perpendicular(a)
        e2 = np.cross(a, e1)
        cos_t = rng.uniform(np.cos(self.half_angle), 1.0)
        phi = rng.uniform(0.0, 2 * np.pi)
        sin_t = np.sqrt(1.0 - cos_t**2)
        u = cos_t * a + sin_t * (np.cos(phi) * e1 + np.sin(phi) * e2)
        P = np.asarray(self.center, dtype=float) + rng.uniform(-1.0, 1.0, 3) * np.asarray(self.half_widths, dtype=float)
        return line_from_point_dir(P, u)


def random_tangent(chart: Chart, L: OrientedLine, rng: np.random.Generator) -> LineTangent:
    """Tangent with a random unit-length chart velocity."""
    v = rng.standard_normal(4)
    return chart.tangent(chart.coords(L), v / np.linalg.norm(v))


def _as_map(optic) -> LineMap:
    return optic if isinstance(optic, LineMap) else LineMap(optic)


def check_symplectic(optic, sampler: LineSampler, lines=100, pairs=4, eps=1e-5, tol=1e-6, seed=0, name=None) -> CheckReport:
    """Compare ``n_out omega(Df t1, Df t2)`` with ``n_in omega(t1, t2)``.

    Lines whose image or finite-difference probes leave the map's domain
    (miss, grazing hit, total internal reflection) are redrawn, at most
    ``RESAMPLE_CAP`` times per requested line.
    """
    start = time.perf_counter()
    f = _as_map(optic)
    n_in, n_out = f.n_in, f.n_out
    rng = np.random.default_rng(seed)
    rows = []
    resampled = 0
    worst = (-1.0, 0, 0)
    for i in range(lines):
        for attempt in range(RESAMPLE_CAP):
            L = sampler.sample(rng)
            chart = Chart.at(L)
            tangents = [random_tangent(chart, L, rng) for _ in range(2 * pairs)]
            try:
                image, pushed = differentials(f, L, tangents, eps)
            except RayDomainError:
                resampled += 1
                continue
            break
        else:
            raise SamplingExhausted(f"no line in the map's domain after {RESAMPLE_CAP} draws")
        for j in range(pairs):
            t1, t2 = tangents[2 * j], tangents[2 * j + 1]
            ref = n_in * omega(L, t1, t2)
            got = n_out * omega(image, pushed[2 * j], pushed[2 * j + 1])
            r = abs(got - ref) / (1.0 + abs(ref))
            rows.append([i, j, ref, got, r])
            if r > worst[0]:
                worst = (r, i, j)
    m = worst[0]
    return CheckReport(
        name=name or "symplectic",
        passed=bool(m <= tol),
        max_residual=m,
        tol=tol,
        location={"line": worst[1], "pair": worst[2]},
        samples={"lines": lines, "pairs": pairs, "resampled": resampled},
        seed=seed,
        details={"n_in": n_in, "n_out": n_out, "eps": eps},
        columns=["line", "pair", "reference", "image", "residual"],
        rows=rows,
        elapsed=time.perf_counter() - start,
    )


def normality_report(F: RayFamily, grid=(21, 21), tol=1e-6, name=None) -> CheckReport:
    start = time.perf_counter()
    nr = is_normal(F, grid, tol)
    rows = []
    for a in range(nr.shape[0]):
        for b in range(nr.shape[1]):
            rows.append([a, b, float(nr.k1[a]), float(nr.k2[b]), float(nr.values[a, b])])
    return CheckReport(
        name=name or f"normality:{F.name}",
        passed=nr.passed,
        max_residual=nr.max_abs,
        tol=tol,
        location={"i": nr.argmax[0], "j": nr.argmax[1], "k1": nr.location[0], "k2": nr.location[1]},
        samples={"n1": nr.shape[0], "n2": nr.shape[1]},
        columns=["i", "j", "k1", "k2", "coefficient"],
        rows=rows,
        elapsed=time.perf_counter() - start,
    )


def malus_check(F: RayFamily, system, grid=(21, 21), tol=1e-6) -> CheckReport:
    """Is the image of a normal family under ``system`` still normal?"""
    start = time.perf_counter()
    system = system if isinstance(system, OpticalSystem) else OpticalSystem(tuple(system))
    before = is_normal(F, grid, tol)
    if not before.passed:
        raise NonNormalFamilyError(
            f"input family is not normal (max coefficient {before.max_abs:.3e} > {tol:.1e})"
        )
    rep = normality_report(transform(F, system), grid, tol, name="malus")
    rep.details = {"input_max": before.max_abs, "interfaces": len(system)}
    rep.elapsed = time.perf_counter() - start
    return rep


# ------------------------------------------------------------ structure suite

def loop_integral(chart: Chart, corners, O=(0.0, 0.0, 0.0), O_ref=None, nodes=12) -> float:
    """Integral of the Liouville form around a closed polygon in chart
    coordinates (Gauss-Legendre with ``nodes`` points per edge).

    With ``O_ref`` the integrand is ``lambda_O - lambda_O_ref``.
    """
    corners = np.asarray(corners, dtype=float)
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, b in zip(corners, np.roll(corners, -1, axis=0)):
        d = b - a
        for x, w in zip(xs, ws):
            c = a + 0.5 * (x + 1.0) * d
            L = chart.line(c)
            t = chart.tangent(c, d)
            val = liouville(L, t, O)
            if O_ref is not None:
                val -= liouville(L, t, O_ref)
            total += 0.5 * w * val
    return total


def _random_line(rng, box=2.0) -> OrientedLine:
    u = rng.standard_normal(3)
    return line_from_point_dir(rng.uniform(-box, box, 3), u)


def _sub(name, residual, tol, samples, location=None, **details):
    return CheckReport(name=name, passed=bool(residual <= tol), max_residual=float(residual), tol=tol,
                       location=location or {}, samples={"count": samples}, details=details)


def structure_checks(seed=0, budget=100, loop_step=1e-4) -> CheckReport:
    """Identities of the line space: ``d lambda_O = omega``, origin-shift
    exactness of ``lambda_O' - lambda_O``, antisymmetry and representative
    independence of ``omega``, chart round trips and non-degeneracy."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    lines = [_random_line(rng) for _ in range(budget)]
    charts = [Chart.at(L) for L in lines]

    anti = rep = bil = 0.0
    for L, ch in zip(lines, charts):
        t1, t2, t3 = (random_tangent(ch, L, rng) for _ in range(3))
        w12 = omega(L, t1, t2)
        anti = max(anti, abs(w12 + omega(L, t2, t1)), abs(omega(L, t1, t1)))
        s1, s2 = rng.standard_normal(2)
        t1s = LineTangent(t1.dP + s1 * L.u, t1.du)
        t2s = LineTangent(t2.dP + s2 * L.u, t2.du)
        rep = max(rep, abs(omega(L, t1s, t2s) - w12))
        a, b = rng.standard_normal(2)
        lhs = omega(L, a * t1 + b * t3, t2)
        bil = max(bil, abs(lhs - a * w12 - b * omega(L, t3, t2)) / (1.0 + abs(lhs)))
    children = [
        _sub("omega_antisymmetry", anti, 1e-12, budget),
        _sub("omega_representative", rep, 1e-12, budget),
        _sub("omega_bilinearity", bil, 1e-12, budget),
    ]

    worst, where = 0.0, 0
    for n, (L, ch) in enumerate(zip(lines, charts)):
        basis = ch.basis(L)
        G = np.array([[omega(L, a, b) for b in basis] for a in basis])
        # smallest over basis vectors of the best pairing partner
        weakest = float(np.min(np.max(np.abs(G), axis=1)))
        if n == 0 or weakest < worst:
            worst, where = weakest, n
    children.append(CheckReport(name="omega_nondegenerate", passed=bool(worst > 1e-8), max_residual=worst,
                                tol=1e-8, location={"line": where}, samples={"count": budget},
                                details={"criterion": "min pairing > tol"}))

    dl, where = 0.0, 0
    h = loop_step
    for n, (L, ch) in enumerate(zip(lines, charts)):
        t1, t2 = random_tangent(ch, L, rng), random_tangent(ch, L, rng)
        a, b = ch.push(L, t1), ch.push(L, t2)
        c0 = ch.coords(L)
        corners = [c0 + h * (sa * a + sb * b) / 2 for sa, sb in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
        O = rng.uniform(-1.0, 1.0, 3)
        est = loop_integral(ch, corners, O) / h**2
        ref = omega(L, t1, t2)
        r = abs(est - ref) / (1.0 + abs(ref))
        if r > dl:
            dl, where = r, n
    children.append(_sub("dlambda_equals_omega", dl, 1e-6, budget, {"line": where}, loop_step=h))

    shift, where = 0.0, 0
    for n, (L, ch) in enumerate(zip(lines, charts)):
        c0 = ch.coords(L)
        radius = 0.05 * (1.0 + np.linalg.norm(c0))
        angles = np.sort(rng.uniform(0, 2 * np.pi, 8))
        dirs = rng.standard_normal((2, 4))
        corners = [c0 + radius * (np.cos(t) * dirs[0] + np.sin(t) * dirs[1]) for t in angles]
        length = float(np.sum(np.linalg.norm(np.diff(np.vstack([corners, corners[:1]]), axis=0), axis=1)))
        O, O2 = rng.uniform(-2.0, 2.0, (2, 3))
        r = abs(loop_integral(ch, corners, O2, O_ref=O)) / length
        if r > shift:
            shift, where = r, n
    children.append(_sub("origin_shift_exact", shift, 1e-8, budget, {"line": where}, criterion="per unit loop length"))

    rt, where = 0.0, 0
    for n, (L, ch) in enumerate(zip(lines, charts)):
        c = ch.coords(L) + rng.uniform(-0.5, 0.5, 4)
        M = ch.line(c)
        r = max(line_distance(ch.line(ch.coords(M)), M), float(np.max(np.abs(ch.coords(M) - c))) / (1 + np.max(np.abs(c))))
        if r > rt:
            rt, where = r, n
    children.append(_sub("chart_round_trip", rt, 1e-10, budget, {"line": where}))

    ratio = max(c.max_residual / c.tol for c in children if c.name != "omega_nondegenerate")
    return CheckReport(
        name="structure",
        passed=all(c.passed for c in children),
        max_residual=float(ratio),
        tol=1.0,
        samples={"count": budget},
        seed=seed,
        details={"max_residual": "worst residual/tol over sub-checks"},
        children=children,
        elapsed=time.perf_counter() - start,
    )


def broken_refract_dirs(u, n, n1, n2):
    """Snell's law with the tangential factor ``n1/n2`` replaced by 1.

    Only useful as a negative control: the resulting map does not scale
    the symplectic form by ``n2/n1``.
    """
    n = np.where(np.sum(u * n, -1, keepdims=True) > 0, -n, n)
    c1 = -np.sum(u * n, -1, keepdims=True)
    s2 = (n1 / n2) ** 2 * (1.0 - c1**2)
    tir = s2[..., 0] >= 1.0
    tangential = u + c1 * n
    out = tangential - np.sqrt(np.clip(1.0 - s2, 0.0, None)) * n
    return out / np.linalg.norm(out, axis=-1, keepdims=True), tir
