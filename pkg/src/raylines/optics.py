"""Reflection and refraction as maps on the space of oriented lines.

The scalar entry points (``reflect``, ``refract``, ``trace``) raise on
failure. ``trace_many`` does the same work on arrays of rays and reports
failures through status codes, which is what the verification sweeps use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DifferentialUndefined,
    GrazingError,
    MissError,
    RayDomainError,
    TotalInternalReflection,
)
from .line_space import Chart, LineTangent, OrientedLine, canonicalize, retract
from .surfaces import DEFAULT_T_MAX, ImplicitSurface, Interface, intersect_many, normal

OK, MISS, GRAZING, TIR = 0, 1, 2, 3
STATUS_NAMES = {OK: "ok", MISS: "miss", GRAZING: "grazing", TIR: "total-internal-reflection"}
_STATUS_ERRORS = {MISS: MissError, GRAZING: GrazingError, TIR: TotalInternalReflection}

# Lines (as opposed to rays) are launched from this far back along u.
BACKOFF = 20.0
RESTART = 1e-9


def _dot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


def reflect_dirs(u, n):
    """Mirror law ``u - 2 (u . n) n``; either orientation of ``n`` works."""
    return u - 2.0 * _dot(u, n) * n


def refract_dirs(u, n, n1, n2):
    """Vector Snell law. Returns ``(directions, tir_mask)``.

    ``n`` is re-oriented against the incoming ray. The boundary case
    ``sin^2 = 1`` counts as total internal reflection.
    """
    n = np.where(_dot(u, n) > 0, -n, n)
    c1 = -_dot(u, n)
    mu = n1 / n2
    # 1 - s^2 written as (1 - mu^2) + mu^2 c1^2 to avoid cancellation near grazing
    cos2 = (1.0 - mu**2) + mu**2 * c1**2
    tir = cos2[..., 0] <= 0.0
    c2 = np.sqrt(np.clip(cos2, 0.0, None))
    out = mu * u + (mu * c1 - c2) * n
    return out, tir


@dataclass(frozen=True)
class OpticalSystem:
    interfaces: tuple

    def __post_init__(self):
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        check_index_chain(self.interfaces)

    def __len__(self):
        return len(self.interfaces)

    def __iter__(self):
        return iter(self.interfaces)

    @property
    def n_in(self) -> float:
        return self.interfaces[0].n_in if self.interfaces else 1.0

    @property
    def n_out(self) -> float:
        current = self.n_in
        for iface in self.interfaces:
            if iface.action == "refract":
                current = iface.n2
        return current


def check_index_chain(interfaces: Sequence[Interface]):
    """Consecutive refractions must agree on the medium between them."""
    current = None
    for i, iface in enumerate(interfaces):
        if current is not None and abs(iface.n1 - current) > 1e-12:
            raise ValueError(
                f"interface {i} starts in index {iface.n1} but the ray travels in index {current}"
            )
        current = iface.n2 if iface.action == "refract" else iface.n1


@dataclass(frozen=True, eq=False)
class TraceResult:
    line: OrientedLine
    hits: list
    lengths: list
    optical_path: float


def trace_many(
    starts,
    dirs,
    system: OpticalSystem | Sequence[Interface],
    t_max=DEFAULT_T_MAX,
    refract_rule: Callable = refract_dirs,
):
    """Trace arrays of rays through ``system`` in order.

    Returns a dict with ``u`` (final directions), ``hits`` (N, k, 3),
    ``lengths`` (N, k), ``opl`` (N,), ``status`` (N,) and ``failed_at``
    (index of the failing interface, -1 if none).
    """
    interfaces = tuple(system)
    if not interfaces:
        raise ValueError("optical system has no interfaces")
    P = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    U = np.atleast_2d(np.asarray(dirs, dtype=float))
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    N, k = len(P), len(interfaces)
    hits = np.full((N, k, 3), np.nan)
    lengths = np.full((N, k), np.nan)
    opl = np.zeros(N)
    status = np.zeros(N, dtype=int)
    failed_at = np.full(N, -1)
    alive = np.ones(N, dtype=bool)
    index = interfaces[0].n_in

    for i, iface in enumerate(interfaces):
        t_min = 0.0 if i == 0 else RESTART
        idx = np.flatnonzero(alive)
        t, pts, found, grazing = intersect_many(iface.surface, P[idx], U[idx], t_min, t_max)
        bad = ~found | grazing
        status[idx[~found]] = MISS
        status[idx[found & grazing]] = GRAZING
        failed_at[idx[bad]] = i
        alive[idx[bad]] = False
        good, t, pts = idx[~bad], t[~bad], pts[~bad]
        nrm = normal(iface.surface, pts)
        if iface.action == "reflect":
            newu = reflect_dirs(U[good], nrm)
        else:
            newu, tir = refract_rule(U[good], nrm, iface.n1, iface.n2)
            status[good[tir]] = TIR
            failed_at[good[tir]] = i
            alive[good[tir]] = False
        hits[good, i] = pts
        lengths[good, i] = t
        opl[good] += index * t
        P[good] = pts
        U[good] = newu / np.linalg.norm(newu, axis=1, keepdims=True)
        if iface.action == "refract":
            index = iface.n2
    return {"u": U, "point": P, "hits": hits, "lengths": lengths, "opl": opl, "status": status, "failed_at": failed_at}


def _raise_for(status, failed_at, location=None):
    err = _STATUS_ERRORS[int(status)]
    raise err(f"{STATUS_NAMES[int(status)]} at interface {int(failed_at)}", interface=int(failed_at), location=location)


def trace(L: OrientedLine, system: OpticalSystem, start=None, t_max=DEFAULT_T_MAX) -> TraceResult:
    """Trace ``L`` through ``system``.

    With ``start`` the ray leaves that point (projected onto ``L``);
    without it the line is launched from ``BACKOFF`` units behind its foot
    point, so the first surface hit is the first one along the whole line.
    """
    if start is None:
        origin = L.q - BACKOFF * L.u
    else:
        origin = L.q + (np.asarray(start, dtype=float) @ L.u) * L.u
    out = trace_many(origin[None], L.u[None], system, t_max=t_max if start is not None else max(t_max, 2 * BACKOFF))
    if out["status"][0] != OK:
        _raise_for(out["status"][0], out["failed_at"][0])
    u, q = canonicalize(out["point"][0], out["u"][0])
    return TraceResult(
        line=OrientedLine(u, q),
        hits=[h for h in out["hits"][0]],
        lengths=out["lengths"][0].tolist(),
        optical_path=float(out["opl"][0]),
    )


class LineMap:
    """An optical system viewed as a map from lines to lines."""

    def __init__(self, system, refract_rule: Callable = refract_dirs):
        if isinstance(system, Interface):
            system = [system]
        self.system = OpticalSystem(tuple(system))
        if not len(self.system):
            raise ValueError("optical system has no interfaces")
        self.refract_rule = refract_rule

    @property
    def n_in(self):
        return self.system.n_in

    @property
    def n_out(self):
        return self.system.n_out

    def many(self, U, Q):
        """Vectorised map: ``(u, q)`` arrays to ``(u', q', status)``."""
        U = np.atleast_2d(U)
        Q = np.atleast_2d(Q)
        out = trace_many(Q - BACKOFF * U, U, self.system, t_max=2 * BACKOFF, refract_rule=self.refract_rule)
        u2, q2 = canonicalize(out["point"], out["u"])
        return u2, q2, out["status"], out["failed_at"]

    def __call__(self, L: OrientedLine) -> OrientedLine:
        u, q, status, failed_at = self.many(L.u[None], L.q[None])
        if status[0] != OK:
            _raise_for(status[0], failed_at[0])
        return OrientedLine(u[0], q[0])


def reflect(L: OrientedLine, S: ImplicitSurface) -> OrientedLine:
    return LineMap(Interface(S, "reflect"))(L)


def refract(L: OrientedLine, S: ImplicitSurface, n1: float, n2: float) -> OrientedLine:
    return LineMap(Interface(S, "refract", n1, n2))(L)


def default_eps(L: OrientedLine) -> float:
    return 1e-5 * (1.0 + float(np.linalg.norm(L.q)))


def differentials(f, L: OrientedLine, tangents: Sequence[LineTangent], eps=None):
    """Central-difference pushforwards of several tangents at ``L``.

    ``f`` is a line map; if it has a ``many`` method all probes are pushed
    through it in one batch.
    """
    eps = default_eps(L) if eps is None else eps
    probes = [L]
    for t in tangents:
        probes += [retract(L, t, eps), retract(L, t, -eps)]
    images = _apply(f, probes)
    base = images[0]
    chart = Chart.at(base)
    c0 = chart.coords(base)
    out = []
    for j in range(len(tangents)):
        cp = chart.coords(images[1 + 2 * j])
        cm = chart.coords(images[2 + 2 * j])
        out.append(chart.tangent(c0, (cp - cm) / (2.0 * eps)))
    return base, out


def differential(f, L: OrientedLine, t: LineTangent, eps=None) -> LineTangent:
    return differentials(f, L, [t], eps)[1][0]


def _apply(f, lines):
    if hasattr(f, "many"):
        U = np.array([l.u for l in lines])
        Q = np.array([l.q for l in lines])
        u2, q2, status, failed_at = f.many(U, Q)
        bad = np.flatnonzero(status != OK)
        if len(bad):
            j = bad[0]
            raise DifferentialUndefined(
                f"probe {j} left the map's domain ({STATUS_NAMES[int(status[j])]})", interface=int(failed_at[j])
            )
        return [OrientedLine(a, b) for a, b in zip(u2, q2)]
    try:
        return [f(l) for l in lines]
    except RayDomainError as exc:
        raise DifferentialUndefined(f"probe left the map's domain: {exc}") from exc
