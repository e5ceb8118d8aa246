"""Scene files and family grid files.

A scene is a JSON document (``schema_version`` 1). See ``docs/scene.md``
for the schema. ``load_scene`` validates everything up front and reports
the offending field; ``Scene.to_dict`` returns the normalised document
with every default filled in, so load -> save -> load is the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DanglingReferenceError, SceneError, SceneInvariantError, SceneParseError, UnknownKindError
from .families import RayFamily, grid_family, normal_congruence, point_source, skew_family
from .optics import OpticalSystem
from .surfaces import SURFACE_KINDS, Interface, surface_from_dict
from .verify import LineSampler

SCHEMA_VERSION = 1
TOP_KEYS = ("schema_version", "surfaces", "system", "family", "grid", "wavefront_grid", "tol", "eps",
            "seed", "sampler", "check", "wavefront", "rays")
DEFAULTS = {
    "grid": [21, 21],
    "wavefront_grid": [41, 41],
    "tol": 1e-6,
    "eps": 1e-5,
    "seed": 0,
    "sampler": {"axis": [0.0, 0.0, -1.0], "half_angle": 0.5, "center": [0.0, 0.0, 0.0], "half_widths": [0.5, 0.5, 0.5]},
    "check": {"lines": 100, "pairs": 4},
    "wavefront": {"lam0": 0.0, "k0": None},
}
FAMILY_BUILTINS = ("point_source", "normal_congruence", "skew_family")


@dataclass
class Scene:
    surfaces: dict
    system: list
    family: dict | None = None
    grid: list = field(default_factory=lambda: list(DEFAULTS["grid"]))
    wavefront_grid: list = field(default_factory=lambda: list(DEFAULTS["wavefront_grid"]))
    tol: float = DEFAULTS["tol"]
    eps: float = DEFAULTS["eps"]
    seed: int = DEFAULTS["seed"]
    sampler: dict = field(default_factory=lambda: dict(DEFAULTS["sampler"]))
    check: dict = field(default_factory=lambda: dict(DEFAULTS["check"]))
    wavefront: dict = field(default_factory=lambda: dict(DEFAULTS["wavefront"]))
    rays: list = field(default_factory=list)
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "surfaces": self.surfaces,
            "system": self.system,
            "family": self.family,
            "grid": self.grid,
            "wavefront_grid": self.wavefront_grid,
            "tol": self.tol,
            "eps": self.eps,
            "seed": self.seed,
            "sampler": self.sampler,
            "check": self.check,
            "wavefront": self.wavefront,
            "rays": self.rays,
        }

    def surface(self, name):
        return surface_from_dict(self.surfaces[name])

    def interfaces(self) -> list[Interface]:
        return [
            Interface(self.surface(s["surface"]), s["action"], s.get("n1", 1.0), s.get("n2", 1.0), name=s["surface"])
            for s in self.system
        ]

    def optical_system(self) -> OpticalSystem:
        return OpticalSystem(tuple(self.interfaces()))

    def line_sampler(self) -> LineSampler:
        s = self.sampler
        return LineSampler(tuple(s["axis"]), s["half_angle"], tuple(s["center"]), tuple(s["half_widths"]))

    def build_family(self) -> RayFamily:
        if self.family is None:
            raise SceneInvariantError("scene defines no ray family", "family")
        if "grid_file" in self.family:
            path = Path(self.base_dir) / self.family["grid_file"]
            k1, k2, P, u = read_family_grid(path)
            return grid_family(k1, k2, P, u, name=f"grid:{Path(path).name}")
        name = self.family["builtin"]
        p = dict(self.family.get("params", {}))
        if "domain" in p:
            p["domain"] = tuple(p["domain"])
        if name == "point_source":
            return point_source(**p)
        if name == "normal_congruence":
            S = self.surface(p.pop("surface"))
            return normal_congruence(S, **p)
        return skew_family(**p)


def save_scene(scene: Scene, path):
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneParseError(f"cannot read scene: {exc.strerror}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return scene_from_dict(data, base_dir=str(path.parent))


def _fail(cls, where, msg):
    raise cls(msg, where)


def _number(v, where, minimum=None, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        _fail(SceneInvariantError, where, f"expected a finite number, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(SceneInvariantError, where, f"must be >= {minimum}, got {v!r}")
    if positive and not v > 0:
        _fail(SceneInvariantError, where, f"must be positive, got {v!r}")
    return float(v)


def _vec3(v, where):
    if not isinstance(v, list) or len(v) != 3:
        _fail(SceneInvariantError, where, f"expected a 3-vector, got {v!r}")
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _grid(v, where):
    if not isinstance(v, list) or len(v) != 2 or not all(isinstance(n, int) and not isinstance(n, bool) for n in v):
        _fail(SceneInvariantError, where, f"expected [n1, n2] integers, got {v!r}")
    if min(v) < 3:
        _fail(SceneInvariantError, where, f"grids must be at least 3x3, got {v[0]}x{v[1]}")
    return list(v)


def _surface(entry, where):
    if not isinstance(entry, dict) or "kind" not in entry:
        _fail(SceneInvariantError, where, "surface needs a 'kind'")
    kind = entry["kind"]
    if kind not in SURFACE_KINDS:
        _fail(UnknownKindError, f"{where}.kind", f"unknown surface kind {kind!r}; known: {sorted(SURFACE_KINDS)}")
    cls = SURFACE_KINDS[kind]
    allowed = {f.name for f in fields(cls)}
    out = {"kind": kind}
    for key, val in entry.items():
        if key == "kind":
            continue
        if key not in allowed:
            _fail(SceneInvariantError, f"{where}.{key}", f"unknown parameter for {kind}")
        out[key] = _vec3(val, f"{where}.{key}") if isinstance(val, list) else _number(val, f"{where}.{key}")
    try:
        full = surface_from_dict(out).to_dict()
    except ValueError as exc:
        _fail(SceneInvariantError, where, str(exc))
    return full


def _family(entry, surfaces, where):
    if not isinstance(entry, dict):
        _fail(SceneInvariantError, where, "family must be an object")
    if "grid_file" in entry:
        if set(entry) != {"grid_file"} or not isinstance(entry["grid_file"], str):
            _fail(SceneInvariantError, where, "a grid-file family takes only 'grid_file': <path>")
        return {"grid_file": entry["grid_file"]}
    name = entry.get("builtin")
    if name not in FAMILY_BUILTINS:
        _fail(UnknownKindError, f"{where}.builtin", f"unknown family {name!r}; known: {list(FAMILY_BUILTINS)}")
    params = dict(entry.get("params", {}))
    out = {}
    for key, val in params.items():
        w = f"{where}.params.{key}"
        if key == "surface":
            if val not in surfaces:
                _fail(DanglingReferenceError, w, f"surface {val!r} is not defined")
            out[key] = val
        elif key == "domain":
            if not isinstance(val, list) or len(val) != 4:
                _fail(SceneInvariantError, w, "domain is [k1_min, k1_max, k2_min, k2_max]")
            out[key] = [_number(x, f"{w}[{i}]") for i, x in enumerate(val)]
            if not (out[key][0] < out[key][1] and out[key][2] < out[key][3]):
                _fail(SceneInvariantError, w, "domain is empty")
        elif key == "flip":
            out[key] = bool(val)
        elif key in ("source", "base"):
            out[key] = _vec3(val, w)
        elif key == "twist":
            out[key] = _number(val, w)
        else:
            _fail(SceneInvariantError, w, f"unknown parameter for {name}")
    if name == "normal_congruence" and "surface" not in out:
        _fail(SceneInvariantError, f"{where}.params", "normal_congruence needs a 'surface'")
    return {"builtin": name, "params": out}


def scene_from_dict(data, base_dir=".") -> Scene:
    if not isinstance(data, dict):
        raise SceneInvariantError("scene must be a JSON object", "<root>")
    for key in data:
        if key not in TOP_KEYS:
            _fail(SceneInvariantError, key, "unknown top-level key")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail(SceneInvariantError, "schema_version", f"unsupported schema version {version!r}")

    raw_surfaces = data.get("surfaces", {})
    if not isinstance(raw_surfaces, dict):
        _fail(SceneInvariantError, "surfaces", "must be an object mapping names to surfaces")
    surfaces = {name: _surface(s, f"surfaces.{name}") for name, s in raw_surfaces.items()}

    system = []
    raw_system = data.get("system", [])
    if not isinstance(raw_system, list):
        _fail(SceneInvariantError, "system", "must be a list of interfaces")
    for i, step in enumerate(raw_system):
        w = f"system[{i}]"
        if not isinstance(step, dict):
            _fail(SceneInvariantError, w, "interface must be an object")
        ref = step.get("surface")
        if ref not in surfaces:
            _fail(DanglingReferenceError, f"{w}.surface", f"surface {ref!r} is not defined")
        action = step.get("action", "reflect")
        if action not in ("reflect", "refract"):
            _fail(SceneInvariantError, f"{w}.action", f"unknown action {action!r}")
        for key in step:
            if key not in ("surface", "action", "n1", "n2"):
                _fail(SceneInvariantError, f"{w}.{key}", "unknown interface key")
        n1 = _number(step.get("n1", 1.0), f"{w}.n1", minimum=1.0)
        entry = {"surface": ref, "action": action, "n1": n1}
        if action == "refract":
            entry["n2"] = _number(step.get("n2", 1.0), f"{w}.n2", minimum=1.0)
        system.append(entry)

    family = data.get("family")
    if family is not None:
        family = _family(family, surfaces, "family")

    sampler = dict(DEFAULTS["sampler"])
    for key, val in data.get("sampler", {}).items():
        w = f"sampler.{key}"
        if key not in sampler:
            _fail(SceneInvariantError, w, "unknown sampler key")
        sampler[key] = _number(val, w, positive=True) if key == "half_angle" else _vec3(val, w)

    check = dict(DEFAULTS["check"])
    for key, val in data.get("check", {}).items():
        if key not in check or not isinstance(val, int) or val < 1:
            _fail(SceneInvariantError, f"check.{key}", f"expected a positive integer for a known key, got {val!r}")
        check[key] = val

    wf = dict(DEFAULTS["wavefront"])
    for key, val in data.get("wavefront", {}).items():
        w = f"wavefront.{key}"
        if key == "lam0":
            wf[key] = _number(val, w)
        elif key == "k0":
            if val is not None and (not isinstance(val, list) or len(val) != 2):
                _fail(SceneInvariantError, w, "k0 is [k1, k2] or null")
            wf[key] = None if val is None else [_number(x, w) for x in val]
        else:
            _fail(SceneInvariantError, w, "unknown wavefront key")

    rays = []
    for i, ray in enumerate(data.get("rays", [])):
        w = f"rays[{i}]"
        if not isinstance(ray, dict) or set(ray) != {"point", "direction"}:
            _fail(SceneInvariantError, w, "a ray is {'point': [x,y,z], 'direction': [x,y,z]}")
        d = _vec3(ray["direction"], f"{w}.direction")
        if np.linalg.norm(d) <= 1e-12:
            _fail(SceneInvariantError, f"{w}.direction", "zero direction")
        rays.append({"point": _vec3(ray["point"], f"{w}.point"), "direction": d})

    seed = data.get("seed", DEFAULTS["seed"])
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        _fail(SceneInvariantError, "seed", f"expected a non-negative integer, got {seed!r}")

    scene = Scene(
        surfaces=surfaces,
        system=system,
        family=family,
        grid=_grid(data.get("grid", DEFAULTS["grid"]), "grid"),
        wavefront_grid=_grid(data.get("wavefront_grid", DEFAULTS["wavefront_grid"]), "wavefront_grid"),
        tol=_number(data.get("tol", DEFAULTS["tol"]), "tol", positive=True),
        eps=_number(data.get("eps", DEFAULTS["eps"]), "eps", positive=True),
        seed=seed,
        sampler=sampler,
        check=check,
        wavefront=wf,
        rays=rays,
        base_dir=base_dir,
    )
    try:
        scene.optical_system()
    except ValueError as exc:
        raise SceneInvariantError(str(exc), "system") from exc
    return scene


# ------------------------------------------------------------- grid files

GRID_COLUMNS = ("k1", "k2", "Px", "Py", "Pz", "ux", "uy", "uz")


def write_family_grid(path, F: RayFamily, n1: int, n2: int):
    """Sample ``F`` on an ``n1 x n2`` grid spanning its domain."""
    lo1, hi1, lo2, hi2 = F.domain
    k1 = np.linspace(lo1, hi1, n1)
    k2 = np.linspace(lo2, hi2, n2)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    P, u = F(K1, K2)
    from .report import fmt_float

    lines = [
        f"# n1 n2 {n1} {n2}",
        "# domain " + " ".join(fmt_float(x) for x in (lo1, hi1, lo2, hi2)),
        "# " + ",".join(GRID_COLUMNS),
    ]
    for i in range(n1):
        for j in range(n2):
            vals = [K1[i, j], K2[i, j], *P[i, j], *u[i, j]]
            lines.append(",".join(fmt_float(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_family_grid(path):
    """Returns ``(k1, k2, P, u)`` with ``P, u`` of shape ``(n1, n2, 3)``."""
    where = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SceneParseError(f"cannot read grid file: {exc.strerror}", where) from exc
    n1 = n2 = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:2] == ["n1", "n2"]:
                n1, n2 = int(parts[2]), int(parts[3])
            continue
        try:
            vals = [float(x) for x in line.split(",")]
        except ValueError as exc:
            raise SceneParseError(str(exc), f"{where}:{lineno}") from exc
        if len(vals) != 8:
            raise SceneParseError(f"expected 8 columns, got {len(vals)}", f"{where}:{lineno}")
        rows.append(vals)
    if n1 is None:
        raise SceneParseError("missing '# n1 n2' header", where)
    if n1 < 3 or n2 < 3:
        raise SceneInvariantError("grid files need at least 3x3 samples", where)
    if len(rows) != n1 * n2:
        raise SceneInvariantError(f"expected {n1 * n2} rows, found {len(rows)}", where)
    data = np.array(rows).reshape(n1, n2, 8)
    k1, k2 = data[:, 0, 0], data[0, :, 1]
    if not (np.allclose(data[..., 0], k1[:, None]) and np.allclose(data[..., 1], k2[None, :])
            and np.all(np.diff(k1) > 0) and np.all(np.diff(k2) > 0)):
        raise SceneInvariantError("rows are not a row-major rectangular grid", where)
    u = data[..., 5:8]
    bad = np.abs(np.linalg.norm(u, axis=-1) - 1.0) > 1e-9
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise SceneInvariantError(f"direction is not unit length in data row {i * n2 + j + 1}", where)
    return k1, k2, data[..., 2:5], u
