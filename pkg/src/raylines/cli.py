"""Command-line entry point.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or scene
error, 3 numerical failure (a ray missed, grazed or was totally
reflected). Data goes to stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .errors import NonNormalFamilyError, RayDomainError, SceneError
from .families import orthogonality_residual, transform, wavefront
from .optics import STATUS_NAMES, trace_many
from .report import FORMATS, emit_report, fmt_float, write_csv
from .scene import load_scene
from .verify import CheckReport, check_symplectic, malus_check, normality_report, structure_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("trace", "check-map", "check-family", "wavefront", "malus", "structure")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _grid(text):
    try:
        a, b = text.lower().split("x")
        return [int(a), int(b)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <n1>x<n2>, got {text!r}")


def build_parser():
    p = _Parser(prog="raylines", description="Symplectic checks of reflection, refraction and ray families.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scene", required=True, help="scene file (JSON)")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the scene)")
    p.add_argument("--tol", type=float, help="pass/fail tolerance (overrides the scene)")
    p.add_argument("--grid", type=_grid, help="family grid, e.g. 21x21 (overrides the scene)")
    p.add_argument("--eps", type=float, help="finite-difference step for map differentials")
    p.add_argument("--format", choices=FORMATS, default="text", help="report format")
    p.add_argument("--timing", action="store_true", help="include wall-clock timings in reports")
    p.add_argument("--through-system", action="store_true",
                   help="check-family/wavefront: use the family after the scene's optical system")
    return p


def _emit(data: bytes, out):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _trace(scene, args):
    system = scene.optical_system()
    if scene.rays:
        P = np.array([r["point"] for r in scene.rays])
        U = np.array([r["direction"] for r in scene.rays])
        ks = [(None, None)] * len(P)
    else:
        F = scene.build_family()
        k1, k2 = F.grid(*scene.grid)
        K1, K2 = np.meshgrid(k1, k2, indexing="ij")
        P, U = F(K1, K2)
        P, U = P.reshape(-1, 3), U.reshape(-1, 3)
        ks = list(zip(K1.ravel(), K2.ravel()))
    out = trace_many(P, U, system)
    cols = ["ray", "k1", "k2", "px", "py", "pz", "dx", "dy", "dz", "ux", "uy", "uz", "hx", "hy", "hz",
            "optical_path", "status", "failed_at"]
    rows = []
    for i in range(len(P)):
        k = ["" if v is None else fmt_float(v) for v in ks[i]]
        rows.append([i, *k, *P[i], *U[i] / np.linalg.norm(U[i]), *out["u"][i], *out["point"][i],
                     out["opl"][i], STATUS_NAMES[int(out["status"][i])], int(out["failed_at"][i])])
    _emit(write_csv(cols, rows).encode(), args.out)
    bad = np.flatnonzero(out["status"] != 0)
    for i in bad:
        print(f"ray {i}: {STATUS_NAMES[int(out['status'][i])]} at interface {int(out['failed_at'][i])}", file=sys.stderr)
    return EXIT_NUMERIC if len(bad) else EXIT_OK


def _report(rep: CheckReport, args):
    _emit(emit_report(rep, args.format, timing=args.timing), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _check_map(scene, args):
    sampler = scene.line_sampler()
    children = []
    for i, iface in enumerate(scene.interfaces()):
        children.append(check_symplectic(iface, sampler, scene.check["lines"], scene.check["pairs"], scene.eps,
                                          scene.tol, scene.seed, name=f"symplectic[{i}]:{iface.name}:{iface.action}"))
    worst = max(c.max_residual for c in children)
    rep = CheckReport(name="check-map", passed=all(c.passed for c in children), max_residual=worst, tol=scene.tol,
                      seed=scene.seed, children=children, elapsed=sum(c.elapsed for c in children))
    return _report(rep, args)


def _family(scene, args):
    F = scene.build_family()
    if getattr(args, "through_system", False):
        F = transform(F, scene.optical_system())
    return F


def _wavefront(scene, args):
    F = _family(scene, args)
    k0 = scene.wavefront["k0"]
    try:
        wf = wavefront(F, k0=k0, lam0=scene.wavefront["lam0"], grid=tuple(scene.wavefront_grid))
    except NonNormalFamilyError as exc:
        print(f"wavefront refused: {exc}", file=sys.stderr)
        return EXIT_FAIL
    resid = orthogonality_residual(F, wf)
    rows = []
    for i, a in enumerate(wf.k1):
        for j, b in enumerate(wf.k2):
            rows.append([i, j, a, b, wf.lam[i, j], *wf.points[i, j]])
    _emit(write_csv(["i", "j", "k1", "k2", "lambda", "Wx", "Wy", "Wz"], rows).encode(), args.out)
    ok = resid <= scene.tol
    print(f"{'PASS' if ok else 'FAIL'} wavefront: orthogonality residual {fmt_float(resid)}, "
          f"path discrepancy {fmt_float(wf.discrepancy)} (tol {fmt_float(scene.tol)})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def run_command(command: str, scene, args) -> int:
    if command == "trace":
        return _trace(scene, args)
    if command == "check-map":
        return _check_map(scene, args)
    if command == "check-family":
        return _report(normality_report(_family(scene, args), tuple(scene.grid), scene.tol), args)
    if command == "wavefront":
        return _wavefront(scene, args)
    if command == "malus":
        try:
            rep = malus_check(scene.build_family(), scene.optical_system(), tuple(scene.grid), scene.tol)
        except NonNormalFamilyError as exc:
            print(f"malus: precondition failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        return _report(rep, args)
    if command == "structure":
        return _report(structure_checks(scene.seed, scene.check["lines"]), args)
    raise ValueError(command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scene = load_scene(args.scene)
        overrides = {k: v for k, v in (("seed", args.seed), ("tol", args.tol), ("grid", args.grid), ("eps", args.eps))
                     if v is not None}
        scene = replace(scene, **overrides)
        return run_command(args.command, scene, args)
    except SceneError as exc:
        print(f"{exc.tag} {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RayDomainError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
