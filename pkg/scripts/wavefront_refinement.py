"""Wavefront reconstruction against grid size and edge quadrature.

Reports the row-first/column-first path discrepancy and the orthogonality
residual for a few normal families as the grid is refined.

    python3 scripts/wavefront_refinement.py
"""

import argparse

from raylines.families import normal_congruence, orthogonality_residual, point_source, transform, wavefront
from raylines.optics import OpticalSystem
from raylines.surfaces import Interface, Paraboloid, Plane, SinusoidBump, Sphere


def families():
    src = point_source((0, 0, 3.0), (0, 0, -1.0), (-0.2, 0.2, -0.2, 0.2))
    return {
        "sphere normals": normal_congruence(Sphere()),
        "paraboloid normals": normal_congruence(Paraboloid()),
        "sinusoid normals": normal_congruence(SinusoidBump(0.2, 2.0, 1.5)),
        "refracted point source": transform(src, OpticalSystem((Interface(Plane((0, 0, 2.0)), "refract", 1.0, 1.5),))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="11,21,41,81")
    ap.add_argument("--refine", default="1,2")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    refines = [int(s) for s in args.refine.split(",")]

    print(f"{'family':24s}{'grid':>6s}{'refine':>8s}{'discrepancy':>14s}{'orthogonality':>15s}")
    for name, F in families().items():
        for n in sizes:
            for r in refines:
                wf = wavefront(F, lam0=1.0, grid=(n, n), refine=r, loop_tol=1.0)
                res = orthogonality_residual(F, wf)
                print(f"{name:24s}{n:6d}{r:8d}{wf.discrepancy:14.2e}{res:15.2e}")


if __name__ == "__main__":
    main()
