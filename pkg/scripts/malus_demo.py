"""Point source through a refracting plane, a paraboloid mirror and a
refracting sphere: the pulled-back form before and after, and the
reconstructed outgoing wavefront.

    python3 scripts/malus_demo.py --grid 21x21
"""

import argparse
import time

import numpy as np

from raylines.families import is_normal, orthogonality_residual, point_source, transform, wavefront
from raylines.optics import OpticalSystem
from raylines.surfaces import Interface, Paraboloid, Plane, Sphere


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", default="21x21")
    ap.add_argument("--wavefront-grid", default="41x41")
    args = ap.parse_args()
    grid = tuple(int(x) for x in args.grid.split("x"))
    wgrid = tuple(int(x) for x in args.wavefront_grid.split("x"))

    F = point_source((0, 0, 3.0), (0, 0, -1.0), (-0.2, 0.2, -0.2, 0.2))
    system = OpticalSystem((
        Interface(Plane((0, 0, 2.0)), "refract", 1.0, 1.5),
        Interface(Paraboloid(), "reflect", 1.5),
        Interface(Sphere((0, 0, 1.5), 0.6), "refract", 1.5, 1.0),
    ))
    t0 = time.perf_counter()
    G = transform(F, system)
    for label, fam in (("input", F), ("output", G), ("output, FD partials", G.without_partials())):
        r = is_normal(fam, grid, 1e-6)
        print(f"{label:22s} max |c| = {r.max_abs:.3e} at node {r.argmax}  {'normal' if r.passed else 'NOT normal'}")

    wf = wavefront(G, lam0=1.0, grid=wgrid)
    print(f"wavefront {wgrid[0]}x{wgrid[1]}: path discrepancy {wf.discrepancy:.3e}, "
          f"orthogonality residual {orthogonality_residual(G, wf):.3e}")
    # the wavefront is a level set of optical path length measured from the source
    z = wf.points[..., 2]
    print(f"wavefront height range: {z.min():.6f} .. {z.max():.6f}; lambda range {np.ptp(wf.lam):.6f}")
    print(f"elapsed {time.perf_counter() - t0:.2f} s")


if __name__ == "__main__":
    main()
