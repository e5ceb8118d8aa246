"""Symplecticity residual against the finite-difference step.

Central differences trade O(eps^2) truncation for O(1e-16/eps) rounding;
the sweep shows where the residual bottoms out for each surface.

    python3 scripts/symplectic_sweep.py --lines 25
"""

import argparse

from raylines.surfaces import Interface, Paraboloid, Plane, SinusoidBump, Sphere
from raylines.verify import LineSampler, broken_refract_dirs, check_symplectic
from raylines.optics import LineMap

SURFACES = {
    "plane": Plane(),
    "sphere": Sphere(),
    "paraboloid": Paraboloid(),
    "sinusoid-bump": SinusoidBump(0.2, 2.0, 2.0),
}
EPS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=25)
    ap.add_argument("--pairs", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sampler = LineSampler()

    print("map".ljust(34) + "".join(f"{e:>10.0e}" for e in EPS))
    cases = [(f"reflect {k}", Interface(S, "reflect")) for k, S in SURFACES.items()]
    cases += [(f"refract {k} 1->1.5", Interface(S, "refract", 1.0, 1.5)) for k, S in SURFACES.items()]
    cases.append(("broken Snell, plane 1->1.5",
                  LineMap(Interface(Plane(), "refract", 1.0, 1.5), refract_rule=broken_refract_dirs)))
    for label, optic in cases:
        vals = [check_symplectic(optic, sampler, args.lines, args.pairs, e, 1e-6, args.seed).max_residual for e in EPS]
        print(label.ljust(34) + "".join(f"{v:10.1e}" for v in vals))


if __name__ == "__main__":
    main()
