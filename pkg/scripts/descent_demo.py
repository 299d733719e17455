"""Trace the dyadic descent for a few interval functions.

    python scripts/descent_demo.py [--depth 12]
"""

import argparse

from cubeftc import fields as fl
from cubeftc.density import dyadic_descent
from cubeftc.geometry import Cube
from cubeftc.interval_functions import Integral, Line2D, SegmentLength

CASES = {
    "integral of x^2 + y": Integral(fl.PolyField.from_table(2, {"2,0": 1.0, "0,1": 1.0})),
    "integral of sin(x)cos(y)": Integral(fl.make_field("sin_x_cos_y")),
    "diagonal segment length": SegmentLength(Line2D.diagonal()),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=12)
    args = ap.parse_args()
    root = Cube((0.0, 0.0), 1.0)
    for name, phi in CASES.items():
        trace = dyadic_descent(phi, root, args.depth)
        print(f"{name}: parent ratio {trace.ratios[0]:.10g}")
        for k in (0, 1, 2, 4, 8, args.depth):
            if k <= args.depth:
                lv = trace.levels[k]
                print(f"  level {k:2d}  corner {tuple(round(v, 6) for v in lv.cube.lower)}  ratio {lv.ratio:.10g}")
        ok = not trace.monotonicity_violations
        print(f"  limit point {tuple(round(v, 6) for v in trace.limit_point)}, monotone: {ok}\n")


if __name__ == "__main__":
    main()
