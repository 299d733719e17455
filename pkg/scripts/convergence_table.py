"""Print convergence tables: composite quadrature error and density-ladder spread.

    python scripts/convergence_table.py
"""

import numpy as np

from cubeftc import fields as fl
from cubeftc.density import estimate_density
from cubeftc.geometry import Cube
from cubeftc.interval_functions import Flux, Integral
from cubeftc.quadrature import QuadratureSpec, integrate_cube


def quadrature_table() -> None:
    f = fl.make_field("sin_x_cos_y")
    q = Cube((0.0, 0.0), 2.0)
    exact = (1 - np.cos(2.0)) * np.sin(2.0)
    print("composite Gauss-Legendre, 2 nodes per panel: sin(x)cos(y) on [0,2]^2")
    print(f"{'level':>5} {'panels/axis':>11} {'error':>12} {'rate':>6}")
    prev = None
    for level in range(6):
        err = abs(integrate_cube(f, q, QuadratureSpec(2, level)) - exact)
        rate = "" if prev is None else f"{np.log2(prev / err):6.2f}"
        print(f"{level:5d} {2**level:11d} {err:12.3e} {rate:>6}")
        prev = err


def ladder_table() -> None:
    F = fl.VectorField((fl.make_field("gaussian"), fl.make_field("exp_sum")))
    phi = Flux(F)
    x = (0.3, -0.2)
    est = estimate_density(phi, x, levels=10)
    div = float(fl.divergence_at(F, x))
    print(f"\ndensity ladder of the flux of (gaussian, exp_sum) at {x}; div F = {div:.10f}")
    print(f"{'k':>3} {'delta':>10} {'max ratio':>14} {'min ratio':>14} {'spread':>10}")
    for k, r in enumerate(est.ladder):
        print(f"{k:3d} {r.scale:10.3e} {r.max_ratio:14.10f} {r.min_ratio:14.10f} {r.spread:10.3e}")
    print(f"fitted spread rate {est.slope:.3f}")


def integral_ladder() -> None:
    f = fl.PolyField.from_table(2, {"2,0": 1.0, "0,1": 1.0})
    est = estimate_density(Integral(f), (0.3, 0.7))
    print(f"\nintegral of x^2 + y at (0.3, 0.7): upper {est.upper:.6f}, lower {est.lower:.6f}, rate {est.slope:.3f}")


if __name__ == "__main__":
    quadrature_table()
    ladder_table()
    integral_ladder()
