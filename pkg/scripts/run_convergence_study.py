#!/usr/bin/env python3
"""Measure discretization convergence orders of the Dirichlet solvers.

Solves problems with known exact solutions on refining grids and reports
the fitted order of the max-norm error: the radial scheme should be close
to second order on smooth linear problems and at least first order on
Pucci extremal problems.
"""

import argparse
import sys

from fnel import (
    Annulus, DirichletProblem, Rectangle, laplacian, pucci_max,
)
from fnel.solver import convergence_order


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, nargs="+", default=[32, 64, 128, 256])
    args = ap.parse_args(argv)

    cases = [
        ("radial laplacian n=3, u=1/r", laplacian(3), DirichletProblem(
            domain=Annulus(1.0, 2.0), n=3,
            boundary=lambda r: 1.0 / r, exact=lambda r: 1.0 / r)),
        ("radial pucci_max(1,2) n=3, u=r^-3", pucci_max(1, 2, 3),
         DirichletProblem(
             domain=Annulus(1.0, 2.0), n=3,
             boundary=lambda r: r ** -3, exact=lambda r: r ** -3)),
        ("2d laplacian, u=x^2+y^2", laplacian(2), DirichletProblem(
            domain=Rectangle(0.0, 1.0, 0.0, 1.0), n=2,
            rhs=lambda x, y: -4.0,
            boundary=lambda x, y: x * x + y * y,
            exact=lambda x, y: x * x + y * y)),
    ]
    cells = args.cells
    for name, op, prob in cases:
        use = cells if not isinstance(prob.domain, Rectangle) else [16, 32, 64]
        order = convergence_order(op, prob, use)
        txt = order if isinstance(order, str) else f"{order:.3f}"
        print(f"{name}: fitted order {txt} over cells {use}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
