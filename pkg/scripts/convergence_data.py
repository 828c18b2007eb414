"""Data behind the convergence plots of the univariate examples.

Produces, under ``--outdir``:

* ``order5_sqrt1.csv``: |x_k| for the order-5 method on sqrt1 from 5.9;
* ``atan1_runs.csv``: classical and third-order iterates on atan1 from 1.7;
* ``atan1_maps.csv``: the classical and third-order maps on a grid;
* ``sqrt1_one_step.csv``: the quadratic model and the regularized quartic
  at 1.5 sampled on a grid, with their minimizers in the header comment.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from sosnewton.hon import minimize, minimize_classical, step_order_d
from sosnewton.jets import ATAN1, SQRT1, taylor_expand
from sosnewton.uni3 import closed_form_map


def write(path, header, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results/convergence")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    tr = minimize(SQRT1, [5.9], 5)
    write(out / "order5_sqrt1.csv", ["k", "abs_error"],
          [(k, f"{abs(x[0]):.17g}") for k, x in enumerate(tr.iterates)])

    rows = []
    for name, run in (("classical", minimize_classical(ATAN1, [1.7])),
                      ("third_order", minimize(ATAN1, [1.7], 3))):
        rows += [(name, k, f"{x[0]:.17g}") for k, x in enumerate(run.iterates)]
    write(out / "atan1_runs.csv", ["method", "k", "x"], rows)

    n2, n3 = closed_form_map(ATAN1, 2), closed_form_map(ATAN1, 3)
    xs = np.linspace(-20, 20, 801)
    write(out / "atan1_maps.csv", ["x", "N2", "N3"],
          [(f"{x:.6g}", f"{n2(x):.17g}", f"{n3(x):.17g}") for x in xs])

    x0 = 1.5
    rep = step_order_d(SQRT1, [x0], 3)
    quad = taylor_expand(SQRT1, [x0], 2)
    psi = rep.surrogate
    newton = x0 - SQRT1.derivatives_1d(x0, 1)[1] / SQRT1.derivatives_1d(x0, 2)[2]
    grid = np.linspace(-4, 3, 701)
    write(out / "sqrt1_one_step.csv", ["x", "f", "quadratic", "quartic"],
          [(f"{x:.6g}", f"{SQRT1.value([x]):.17g}", f"{quad.eval([x]):.17g}",
            f"{psi.eval([x]):.17g}") for x in grid],
          comment=f"newton_next={newton:.17g} third_order_next={rep.next[0]:.17g} "
                  f"weight={rep.t_or_tbar:.17g}")


if __name__ == "__main__":
    main()
