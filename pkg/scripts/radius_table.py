"""Basin radii on sqrt1 for several Taylor orders.

    python scripts/radius_table.py --d 2,3,4,5 --out results/radius_table.csv
"""

import argparse
import csv
import sys
import time

from sosnewton.jets import get_builtin
from sosnewton.uni3 import beta_closed_form, radius_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fn", default="sqrt1")
    ap.add_argument("--d", default="2,3,4,5")
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--out")
    args = ap.parse_args()
    f = get_builtin(args.fn)
    t0 = time.perf_counter()
    rows = radius_table(f, [int(v) for v in args.d.split(",")], iters=args.iters, tol=args.tol)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["d", "radius", "closed_form_radius", "bracket_lo", "bracket_hi"])
    for r in rows:
        w.writerow([r.d, f"{r.radius:.10f}",
                    "" if r.closed_form is None else f"{r.closed_form:.10f}", *r.bracket])
    if args.out:
        fh.close()
    if args.fn == "sqrt1":
        print(f"exact third-order radius {beta_closed_form():.10f}", file=sys.stderr)
    print(f"{time.perf_counter() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
