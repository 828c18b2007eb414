"""Basins of attraction on the Beale function, classical vs third order.

Writes one raster CSV per method and prints the converged fractions.

    python scripts/beale_basins.py --grid 41 --outdir results/beale
"""

import argparse
import csv
import json
from pathlib import Path

from sosnewton.cli import main as cli_main


def fraction(path: Path) -> float:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return sum(r["label"] == "converged" for r in rows) / len(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=41)
    ap.add_argument("--box", default="4")
    ap.add_argument("--max-iter", type=int, default=350)
    ap.add_argument("--workers", type=int, default=0)
    ap.add_argument("--outdir", default="results/beale")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name, d in (("classical", 2), ("third_order", 3)):
        path = out / f"{name}_{args.grid}.csv"
        method = "classical" if d == 2 else "hon"
        cli_main(["basin", "--fn", "beale", "--box", args.box, "--grid", str(args.grid),
                  "--d", str(d), "--method", method, "--max-iter", str(args.max_iter),
                  "--workers", str(args.workers), "--out", str(path)])
        summary[name] = fraction(path)
    print(json.dumps(summary))


if __name__ == "__main__":
    main()
