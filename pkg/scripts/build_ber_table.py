"""Regenerate the bundled BER table.

    python3 scripts/build_ber_table.py [--trials 20000] [--seed 1] [--out src/uswb/data/ber_table.csv]

The full grid (2 schemes, K = 0..8, N_h = 1..15, N_s = 1..20) takes roughly
1-2 hours on one core. Entries are independent, so ``--schemes``/``--k`` can
be used to split the work and the pieces merged with ``--merge``.
"""

import argparse
import sys
import time
from pathlib import Path

from uswb.phy.ber import BerTable, build_ber_table
from uswb.phy.signal import SCHEMES

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "uswb" / "data" / "ber_table.csv"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--schemes", nargs="+", default=list(SCHEMES))
    ap.add_argument("--k", nargs="+", type=int, default=list(range(9)))
    ap.add_argument("--nh-max", type=int, default=15)
    ap.add_argument("--ns-max", type=int, default=20)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--merge", nargs="+", type=Path, help="merge existing tables into --out and exit")
    args = ap.parse_args(argv)

    if args.merge:
        merged = BerTable()
        for p in args.merge:
            merged.entries.update(BerTable.load(p).entries)
        merged.save(args.out)
        print(f"{len(merged)} entries -> {args.out}")
        return 0

    t0 = time.time()
    last = [None]

    def progress(s, k, h, c):
        if (s, k) != last[0]:
            last[0] = (s, k)
            print(f"[{time.time() - t0:7.0f}s] {s} K={k}", file=sys.stderr, flush=True)

    table = build_ber_table(
        args.schemes,
        range(1, args.nh_max + 1),
        range(1, args.ns_max + 1),
        args.k,
        args.trials,
        args.seed,
        path=args.out,
        progress=progress,
    )
    print(f"{len(table)} entries -> {args.out} in {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
