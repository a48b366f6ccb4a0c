"""Convert the raw MineThatData e-mail file into the two-arm table used here.

Keeps the women's e-mail and no-e-mail segments, codes ``treat`` as 0/1 and
keeps the customer attributes plus ``visit``.

    python scripts/prepare_hillstrom.py raw.csv data/hillstrom.csv
"""

import argparse
from pathlib import Path

import pandas as pd

from upliftkit.data import prepare_hillstrom


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--segment", default="Womens E-Mail", help="treated segment label")
    ap.add_argument("--outcome", default="visit", choices=["visit", "conversion"])
    args = ap.parse_args()
    frame = prepare_hillstrom(pd.read_csv(args.raw), args.segment, args.outcome)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False)
    n_t = int(frame["treat"].sum())
    print(f"wrote {len(frame)} rows ({n_t} treated, {len(frame) - n_t} control) to {args.out}")


if __name__ == "__main__":
    main()
