"""Bytes reaching the base for a selective query, a pushed COUNT, and the ship-all plan."""

import argparse

from snes import experiments as ex


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--total", type=int, default=500, help="triples across all devices")
    ap.add_argument("--matching", type=int, nargs="+", default=[10, 50, 150, 300])
    args = ap.parse_args()
    print(f"{'matching':>8} {'baseline':>9} {'selective':>9} {'ratio':>6} {'count_link':>10}")
    for m in args.matching:
        stores = ex.economy_stores(m, total=args.total)
        base = ex.ship_all_baseline(stores)
        sel, _ = ex.selective_traffic(stores)
        link, _, _ = ex.count_link_bytes(m)
        print(f"{m:>8} {base.total:>9} {sel.total:>9} {sel.total / base.total:>6.3f} {link:>10}")


if __name__ == "__main__":
    main()
