"""Collision counts and per-hash variance for every 32-bit hash on a fixed corpus."""

import argparse

from snes import experiments as ex
from snes.hashing import format_reports


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    reports, birthday = ex.hash_study(args.size, args.seed)
    ranked = sorted(reports.values(), key=lambda r: r.collisions)
    print(format_reports(ranked))
    print(f"\nbirthday expectation for {args.size} uniform draws: {birthday:.3f} colliding pairs")


if __name__ == "__main__":
    main()
