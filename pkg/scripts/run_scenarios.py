"""Sweep generated scenarios and compare every answer with the reference evaluator."""

import argparse
import sys

from snes import experiments as ex


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=500, help="number of scenarios")
    ap.add_argument("--start", type=int, default=0, help="first seed")
    args = ap.parse_args()
    res = ex.scenario_sweep(args.n, args.start)
    for kind, count in sorted(res.kinds.items()):
        print(f"{kind:<10} {count}")
    for seed, err in res.failures:
        print(f"seed {seed}: {err}")
    print(f"{res.total - len(res.failures)}/{res.total} agree in {res.seconds:.1f} s")
    return 1 if res.failures else 0


if __name__ == "__main__":
    sys.exit(main())
