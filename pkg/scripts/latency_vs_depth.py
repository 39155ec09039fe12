"""First-result latency as the data moves deeper into a chain of devices."""

import argparse

from snes import experiments as ex


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-depth", type=int, default=5)
    ap.add_argument("--latency-ms", type=float, default=10.0, help="per-link latency")
    args = ap.parse_args()
    points = ex.latency_by_depth(range(1, args.max_depth + 1), args.latency_ms)
    print("depth  first_result_ms")
    for depth, ms in points:
        print(f"{depth:>5}  {ms:>15.1f}")
    xs, ys = zip(*points)
    print(f"R^2 of a straight-line fit: {ex.r_squared(xs, ys):.4f}")


if __name__ == "__main__":
    main()
