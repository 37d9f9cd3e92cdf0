"""Median wall time of parse + projection + solve for each bundled example."""
import argparse
import statistics
import time

from genplan import examples as ex
from genplan.features import parse_features
from genplan.fond import qualitative_solve
from genplan.projection import booleanize, compile_dnf, parse_qnp


def solve_once(e):
    t0 = time.perf_counter()
    qnp = parse_qnp(ex.data_text(e.qnp_file), parse_features(ex.data_text(e.features_file)))
    policy = qualitative_solve(compile_dnf(booleanize(qnp)))
    return policy, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"{'example':<15}{'entries':>8}{'median ms':>12}{'max ms':>10}")
    for name, e in ex.EXAMPLES.items():
        runs = [solve_once(e) for _ in range(args.repeat)]
        ms = [t * 1000 for _, t in runs]
        print(f"{name:<15}{len(runs[0][0]):>8}{statistics.median(ms):>12.2f}{max(ms):>10.2f}")


if __name__ == "__main__":
    main()
