"""Run every bundled demo, writing policies and reports to one directory."""
import argparse
import pathlib
import sys
import time

from genplan import examples as ex
from genplan.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo_out")
    ap.add_argument("names", nargs="*", default=sorted(ex.EXAMPLES))
    args = ap.parse_args()
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in args.names:
        t0 = time.perf_counter()
        code = cli(["demo", name, "--out-dir", str(out), "--report", str(out / f"{name}.report")])
        print(f"{name}: exit {code} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
