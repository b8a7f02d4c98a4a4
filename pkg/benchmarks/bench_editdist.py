"""Compare the two edit-distance backends on document-scale inputs.

The compiled bit-parallel kernel and the pure-numpy row sweep are both
exposed through ``scrape_audit.editdist``; the active one is chosen by the
``SCRAPE_AUDIT_NO_NUMBA`` environment variable, which this script toggles
between timed sections of the same process. Results are printed as a table
of median wall times plus the speedup ratio, and both backends are checked
against each other for exact agreement on every pair.

Usage: python3 benchmarks/bench_editdist.py [--sizes 2000,10000,50000]
The numpy sweep is quadratic with a ~5 ns/cell constant, so sizes much past
50k chars make the fallback column take minutes; pass --repeats 1 there.
"""

import argparse
import os
import random
import statistics
import time

from scrape_audit import editdist

FLAG = "SCRAPE_AUDIT_NO_NUMBA"
ALPHABET = "abcdefghijklmnopqrstuvwxyz .,\n"


def make_pair(rng: random.Random, size: int) -> tuple[str, str]:
    """A document and a 5%-edited copy, the shape the toolkit compares."""
    base = "".join(rng.choices(ALPHABET, k=size))
    chars = list(base)
    for _ in range(max(1, size // 20)):
        op = rng.randrange(3)
        pos = rng.randrange(len(chars))
        if op == 0:
            chars[pos] = rng.choice(ALPHABET)
        elif op == 1:
            chars.insert(pos, rng.choice(ALPHABET))
        elif len(chars) > 1:
            del chars[pos]
    return base, "".join(chars)


def timed(a: str, b: str, repeats: int) -> tuple[int, float]:
    times = []
    distance = -1
    for _ in range(repeats):
        started = time.perf_counter()
        distance = editdist.levenshtein(a, b)
        times.append(time.perf_counter() - started)
    return distance, statistics.median(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="2000,10000,50000")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]

    if os.environ.get(FLAG):
        print(f"{FLAG} is already set; only the numpy backend is reachable")
    compiled_available = editdist.backend_name() == "numba"
    if compiled_available:
        editdist.levenshtein("warmup", "wramup")  # trigger one-time compilation

    rng = random.Random(args.seed)
    pairs = [make_pair(rng, size) for size in sizes]

    print(f"{'size':>8} {'distance':>9} {'numba_ms':>10} {'numpy_ms':>10} {'speedup':>8}")
    for size, (a, b) in zip(sizes, pairs):
        if compiled_available:
            os.environ.pop(FLAG, None)
            d_fast, t_fast = timed(a, b, args.repeats)
        else:
            d_fast, t_fast = None, None
        os.environ[FLAG] = "1"
        d_slow, t_slow = timed(a, b, args.repeats)
        os.environ.pop(FLAG, None)
        if compiled_available:
            if d_fast != d_slow:
                print(f"backend disagreement at size {size}: {d_fast} vs {d_slow}")
                return 1
            print(
                f"{size:>8} {d_slow:>9} {t_fast * 1000:>10.1f} {t_slow * 1000:>10.1f} "
                f"{t_slow / t_fast:>7.1f}x"
            )
        else:
            print(f"{size:>8} {d_slow:>9} {'-':>10} {t_slow * 1000:>10.1f} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
