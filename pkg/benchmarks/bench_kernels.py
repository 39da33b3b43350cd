"""Compare the compiled and pure-numpy decoding kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each case is a codebook size (M hypotheses, N subchannels, p levels) decoded
against T random observations; the table lists the best wall time over the
repeats and the speed-up of the compiled kernel.
"""

import argparse
import time

import numpy as np

from lowres_mimo import kernels

CASES = [
    # label, M, N, p, T
    ("K=2 Nr=16 one-bit", 16, 32, 2, 100_000),
    ("K=4 Nr=32 one-bit", 256, 64, 2, 10_000),
    ("K=2 Nr=6 two-bit", 16, 12, 4, 100_000),
    ("K=6 Nr=16 one-bit", 4096, 32, 2, 1_000),
    ("K=8 Nr=64 one-bit", 65536, 128, 2, 50),
]


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_case(m_k, n, p, t, repeat, rng):
    cw = rng.integers(0, p, size=(m_k, n)).astype(np.uint8)
    obs = rng.integers(0, p, size=(t, n)).astype(np.uint8)
    beta = rng.exponential(size=cw.shape)
    cost = -np.log(rng.dirichlet(np.ones(p), size=(m_k, n)))
    out = {}
    for backend in kernels.BACKENDS:
        out[("weighted", backend)] = best_time(
            lambda: kernels.weighted_argmin(obs, cw, 0.0, beta, backend=backend), repeat)
        out[("table", backend)] = best_time(lambda: kernels.table_argmin(obs, cost, backend=backend), repeat)
        if m_k <= 4096:
            out[("d_min", backend)] = best_time(lambda: kernels.min_pairwise_distance(cw, backend=backend), repeat)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="divide observation counts by 10")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    if "compiled" not in kernels.BACKENDS:
        print("compiled extension not available; timing the python backend only")
    print(f"{'case':<20} {'kernel':<9} {'python s':>10} {'compiled s':>11} {'speed-up':>9}")
    for label, m_k, n, p, t in CASES:
        t = max(1, t // 10) if args.quick else t
        res = run_case(m_k, n, p, t, args.repeat, rng)
        for kernel in ("weighted", "table", "d_min"):
            if (kernel, "python") not in res:
                continue
            py = res[(kernel, "python")]
            cc = res.get((kernel, "compiled"))
            ratio = f"{py / cc:8.1f}x" if cc else "     n/a"
            cc_s = f"{cc:11.4f}" if cc else f"{'n/a':>11}"
            print(f"{label:<20} {kernel:<9} {py:10.4f} {cc_s} {ratio}")


if __name__ == "__main__":
    main()
