"""Compare the compiled and numpy slot kernels on identical blocks.

Usage: python3 benchmarks/bench_kernel.py [--trials N] [--repeat R]
"""
import argparse
import time

import numpy as np

from cellsearch import kernels
from cellsearch import montecarlo as mc
from cellsearch.model import NetworkParams

CASES = {
    "fixed topology, N_c=12": (NetworkParams(), mc.ProtocolConfig()),
    "fresh topology, N_c=12": (NetworkParams(), mc.ProtocolConfig(bs_schedule="iid", fresh_topology_per_slot=True)),
    "dense lambda=1e-2, N_c=12": (NetworkParams(lam=1e-2), mc.ProtocolConfig()),
    "exhaustive, 48 slots": (NetworkParams(), mc.ProtocolConfig(mode=mc.EXHAUSTIVE)),
}


def time_backend(fn, params, proto, trials, repeat):
    """Best kernel-only and end-to-end block times over ``repeat`` runs."""
    spent = []

    def timed(*args):
        start = time.perf_counter()
        result = fn(*args)
        spent.append(time.perf_counter() - start)
        return result

    best_kernel, best_block, out = float("inf"), float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = mc.simulate_block(params, proto, 0, 0, trials, backend=timed)
        best_block = min(best_block, time.perf_counter() - start)
        best_kernel = min(best_kernel, spent[-1])
    return best_kernel, best_block, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=mc.BLOCK_TRIALS)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    print(f"backends: {', '.join(names)} (default {kernels.BACKEND}); {args.trials} trials per block, "
          f"best of {args.repeat}")
    print("kernel time (block time incl. sampling), milliseconds")
    print(f"{'case':<28}" + "".join(f"{n:>20}" for n in names) + ("   kernel speedup" if len(names) > 1 else ""))
    for case, (params, proto) in CASES.items():
        kern, block, outs = {}, {}, {}
        for name in names:
            kern[name], block[name], outs[name] = time_backend(
                kernels.BACKENDS[name], params, proto, args.trials, args.repeat)
        line = f"{case:<28}" + "".join(f"{kern[n] * 1e3:>10.1f} ({block[n] * 1e3:6.1f})" for n in names)
        if len(names) > 1:
            same = np.array_equal(outs["numpy"].first, outs["cython"].first)
            line += f"{kern['numpy'] / kern['cython']:>16.2f}x" + ("" if same else "  MISMATCH")
        print(line)


if __name__ == "__main__":
    main()
