"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
import argparse
import json
import platform
import timeit

import numpy as np

from qpwcheck import kernels
from qpwcheck.encoding import symmetric_phases


def cases(rng):
    def tensor_mix(K, k, D, N=256):
        idx = rng.integers(0, N, (K, k))
        ph = symmetric_phases(idx, N)
        w = np.full(K, 1 / K)
        return f"symmetric_tensor_mix K={K} k={k} D={D}", lambda b: b.symmetric_tensor_mix(ph, w, D)

    def fidelities(K, D, N=256):
        m = np.eye(D, dtype=complex) / D
        g = kernels.diagonal_sums(m)
        ph = symmetric_phases(rng.integers(0, N, K), N)
        return f"symmetric_fidelities K={K} D={D}", lambda b: b.symmetric_fidelities(g, ph)

    def first_failure(T, s):
        p = rng.uniform(0.5, 0.6, (T, s))
        u = rng.random((T, s))
        return f"first_failure T={T} s={s}", lambda b: b.first_failure(p, u)

    return [
        tensor_mix(4096, 2, 8),
        tensor_mix(65536, 2, 4),
        tensor_mix(4096, 4, 4),
        fidelities(10**6, 16),
        first_failure(10**5, 10),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args()
    backends = {name: kernels.get_backend(name) for name in kernels.available_backends()}
    if "cython" not in backends:
        print("compiled backend not built; only timing the numpy fallback")
    results = []
    print(f"{'case':<44} " + " ".join(f"{n + ' ms':>12}" for n in backends) + "   speedup")
    for label, fn in cases(np.random.default_rng(0)):
        row = {"case": label}
        for name, b in backends.items():
            fn(b)
            t = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
            row[name] = t * 1e3
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        row["speedup"] = speed
        results.append(row)
        print(f"{label:<44} " + " ".join(f"{row[n]:12.3f}" for n in backends) + f"   {speed:6.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"machine": platform.machine(), "python": platform.python_version(),
                       "results": results}, fh, indent=2)


if __name__ == "__main__":
    main()
