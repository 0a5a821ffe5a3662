"""Compiled kernels vs the numpy fallback on the hot paths.

    python benchmarks/bench_backends.py [--repeat 3]

Prints CSV: kernel,n,k,backend,seconds,speedup.  Both backends produce the
same output on every kernel (see tests/test_backends.py); this only times them.
"""

import argparse
import sys
import time

import numpy as np

from sjlt import _backend
from sjlt.kwise import IRREDUCIBLE
from sjlt.randbits import BitSource


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    for n, k, rows in [(1024, 256, 200), (4096, 1024, 100), (65536, 4544, 20)]:
        keys = BitSource(n).spawn(rows)
        yield "sample_rows", n, k, lambda K, keys=keys, n=n, k=k: K.sample_rows(keys, n, k)
    for n in (1024, 16384):
        X = np.random.default_rng(0).standard_normal((32, n))
        yield "wht_inplace", n, "", lambda K, X=X: K.wht_inplace(X.copy())
    for n, l in ((1024, 20), (65536, 30)):
        m = n.bit_length()
        coeffs = BitSource(1).draw_uints(m, l // 2).astype(np.uint64)
        yield "sign_family", n, l, lambda K, m=m, coeffs=coeffs, n=n: K.sign_family(m, IRREDUCIBLE[m], coeffs, 0, n)
    idx, signs, _ = _backend.get("python").sample_rows(BitSource(2).spawn(100), 4096, 1024)
    X = np.random.default_rng(1).standard_normal((16, 4096))
    yield "sparse_apply", 4096, 1024, lambda K: K.sparse_apply(idx, signs, X)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in _backend.available():
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    print("kernel,n,k,backend,seconds,speedup")
    for name, n, k, fn in cases():
        t = {b: best_of(lambda b=b: fn(_backend.get(b)), args.repeat) for b in ("python", "compiled")}
        for b in ("python", "compiled"):
            print(f"{name},{n},{k},{b},{t[b]:.6f},{t['python'] / t[b]:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
