"""Compare the compiled and pure-Python kernel backends.

Times tree induction, tree traversal and the SMO dual solver on random data
and checks that both backends return the same answer.

    python benchmarks/bench_kernels.py [--rows 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from metaselect.kernels import backends
from metaselect.learners.svm import scale_gamma


def _data(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 0.8, n) > 0).astype(np.float64)
    return X, y


def _best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    X, y = _data(args.rows, args.features, 0)
    samples = np.arange(args.rows, dtype=np.int64)
    signs = np.where(y > 0, 1.0, -1.0)
    gamma = scale_gamma(X)
    mtry = int(np.ceil(np.sqrt(args.features)))
    found = backends()
    tree = found["pure"].build_tree(X, y, samples, mtry, 2, -1, 1)[:4]

    cases = {
        "tree build (all features)":
            lambda m: m.build_tree(X, y, samples, args.features, 2, -1, 1),
        f"tree build (mtry={mtry})":
            lambda m: m.build_tree(X, y, samples, mtry, 2, -1, 1),
        "tree apply":
            lambda m: m.tree_apply(*tree, X),
        "SMO solve (C-SVC)":
            lambda m: m.rbf_solve(X, samples, signs, -np.ones(args.rows), 1.0, gamma,
                                  1e-3, 10**7, 200.0),
    }
    print(f"{args.rows} rows x {args.features} features, best of {args.repeat}")
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in found) + f"{'speedup':>10s}")
    for name, fn in cases.items():
        times, outs = {}, {}
        for b, mod in found.items():
            times[b], outs[b] = _best_of(lambda: fn(mod), args.repeat)
        line = f"{name:28s}" + "".join(f"{times[b]:11.4f}s" for b in found)
        if "fast" in found:
            line += f"{times['pure'] / times['fast']:9.1f}x"
            a, b = outs["fast"], outs["pure"]
            a = a if isinstance(a, tuple) else (a,)
            b = b if isinstance(b, tuple) else (b,)
            same = all(np.allclose(u, v, atol=1e-9) for u, v in zip(a, b))
            line += "" if same else "  (outputs differ)"
        print(line)


if __name__ == "__main__":
    main()
