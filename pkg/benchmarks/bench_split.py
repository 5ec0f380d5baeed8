"""Compare the compiled split search with the numpy fallback.

    python3 benchmarks/bench_split.py [--repeat 5] [--sizes 200,2000,20000]

Times one root split search and one depth-3 tree fit per backend and
checks that both backends return the same answer.
"""
import argparse
import timeit

import numpy as np

from probboost import _split_py, trees
from probboost.trees import TreeConfig, fit_tree, presort


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", default="200,2000,20000")
    parser.add_argument("--features", type=int, default=8)
    args = parser.parse_args()

    try:
        from probboost import _split
    except ImportError:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    print(f"active backend: {trees.BACKEND}")
    print(f"{'n':>7} {'d':>3} {'op':>6} {'cython ms':>10} {'python ms':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in (int(v) for v in args.sizes.split(",")):
        X = np.ascontiguousarray(rng.normal(size=(n, args.features)))
        t = np.sin(X[:, 0]) + rng.normal(size=n)
        order = presort(X)
        mean = float(t.mean())
        assert _split.best_split(X, t, order, mean) == _split_py.best_split(X, t, order, mean)

        fast = best_of(lambda: _split.best_split(X, t, order, mean), args.repeat)
        slow = best_of(lambda: _split_py.best_split(X, t, order, mean), args.repeat)
        print(f"{n:>7} {args.features:>3} {'split':>6} {fast * 1e3:>10.3f} {slow * 1e3:>10.3f} {slow / fast:>7.1f}x")

        cfg = TreeConfig(max_depth=3)
        original = trees._best_split
        try:
            trees._best_split = _split.best_split
            fast = best_of(lambda: fit_tree(X, t, cfg, order), args.repeat)
            trees._best_split = _split_py.best_split
            slow = best_of(lambda: fit_tree(X, t, cfg, order), args.repeat)
        finally:
            trees._best_split = original
        print(f"{n:>7} {args.features:>3} {'tree':>6} {fast * 1e3:>10.3f} {slow * 1e3:>10.3f} {slow / fast:>7.1f}x")


if __name__ == "__main__":
    main()
