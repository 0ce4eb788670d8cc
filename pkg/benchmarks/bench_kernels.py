"""Compare the compiled and numpy split-search backends.

Times the raw kernels on random data and a full random-forest fit with each
backend swapped in. Usage::

    python3 benchmarks/bench_kernels.py [--rows 200 500 2000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from visjit import kernels
from visjit.learners import train


def _data(n: int, d: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=0.5, size=n) > 0).astype(np.float64)
    return X, y


def _best(stmt, repeat: int, number: int) -> float:
    return min(timeit.repeat(stmt, repeat=repeat, number=number)) / number


def bench(rows: list[int], d: int, repeat: int) -> list[dict]:
    backends = kernels.available_backends()
    results = []
    for n in rows:
        X, y = _data(n, d)
        idx = np.arange(n, dtype=np.intp)
        feats = np.arange(d, dtype=np.intp)
        g, h = y - 0.5, np.full(n, 0.25)
        for name, mod in backends.items():
            ent = _best(lambda: mod.best_split_entropy(X, y, idx, feats, 1), repeat, 20)
            grad = _best(lambda: mod.best_split_gradient(X, g, h, idx, feats, 1.0, 1, 1.0), repeat, 20)
            # swap the backend used by the tree builder for an end-to-end fit
            saved = kernels.best_split_entropy, kernels.best_split_gradient
            kernels.best_split_entropy, kernels.best_split_gradient = mod.best_split_entropy, mod.best_split_gradient
            try:
                rf = _best(lambda: train("RF", X, y, [f"f{i}" for i in range(d)], n_estimators=20), 1, 1)
            finally:
                kernels.best_split_entropy, kernels.best_split_gradient = saved
            results.append({"rows": n, "backend": name, "entropy_s": ent, "gradient_s": grad, "rf20_fit_s": rf})
    return results


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, nargs="+", default=[200, 1000, 5000])
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="Emit JSON instead of a table.")
    args = ap.parse_args()
    res = bench(args.rows, args.features, args.repeat)
    if args.json:
        print(json.dumps(res, indent=2))
        return
    print(f"{'rows':>6} {'backend':>8} {'entropy ms':>11} {'gradient ms':>12} {'RF(20) s':>9}")
    for r in res:
        print(f"{r['rows']:>6} {r['backend']:>8} {1e3 * r['entropy_s']:>11.3f} {1e3 * r['gradient_s']:>12.3f} {r['rf20_fit_s']:>9.3f}")
    by = {(r["rows"], r["backend"]): r for r in res}
    for n in args.rows:
        if (n, "cython") in by:
            py, cy = by[(n, "python")], by[(n, "cython")]
            print(f"rows={n}: speedup entropy x{py['entropy_s'] / cy['entropy_s']:.1f}, "
                  f"RF fit x{py['rf20_fit_s'] / cy['rf20_fit_s']:.1f}")


if __name__ == "__main__":
    main()
