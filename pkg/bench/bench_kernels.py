"""Compare the compiled kernels with the numpy fallback.

    python bench/bench_kernels.py [--sizes 50 100 200 400] [--repeat 5]

Times each hot kernel on random unit-cube data, plus one full evaluation of
the negative log posterior and its gradient (the inner loop of every
hyperparameter fit), and prints milliseconds per call and the speed-up.
"""

import argparse
import timeit

import numpy as np

from uhebo import _pykernels, kernels
from uhebo.gp import GammaPriors, Hyperparams, loss_and_gradient

try:
    from uhebo import _ckernels
except ImportError:
    _ckernels = None


def best_ms(fn, repeat, number):
    return 1e3 * min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def loss_with(impl, X, y, theta):
    saved = kernels._impl
    kernels._impl = impl
    try:
        return loss_and_gradient((X, y), theta, GammaPriors())
    finally:
        kernels._impl = saved


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")

    rng = np.random.default_rng(0)
    theta = Hyperparams(np.full(args.dim, 0.2), 1.0, 1e-3)
    ls, sf2 = theta.lengthscales, theta.signal_variance
    print(f"{'kernel':<22}{'n':>6}{'numpy ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for n in args.sizes:
        X = rng.random((n, args.dim))
        y = np.sin(6 * X).sum(axis=1)
        W = rng.standard_normal((n, n))
        Q = rng.random((2 * n, args.dim))
        number = max(1, 20_000 // n)
        cases = {
            "symmetric_gram": lambda m: m.matern52_symmetric_gram(X, ls, sf2),
            "grad_terms": lambda m: m.matern52_grad_terms(X, ls, sf2, W),
            "nearest_indices": lambda m: m.nearest_indices(Q, X),
            "loss_and_gradient": lambda m: loss_with(m, X, y, theta),
        }
        for name, call in cases.items():
            py = best_ms(lambda: call(_pykernels), args.repeat, number)
            cy = best_ms(lambda: call(_ckernels), args.repeat, number)
            print(f"{name:<22}{n:>6}{py:>12.3f}{cy:>12.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
