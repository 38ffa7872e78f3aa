"""Compare the compiled and pure-numpy recurrent kernels.

    python3 benchmarks/bench_kernels.py [--hidden 32] [--T 64] [--batches 1 5 50]

Times one loss+gradient evaluation (the unit of work inside the training
loop) and one forward pass, for both LSTM and plain-RNN modes.
"""

import argparse
import timeit

import numpy as np

from hybridlearn import kernels, rnn


def bench(impl, mode, params, X, Tg, repeat):
    args = (mode, *params.tensors())
    grad = min(timeit.repeat(lambda: impl.loss_grad(*args, X, Tg), number=repeat, repeat=3)) / repeat
    fwd = min(timeit.repeat(lambda: impl.forward(*args, X), number=repeat, repeat=3)) / repeat
    return grad, fwd


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--T", type=int, default=64)
    ap.add_argument("--batches", type=int, nargs="+", default=[1, 5, 50])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    backends = {"python": kernels.get_backend("python")}
    if kernels.BACKEND == "compiled":
        backends["compiled"] = kernels.get_backend("compiled")
    else:
        print("compiled extension not available; timing the python backend only")

    rng = np.random.default_rng(0)
    print(f"{'mode':5} {'N':>4} {'backend':9} {'loss+grad ms':>13} {'forward ms':>11} {'speedup':>8}")
    for mode in rnn.MODES:
        params = rnn.init_params(mode, 2, args.hidden, 3, rng)
        for n in args.batches:
            X = rng.normal(size=(n, args.T, 2))
            Tg = rng.normal(size=(n, args.T, 3))
            base = None
            for name, impl in backends.items():
                grad, fwd = bench(impl, mode, params, X, Tg, args.repeat)
                base = base or grad
                print(f"{mode:5} {n:4d} {name:9} {grad * 1e3:13.3f} {fwd * 1e3:11.3f} {base / grad:7.1f}x")

    # a training run at desk scale: N=500 sequences, minibatch 5, 100 epochs
    updates = 100 * 100
    for name, impl in backends.items():
        params = rnn.init_params("lstm", 2, args.hidden, 3, rng)
        X, Tg = rng.normal(size=(5, args.T, 2)), rng.normal(size=(5, args.T, 3))
        grad, _ = bench(impl, "lstm", params, X, Tg, args.repeat)
        print(f"estimated desk training run ({updates} updates), {name}: {grad * updates:.1f} s")


if __name__ == "__main__":
    main()
