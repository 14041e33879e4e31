"""Time the numba and numpy kernel paths side by side.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Also checks that both paths agree on every input they are timed on.
"""
import argparse
import time

import numpy as np

from isda.kernels import NUMBA_KERNELS, NUMPY_KERNELS


def _psd(rng, C, A):
    G = rng.standard_normal((C, A, A))
    return np.einsum("cij,ckj->cik", G, G) / A


# (classes, feature dim, batch, MC draws, moment rows)
PROFILES = {
    "training": (4, 32, 32, 1000, 32),
    "large": (10, 64, 128, 20000, 4096),
}


def cases(rng, C, A, N, M, R):
    W = rng.standard_normal((C, A))
    covs = _psd(rng, C, A)
    present = np.ones(C, dtype=np.bool_)
    logits = rng.standard_normal((N, C)) * 3
    labels = rng.integers(0, C, N)
    X = rng.standard_normal((R, A))
    xl = rng.integers(0, C, R)
    draws = rng.standard_normal((M, A))
    b = rng.standard_normal(C)
    return {
        "quadratic_table": (W, covs, present),
        "softmax_xent": (logits, labels),
        "draw_cross_entropy": (draws, W, b, 3),
        "scatter_moments": (X, xl, C),
    }


def _time(fn, args, repeat):
    fn(*args)  # warm-up, triggers compilation
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not NUMBA_KERNELS:
        print("numba unavailable or disabled; only the numpy path can be timed")
    rng = np.random.default_rng(args.seed)
    for profile, dims in PROFILES.items():
        print(f"\n{profile}: C, A, N, M, rows = {dims}")
        print(f"{'kernel':<20} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}  agree")
        _run(cases(rng, *dims), args.repeat)


def _run(table, repeat):
    for name, inputs in table.items():
        t_np = _time(NUMPY_KERNELS[name], inputs, repeat)
        if name in NUMBA_KERNELS:
            t_nb = _time(NUMBA_KERNELS[name], inputs, repeat)
            agree = _close(NUMPY_KERNELS[name](*inputs), NUMBA_KERNELS[name](*inputs))
            print(f"{name:<20} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f}  {agree}")
        else:
            print(f"{name:<20} {t_np * 1e3:10.3f} {'-':>10} {'-':>8}  -")


if __name__ == "__main__":
    main()
