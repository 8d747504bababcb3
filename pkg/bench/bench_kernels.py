"""Compiled vs pure-numpy kernels on the hot paths of the propagator.

    python3 bench/bench_kernels.py [--n 10 14 18] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from cayley_qa import _fallback

try:
    from cayley_qa import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def _setup(n, batch):
    rng = np.random.default_rng(0)
    U = rng.random((n, n))
    U = U + U.T
    np.fill_diagonal(U, 0)
    shape = (1 << n, batch) if batch else (1 << n,)
    phi = (rng.normal(size=shape) + 1j * rng.normal(size=shape)).astype(np.complex128)
    return U, _fallback.interaction_diagonal(U), phi


def _cases(mod, n, batch):
    U, diag, phi = _setup(n, batch)
    prev, out, acc = phi.copy(), np.empty_like(phi), np.zeros_like(phi)
    step = mod.cheb_step_batch if batch else mod.cheb_step
    cases = {
        "chebyshev step": lambda: step(phi, prev, out, acc, diag, 0.5, n, 0.1, 0.0, 0.3 + 0.1j, 2.0),
    }
    if not batch:
        cases["interaction diagonal"] = lambda: mod.interaction_diagonal(U)
        cases["matvec"] = lambda: mod.matvec(phi, diag, 0.5, n, out)
    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[10, 14, 18])
    ap.add_argument("--batch", type=int, default=64, help="trajectory block width for the batched step")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
        return
    print(f"{'kernel':<24}{'n':>4}{'batch':>7}{'cython ms':>12}{'numpy ms':>12}{'speedup':>9}")
    for n in args.n:
        for batch in (0, args.batch) if n <= 14 else (0,):
            fast, slow = _cases(_kernels, n, batch), _cases(_fallback, n, batch)
            for name in fast:
                tc = min(timeit.repeat(fast[name], number=1, repeat=args.repeat)) * 1e3
                tp = min(timeit.repeat(slow[name], number=1, repeat=args.repeat)) * 1e3
                print(f"{name:<24}{n:>4}{batch or '-':>7}{tc:>12.3f}{tp:>12.3f}{tp / tc:>9.1f}")


if __name__ == "__main__":
    main()
