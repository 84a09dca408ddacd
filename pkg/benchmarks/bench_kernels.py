"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_kernels.py [--N 1000] [--repeat 20]

Prints per-kernel timings for both backends, then the wall time of a short
Gibbs chain run in a subprocess under each backend (the backend is chosen
at import time through MIFM_DISABLE_NUMBA).
"""
import argparse
import os
import subprocess
import sys
import textwrap
import timeit

import numpy as np

from mifm import kernels


def kernel_cases(N, U=30, J=10, K=5, seed=0):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(N, U, K))
    Z = rng.random((U, J)) < 0.2
    Z[0] = True
    e = rng.normal(size=N)
    members = np.flatnonzero(Z[:, 1]).astype(np.int64)
    Pj = np.ascontiguousarray(np.prod(F[:, members, :], axis=1))
    others = members[members != 0]
    feat = rng.integers(0, 4, size=N).astype(np.int64)
    theta = rng.normal(size=4)
    m = rng.normal(size=N)
    return {
        "depth_dp_last(D=2000)": lambda k: k.depth_dp_last(0.7, 0.2, 1.0, 2000),
        "depth_dp_packed(D=300)": lambda k: k.depth_dp_packed(0.7, 0.2, 1.0, 300),
        "interaction_sum": lambda k: k.interaction_sum(F, Z),
        "loo_products": lambda k: k.loo_products(F, Z, 0, 2),
        "flip_proposal(remove)": lambda k: k.flip_proposal(Pj, F, 0, others, False, True, e),
        "flip_proposal(add)": lambda k: k.flip_proposal(Pj, F, 5, members, True, True, e),
        "group_update": lambda k: k.group_update(feat, e, theta, m, 4),
        "apply_group_delta": lambda k: k.apply_group_delta(e.copy(), feat, theta, m),
    }


CHAIN_SCRIPT = textwrap.dedent("""
    import time
    import numpy as np
    from mifm.gibbs import ChainConfig, Hyperparams, run_chain
    from mifm.model import Dataset
    from mifm import kernels
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, ({N}, 10))
    d = Dataset.from_continuous(X, X[:, 0] * X[:, 1] * X[:, 2] + 0.2 * rng.normal(size={N}))
    cfg = ChainConfig(iterations={iters}, burn_in=0, seed=1)
    run_chain(d, Hyperparams(K=3, J=4), ChainConfig(iterations=2, burn_in=0))  # warm-up / compile
    t = time.perf_counter()
    run_chain(d, Hyperparams(K=3, J=4), cfg)
    print(kernels.backend_name(), time.perf_counter() - t)
""")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=200)
    args = ap.parse_args(argv)

    impls = [("numpy", kernels.numpy_kernels)]
    if kernels.numba_kernels is not None:
        impls.append(("numba", kernels.numba_kernels))
    cases = kernel_cases(args.N)
    print(f"{'kernel':<26}" + "".join(f"{name:>14}" for name, _ in impls) + f"{'speed-up':>10}")
    for label, fn in cases.items():
        times = []
        for _, impl in impls:
            fn(impl)  # compile / warm caches
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        ratio = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<26}" + "".join(f"{t * 1e6:>12.1f}us" for t in times) + ratio)

    print(f"\nfull chain: N={args.N}, D=10, K=3, J=4, {args.iterations} iterations")
    code = CHAIN_SCRIPT.format(N=args.N, iters=args.iterations)
    for flag in ("1", "0"):
        env = dict(os.environ, MIFM_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<6} {float(secs):7.2f}s  ({float(secs) / args.iterations * 1e3:.2f} ms/iteration)")


if __name__ == "__main__":
    main()
