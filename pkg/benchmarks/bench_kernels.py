"""Compare the compiled loss kernels against the numpy fallback.

Times the fused loss+gradient kernel on the three shapes the sweeps
actually hit (synthetic SP/EOP training splits and an Adult-sized
matrix), then one full constrained solve per backend.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import statistics
import time

import numpy as np

import lossfair.kernels as kernels
from lossfair import _kernels_py
from lossfair.constraints import covariance_cap, loss_averse
from lossfair.data import SplitSpec, split
from lossfair.metrics import BenefitKind
from lossfair.solver import minimize
from lossfair.synthgen import SynthConfig, gen_sp_dataset
from lossfair.trainer import train_status_quo

try:
    from lossfair import _kernels
except ImportError:
    _kernels = None

SHAPES = ((6000, 3), (16000, 3), (45000, 101))


def timed(fn, repeats):
    # one warmup call, then the median of `repeats` timings
    fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def kernel_workload(backend, n, d, calls):
    rng = np.random.default_rng(0)
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    X[:, -1] = 1.0
    y = rng.choice([-1.0, 1.0], size=n)
    theta = rng.normal(size=d)

    def run():
        for _ in range(calls):
            backend.loss_grad(X, y, theta, 1e-3)

    return run


def solve_workload(impl):
    ds = gen_sp_dataset(SynthConfig(6000, seed=0))
    train, _, _ = split(ds, SplitSpec(seed=0))
    sqo = train_status_quo(train, 1e-3)
    cons = covariance_cap(train, BenefitKind.ACCEPTANCE_RATE, 0.0)
    cons = cons + loss_averse(train, BenefitKind.ACCEPTANCE_RATE, sqo.model, 0.1)

    def run():
        saved = kernels._impl
        kernels._impl = impl
        try:
            report = minimize(train, 1e-3, cons)
            assert report.status.value == "Optimal"
        finally:
            kernels._impl = saved

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not importable; timing the fallback only")
    backends = [("numpy", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))

    print(f"numpy {np.__version__}, active backend: {kernels.BACKEND}")
    print()
    header = f"{'workload':<26}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n, d in SHAPES:
        calls = max(1, 2_000_000 // (n * d))
        row = [f"loss_grad {n}x{d} x{calls:<4}"]
        times = []
        for _, impl in backends:
            t = timed(kernel_workload(impl, n, d, calls), args.repeats)
            times.append(t)
            row.append(f"{1000 * t:9.2f}ms")
        if len(times) == 2:
            row.append(f"{times[1] / times[0]:9.1f}x")
        print(f"{row[0]:<26}" + "".join(row[1:]))

    row = ["constrained solve 2940x3"]
    times = []
    for _, impl in backends:
        t = timed(solve_workload(impl), min(args.repeats, 3))
        times.append(t)
        row.append(f"{1000 * t:9.2f}ms")
    if len(times) == 2:
        row.append(f"{times[1] / times[0]:9.1f}x")
    print(f"{row[0]:<26}" + "".join(row[1:]))


if __name__ == "__main__":
    main()
