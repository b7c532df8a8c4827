"""Compare the compiled and pure-NumPy numerical backends.

Times the four hot kernels on representative workloads and prints a table
with the speedup of the compiled extension.  Run as::

    python3 benchmarks/bench_backends.py [--repeat 5]

The two backends are loaded side by side (the compiled one directly, the
fallback from its module), so results come from one process and one NumPy.
"""

import argparse
import importlib
import time

import numpy as np

from dgsm_lab._accel import pyimpl


def _load_native():
    try:
        return importlib.import_module("dgsm_lab._accel._native")
    except ImportError:
        return None


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads(rng):
    r = rng.standard_normal(200_000) * 3.0
    mu = rng.standard_normal(200_000)
    sigma = np.abs(rng.standard_normal(200_000)) + 0.05
    Xc = rng.random((512, 6))
    X = rng.random((256, 6))
    inv_ls2 = 1.0 / rng.uniform(0.1, 1.0, 6) ** 2
    ints = rng.integers(0, 2**32, size=(65_536, 6), dtype=np.uint64)
    keys = rng.integers(0, 2**63, size=6, dtype=np.uint64)
    z = rng.integers(0, 2**63, size=200_000, dtype=np.uint64)
    return [
        ("entropy_term (200k)", "entropy_term", (r,)),
        ("folded_mean_var (200k)", "folded_mean_var", (mu, sigma)),
        ("rbf_cross_stack (512x256, d=6)", "rbf_cross_stack",
         (Xc, X, inv_ls2, 1.3)),
        ("owen_scramble (65k, d=6)", "owen_scramble", (ints, keys)),
        ("splitmix64 (200k)", "splitmix64", (z,)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions; best of N is reported")
    args = parser.parse_args()

    native = _load_native()
    if native is None:
        print("compiled backend not available; showing pure-Python timings only")
    rng = np.random.default_rng(0)
    rows = []
    for label, fn_name, fn_args in _workloads(rng):
        t_py = _time(getattr(pyimpl, fn_name), fn_args, args.repeat)
        if native is not None:
            t_nat = _time(getattr(native, fn_name), fn_args, args.repeat)
            out_py = getattr(pyimpl, fn_name)(*fn_args)
            out_nat = getattr(native, fn_name)(*fn_args)
            if isinstance(out_py, tuple):
                for a, b in zip(out_py, out_nat):
                    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
            elif np.asarray(out_py).dtype == np.uint64:
                assert np.array_equal(out_py, out_nat)
            else:
                np.testing.assert_allclose(out_py, out_nat, rtol=1e-12, atol=1e-12)
            rows.append((label, t_py, t_nat, t_py / t_nat))
        else:
            rows.append((label, t_py, None, None))

    width = max(len(r[0]) for r in rows)
    header = f"{'workload':<{width}}  {'python':>10}  {'native':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, t_py, t_nat, speed in rows:
        if t_nat is None:
            print(f"{label:<{width}}  {t_py * 1e3:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
        else:
            print(f"{label:<{width}}  {t_py * 1e3:>8.2f}ms  {t_nat * 1e3:>8.2f}ms  {speed:>7.1f}x")


if __name__ == "__main__":
    main()
