"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Each kernel is timed on inputs shaped like a training run (a few thousand
epochs, d up to 12, k up to 3) and the outputs of both backends are checked
against each other. ``--end-to-end`` also times EM training of one model in
a subprocess per backend, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from agenet import _kernels_py as py

try:
    from agenet import _kernels as cy
except ImportError:
    cy = None

END_TO_END = """
import time, warnings
warnings.simplefilter("ignore")
from agenet import kernels
from agenet.bayes_net import train
from agenet.gmm import EmConfig
from agenet.synth import SynthSpec, make_separable_model, sample_dataset
ds = sample_dataset(SynthSpec(make_separable_model(2.0, 8, 2, 3), (10,) * 6, (200, 200), n_patients=20))
t = time.perf_counter()
train(ds, 8, 2, 3, EmConfig(n_restarts=1))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def _cases(rng):
    for n, d, k in ((500, 2, 1), (5000, 4, 2), (20000, 12, 3)):
        X = rng.normal(size=(n, d))
        means = rng.normal(size=(k, d))
        A = rng.normal(size=(k, d, d))
        chols = np.linalg.cholesky(A @ np.swapaxes(A, 1, 2) + d * np.eye(d))
        yield f"gaussian_log_prob n={n} d={d} k={k}", "gaussian_log_prob", (X, means, chols)
    for n, k in ((5000, 3), (20000, 6)):
        yield f"logsumexp_rows n={n} k={k}", "logsumexp_rows", (rng.normal(size=(n, k)) * 50,)
    for n in (2000, 20000):
        x = rng.integers(0, 10, size=n).astype(np.int64)
        y = rng.integers(0, 12, size=n).astype(np.int64)
        yield f"mutual_information n={n}", "mutual_information_codes", (x, y, 10, 12)


def _time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    if cy is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':<38} {'numpy (us)':>12} {'cython (us)':>12} {'speedup':>8} {'max diff':>10}")
    for label, name, inputs in _cases(rng):
        f_py, f_cy = getattr(py, name), getattr(cy, name)
        diff = float(np.max(np.abs(np.asarray(f_py(*inputs)) - np.asarray(f_cy(*inputs)))))
        t_py = _time(f_py, inputs, args.repeat)
        t_cy = _time(f_cy, inputs, args.repeat)
        print(f"{label:<38} {1e6 * t_py:12.1f} {1e6 * t_cy:12.1f} {t_py / t_cy:8.2f} {diff:10.1e}")

    if args.end_to_end:
        print("\ntraining one model (d=8, k=2/3, 12000 epochs):")
        for flag in ("1", "0"):
            env = dict(os.environ, AGENET_PURE_PYTHON=flag)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
            backend, seconds = out.stdout.split()
            print(f"  {backend:<8} {float(seconds):.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
