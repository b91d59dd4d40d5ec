"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel on identical inputs, checks that both return the same
result, and times one end-to-end solve per backend (in a subprocess, since
the backend is fixed at import).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from illiq import _pykernels as py

try:
    from illiq import _ckernels as cy
except ImportError:
    cy = None

END_TO_END = """
import time, numpy as np
from illiq.models import random_pwl_instance
from illiq.primal import solve_alm
rng = np.random.default_rng(7)
cases = [random_pwl_instance(rng) for _ in range(8)]
t0 = time.perf_counter()
for m, l, c in cases:
    solve_alm(m, l, c)
print(time.perf_counter() - t0)
"""


def _inputs(rng):
    bps = np.sort(rng.normal(size=40))
    slopes = np.sort(rng.normal(size=41))
    vals = np.cumsum(rng.uniform(size=40))
    xs = rng.normal(scale=2.0, size=20000)
    m = 120
    binv = rng.normal(size=(m, m))
    d = rng.normal(size=m)
    d[7] = 2.0
    xb = rng.uniform(size=m)
    basis = np.arange(m, dtype=np.int64)
    return (bps, slopes, vals, 0.0, xs), (binv, d, 7), (xb, d, basis, 1e-9, 1e-9)


def _time(fn, args, repeat, copy_first=False):
    def run():
        a = (args[0].copy(),) + args[1:] if copy_first else args
        fn(*a)

    return min(timeit.repeat(run, number=20, repeat=repeat)) / 20


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    ev, eta, rt = _inputs(rng)

    # agreement first
    assert np.allclose(py.pwl_eval(*ev), cy.pwl_eval(*ev))
    b1, b2 = eta[0].copy(), eta[0].copy()
    py.eta_update(b1, eta[1], eta[2])
    cy.eta_update(b2, eta[1], eta[2])
    assert np.allclose(b1, b2)
    assert py.ratio_test(*rt) == cy.ratio_test(*rt)

    print(f"{'kernel':<14}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, a, copy in (("pwl_eval", ev, False), ("eta_update", eta, True), ("ratio_test", rt, False)):
        tp = _time(getattr(py, name), a, args.repeat, copy) * 1e3
        tc = _time(getattr(cy, name), a, args.repeat, copy) * 1e3
        print(f"{name:<14}{tp:>14.4f}{tc:>14.4f}{tp / tc:>9.1f}x")

    if not args.skip_end_to_end:
        times = {}
        for label, pure in (("python", "1"), ("cython", "0")):
            env = dict(os.environ, ILLIQ_PURE=pure)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                                 text=True, check=True)
            times[label] = float(out.stdout.strip())
        print(f"{'8 solves':<14}{times['python'] * 1e3:>14.1f}{times['cython'] * 1e3:>14.1f}"
              f"{times['python'] / times['cython']:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
