"""Compare the numba kernels with their numpy counterparts.

Kernel timings call both variants directly, after one compiling call, so JIT
time is excluded.  The end-to-end section runs the same workload twice in a
fresh interpreter, once per backend, selected through EKAHLER_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 2000] [--skip-e2e]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from ekahler import kernels
from ekahler.algebraic import _pair_tables

E2E_SNIPPET = r"""
import json, time
import numpy as np
from ekahler import _accel, kernels
from ekahler.chart_calculus import ricci_scalar_at
from ekahler.dynamics import tidal_experiment
from ekahler.linear_models import ModelSpec, build_chart, sample_domain

kernels.warmup()
spec = ModelSpec(epsilon=-1, lam="minus_eps_half", n=1)
chart = build_chart(spec)
pts = sample_domain(spec, np.random.default_rng(0), 100)
t0 = time.perf_counter()
for p in pts:
    ricci_scalar_at(chart, p)
t1 = time.perf_counter()
tidal_experiment(spec, np.linspace(0.0, 0.9, 91))
t2 = time.perf_counter()
print(json.dumps({"backend": _accel.backend_name(), "ricci_100_points": t1 - t0, "tidal": t2 - t1}))
"""


def _cases(rng):
    d = 8
    A = rng.normal(size=(d, d))
    g = A + A.T + d * np.eye(d)
    dg = rng.normal(size=(d, d, d))
    dg = dg + dg.transpose(1, 0, 2)
    ginv = np.linalg.inv(g)
    gam = rng.normal(size=(d, d, d))
    gam = gam + gam.transpose(0, 2, 1)
    v = rng.normal(size=d)
    frame = rng.normal(size=(d, d))
    n = 84
    idx = [rng.integers(0, n, 600) for _ in range(3)]
    x, y = rng.normal(size=(2, n))
    m = 6
    pairs, pair_index, sign = _pair_tables(m)
    N = len(pairs)
    param_index = np.arange(N * N, dtype=np.int64).reshape(N, N)
    return {
        "christoffel d=8": ("christoffel", (ginv, dg)),
        "geodesic_accel d=8": ("geodesic_accel", (gam, v)),
        "transport_rate d=8": ("transport_rate", (gam, v, frame)),
        "jet_mul n=84": ("jet_mul", (x, y, *idx, n)),
        "bianchi_rows m=6": ("bianchi_rows", (m, pair_index, sign, param_index, N * N)),
    }


def bench_kernels(repeat, number):
    rows = []
    for label, (stem, args) in _cases(np.random.default_rng(0)).items():
        nb = getattr(kernels, stem + "_nb")
        npf = getattr(kernels, stem + "_np")
        a, b = nb(*args), npf(*args)
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
            raise RuntimeError(f"{label}: backends disagree")
        k = max(1, number // 50) if stem == "bianchi_rows" else number
        t_nb = min(timeit.repeat(lambda: nb(*args), repeat=repeat, number=k)) / k
        t_np = min(timeit.repeat(lambda: npf(*args), repeat=repeat, number=k)) / k
        rows.append((label, t_nb, t_np))
    return rows


def bench_end_to_end():
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, EKAHLER_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", E2E_SNIPPET], env=env, capture_output=True, text=True, check=True)
        doc = json.loads(proc.stdout.strip().splitlines()[-1])
        out[doc["backend"]] = doc
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    kernels.warmup()
    print(f"{'kernel':<22}{'numba [us]':>12}{'numpy [us]':>12}{'speed-up':>10}")
    for label, t_nb, t_np in bench_kernels(args.repeat, args.number):
        print(f"{label:<22}{t_nb * 1e6:>12.2f}{t_np * 1e6:>12.2f}{t_np / t_nb:>10.1f}")
    if not args.skip_e2e:
        e2e = bench_end_to_end()
        print()
        print(f"{'workload':<22}{'numba [s]':>12}{'numpy [s]':>12}")
        for key in ("ricci_100_points", "tidal"):
            print(f"{key:<22}{e2e['numba'][key]:>12.3f}{e2e['numpy'][key]:>12.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
