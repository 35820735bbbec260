import os
import subprocess
import sys

import numpy as np
import pytest

from ekahler import _accel, kernels
from ekahler.algebraic import _pair_tables


def _christoffel_loops(ginv, dg):
    d = ginv.shape[0]
    out = np.zeros((d, d, d))
    for k in range(d):
        for i in range(d):
            for j in range(d):
                out[k, i, j] = 0.5 * sum(ginv[k, l] * (dg[l, i, j] + dg[l, j, i] - dg[i, j, l]) for l in range(d))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_backend_reflects_flag():
    flag = os.environ.get("EKAHLER_DISABLE_NUMBA", "0") not in ("0", "", "false", "no", "off")
    assert _accel.backend_name() == ("numpy" if flag or not _accel.HAVE_NUMBA else "numba")


def test_christoffel_paths_agree(rng):
    for d in (2, 4, 6):
        A = rng.normal(size=(d, d))
        g = A + A.T + d * np.eye(d)
        dg = rng.normal(size=(d, d, d))
        dg = dg + dg.transpose(1, 0, 2)
        ginv = np.linalg.inv(g)
        ref = _christoffel_loops(ginv, dg)
        for fn in (kernels.christoffel_nb, kernels.christoffel_np, kernels.christoffel):
            assert np.abs(fn(ginv, dg) - ref).max() <= 1e-12 * np.abs(ref).max()


def test_geodesic_and_transport_paths_agree(rng):
    d = 5
    gam = rng.normal(size=(d, d, d))
    gam = gam + gam.transpose(0, 2, 1)
    v = rng.normal(size=d)
    E = rng.normal(size=(d, 3))
    acc = -np.einsum("kij,i,j->k", gam, v, v)
    rate = -np.einsum("kij,i,jm->km", gam, v, E)
    for fn in (kernels.geodesic_accel_nb, kernels.geodesic_accel_np):
        assert np.abs(fn(gam, v) - acc).max() <= 1e-12
    for fn in (kernels.transport_rate_nb, kernels.transport_rate_np):
        assert np.abs(fn(gam, v, E) - rate).max() <= 1e-12


def test_jet_mul_paths_agree(rng):
    n = 7
    out_idx = rng.integers(0, n, 30)
    a_idx = rng.integers(0, n, 30)
    b_idx = rng.integers(0, n, 30)
    x, y = rng.normal(size=(2, n))
    ref = np.zeros(n)
    for o, a, b in zip(out_idx, a_idx, b_idx):
        ref[o] += x[a] * y[b]
    for fn in (kernels.jet_mul_nb, kernels.jet_mul_np):
        assert np.abs(fn(x, y, out_idx, a_idx, b_idx, n) - ref).max() <= 1e-13


@pytest.mark.parametrize("m", [3, 4, 5])
def test_bianchi_rows_paths_agree(m):
    pairs, pair_index, sign = _pair_tables(m)
    N = len(pairs)
    param_index = np.arange(N * N, dtype=np.int64).reshape(N, N)
    a = kernels.bianchi_rows_nb(m, pair_index, sign, param_index, N * N)
    b = kernels.bianchi_rows_np(m, pair_index, sign, param_index, N * N)
    assert np.array_equal(a, b)


def test_numpy_path_in_subprocess():
    code = (
        "from ekahler import _accel, kernels\n"
        "from ekahler.algebraic import algebraic_curvature_space\n"
        "from ekahler.linear_models import ModelSpec, build_chart\n"
        "from ekahler.chart_calculus import riemann_at\n"
        "assert _accel.backend_name() == 'numpy'\n"
        "assert kernels.christoffel is kernels.christoffel_np\n"
        "assert len(algebraic_curvature_space(4, {'pair', 'bianchi'})) == 20\n"
        "R = riemann_at(build_chart(ModelSpec()), [0, 0, 1, 0]).components\n"
        "print(repr(float(R[2, 3, 2, 3])))\n"
    )
    env = dict(os.environ, EKAHLER_DISABLE_NUMBA="1")
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert abs(float(proc.stdout.strip()) + 2.0) <= 1e-10
