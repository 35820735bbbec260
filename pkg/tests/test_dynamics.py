import csv

import numpy as np
import pytest
import sympy as sp

from ekahler.chart_calculus import euclidean_chart, riemann_at, sphere_chart
from ekahler.dynamics import (
    completeness_probe,
    decay_exponent,
    dp54,
    integrate_geodesic,
    orthonormal_completion,
    parallel_transport,
    tidal_experiment,
    tidal_reference,
    tidal_start,
    write_series_csv,
    write_trajectory_csv,
)
from ekahler.errors import DomainError, InvalidInputError
from ekahler.linear_models import ModelSpec, all_singular_specs, build_chart, default_profile
from oracle import symbolic_curvature

SINGULAR = all_singular_specs(0)
T = sp.Symbol("t", real=True)


def _ids(specs):
    return [s.label() for s in specs]


# ------------------------------------------------------------ integrator


def test_dp54_exponential():
    res = dp54(lambda t, y: y, 0.0, np.array([1.0]), 2.0, 1e-10)
    assert res.termination == "max_time"
    assert res.times[-1] == 2.0
    assert abs(res.states[-1, 0] - np.exp(2.0)) <= 1e-8 * np.exp(2.0)


def test_dp54_oscillator_with_targets():
    ts = np.linspace(0.0, 10.0, 11)
    res = dp54(lambda t, y: np.array([y[1], -y[0]]), 0.0, np.array([0.0, 1.0]), 10.0, 1e-11, t_eval=ts)
    np.testing.assert_array_equal(res.times, ts)
    assert np.abs(res.states[:, 0] - np.sin(ts)).max() <= 1e-8


def test_dp54_blowup_is_reported():
    res = dp54(lambda t, y: y * y, 0.0, np.array([1.0]), 2.0, 1e-9)
    assert res.termination in ("blowup", "step_underflow")
    assert 0.99 < res.times[-1] < 1.0


def test_dp54_fixed_step_is_fifth_order():
    exact = np.exp(-1.0) * np.cos(1.0)
    errs = []
    for h in (0.1, 0.05, 0.025):
        res = dp54(lambda t, y: np.array([-y[0] - y[1], y[0] - y[1]]), 0.0, np.array([1.0, 0.0]), 1.0, 1e-6, fixed_step=h)
        errs.append(abs(res.states[-1, 0] - exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 4.5) & (rates < 5.6))


# ------------------------------------------------------------ geodesics


def test_flat_geodesic_is_straight():
    p0 = np.array([0.5, -1.0, 2.0])
    v0 = np.array([1.0, 0.25, -0.5])
    res = integrate_geodesic(euclidean_chart(3), p0, v0, 3.0)
    assert res.termination == "max_time" and res.t_end == 3.0
    assert np.abs(res.positions - (p0 + res.times[:, None] * v0)).max() <= 1e-12
    assert res.energy_drift <= 1e-14


def test_zero_velocity_is_constant():
    spec = SINGULAR[0]
    p0 = np.array([0.3, 0.2, 1.0, 0.5])
    res = integrate_geodesic(build_chart(spec), p0, np.zeros(4), 5.0)
    assert res.termination == "max_time"
    assert np.abs(res.positions - p0).max() == 0.0


def test_sphere_great_circle():
    # the equator traversed at unit speed stays on the equator
    res = integrate_geodesic(sphere_chart(), [np.pi / 2, 0.0], [0.0, 1.0], 2.0)
    assert np.abs(res.positions[:, 0] - np.pi / 2).max() <= 1e-10
    assert abs(res.positions[-1, 1] - 2.0) <= 1e-9


def test_geodesic_rejects_off_domain_start():
    with pytest.raises(DomainError):
        integrate_geodesic(build_chart(SINGULAR[0]), [0, 0, 0, 0], [0, 0, 1, 0], 1.0)


def _z1_closed_form(spec):
    """z1(t) by integrating z1'' = -Gamma^{z1}_{w1 w1} along w1 = 1 - t, w2 = 0 symbolically."""
    gam, _ = symbolic_curvature(spec.epsilon, spec.lam, spec.R0, 0, spec.variant)
    b1 = default_profile(spec)(1.0, 0.0)
    # Gamma^{z1}_{w1 w1} = (1/2) d_{w1} b and b = b(1, 0) / w1^2 on the line w2 = 0
    g_line = gam([0.0, 0.0, 0.5, 0.0])[0, 2, 2]
    assert abs(g_line - (-b1 / 0.5**3)) <= 1e-12 * abs(g_line)
    w = 1 - T
    acc = b1 / w**3
    vel = sp.integrate(acc, (T, 0, T))
    return sp.lambdify(T, sp.integrate(vel.subs(T, sp.Symbol("s")), (sp.Symbol("s"), 0, T)))


@pytest.mark.parametrize("spec", SINGULAR, ids=_ids(SINGULAR))
def test_tidal_geodesic_reaches_singular_set(spec):
    chart = build_chart(spec)
    p0, v0 = tidal_start(spec)
    res = integrate_geodesic(chart, p0, v0, 2.0)
    assert res.termination == "hit_singular"
    assert 0.99 < res.t_end < 1.0
    assert abs(res.t_singular - 1.0) <= 1e-6
    assert np.abs(res.positions[:, 2] - (1.0 - res.times)).max() < 1e-9
    assert np.abs(res.positions[:, 3]).max() == 0.0
    assert res.energy_drift < 1e-6
    z1 = _z1_closed_form(spec)
    mask = res.times <= 0.9
    ref = np.array([float(z1(t)) for t in res.times[mask]])
    assert np.abs(res.positions[mask, 0] - ref).max() <= 1e-8 * max(1.0, np.abs(ref).max())


# ------------------------------------------------------------ transport


@pytest.mark.parametrize("spec", SINGULAR, ids=_ids(SINGULAR))
def test_parallel_transport_properties(spec):
    chart = build_chart(spec)
    p0, v0 = tidal_start(spec)
    p0 = p0 + np.array([0.1, -0.2, 0.0, 0.3])
    v0 = np.array([0.3, -0.1, -0.8, 0.2])
    ts = np.linspace(0.0, 0.6, 13)
    geo = integrate_geodesic(chart, p0, v0, 0.6, t_eval=ts)
    rng = np.random.default_rng(0)
    E0 = np.column_stack([v0, rng.normal(size=(4, 3))])
    tr = parallel_transport(chart, geo, E0)
    assert tr.gram_residual < 1e-6 * max(1.0, np.abs(tr.gram[0]).max())
    assert np.abs(tr.frames[:, 2:4, :] - E0[None, 2:4, :]).max() <= 1e-9
    assert np.abs(tr.frames[:, :, 0] - geo.velocities).max() <= 1e-7
    assert tr.geodesic_deviation <= 1e-9


def test_transport_frame_dimension_mismatch():
    chart = euclidean_chart(3)
    geo = integrate_geodesic(chart, np.zeros(3), np.ones(3), 1.0)
    with pytest.raises(InvalidInputError):
        parallel_transport(chart, geo, np.eye(4))


def test_orthonormal_completion():
    g = np.diag([1.0, -1.0, 2.0, -3.0])
    F = orthonormal_completion(g, np.array([[1.0], [0.0], [0.0], [0.0]]))
    G = F.T @ g @ F
    assert np.abs(G - np.diag(np.round(np.diag(G)))).max() <= 1e-12
    assert np.abs(np.abs(np.diag(G)) - 1.0).max() <= 1e-12
    assert F[0, 0] * F[0, 0] * g[0, 0] == pytest.approx(1.0)


# ------------------------------------------------------------ tidal experiment


@pytest.mark.parametrize("spec", SINGULAR, ids=_ids(SINGULAR))
def test_tidal_law(spec):
    ts = np.linspace(0.0, 0.9, 19)
    ser = tidal_experiment(spec, ts)
    b0, reading = tidal_reference(spec)
    assert reading == "b(1,0)" and b0 == default_profile(spec)(1.0, 0.0)
    expected = -spec.R0 / (2 * b0**2) / (1 - ts) ** 4
    assert np.abs(ser.values / expected - 1).max() <= 1e-7
    assert abs(ser.values[0] - (-spec.R0 / (2 * b0**2))) <= 1e-7 * abs(ser.values[0])
    half = ser.values[list(ts).index(0.5)]
    assert abs(half / ser.values[0] - 16.0) <= 1e-6 * 16
    assert abs(decay_exponent(ts, ser.values) + 4.0) <= 1e-3


def test_tidal_value_matches_symbolic_curvature():
    spec = SINGULAR[1]
    _, R_ref = symbolic_curvature(spec.epsilon, spec.lam, spec.R0, 0)
    ser = tidal_experiment(spec, [0.0, 0.3])
    for x, F, val in zip(ser.geodesic.positions, ser.transport.frames, ser.values):
        e1, e2 = F[:, 0], F[:, 1]
        assert abs(np.einsum("abcd,a,b,c,d->", R_ref(x), e1, e2, e1, e2) - val) <= 1e-9 * abs(val)
    assert abs(riemann_at(build_chart(spec), ser.geodesic.positions[0]).components[2, 3, 2, 3]) > 0


def test_tidal_input_errors():
    with pytest.raises(InvalidInputError):
        tidal_experiment(SINGULAR[0], [0.0, 1.0])
    with pytest.raises(InvalidInputError):
        tidal_experiment(ModelSpec(variant="cahen_wallach_analog"), [0.0, 0.5])


# ------------------------------------------------------------ completeness probes


def test_probe_on_cahen_wallach_analog():
    rep = completeness_probe(build_chart(ModelSpec(epsilon=-1, variant="cahen_wallach_analog")), 8, 20.0)
    assert rep.survived == 8 and rep.terminated == {}


@pytest.mark.parametrize("spec", SINGULAR, ids=_ids(SINGULAR))
def test_probe_aimed_at_singular_set(spec):
    rep = completeness_probe(build_chart(spec), 3, 20.0, aim="singular")
    assert rep.survived == 0 and rep.terminated == {"hit_singular": 3}
    assert all(np.isfinite(r["t_singular"]) for r in rep.runs)


def test_probe_zero_velocity_and_errors():
    chart = build_chart(SINGULAR[2])
    rep = completeness_probe(chart, 5, 10.0, zero_velocity=True)
    assert rep.survived == 5
    with pytest.raises(InvalidInputError):
        completeness_probe(chart, 0, 1.0)
    with pytest.raises(InvalidInputError):
        completeness_probe(euclidean_chart(2), 1, 1.0, aim="singular")


# ------------------------------------------------------------ CSV output


def test_csv_writers(tmp_path):
    res = integrate_geodesic(euclidean_chart(2), [0.0, 0.0], [1.0, 2.0], 1.0, t_eval=[0.0, 0.5, 1.0])
    path = tmp_path / "traj.csv"
    write_trajectory_csv(res, path)
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 4
    rows = list(csv.reader(path.open(newline="")))
    assert rows[0] == ["t", "x0", "x1", "v0", "v1"]
    np.testing.assert_allclose([float(v) for v in rows[2]], [0.5, 0.5, 1.0, 1.0, 2.0], rtol=1e-14)
    spath = tmp_path / "series.csv"
    write_series_csv([0.0, 0.25], [1.5, -2.0], spath, "R")
    assert spath.read_bytes() == b"t,R\r\n0.0,1.5\r\n0.25,-2.0\r\n"
