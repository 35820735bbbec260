"""Geodesics, parallel frames, the tidal experiment and completeness probes.

All trajectories come from one embedded Dormand-Prince 5(4) integrator with
PI step control.  Charts that declare a singular set (``singular_norm_fn``)
are integrated with a stop rule: a trial step whose stages come within
``SINGULAR_FLOOR`` of the set, change the sign of the norm, or shrink it by
more than a factor of four is rejected and halved.  When halving pushes the
step below ``STEP_FLOOR`` the run ends as ``hit_singular``; when plain error
control does so it ends as ``step_underflow``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .chart_calculus import Chart, LocalGeometry, metric_at
from .errors import DegenerateMetricError, DomainError, InvalidInputError
from .linear_models import ModelSpec, build_chart, resolve_profile

SINGULAR_FLOOR = 1e-8
STEP_FLOOR = 1e-14
BLOWUP = 1e15
MAX_STEPS = 200_000

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class _Singular(Exception):
    """Raised inside a step when a stage touches the singular set."""


@dataclass
class ODEResult:
    times: np.ndarray
    states: np.ndarray
    termination: str
    accepted: int
    rejected: int


def dp54(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t1: float,
    tol: float,
    *,
    t_eval: Sequence[float] | None = None,
    guard: Callable[[np.ndarray], float] | None = None,
    fixed_step: float | None = None,
) -> ODEResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1``.

    ``guard`` maps a state to the signed distance-like quantity whose zero set
    must not be reached.  With ``t_eval`` the steps are clipped so each
    requested time is hit exactly and only those times are recorded;
    otherwise every accepted step is recorded.  ``fixed_step`` disables error
    control (used for convergence-order checks).
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = float(t1) - t
    if span < 0:
        raise InvalidInputError("integration must run forward in time")
    targets = None if t_eval is None else np.asarray(sorted(float(s) for s in t_eval))
    times, states = [], []
    ti = 0
    if targets is None or (len(targets) and abs(targets[0] - t) <= 1e-15):
        times.append(t)
        states.append(y.copy())
        ti = 0 if targets is None else 1
    g_prev = None if guard is None else guard(y)

    def stages(t, y, h):
        k = np.empty((7, y.size))
        k[0] = rhs(t, y)
        for s in range(1, 7):
            ys = y + h * (np.asarray(_A[s]) @ k[:s])
            if guard is not None:
                gv = guard(ys)
                if abs(gv) < SINGULAR_FLOOR or gv * g_prev < 0:
                    raise _Singular
            k[s] = rhs(t + _C[s] * h, ys)
        return k

    if fixed_step is not None:
        h = float(fixed_step)
    elif span == 0:
        h = 0.0
    else:
        f0 = rhs(t, y)
        d0 = np.linalg.norm(y) / np.sqrt(y.size)
        d1 = np.linalg.norm(f0) / np.sqrt(y.size)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(max(h, 1e-6), span)
    err_prev = 1e-4
    accepted = rejected = 0
    termination = "max_time"
    last_reason = "error"
    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        if accepted + rejected > MAX_STEPS:
            termination = "step_underflow"
            break
        h = min(h, t1 - t)
        if targets is not None and ti < len(targets):
            h = min(h, targets[ti] - t)
        if h < STEP_FLOOR * max(1.0, abs(t)):
            termination = "hit_singular" if last_reason == "singular" else "step_underflow"
            break
        try:
            k = stages(t, y, h)
        except (_Singular, DomainError, DegenerateMetricError, np.linalg.LinAlgError):
            rejected += 1
            last_reason = "singular"
            h *= 0.5
            continue
        y_new = y + h * (_B5 @ k)
        if not np.all(np.isfinite(y_new)) or np.abs(y_new).max() > BLOWUP:
            termination = "blowup"
            break
        if guard is not None:
            gv = guard(y_new)
            if abs(gv) < SINGULAR_FLOOR or gv * g_prev < 0 or abs(gv) < 0.25 * abs(g_prev):
                rejected += 1
                last_reason = "singular"
                h *= 0.5
                continue
        if fixed_step is None:
            scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((h * (_E @ k) / scale) ** 2)))
            if err > 1.0:
                rejected += 1
                last_reason = "error"
                h *= max(0.2, 0.9 * err ** -0.2)
                continue
            fac = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5) if err > 0 else 5.0
            err_prev = max(err, 1e-4)
        t_new = t + h
        if targets is not None and ti < len(targets) and abs(t_new - targets[ti]) <= 1e-14 * max(1.0, abs(t_new)):
            t_new = float(targets[ti])
        t, y = t_new, y_new
        accepted += 1
        last_reason = "error"
        if guard is not None:
            g_prev = guard(y)
        if targets is None:
            times.append(t)
            states.append(y.copy())
        elif ti < len(targets) and t >= targets[ti]:
            times.append(t)
            states.append(y.copy())
            ti += 1
        if fixed_step is None:
            h *= min(5.0, max(0.2, fac))
    return ODEResult(np.array(times), np.array(states).reshape(len(states), y.size), termination, accepted, rejected)


# ------------------------------------------------------------ geodesics


def _gamma(chart: Chart, x: np.ndarray) -> np.ndarray:
    if chart.christoffel_fn is not None and chart.mode == "jet":
        return chart.christoffel_fn(x)
    # the guard owns the domain test; conditioning blows up near the singular set
    return LocalGeometry(chart, x, order=1, check=False).gamma.value


def _guard_for(chart: Chart):
    if chart.singular_norm_fn is None:
        return None
    d = chart.dim
    return lambda y: float(chart.singular_norm_fn(y[:d]))


@dataclass
class GeodesicResult:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    termination: str
    distance: float | None = None
    t_singular: float | None = None
    energy_drift: float = 0.0
    chart_name: str = ""
    info: dict = field(default_factory=dict)

    @property
    def states(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.positions, self.velocities))

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _energy_terms(chart: Chart, x: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    g = chart.metric_value(x)
    terms = g * np.outer(v, v)
    return float(terms.sum()), float(np.abs(terms).sum())


def _ray_crossing(chart: Chart, x: np.ndarray, v: np.ndarray) -> float | None:
    """Parameter s > 0 where the straight ray x + s v meets the singular set.

    The singular norm of every supported chart is quadratic in the singular
    coordinates, so three samples determine it along the ray.  When the ray
    only grazes the set, the point of closest approach is returned.
    """
    idx = list(chart.singular_coords)
    speed = float(np.linalg.norm(v[idx]))
    if speed == 0.0:
        return None
    N = lambda s: float(chart.singular_norm_fn(x + s * v))
    n0 = N(0.0)
    s1 = max(np.sqrt(abs(n0)), 1e-12) / speed
    a, b, c = np.polyfit([0.0, s1, 2 * s1], [n0, N(s1), N(2 * s1)], 2)
    if abs(a) < 1e-300:
        return -c / b if b != 0 and -c / b > 0 else None
    disc = b * b - 4 * a * c
    if disc >= 0:
        roots = sorted(r for r in ((-b - np.sqrt(disc)) / (2 * a), (-b + np.sqrt(disc)) / (2 * a)) if r > -s1)
        if roots:
            return max(roots[0], 0.0)
    vertex = -b / (2 * a)
    return vertex if vertex > 0 else None


def integrate_geodesic(
    chart: Chart,
    p0,
    v0,
    tmax: float,
    tol: float = 1e-10,
    *,
    t_eval: Sequence[float] | None = None,
    fixed_step: float | None = None,
) -> GeodesicResult:
    """Solve the geodesic equation from ``(p0, v0)`` up to ``tmax``."""
    p0 = chart.check_point(p0)
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != p0.shape:
        raise InvalidInputError("velocity and point dimensions differ")
    metric_at(chart, p0)
    d = chart.dim

    def rhs(t, y):
        out = np.empty(2 * d)
        out[:d] = y[d:]
        out[d:] = kernels.geodesic_accel(_gamma(chart, y[:d]), y[d:])
        return out

    ode = dp54(rhs, 0.0, np.concatenate([p0, v0]), tmax, tol, t_eval=t_eval, guard=_guard_for(chart), fixed_step=fixed_step)
    X, V = ode.states[:, :d], ode.states[:, d:]
    E0, _ = _energy_terms(chart, X[0], V[0]) if len(X) else (0.0, 0.0)
    drift = 0.0
    for x, v in zip(X, V):
        E, scale = _energy_terms(chart, x, v)
        drift = max(drift, abs(E - E0) / max(scale, abs(E0), 1e-300) if scale > 0 else 0.0)
    res = GeodesicResult(
        ode.times, X, V, ode.termination, energy_drift=drift, chart_name=chart.name,
        info={"accepted": ode.accepted, "rejected": ode.rejected, "tol": tol},
    )
    if ode.termination == "hit_singular" and len(X):
        res.distance = float(chart.singular_norm_fn(X[-1]))
        s = _ray_crossing(chart, X[-1], V[-1])
        res.t_singular = None if s is None else float(ode.times[-1] + s)
    return res


# ----------------------------------------------------- parallel transport


@dataclass
class FrameTransport:
    times: np.ndarray
    frames: np.ndarray  # frames[t, k, i]: component k of vector i
    gram: np.ndarray
    geodesic_deviation: float

    @property
    def gram_residual(self) -> float:
        return float(np.abs(self.gram - self.gram[0]).max()) if len(self.gram) else 0.0


def parallel_transport(chart: Chart, geo: GeodesicResult, E0, tol: float | None = None) -> FrameTransport:
    """Transport the columns of ``E0`` along ``geo`` (geodesic and frame solved together)."""
    if len(geo.times) == 0:
        raise InvalidInputError("empty geodesic")
    d = chart.dim
    E0 = np.asarray(E0, dtype=float)
    if E0.ndim == 1:
        E0 = E0[:, None]
    if E0.shape[0] != d:
        raise InvalidInputError(f"frame vectors must have {d} components")
    m = E0.shape[1]
    tol = geo.info.get("tol", 1e-10) if tol is None else tol

    def rhs(t, y):
        x, v = y[:d], y[d : 2 * d]
        E = y[2 * d :].reshape(d, m)
        gam = _gamma(chart, x)
        out = np.empty_like(y)
        out[:d] = v
        out[d : 2 * d] = kernels.geodesic_accel(gam, v)
        out[2 * d :] = kernels.transport_rate(gam, v, E).ravel()
        return out

    y0 = np.concatenate([geo.positions[0], geo.velocities[0], E0.ravel()])
    ode = dp54(rhs, float(geo.times[0]), y0, float(geo.times[-1]), tol, t_eval=geo.times, guard=_guard_for(chart))
    k = min(len(ode.times), len(geo.times))
    dev = float(np.abs(ode.states[:k, :d] - geo.positions[:k]).max()) if k else 0.0
    frames = ode.states[:, 2 * d :].reshape(-1, d, m)
    gram = np.array([F.T @ chart.metric_value(y[:d]) @ F for F, y in zip(frames, ode.states)])
    return FrameTransport(ode.times, frames, gram, dev)


def orthonormal_completion(g: np.ndarray, vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Extend orthonormal columns to a full g-orthonormal basis.

    The g-orthogonal complement of the given vectors is nondegenerate, so the
    restricted form can be diagonalised and rescaled to +-1.
    """
    g = np.asarray(g, dtype=float)
    V = np.asarray(vectors, dtype=float).reshape(g.shape[0], -1)
    G = V.T @ g @ V
    if np.abs(G - np.diag(np.sign(np.diag(G)))).max() > 1e-8:
        raise InvalidInputError("vectors are not g-orthonormal")
    _, s, vt = np.linalg.svd((g @ V).T)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    W = vt[rank:].T
    lam, Q = np.linalg.eigh(W.T @ g @ W)
    if np.abs(lam).min(initial=np.inf) < tol:
        raise DegenerateMetricError("complement is degenerate")
    C = (W @ Q) / np.sqrt(np.abs(lam))
    return np.hstack([V, C])


# ------------------------------------------------------ tidal experiment


@dataclass
class TidalSeries:
    times: np.ndarray
    values: np.ndarray
    b_reference: float
    reading: str
    geodesic: GeodesicResult
    transport: FrameTransport

    def expected(self, R0: float) -> np.ndarray:
        """Closed form in the sign convention used throughout the package."""
        return -R0 / (2.0 * self.b_reference**2) / (1.0 - self.times) ** 4


def tidal_start(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.zeros(spec.dim)
    p0[2] = 1.0
    v0 = np.zeros(spec.dim)
    v0[2] = -1.0
    return p0, v0


def tidal_reference(spec: ModelSpec) -> tuple[float, str]:
    """Profile value used to normalise the frame and the reading it reflects.

    The default profiles are singular at the origin of the w-plane, so the
    value at the initial point (w1, w2) = (1, 0) is used instead.
    """
    b = resolve_profile(spec)
    try:
        b00 = float(b(0.0, 0.0))
    except (ZeroDivisionError, FloatingPointError):
        b00 = np.inf
    if np.isfinite(b00) and b00 != 0.0:
        return b00, "b(0,0)"
    return float(b(1.0, 0.0)), "b(1,0)"


def tidal_experiment(spec: ModelSpec, t_samples: Sequence[float], tol: float = 1e-10, chart: Chart | None = None) -> TidalSeries:
    if not spec.singular:
        raise InvalidInputError("the tidal experiment needs a singular model")
    ts = np.asarray(t_samples, dtype=float)
    if ts.size == 0 or ts.min() < 0.0 or ts.max() >= 1.0:
        raise InvalidInputError("sample times must lie in [0, 1)")
    chart = chart or build_chart(spec)
    b0, reading = tidal_reference(spec)
    p0, v0 = tidal_start(spec)
    with np.errstate(divide="ignore"):
        geo = integrate_geodesic(chart, p0, v0, float(ts.max()), tol, t_eval=ts)
    d = spec.dim
    E = np.zeros((d, 2))
    E[2, 0] = E[3, 1] = 1.0 / np.sqrt(abs(b0))
    g0 = chart.metric_value(p0)
    frame = orthonormal_completion(g0, E)
    tr = parallel_transport(chart, geo, frame, tol)
    vals = []
    for x, F in zip(geo.positions, tr.frames):
        R = LocalGeometry(chart, x, order=2).riemann.value
        e1, e2 = F[:, 0], F[:, 1]
        vals.append(float(np.einsum("abcd,a,b,c,d->", R, e1, e2, e1, e2)))
    return TidalSeries(geo.times, np.array(vals), b0, reading, geo, tr)


def decay_exponent(times, values) -> float:
    """Least-squares slope of log|value| against log(1 - t)."""
    x = np.log(1.0 - np.asarray(times, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------- completeness probe


@dataclass
class ProbeReport:
    seeds: int
    tmax: float
    survived: int
    terminated: dict
    runs: list

    def as_dict(self) -> dict:
        return {"seeds": self.seeds, "tmax": self.tmax, "survived": self.survived, "terminated": dict(self.terminated), "runs": self.runs}


def _probe_initial(chart: Chart, rng: np.random.Generator, aim: str, zero_velocity: bool):
    d = chart.dim
    p = chart.sample_fn(rng) if chart.sample_fn is not None else rng.uniform(-1.0, 1.0, d)
    p = np.asarray(p, dtype=float)
    if zero_velocity:
        return p, np.zeros(d)
    v = rng.normal(size=d)
    if aim == "singular":
        if chart.singular_coords is None:
            raise InvalidInputError(f"{chart.name} has no singular set to aim at")
        idx = list(chart.singular_coords)
        v[idx] = -p[idx] * rng.uniform(0.5, 1.5)
    g = chart.metric_value(p)
    nv = float(v @ g @ v)
    v = v / np.sqrt(abs(nv)) if abs(nv) > 1e-12 else v / np.linalg.norm(v)
    return p, v


def completeness_probe(
    chart: Chart,
    seeds: int,
    tmax: float,
    *,
    seed: int = 0,
    aim: str = "random",
    zero_velocity: bool = False,
    tol: float = 1e-9,
) -> ProbeReport:
    """Integrate seeded unit-speed geodesics and tally how they end.

    Survival up to ``tmax`` is evidence, never proof, of completeness.
    """
    if seeds < 1:
        raise InvalidInputError("seeds must be at least 1")
    if aim not in ("random", "singular"):
        raise InvalidInputError("aim must be 'random' or 'singular'")
    survived = 0
    causes: dict[str, int] = {}
    runs = []
    for i in range(seeds):
        rng = np.random.default_rng([seed, i])
        p, v = _probe_initial(chart, rng, aim, zero_velocity)
        res = integrate_geodesic(chart, p, v, tmax, tol)
        if res.termination == "max_time":
            survived += 1
        else:
            causes[res.termination] = causes.get(res.termination, 0) + 1
        runs.append({"seed": i, "termination": res.termination, "t_end": res.t_end, "t_singular": res.t_singular})
    return ProbeReport(seeds, float(tmax), survived, causes, runs)


# -------------------------------------------------------------- CSV export


def write_trajectory_csv(res: GeodesicResult, path) -> None:
    d = res.positions.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)])
        for t, x, v in zip(res.times, res.positions, res.velocities):
            w.writerow([repr(float(t))] + [repr(float(a)) for a in x] + [repr(float(a)) for a in v])


def write_series_csv(times, values, path, value_name: str = "value") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t", value_name])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), repr(float(v))])
