"""Named experiments shared by the command line and by ``run`` configs.

Each experiment takes a model, a parameter dict and a :class:`Context` and
returns a report dict with ``values`` and a list of ``checks``; a check
passes when its value compares favourably with its tolerance scaled by the
context's ``tol_scale``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chart_calculus import ricci_scalar_at, riemann_at, structure_residuals
from .dynamics import (
    completeness_probe,
    decay_exponent,
    integrate_geodesic,
    tidal_experiment,
    tidal_start,
    write_series_csv,
    write_trajectory_csv,
)
from .epsilon_algebra import QuatSignature, standard_triple
from .errors import InvalidInputError
from .algebraic import model_curvature_R0
from .homogeneous_verify import (
    as_residuals,
    curvature_form_fit,
    infinitesimal_holonomy,
    nabla_theta_residual,
    quat_decompose,
    recurrence_residual,
    sp_kernel_dim,
)
from .chart_calculus import AlgebraicCurvature
from .lie_models import (
    automorphism_check,
    build_infinitesimal_model,
    center,
    jacobi_residual,
    nilradical,
    paper_algebra,
    quoted_nilradical,
    same_subspace,
    series_analysis,
    sigma_map,
    subalgebra,
    theta_map,
)
from .linear_models import (
    ModelSpec,
    build_chart,
    eps_laplacian,
    frame_gram_residual,
    profile_residual,
    resolve_profile,
    sample_domain,
    structure_for,
)


@dataclass(frozen=True)
class Context:
    seed: int = 0
    tol_scale: float = 1.0
    fd: bool = False
    out_dir: str | None = None


def _chart(spec: ModelSpec, ctx: Context):
    ch = build_chart(spec)
    return ch.with_mode("fd") if ctx.fd else ch


def _points(spec: ModelSpec, ctx: Context, count: int, salt: int) -> np.ndarray:
    return sample_domain(spec, np.random.default_rng([ctx.seed, salt]), count)


class _Checks:
    def __init__(self, ctx: Context) -> None:
        self.ctx = ctx
        self.items: list[dict] = []

    def below(self, name: str, value: float, tol: float) -> None:
        t = tol * self.ctx.tol_scale
        self.items.append({"name": name, "value": float(value), "op": "<", "tol": t, "pass": bool(value < t)})

    def above(self, name: str, value: float, bound: float) -> None:
        self.items.append({"name": name, "value": float(value), "op": ">", "tol": bound, "pass": bool(value > bound)})

    def equal(self, name: str, value, target) -> None:
        ok = value == target
        self.items.append({"name": name, "value": value, "op": "==", "tol": target, "pass": bool(ok)})

    def close(self, name: str, value: float, target: float, tol: float) -> None:
        t = tol * self.ctx.tol_scale
        err = abs(value - target)
        self.items.append({"name": name, "value": float(value), "target": float(target), "op": "|v-t|<", "tol": t, "pass": bool(err < t)})


def _needs_singular(spec: ModelSpec, name: str) -> None:
    if not spec.singular:
        raise InvalidInputError(f"experiment {name!r} needs a singular model")


# ----------------------------------------------------------- experiments


def exp_model(spec, params, ctx):
    ch = _chart(spec, ctx)
    pts = _points(spec, ctx, int(params.get("points", 5)), 1)
    c = _Checks(ctx)
    g = ch.metric_value(pts[0])
    ev = np.linalg.eigvalsh(g)
    struct = max(max(structure_residuals(ch, p).values()) for p in pts)
    c.below("J_structure", struct, 1e-10)
    b = resolve_profile(spec)
    c.below("profile_pde", max(profile_residual(spec, b, p[2], p[3]) for p in pts), 1e-10)
    if spec.singular:
        c.below("adapted_frame_gram", max(frame_gram_residual(spec, p) for p in pts), 1e-10)
    values = {"dim": spec.dim, "signature": [int(np.sum(ev > 0)), int(np.sum(ev < 0))], "lambda_value": spec.lambda_value}
    return values, c


def exp_ricci_flat(spec, params, ctx):
    ch = _chart(spec, ctx)
    worst = 0.0
    for p in _points(spec, ctx, int(params.get("points", 100)), 2):
        r, _ = ricci_scalar_at(ch, p)
        worst = max(worst, float(np.abs(r).max()))
    c = _Checks(ctx)
    c.below("max_abs_ricci", worst, float(params.get("tol", 1e-8)))
    return {"max_abs_ricci": worst}, c


def closed_form_curvature(spec: ModelSpec, p) -> np.ndarray:
    """Only R(w1, w2, w1, w2) = -(1/2) eps-Laplacian of b survives, up to symmetries."""
    b = resolve_profile(spec)
    v = -0.5 * eps_laplacian(spec, b, float(p[2]), float(p[3]))
    R = np.zeros((spec.dim,) * 4)
    R[2, 3, 2, 3] = R[3, 2, 3, 2] = v
    R[2, 3, 3, 2] = R[3, 2, 2, 3] = -v
    return R


def exp_curvature_closed_form(spec, params, ctx):
    ch = _chart(spec, ctx)
    worst = 0.0
    for p in _points(spec, ctx, int(params.get("points", 100)), 3):
        R = riemann_at(ch, p).components
        Rc = closed_form_curvature(spec, p)
        worst = max(worst, float(np.abs(R - Rc).max() / np.abs(Rc).max()))
    c = _Checks(ctx)
    c.below("relative_mismatch", worst, float(params.get("tol", 1e-7)))
    return {"relative_mismatch": worst}, c


def exp_profile_pde(spec, params, ctx):
    b = resolve_profile(spec)
    pts = _points(spec, ctx, int(params.get("points", 1000)), 4)
    worst = max(profile_residual(spec, b, p[2], p[3]) for p in pts)
    c = _Checks(ctx)
    c.below("relative_residual", worst, float(params.get("tol", 1e-10)))
    return {"relative_residual": worst}, c


def exp_as_residuals(spec, params, ctx):
    ch = _chart(spec, ctx)
    st = structure_for(spec)
    pts = _points(spec, ctx, int(params.get("points", 10)), 5)
    res = as_residuals(st, ch, pts, ctx.seed)
    c = _Checks(ctx)
    for k, v in res.as_dict().items():
        c.below(k, v, float(params.get("tol", 1e-7)))
    values = {"residuals": res.as_dict()}
    if spec.singular:
        factor = float(params.get("perturb", 1.1))
        pert = as_residuals(st.scaled(factor), ch, pts[:3], ctx.seed)
        values["perturbed_nabla_R"] = pert.R
        c.above("perturbed_nabla_R", pert.R, 1e-3)
    return values, c


def exp_curvature_form(spec, params, ctx):
    _needs_singular(spec, "curvature_form")
    ch = _chart(spec, ctx)
    st = structure_for(spec)
    ks, worst = [], 0.0
    for p in _points(spec, ctx, int(params.get("points", 20)), 6):
        k, r = curvature_form_fit(ch, st, p)
        ks.append(k)
        worst = max(worst, r)
    c = _Checks(ctx)
    c.below("fit_residual", worst, 1e-8)
    c.below("k_spread", float(np.ptp(ks)) / abs(spec.R0), 1e-8)
    c.close("k_over_R0", float(np.mean(ks)) / spec.R0, -0.5, 1e-8)
    return {"k": float(np.mean(ks)), "fit_residual": worst}, c


def exp_recurrence(spec, params, ctx):
    _needs_singular(spec, "recurrence")
    ch = _chart(spec, ctx)
    st = structure_for(spec)
    pts = _points(spec, ctx, int(params.get("points", 50)), 7)
    rec = max(recurrence_residual(ch, st, p) for p in pts)
    nth = max(nabla_theta_residual(ch, st, p) for p in pts)
    c = _Checks(ctx)
    c.below("recurrence", rec, 1e-7)
    c.below("nabla_theta", nth, 1e-8)
    return {"recurrence": rec, "nabla_theta": nth}, c


def exp_holonomy_dim(spec, params, ctx):
    ch = _chart(spec, ctx)
    depths = list(range(int(params.get("max_depth", 2)) + 1))
    pts = _points(spec, ctx, int(params.get("points", 5)), 8)
    dims = sorted({tuple(len(infinitesimal_holonomy(ch, p, d)) for d in depths) for p in pts})
    c = _Checks(ctx)
    values = {"dims_by_depth": [list(d) for d in dims]}
    if spec.singular:
        c.equal("dims_by_depth", values["dims_by_depth"], [[1] * len(depths)])
    else:
        from .chart_calculus import LocalGeometry

        dR = max(float(np.abs(LocalGeometry(ch, p, order=3).nabla(LocalGeometry(ch, p, order=3).riemann, "dddd").value).max()) for p in pts)
        values["nabla_R"] = dR
        c.below("nabla_R", dR, 1e-7)
        c.equal("depth_independent", all(len(set(d)) == 1 for d in dims), True)
    return values, c


def exp_geodesic(spec, params, ctx):
    ch = _chart(spec, ctx)
    if "p0" in params:
        p0 = np.asarray(params["p0"], float)
        v0 = np.asarray(params["v0"], float)
    else:
        p0, v0 = tidal_start(spec)
    tmax = float(params.get("tmax", 2.0))
    tol = float(params.get("tol", 1e-10))
    res = integrate_geodesic(ch, p0, v0, tmax, tol)
    c = _Checks(ctx)
    c.below("energy_drift", res.energy_drift, 1e-6)
    values = {"termination": res.termination, "t_end": res.t_end, "t_singular": res.t_singular, "steps": len(res.times)}
    if ctx.out_dir:
        path = os.path.join(ctx.out_dir, params.get("csv", "geodesic.csv"))
        write_trajectory_csv(res, path)
        values["csv"] = os.path.basename(path)
    return values, c


def exp_tidal(spec, params, ctx):
    _needs_singular(spec, "tidal")
    ts = params.get("t_samples")
    if ts is None:
        ts = np.round(np.linspace(0.0, 0.9, 91), 12)
    ts = sorted(set(float(t) for t in ts) | {0.0, 0.5})
    series = tidal_experiment(spec, ts, float(params.get("tol", 1e-10)), chart=_chart(spec, ctx))
    vals = dict(zip(series.times.tolist(), series.values.tolist()))
    mask = series.times <= 0.9 + 1e-12
    slope = decay_exponent(series.times[mask], series.values[mask])
    p0, v0 = tidal_start(spec)
    geo = integrate_geodesic(_chart(spec, ctx), p0, v0, 2.0)
    w1_res = float(np.abs(geo.positions[:, 2] - (1.0 - geo.times)).max())
    c = _Checks(ctx)
    c.close("ratio_half_to_zero", vals[0.5] / vals[0.0], 16.0, 16.0 * 1e-6)
    c.close("decay_exponent", slope, -4.0, 1e-3)
    expected0 = float(series.expected(spec.R0)[0])
    c.close("value_at_zero", vals[0.0], expected0, 1e-7 * max(1.0, abs(expected0)))
    c.below("w1_residual", w1_res, 1e-9)
    c.equal("termination", geo.termination, "hit_singular")
    c.close("t_singular", geo.t_singular if geo.t_singular is not None else np.inf, 1.0, 1e-6)
    values = {
        "value_at_zero": vals[0.0],
        "ratio_half_to_zero": vals[0.5] / vals[0.0],
        "decay_exponent": slope,
        "b_reference": series.b_reference,
        "b_reading": series.reading,
        "t_singular": geo.t_singular,
        "gram_residual": series.transport.gram_residual,
    }
    if ctx.out_dir:
        path = os.path.join(ctx.out_dir, params.get("csv", "tidal.csv"))
        write_series_csv(series.times, series.values, path)
        values["csv"] = os.path.basename(path)
    return values, c


def exp_probe_completeness(spec, params, ctx):
    ch = _chart(spec, ctx)
    seeds = int(params.get("seeds", 100))
    tmax = float(params.get("tmax", 50.0 if not spec.singular else 5.0))
    aim = params.get("aim", "singular" if spec.singular else "random")
    zero = bool(params.get("zero_velocity", False))
    rep = completeness_probe(ch, seeds, tmax, seed=ctx.seed, aim=aim, zero_velocity=zero)
    c = _Checks(ctx)
    if zero or not spec.singular:
        c.equal("survived", rep.survived, seeds)
    else:
        c.above("hit_singular", rep.terminated.get("hit_singular", 0), 0)
    d = rep.as_dict()
    d.pop("runs")
    d["aim"] = aim
    return d, c


def exp_lie_verify(spec, params, ctx):
    lam = params.get("lambda", spec.lam)
    n = int(params.get("n", max(spec.n, 1)))
    b_p = float(params.get("b_p", 1.0))
    sc = paper_algebra(lam, spec.epsilon, n, b_p, spec.R0)
    c = _Checks(ctx)
    jac = jacobi_residual(sc)
    cen = center(sc).shape[0]
    qn = quoted_nilradical(sc)
    sr = series_analysis(sc, qn)
    N = nilradical(sc)
    c.below("jacobi", jac, 1e-12)
    c.equal("center_dim", cen, 0)
    c.equal("solvable", sr.solvable_steps is not None, True)
    c.equal("quoted_nilradical_is_ideal", sr.is_ideal, True)
    c.equal("nilpotent_steps", sr.nilpotent_steps, 3 if lam == "minus_eps_half" else 2)
    c.equal("nilradical_matches_quoted", same_subspace(N, qn), True)
    values = {
        "dim": sc.dim,
        "overlays": list(sc.meta.get("overlays", ())),
        "jacobi": jac,
        "center_dim": cen,
        "solvable_steps": sr.solvable_steps,
        "nilpotent_steps": sr.nilpotent_steps,
        "nilradical_dim": int(N.shape[0]),
    }
    if lam == "minus_eps_half":
        ar = automorphism_check(sc, sigma_map(sc))
        sub = subalgebra(sc, ar.fixed_names)
        tr = automorphism_check(sub, theta_map(sub))
        c.below("sigma_auto", ar.auto_residual, 1e-12)
        c.below("sigma_isometry", ar.isometry_residual, 1e-12)
        c.equal("sigma_fixed", sorted(ar.fixed_names), sorted(["p1", "q1"] + [f"X{a}" for a in range(1, n + 1)] + [f"C{a}" for a in range(1, n + 1)]))
        c.below("theta_auto", tr.auto_residual, 1e-12)
        c.equal("theta_fixed", sorted(tr.fixed_names), ["p1", "q1"])
        values["sigma_fixed"] = list(ar.fixed_names)
        values["theta_fixed"] = list(tr.fixed_names)
    if params.get("build_model", True):
        mspec = ModelSpec(spec.epsilon, lam, n, (), spec.R0)
        ch = _chart(mspec, ctx)
        p = _points(mspec, ctx, 1, 9)[0]
        im = build_infinitesimal_model(ch, structure_for(mspec), p)
        c.equal("model_h_dim", im.h_dim, 1 if lam == "zero" else 2 * n + 2)
        c.below("model_jacobi", jacobi_residual(im.sc), 1e-7)
        c.below("model_reductivity", im.reductivity_residual(), 1e-7)
        values["model_h_dim"] = im.h_dim
    return values, c


def exp_quat_kernel(spec, params, ctx):
    n = int(params.get("n", 1))
    kind = params.get("signature", "pseudo")
    if kind not in ("pseudo", "para"):
        raise InvalidInputError("signature must be 'pseudo' or 'para'")
    sig = QuatSignature((-1, 1, 1) if kind == "para" else (-1, -1, -1))
    k, det = sp_kernel_dim(n, sig, return_details=True)
    g, J1, J2, J3 = standard_triple(n, sig)
    nu = float(params.get("nu", 0.7))
    R0 = model_curvature_R0(g, (J1, J2, J3), "quaternionic", signs=sig.eps)
    got, rest = quat_decompose(AlgebraicCurvature(nu * R0.components), g, (J1, J2, J3), sig.eps)
    c = _Checks(ctx)
    c.equal("kernel_dim", k, 0)
    c.below("nu_roundtrip", abs(got - nu), 1e-10)
    c.below("sp_remainder", float(np.abs(rest.components).max()), 1e-10)
    return {"n": n, "signature": kind, "kernel_dim": k, "space_dim": det["space_dim"], "nu": got}, c


REGISTRY: dict[str, Callable] = {
    "model": exp_model,
    "ricci_flat": exp_ricci_flat,
    "curvature_closed_form": exp_curvature_closed_form,
    "profile_pde": exp_profile_pde,
    "as_residuals": exp_as_residuals,
    "curvature_form": exp_curvature_form,
    "recurrence": exp_recurrence,
    "holonomy_dim": exp_holonomy_dim,
    "geodesic": exp_geodesic,
    "tidal": exp_tidal,
    "probe_completeness": exp_probe_completeness,
    "lie_verify": exp_lie_verify,
    "quat_kernel": exp_quat_kernel,
}

VERIFY_SET = (
    "ricci_flat",
    "curvature_closed_form",
    "profile_pde",
    "as_residuals",
    "curvature_form",
    "recurrence",
    "holonomy_dim",
)


def run_experiment(name: str, spec: ModelSpec, params: dict, ctx: Context) -> dict:
    """Run one experiment and wrap its outcome in a report dict."""
    fn = REGISTRY[name]
    try:
        values, checks = fn(spec, dict(params), ctx)
        items = checks.items
        passed = all(i["pass"] for i in items)
        error = None
    except Exception as exc:  # reported, turns into exit status 1
        values, items, passed, error = {}, [], False, f"{type(exc).__name__}: {exc}"
    rep = {"experiment": name, "inputs": {"model": spec.to_json(), "params": params}, "values": values, "checks": items, "passed": passed}
    if error:
        rep["error"] = error
    return rep
