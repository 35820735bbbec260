"""Structure tensors of linear type and the Ambrose-Singer verification suite.

Index layout: ``S[c, a, b]`` holds the components of ``S_X Y`` so that
``(S_X Y)^c = S[c, a, b] X^a Y^b``.  Covariant derivatives put the new slot
first.  The canonical connection is ``nabla - S``; on tensors it acts as
``nabla`` minus the derivation induced by ``S_X`` on every slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebraic import algebraic_curvature_space, model_curvature_R0
from .chart_calculus import AlgebraicCurvature, Chart, LocalGeometry, metric_at
from .epsilon_algebra import QuatSignature, standard_triple
from .errors import FitUndefinedError, InvalidInputError, PreconditionError, ResourceError
from .jets import JetTensor, jcontract
from .linear_models import LinearTypeStructure

SLOT_DRAWS = 32


# ---------------------------------------------------------- S as tensors


def _struct_jets(geo: LocalGeometry, chart: Chart, struct: LinearTypeStructure, order: int):
    xi = geo.jet(struct.xi, order)
    if struct.kind == "kahler":
        if chart.J_fn is None:
            raise InvalidInputError(f"{chart.name} carries no epsilon-complex structure")
        Js = [geo.jet(chart.J_fn, order)]
        zetas = None
    else:
        if chart.quat_fns is None:
            raise InvalidInputError(f"{chart.name} carries no quaternionic structure")
        Js = [geo.jet(lambda q, a=a: chart.quat_fns(q)[a], order) for a in range(3)]
        if struct.zeta_quat is None:
            zetas = [geo.constant(np.zeros(chart.dim), order)] * 3
        else:
            zetas = [geo.jet(lambda q, a=a: struct.zeta_quat(q)[a], order) for a in range(3)]
    return xi, Js, zetas


def s_tensor_jet(geo: LocalGeometry, chart: Chart, struct: LinearTypeStructure, order: int = 1) -> JetTensor:
    """Jet of ``S[c, a, b]`` at the geometry's base point."""
    g = geo.g.truncate(order)
    d = chart.dim
    delta = geo.constant(np.eye(d), order)
    xi, Js, zetas = _struct_jets(geo, chart, struct, order)
    theta = jcontract("bm,m->b", g, xi)
    S = jcontract("ab,c->cab", g, xi) - jcontract("ca,b->cab", delta, theta)
    if struct.kind == "kahler":
        J = Js[0]
        eps = chart.epsilon
        Jxi = jcontract("cm,m->c", J, xi)
        gJ = jcontract("am,mb->ab", g, J)
        thJ = jcontract("m,mb->b", theta, J)
        S = S + eps * jcontract("ab,c->cab", gJ, Jxi)
        S = S - eps * jcontract("ca,b->cab", J, thJ)
        S = S - (2.0 * struct.lam) * jcontract("cb,a->cab", J, thJ)
        return S
    sig = chart.quat_sig.eps if chart.quat_sig is not None else (-1, -1, -1)
    for J, e, z in zip(Js, sig, zetas):
        Jxi = jcontract("cm,m->c", J, xi)
        gJ = jcontract("am,mb->ab", g, J)
        thJ = jcontract("m,mb->b", theta, J)
        zflat = jcontract("am,m->a", g, z)
        S = S - e * (jcontract("ca,b->cab", J, thJ) - jcontract("ab,c->cab", gJ, Jxi))
        S = S + jcontract("cb,a->cab", J, zflat)
    return S


def _s_value(struct: LinearTypeStructure, chart: Chart, p) -> np.ndarray:
    geo = LocalGeometry(chart, p, order=0)
    return s_tensor_jet(geo, chart, struct, order=0).value


def s_kahler(struct: LinearTypeStructure, chart: Chart, p, X, Y) -> np.ndarray:
    if struct.kind != "kahler":
        raise InvalidInputError("s_kahler needs an epsilon-Kaehler structure")
    return np.einsum("cab,a,b->c", _s_value(struct, chart, p), np.asarray(X, float), np.asarray(Y, float))


def s_quat(struct: LinearTypeStructure, chart: Chart, p, X, Y) -> np.ndarray:
    if struct.kind != "quaternionic":
        raise InvalidInputError("s_quat needs a quaternionic structure")
    return np.einsum("cab,a,b->c", _s_value(struct, chart, p), np.asarray(X, float), np.asarray(Y, float))


def s_skew_residual(struct: LinearTypeStructure, chart: Chart, p) -> float:
    """max |g(S_X Y, Z) + g(Y, S_X Z)| over the coordinate basis."""
    g, _ = metric_at(chart, p)
    S = _s_value(struct, chart, p)
    low = np.einsum("cz,cay->azy", g, S)  # low[a, z, y] = g(S_a e_y, e_z)
    return float(np.abs(low + low.transpose(0, 2, 1)).max())


# ------------------------------------------------ derivations and residuals


def derivation(S: np.ndarray, T: np.ndarray, variance) -> np.ndarray:
    """``(S_x . T)`` with the new slot x first: the action of S_x as a derivation."""
    r = len(variance)
    slots = "abcdefgh"[:r]
    out = np.zeros((S.shape[0],) + T.shape)
    for s, var in enumerate(variance):
        t_subs = slots[:s] + "m" + slots[s + 1 :]
        if var == "d":
            out -= np.einsum(f"mx{slots[s]},{t_subs}->x{slots}", S, T)
        else:
            out += np.einsum(f"{slots[s]}xm,{t_subs}->x{slots}", S, T)
    return out


def slot_norm(T: np.ndarray, variance, rng: np.random.Generator, draws: int = SLOT_DRAWS) -> float:
    """Max-abs of T with its covariant slots fed random unit vectors."""
    cov = [i for i, v in enumerate(variance) if v == "d"]
    d = T.shape[0] if T.ndim else 1
    best = 0.0
    for _ in range(draws):
        A = T
        # contract from the last covariant slot so earlier axis numbers stay valid
        for ax in reversed(cov):
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            A = np.tensordot(A, v, axes=([ax], [0]))
        best = max(best, float(np.abs(A).max()) if np.size(A) else 0.0)
    return best


@dataclass(frozen=True)
class ASResiduals:
    g: float
    J: float
    R: float
    S: float
    xi: float

    def as_dict(self) -> dict[str, float]:
        return {"nabla_g": self.g, "nabla_J": self.J, "nabla_R": self.R, "nabla_S": self.S, "nabla_xi": self.xi}

    @property
    def max(self) -> float:
        return max(self.g, self.J, self.R, self.S, self.xi)


def _project_out_span(E: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """Remove from each E[x] its least-squares component along ``basis``."""
    B = np.array([b.ravel() for b in basis]).T
    flat = E.reshape(E.shape[0], -1).T
    coef, *_ = np.linalg.lstsq(B, flat, rcond=None)
    return (flat - B @ coef).T.reshape(E.shape)


def as_residuals_at(struct: LinearTypeStructure, chart: Chart, p, rng: np.random.Generator) -> ASResiduals:
    geo = LocalGeometry(chart, p, order=3)
    g = geo.g
    S_jet = s_tensor_jet(geo, chart, struct, order=1)
    S = S_jet.value
    xi_jet = geo.jet(struct.xi, 1)
    R_jet = geo.riemann  # order 1

    def tilde(T_jet: JetTensor, variance) -> np.ndarray:
        return geo.nabla(T_jet.truncate(1), variance).value - derivation(S, T_jet.value, variance)

    res_g = slot_norm(tilde(g.truncate(1), "dd"), "ddd", rng)
    res_R = slot_norm(tilde(R_jet, "dddd"), "ddddd", rng)
    res_S = slot_norm(tilde(S_jet, "udd"), "dudd", rng)
    res_xi = slot_norm(tilde(xi_jet, "u"), "du", rng)
    if struct.kind == "kahler":
        J_jet = geo.jet(chart.J_fn, 1)
        res_J = slot_norm(tilde(J_jet, "ud"), "dud", rng)
    else:
        Js = [geo.jet(lambda q, a=a: chart.quat_fns(q)[a], 1) for a in range(3)]
        vals = [J.value for J in Js]
        res_J = 0.0
        for J in Js:
            E = _project_out_span(tilde(J, "ud"), vals)
            res_J = max(res_J, slot_norm(E, "dud", rng))
    return ASResiduals(res_g, res_J, res_R, res_S, res_xi)


def as_residuals(struct: LinearTypeStructure, chart: Chart, samples, seed: int = 0) -> ASResiduals:
    """Maxima over samples of the five canonical-connection residuals."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    worst = np.zeros(5)
    for i, p in enumerate(samples):
        rng = np.random.default_rng([seed, i])
        r = as_residuals_at(struct, chart, p, rng)
        worst = np.maximum(worst, [r.g, r.J, r.R, r.S, r.xi])
    return ASResiduals(*map(float, worst))


# ------------------------------------------------------ Ricci-flat identities


def _theta_jet(geo: LocalGeometry, struct: LinearTypeStructure, order: int) -> JetTensor:
    return jcontract("bm,m->b", geo.g.truncate(order), geo.jet(struct.xi, order))


def recurrence_residual(chart: Chart, struct: LinearTypeStructure, p) -> float:
    """max-abs of nabla R - 4 theta (x) R."""
    geo = LocalGeometry(chart, p, order=3)
    R = geo.riemann
    dR = geo.nabla(R, "dddd").value
    theta = _theta_jet(geo, struct, 0).value
    return float(np.abs(dR - 4.0 * np.einsum("e,abcd->eabcd", theta, R.value)).max())


def nabla_theta_residual(chart: Chart, struct: LinearTypeStructure, p) -> float:
    """max-abs of nabla theta - theta (x) theta - (2 lam + eps)(theta J) (x) (theta J)."""
    geo = LocalGeometry(chart, p, order=1)
    th = _theta_jet(geo, struct, 1)
    dth = geo.nabla(th, "d").value
    t = th.value
    tJ = t @ chart.J_value(geo.p)
    rhs = np.outer(t, t) + (2.0 * struct.lam + chart.epsilon) * np.outer(tJ, tJ)
    return float(np.abs(dth - rhs).max())


def curvature_form_fit(chart: Chart, struct: LinearTypeStructure, p) -> tuple[float, float]:
    """Least-squares k in R = k (theta ^ theta J) (x) (theta ^ theta J) and the residual fraction."""
    geo = LocalGeometry(chart, p, order=2)
    R = geo.riemann.value
    theta = geo.g.value @ struct.xi_at(geo.p)
    if np.abs(theta).max() == 0.0:
        raise FitUndefinedError("theta vanishes at the point")
    tJ = theta @ chart.J_value(geo.p)
    w = np.outer(theta, tJ) - np.outer(tJ, theta)
    T = np.einsum("ab,cd->abcd", w, w)
    tt = float(np.sum(T * T))
    if tt == 0.0:
        raise FitUndefinedError("theta ^ (theta J) vanishes at the point")
    k = float(np.sum(R * T) / tt)
    rn = float(np.linalg.norm(R))
    resid = float(np.linalg.norm(R - k * T)) / rn if rn > 0 else 0.0
    return k, resid


# ---------------------------------------------------------- holonomy


def _endomorphisms(T: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """All R-type endomorphisms E^d_c = g^{dw} T[..., a, b, c, w] from a tensor."""
    d = ginv.shape[0]
    E = np.einsum("dw,...cw->...dc", ginv, T)
    return E.reshape(-1, d, d)


def _span_basis(mats: np.ndarray, rel_cut: float) -> list[np.ndarray]:
    d = mats.shape[-1]
    flat = mats.reshape(-1, d * d)
    if flat.size == 0:
        return []
    _, s, vt = np.linalg.svd(flat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return []
    rank = int(np.sum(s > rel_cut * s[0]))
    return [vt[i].reshape(d, d) for i in range(rank)]


def infinitesimal_holonomy(chart: Chart, p, depth: int, rel_cut: float = 1e-9) -> list[np.ndarray]:
    """Orthonormal basis (Frobenius) of span{R_XY, (nabla R)_{Z;XY}, ...} up to ``depth``."""
    if depth < 0 or depth > 3:
        raise ResourceError("depth must lie in 0..3")
    geo = LocalGeometry(chart, p, order=depth + 2)
    ginv = geo.ginv.value
    T = geo.riemann
    mats = [_endomorphisms(T.value, ginv)]
    variance = "dddd"
    for _ in range(depth):
        T = geo.nabla(T, variance)
        variance = "d" + variance
        mats.append(_endomorphisms(T.value, ginv))
    return _span_basis(np.concatenate(mats), rel_cut)


def holonomy_generator(spec_frame, epsilon: int) -> np.ndarray:
    """The endomorphism q1 -> J xi, q2 -> eps xi, other frame vectors -> 0, in coordinates."""
    F = spec_frame.matrix()
    A_frame = np.zeros_like(F)
    A_frame[1, 2] = 1.0  # q1 -> p2 = J xi
    A_frame[0, 3] = float(epsilon)  # q2 -> eps p1 = eps xi
    return F @ A_frame @ np.linalg.inv(F)


def proportionality_residual(A: np.ndarray, B: np.ndarray) -> float:
    """Distance between unit-normalised A and the line spanned by B."""
    a = A.ravel() / np.linalg.norm(A)
    b = B.ravel() / np.linalg.norm(B)
    return float(np.linalg.norm(a - np.dot(a, b) * b))


# ------------------------------------------------------ quaternionic side


def quat_decompose(R: AlgebraicCurvature, g, triple, signs=None) -> tuple[float, AlgebraicCurvature]:
    """Split R = nu_q R0 + R_sp using the scalar curvature of R."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    if R.dim != m or m % 4:
        raise InvalidInputError("R and g must share a dimension divisible by 4")
    if not R.is_valid(1e-8):
        raise InvalidInputError("R does not have curvature symmetries")
    n = m // 4
    ginv = np.linalg.inv(g)
    s = float(np.einsum("ac,bd,abcd->", ginv, ginv, R.components))
    nu = s / (16.0 * n * (n + 2))
    R0 = model_curvature_R0(g, triple, "quaternionic", signs=signs)
    return nu, R - nu * R0


def default_null_theta(n: int, sig: QuatSignature) -> np.ndarray:
    """A null covector for the standard metric, or a unit one if the metric is definite."""
    theta = np.zeros(4 * n)
    theta[0] = 1.0
    if sig.is_para:
        theta[2] = 1.0
    elif n % 2 == 0:
        theta[4 * (n // 2)] = 1.0
    return theta


def _wedge1_2(t: np.ndarray, F: np.ndarray) -> np.ndarray:
    # (t ^ w)_{ecd} = t_e w_cd + t_c w_de + t_d w_ec for every 2-form w in F[..., c, d]
    return (
        np.einsum("e,...cd->...ecd", t, F)
        + np.einsum("c,...de->...ecd", t, F)
        + np.einsum("d,...ec->...ecd", t, F)
    )


def sp_kernel_dim(n: int, sig: QuatSignature, theta_direction=None, *, return_details: bool = False, rel_cut: float = 1e-9):
    """Dimension of sp-type curvature tensors killed by wedging with theta and theta J_a."""
    if n not in (1, 2):
        raise ResourceError("n must be 1 or 2")
    g, J1, J2, J3 = standard_triple(n, sig, neutral=(not sig.is_para and n % 2 == 0))
    Js = [J1, J2, J3]
    theta = default_null_theta(n, sig) if theta_direction is None else np.asarray(theta_direction, float)
    if theta.shape != (4 * n,) or not np.any(theta):
        raise InvalidInputError("theta_direction must be a nonzero covector of length 4n")
    basis = algebraic_curvature_space(
        4 * n, {"pair", "bianchi", "commute_with_Js", "traceless"}, metric=g, structures=Js
    )
    r = len(basis)
    if r == 0:
        return (0, {"space_dim": 0}) if return_details else 0
    Rs = np.array([b.components for b in basis])  # (r, W, U, c, d)
    cols = []
    for t in [theta] + [theta @ J for J in Js]:
        cols.append(_wedge1_2(t, Rs).reshape(r, -1))
    A = np.concatenate(cols, axis=1).T
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > rel_cut * s[0])) if s.size and s[0] > 0 else 0
    kernel = r - rank
    if return_details:
        null_norm = float(g.size and np.einsum("a,ab,b->", theta, np.linalg.inv(g), theta))
        return kernel, {"space_dim": r, "theta_norm": null_norm}
    return kernel


def quat_integrability_residual(chart: Chart, struct: LinearTypeStructure, p) -> float:
    """max-abs of the curvature paired with xi, which must vanish for a genuine structure."""
    geo = LocalGeometry(chart, p, order=2)
    R = geo.riemann.value
    xi = struct.xi_at(geo.p)
    return float(np.abs(np.einsum("abcd,c->abd", R, xi)).max())


def require_structure(struct: LinearTypeStructure, chart: Chart, p, tol: float = 1e-6, seed: int = 0) -> ASResiduals:
    res = as_residuals_at(struct, chart, p, np.random.default_rng([seed, 0]))
    if res.max > tol:
        raise PreconditionError(f"not a homogeneous structure at p (residual {res.max:.3g})")
    return res
