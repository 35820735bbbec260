"""Coordinate charts and Levi-Civita tensor calculus computed with jets.

Curvature convention: ``R_{XY} = nabla_{[X,Y]} - [nabla_X, nabla_Y]`` and
``R_{abcd} = g(R_{e_a e_b} e_c, e_d)``.  This is minus the more common
convention, so the round unit sphere has ``R_{1212} = g_11 g_22 > 0``,
Ricci tensor ``r_ac = g^{bd} R_{abcd} = g`` and scalar curvature 2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .epsilon_algebra import QuatSignature
from .errors import DegenerateMetricError, DomainError, InvalidInputError
from .jets import Jet, JetTensor, fd_tensor_jet, jcontract, jet_space, jinverse

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Chart:
    """A coordinate patch with metric, optional structures and a domain predicate.

    ``metric_fn``, ``J_fn`` and ``quat_fns`` take a point (a sequence whose
    entries may be floats or :class:`Jet` objects) and return nested
    sequences.  ``active`` lists the coordinates the metric and structure
    fields actually depend on; derivatives along the others are skipped.
    """

    dim: int
    metric_fn: Callable
    J_fn: Callable | None = None
    quat_fns: Callable | None = None
    domain_fn: Callable | None = None
    epsilon: int = -1
    quat_sig: QuatSignature | None = None
    active: tuple[int, ...] | None = None
    mode: str = "jet"
    scale: float = 1.0
    name: str = "chart"
    singular_norm_fn: Callable | None = None
    singular_coords: tuple[int, ...] | None = None
    sample_fn: Callable | None = None
    christoffel_fn: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidInputError("chart dimension must be positive")
        if self.mode not in ("jet", "fd"):
            raise InvalidInputError(f"unknown differentiation mode {self.mode!r}")
        if self.epsilon not in (-1, 1):
            raise InvalidInputError("epsilon must be -1 or +1")

    def with_mode(self, mode: str) -> "Chart":
        return dataclasses.replace(self, mode=mode)

    @property
    def active_coords(self) -> tuple[int, ...]:
        return tuple(range(self.dim)) if self.active is None else tuple(self.active)

    def in_domain(self, p) -> bool:
        return True if self.domain_fn is None else bool(self.domain_fn(np.asarray(p, dtype=float)))

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise InvalidInputError(f"point must have shape ({self.dim},), got {p.shape}")
        if not self.in_domain(p):
            raise DomainError(f"point {p.tolist()} lies outside the domain of {self.name}")
        return p

    def metric_value(self, p) -> np.ndarray:
        return np.asarray(self.metric_fn(np.asarray(p, dtype=float)), dtype=float)

    def J_value(self, p) -> np.ndarray:
        if self.J_fn is None:
            raise InvalidInputError(f"{self.name} carries no epsilon-complex structure")
        return np.asarray(self.J_fn(np.asarray(p, dtype=float)), dtype=float)

    def quat_values(self, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.quat_fns is None:
            raise InvalidInputError(f"{self.name} carries no quaternionic structure")
        mats = tuple(np.asarray(M, dtype=float) for M in self.quat_fns(np.asarray(p, dtype=float)))
        if len(mats) != 3 or any(M.shape != (self.dim, self.dim) for M in mats):
            raise InvalidInputError("quat_fns must return three dim x dim arrays")
        return mats


@dataclass(frozen=True)
class PointTensor:
    components: np.ndarray
    variance: tuple[str, ...]
    base_point: np.ndarray

    def __post_init__(self) -> None:
        comps = np.asarray(self.components, dtype=float)
        var = tuple(self.variance)
        if any(v not in ("u", "d") for v in var):
            raise InvalidInputError("variance entries must be 'u' (up) or 'd' (down)")
        if comps.ndim != len(var) or (comps.ndim and len(set(comps.shape)) != 1):
            raise InvalidInputError("components must have shape dim^(slot count)")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "base_point", np.asarray(self.base_point, dtype=float))


@dataclass(frozen=True)
class AlgebraicCurvature:
    """Fully covariant rank-4 tensor with curvature symmetries."""

    components: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.components, dtype=float)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise InvalidInputError("curvature components must be a dim^4 array")
        object.__setattr__(self, "components", c)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def symmetry_residuals(self) -> dict[str, float]:
        R = self.components
        return {
            "antisym_12": float(np.abs(R + R.transpose(1, 0, 2, 3)).max()),
            "antisym_34": float(np.abs(R + R.transpose(0, 1, 3, 2)).max()),
            "pair": float(np.abs(R - R.transpose(2, 3, 0, 1)).max()),
            "bianchi": float(np.abs(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)).max()),
        }

    def is_valid(self, tol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.abs(self.components).max()))
        return max(self.symmetry_residuals().values()) <= tol * scale

    def __add__(self, other: "AlgebraicCurvature") -> "AlgebraicCurvature":
        return AlgebraicCurvature(self.components + other.components)

    def __sub__(self, other: "AlgebraicCurvature") -> "AlgebraicCurvature":
        return AlgebraicCurvature(self.components - other.components)

    def __mul__(self, s: float) -> "AlgebraicCurvature":
        return AlgebraicCurvature(self.components * float(s))

    __rmul__ = __mul__


# ------------------------------------------------------------ jet evaluation


def point_jet(chart: Chart, fn: Callable, p, order: int, active=None) -> JetTensor:
    """Derivative data of ``fn`` at ``p`` along ``active`` coordinates.

    In jet mode ``fn`` receives jets for the active coordinates.  If it cannot
    handle them (for example it calls ``math.exp``) the evaluation falls back
    to central differences; ``chart.mode == "fd"`` forces that path.
    """
    p = np.asarray(p, dtype=float)
    active = chart.active_coords if active is None else tuple(active)
    if chart.mode == "jet":
        space = jet_space(len(active), order)
        q: list = [float(x) for x in p]
        for i, c in enumerate(active):
            q[c] = Jet.variable(p[c], i, space)
        try:
            return JetTensor.from_nested(fn(q), space)
        except TypeError:
            pass
    return fd_tensor_jet(fn, p, active, order, chart.scale)


class LocalGeometry:
    """Metric jet at a point and everything derived from it.

    ``order`` is the number of metric derivatives; the Christoffel jet then
    has order ``order - 1`` and the curvature jet ``order - 2``.
    """

    def __init__(self, chart: Chart, p, order: int = 2, active=None, check: bool = True) -> None:
        self.chart = chart
        self.p = chart.check_point(p) if check else np.asarray(p, dtype=float)
        self.order = order
        self.active = chart.active_coords if active is None else tuple(active)
        self.dim = chart.dim
        self.g = point_jet(chart, chart.metric_fn, self.p, order, self.active)
        g0 = self.g.value
        if np.abs(g0 - g0.T).max() > 1e-10 * max(1.0, np.abs(g0).max()):
            raise InvalidInputError("metric_fn returned a non-symmetric array")
        if check:
            _check_conditioning(g0)
        self.ginv = jinverse(self.g)
        self._gamma = None
        self._riemann = None

    def jet(self, fn: Callable, order: int | None = None) -> JetTensor:
        return point_jet(self.chart, fn, self.p, self.order if order is None else order, self.active)

    def constant(self, array, order: int | None = None) -> JetTensor:
        return JetTensor.constant(array, len(self.active), self.order if order is None else order)

    def d(self, T: JetTensor) -> JetTensor:
        return T.derivative(self.dim, self.active)

    @property
    def gamma(self) -> JetTensor:
        """Christoffel jet, ``gamma[k, i, j] = Gamma^k_ij``."""
        if self._gamma is None:
            dg = self.d(self.g)  # dg[a, b, c] = d_c g_ab
            low = (dg + dg.transpose_base((0, 2, 1)) - dg.transpose_base((2, 0, 1))) * 0.5
            gam = jcontract("kl,lij->kij", self.ginv, low)
            # the zeroth part through the accelerated kernel (same numbers)
            gam.parts[0] = kernels.christoffel(
                np.ascontiguousarray(self.ginv.value), np.ascontiguousarray(dg.value)
            )
            self._gamma = gam
        return self._gamma

    @property
    def riemann(self) -> JetTensor:
        """Fully covariant curvature jet in the module's sign convention."""
        if self._riemann is None:
            if self.order < 2:
                raise InvalidInputError("curvature needs a metric jet of order >= 2")
            gam = self.gamma
            dgam = self.d(gam)  # dgam[m, j, k, i] = d_i Gamma^m_jk
            ru = (
                dgam.transpose_base((0, 2, 3, 1))
                - dgam.transpose_base((0, 2, 1, 3))
                + jcontract("mil,ljk->mkij", gam, gam)
                - jcontract("mjl,lik->mkij", gam, gam)
            )
            self._riemann = -jcontract("md,mcab->abcd", self.g, ru)
        return self._riemann

    def nabla(self, T: JetTensor, variance: Sequence[str]) -> JetTensor:
        """Covariant derivative; the new covariant slot is placed first."""
        variance = tuple(variance)
        r = len(variance)
        if len(T.base_shape) != r:
            raise InvalidInputError("variance length must match the tensor rank")
        gam = self.gamma
        dT = self.d(T)
        out = dT.transpose_base([r] + list(range(r)))
        slots = "abcdefghijklmnop"[:r]
        for s, var in enumerate(variance):
            t_subs = slots[:s] + "y" + slots[s + 1 :]
            if var == "d":
                out = out - jcontract(f"yz{slots[s]},{t_subs}->z{slots}", gam, T)
            else:
                out = out + jcontract(f"{slots[s]}zy,{t_subs}->z{slots}", gam, T)
        return out


def _check_conditioning(g: np.ndarray) -> None:
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > COND_LIMIT:
        raise DegenerateMetricError(f"metric condition number exceeds {COND_LIMIT:g}")


# ------------------------------------------------------------ public API


def metric_at(chart: Chart, p) -> tuple[np.ndarray, np.ndarray]:
    p = chart.check_point(p)
    g = chart.metric_value(p)
    if g.shape != (chart.dim, chart.dim):
        raise InvalidInputError("metric_fn returned an array of the wrong shape")
    if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
        raise InvalidInputError("metric_fn returned a non-symmetric array")
    _check_conditioning(g)
    return g, np.linalg.inv(g)


def christoffel_at(chart: Chart, p) -> PointTensor:
    geo = LocalGeometry(chart, p, order=1)
    return PointTensor(geo.gamma.value, ("u", "d", "d"), geo.p)


def riemann_at(chart: Chart, p) -> AlgebraicCurvature:
    return AlgebraicCurvature(LocalGeometry(chart, p, order=2).riemann.value)


def ricci_scalar_at(chart: Chart, p) -> tuple[np.ndarray, float]:
    geo = LocalGeometry(chart, p, order=2)
    R = geo.riemann.value
    ginv = geo.ginv.value
    r = np.einsum("bd,abcd->ac", ginv, R)
    return r, float(np.einsum("ac,ac->", ginv, r))


def cov_deriv(chart: Chart, field_fn: Callable, p, variance: Sequence[str] | None = None) -> PointTensor:
    """Covariant derivative of a tensor field at ``p`` (new slot first).

    ``field_fn`` maps a point to nested components or to a :class:`PointTensor`
    whose ``components`` may hold jets.  All coordinates are differentiated,
    so the field may depend on any of them.
    """
    p = chart.check_point(p)

    def comps(q):
        out = field_fn(q)
        return out.components if isinstance(out, PointTensor) else out

    if variance is None:
        probe = field_fn(p)
        if not isinstance(probe, PointTensor):
            raise InvalidInputError("variance is required unless field_fn returns a PointTensor")
        variance = probe.variance
    geo = LocalGeometry(chart, p, order=2, active=range(chart.dim))
    T = geo.jet(comps, order=1)
    return PointTensor(geo.nabla(T, variance).value, ("d",) + tuple(variance), p)


def structure_residuals(chart: Chart, p) -> dict[str, float]:
    """Pointwise checks of J^2 = eps and g(JX, JY) = -eps g(X, Y)."""
    g, _ = metric_at(chart, p)
    J = chart.J_value(p)
    return {
        "square": float(np.abs(J @ J - chart.epsilon * np.eye(chart.dim)).max()),
        "compat": float(np.abs(J.T @ g @ J + chart.epsilon * g).max()),
    }


def euclidean_chart(dim: int) -> Chart:
    eye = np.eye(dim)
    return Chart(dim=dim, metric_fn=lambda p: eye, name=f"euclidean{dim}")


def sphere_chart(radius: float = 1.0) -> Chart:
    """Round 2-sphere in (polar angle, azimuth) coordinates."""

    def metric(p):
        s = np.sin(p[0])
        return [[radius**2, 0.0], [0.0, radius**2 * s * s]]

    return Chart(
        dim=2,
        metric_fn=metric,
        domain_fn=lambda p: 1e-6 < p[0] < np.pi - 1e-6,
        name="sphere",
    )


def flat_quaternionic_chart(n: int, sig: QuatSignature | None = None, neutral: bool = False) -> Chart:
    """R^{4n} with a constant metric and the standard (para-)quaternionic triple."""
    from .epsilon_algebra import standard_triple

    sig = sig or QuatSignature((-1, -1, -1))
    g, J1, J2, J3 = standard_triple(n, sig, neutral)
    triple = (J1, J2, J3)
    return Chart(
        dim=4 * n,
        metric_fn=lambda p: g,
        quat_fns=lambda p: triple,
        quat_sig=sig,
        name=f"flat_quat{4 * n}",
    )


def quaternionic_sphere_chart() -> Chart:
    """Stereographic chart of the unit 4-sphere with the standard constant triple.

    The metric is conformally flat, so the triple stays orthogonal; this gives
    a curved example whose curvature is a multiple of the quaternionic model.
    """
    from .epsilon_algebra import standard_triple

    sig = QuatSignature((-1, -1, -1))
    _, J1, J2, J3 = standard_triple(1, sig)
    triple = (J1, J2, J3)
    eye = np.eye(4)

    def metric(p):
        r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]
        f = 4.0 / ((1.0 + r2) * (1.0 + r2))
        return [[f * eye[i, j] for j in range(4)] for i in range(4)]

    return Chart(dim=4, metric_fn=metric, quat_fns=lambda p: triple, quat_sig=sig, name="quat_sphere4")
