"""Explicit local models of degenerate linear-type homogeneous structures.

Coordinates are ordered ``(z1, z2, w1, w2, x1, y1, ..., xn, yn)``.  The
metric is

    g = dw1 dz1 - eps dw2 dz2 + b (dw1^2 - eps dw2^2) + sum_a s_a (dx_a^2 - eps dy_a^2)

with each symmetric product contributing a single off-diagonal entry, and J
acts blockwise by ``J d/dz1 = d/dz2``, ``J d/dz2 = eps d/dz1``.  The profile
``b(w1, w2)`` solves ``Lap_eps b = R0 / |w|^4`` where ``Lap_eps`` is
``-eps d^2/dw1^2 + d^2/dw2^2`` and ``|w|^2`` is the singular-set norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .chart_calculus import Chart, metric_at
from .errors import DomainError, InvalidInputError
from .jets import Jet, jet_space

LAMBDAS = ("zero", "minus_eps_half")
VARIANTS = ("singular", "cahen_wallach_analog")
DOMAIN_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    epsilon: int = -1
    lam: str = "zero"
    n: int = 0
    signs: tuple[int, ...] = ()
    R0: float = 4.0
    variant: str = "singular"
    profile_override: Callable | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.epsilon not in (-1, 1):
            raise InvalidInputError("epsilon must be -1 or +1")
        if self.lam not in LAMBDAS:
            raise InvalidInputError(f"lambda must be one of {LAMBDAS}")
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"variant must be one of {VARIANTS}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise InvalidInputError("n must be a non-negative integer")
        signs = tuple(int(s) for s in self.signs) if self.signs else (1,) * int(self.n)
        if len(signs) != self.n or any(s not in (-1, 1) for s in signs):
            raise InvalidInputError("signs must list n values, each +1 or -1")
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "R0", float(self.R0))
        if self.R0 == 0.0:
            raise InvalidInputError("R0 must be nonzero")

    @property
    def lambda_value(self) -> float:
        return 0.0 if self.lam == "zero" else -self.epsilon / 2.0

    @property
    def dim(self) -> int:
        return 2 * self.n + 4

    @property
    def singular(self) -> bool:
        return self.variant == "singular"

    def label(self) -> str:
        lam = "0" if self.lam == "zero" else "-eps/2"
        return f"eps={self.epsilon:+d},lambda={lam},n={self.n},R0={self.R0:g},{self.variant}"

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "n": self.n,
            "signs": list(self.signs),
            "R0": self.R0,
            "variant": self.variant,
            "profile": "default" if self.profile_override is None else "override",
        }

    @classmethod
    def from_json(cls, doc) -> "ModelSpec":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, dict):
            raise InvalidInputError("model spec must be a JSON object")
        allowed = {"epsilon", "lambda", "n", "signs", "R0", "variant", "profile"}
        extra = set(doc) - allowed
        if extra:
            raise InvalidInputError(f"unknown model fields {sorted(extra)}")
        if doc.get("profile", "default") != "default":
            raise InvalidInputError("only the default profile can be loaded from JSON")
        try:
            return cls(
                epsilon=int(doc.get("epsilon", -1)),
                lam=str(doc.get("lambda", "zero")),
                n=int(doc.get("n", 0)),
                signs=tuple(doc.get("signs", ())),
                R0=float(doc.get("R0", 4.0)),
                variant=str(doc.get("variant", "singular")),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(str(exc)) from exc


def all_singular_specs(n: int = 0, R0: float = 4.0) -> list[ModelSpec]:
    return [ModelSpec(epsilon=e, lam=l, n=n, R0=R0) for e in (-1, 1) for l in LAMBDAS]


# --------------------------------------------------------------- profiles


def _norm2(spec: ModelSpec, w1, w2):
    if spec.lam == "zero":
        return w1 * w1 - spec.epsilon * (w2 * w2)
    return w1 * w1


def default_profile(spec: ModelSpec) -> Callable:
    """Closed-form particular solution of the profile equation for ``spec``."""
    if spec.profile_override is not None:
        raise InvalidInputError("spec carries a profile override")
    eps, R0 = spec.epsilon, spec.R0
    if spec.variant == "cahen_wallach_analog":
        return lambda w1, w2: (-eps * R0 / 2.0) * (w1 * w1)
    if spec.lam == "zero":
        return lambda w1, w2: (-eps * R0 / 4.0) / (w1 * w1 - eps * (w2 * w2))
    return lambda w1, w2: (-eps * R0 / 6.0) / (w1 * w1)


def eps_laplacian(spec: ModelSpec, b: Callable, w1: float, w2: float) -> float:
    """``-eps d^2 b/dw1^2 + d^2 b/dw2^2`` by second-order jets (central differences as fallback)."""
    space = jet_space(2, 2)
    try:
        val = b(Jet.variable(w1, 0, space), Jet.variable(w2, 1, space))
        h = val.part(2) if isinstance(val, Jet) else np.zeros((2, 2))
    except TypeError:
        s = 1e-4 * max(1.0, abs(w1), abs(w2))
        f = lambda a, c: float(b(a, c))
        h = np.diag(
            [
                (f(w1 + s, w2) - 2 * f(w1, w2) + f(w1 - s, w2)) / s**2,
                (f(w1, w2 + s) - 2 * f(w1, w2) + f(w1, w2 - s)) / s**2,
            ]
        )
    return float(-spec.epsilon * h[0, 0] + h[1, 1])


def profile_residual(spec: ModelSpec, b: Callable, w1: float, w2: float) -> float:
    """Relative residual of the profile PDE at one point."""
    lap = eps_laplacian(spec, b, w1, w2)
    if spec.variant == "cahen_wallach_analog":
        return abs(lap - spec.R0) / abs(spec.R0)
    n2 = _norm2(spec, w1, w2)
    return abs(lap * n2 * n2 - spec.R0) / abs(spec.R0)


def resolve_profile(spec: ModelSpec) -> Callable:
    if spec.profile_override is None:
        return default_profile(spec)
    b = spec.profile_override
    rng = np.random.default_rng(12345)
    for w in _sample_w(spec, rng, 5):
        res = profile_residual(spec, b, float(w[0]), float(w[1]))
        if not np.isfinite(res) or res > 1e-6:
            raise InvalidInputError(f"profile override fails the profile equation (relative residual {res:.3g})")
    return b


# ------------------------------------------------------------ chart builder


def singular_norm(spec: ModelSpec, p) -> float:
    return float(_norm2(spec, float(p[2]), float(p[3])))


def J_matrix(dim: int, eps: int) -> np.ndarray:
    J = np.zeros((dim, dim))
    for k in range(0, dim, 2):
        J[k, k + 1] = eps
        J[k + 1, k] = 1.0
    return J


def build_chart(spec: ModelSpec) -> Chart:
    eps = spec.epsilon
    dim = spec.dim
    b = resolve_profile(spec)
    signs = spec.signs
    J = J_matrix(dim, eps)

    def metric(p):
        bw = b(p[2], p[3])
        g = [[0.0] * dim for _ in range(dim)]
        g[0][2] = g[2][0] = 1.0
        g[1][3] = g[3][1] = float(-eps)
        g[2][2] = bw
        g[3][3] = -eps * bw
        for a, s in enumerate(signs):
            g[4 + 2 * a][4 + 2 * a] = float(s)
            g[5 + 2 * a][5 + 2 * a] = float(-eps * s)
        return g

    space = jet_space(2, 1)

    def christoffel(p):
        # only b depends on the point, and only through (w1, w2)
        try:
            bj = b(Jet.variable(p[2], 0, space), Jet.variable(p[3], 1, space))
            bw, db = float(bj.c[0]), bj.c[1:3]
        except TypeError:
            h = 1e-6
            bw = float(b(p[2], p[3]))
            db = np.array([b(p[2] + h, p[3]) - b(p[2] - h, p[3]), b(p[2], p[3] + h) - b(p[2], p[3] - h)]) / (2 * h)
        g = np.asarray(metric(p), dtype=float)
        dg = np.zeros((dim, dim, dim))
        dg[2, 2, 2:4] = db
        dg[3, 3, 2:4] = -eps * db
        return kernels.christoffel(np.linalg.inv(g), dg)

    if spec.singular:
        domain = lambda p: abs(_norm2(spec, p[2], p[3])) > DOMAIN_FLOOR
        norm_fn = lambda p: _norm2(spec, p[2], p[3])
        sing = (2, 3)
    else:
        domain = None
        norm_fn = None
        sing = None
    return Chart(
        dim=dim,
        metric_fn=metric,
        J_fn=lambda p: J,
        domain_fn=domain,
        epsilon=eps,
        active=(2, 3),
        name=spec.label(),
        singular_norm_fn=norm_fn,
        singular_coords=sing,
        sample_fn=lambda rng: sample_domain(spec, rng, 1)[0],
        christoffel_fn=christoffel,
        meta={"spec": spec, "profile": b},
    )


# ----------------------------------------------------------------- sampling


def _sample_w(spec: ModelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """w-coordinates in the component containing (1, 0), away from the singular set."""
    if not spec.singular:
        return rng.uniform(-2.0, 2.0, size=(count, 2))
    if spec.lam == "minus_eps_half":
        return np.column_stack([rng.uniform(0.5, 2.0, count), rng.uniform(-2.0, 2.0, count)])
    if spec.epsilon == -1:
        r = rng.uniform(0.5, 2.0, count)
        phi = rng.uniform(0.0, 2 * np.pi, count)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    w1 = rng.uniform(0.5, 2.0, count)
    return np.column_stack([w1, w1 * rng.uniform(-0.8, 0.8, count)])


def sample_domain(spec: ModelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    pts = rng.uniform(-2.0, 2.0, size=(count, spec.dim))
    pts[:, 2:4] = _sample_w(spec, rng, count)
    return pts


# -------------------------------------------------- xi, theta and the frame


def xi_components(spec: ModelSpec, p) -> list:
    """xi at ``p``; entries may be jets.  Zero for the Cahen-Wallach analog."""
    dim = spec.dim
    out = [0.0] * dim
    if not spec.singular:
        return out
    w1, w2 = p[2], p[3]
    if spec.lam == "zero":
        n2 = w1 * w1 - spec.epsilon * (w2 * w2)
        out[0] = -w1 / n2
        out[1] = -w2 / n2
    else:
        out[0] = -1.0 / w1
    return out


def _domain_point(spec: ModelSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (spec.dim,):
        raise InvalidInputError(f"point must have shape ({spec.dim},)")
    if spec.singular and abs(singular_norm(spec, p)) <= DOMAIN_FLOOR:
        raise DomainError("point lies on the singular set")
    return p


def xi_field(spec: ModelSpec, p) -> np.ndarray:
    return np.array(xi_components(spec, _domain_point(spec, p)), dtype=float)


def theta_covector(spec: ModelSpec, p) -> np.ndarray:
    p = _domain_point(spec, p)
    out = np.zeros(spec.dim)
    if not spec.singular:
        return out
    w1, w2 = p[2], p[3]
    if spec.lam == "zero":
        n2 = w1 * w1 - spec.epsilon * w2 * w2
        out[2] = -w1 / n2
        out[3] = spec.epsilon * w2 / n2
    else:
        out[2] = -1.0 / w1
    return out


@dataclass(frozen=True)
class AdaptedFrame:
    xi: np.ndarray
    Jxi: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    X: tuple[np.ndarray, ...]
    JX: tuple[np.ndarray, ...]

    @property
    def names(self) -> list[str]:
        names = ["p1", "p2", "q1", "q2"]
        for a in range(len(self.X)):
            names += [f"X{a + 1}", f"JX{a + 1}"]
        return names

    def matrix(self) -> np.ndarray:
        """Columns in the order xi, J xi, q1, q2, X1, JX1, X2, JX2, ..."""
        cols = [self.xi, self.Jxi, self.q1, self.q2]
        for x, jx in zip(self.X, self.JX):
            cols += [x, jx]
        return np.column_stack(cols)


def adapted_frame(spec: ModelSpec, p) -> AdaptedFrame:
    """Frame with g(xi, q1) = 1, q1 in the w-block, q2 = J q1 orthogonal to xi."""
    p = _domain_point(spec, p)
    if not spec.singular:
        raise InvalidInputError("the adapted frame needs a nonzero xi (singular variant)")
    chart = build_chart(spec)
    g, _ = metric_at(chart, p)
    J = J_matrix(spec.dim, spec.epsilon)
    xi = xi_field(spec, p)
    theta = g @ xi
    # q1 = (0, 0, u1, u2, 0...) with theta(q1) = 1 and theta(J q1) = 0
    thetaJ = theta @ J
    A = np.array([[theta[2], theta[3]], [thetaJ[2], thetaJ[3]]])
    u = np.linalg.solve(A, np.array([1.0, 0.0]))
    q1 = np.zeros(spec.dim)
    q1[2:4] = u
    X, JX = [], []
    for a in range(spec.n):
        e = np.zeros(spec.dim)
        e[4 + 2 * a] = 1.0
        X.append(e)
        JX.append(J @ e)
    return AdaptedFrame(xi, J @ xi, q1, J @ q1, tuple(X), tuple(JX))


def frame_gram_residual(spec: ModelSpec, p) -> float:
    """Deviation of the frame Gram matrix from its prescribed pattern."""
    fr = adapted_frame(spec, p)
    chart = build_chart(spec)
    g, _ = metric_at(chart, p)
    F = fr.matrix()
    G = F.T @ g @ F
    eps = spec.epsilon
    bq = G[2, 2]
    target = np.zeros_like(G)
    target[0, 2] = target[2, 0] = 1.0
    target[1, 3] = target[3, 1] = -eps
    target[2, 2] = bq
    target[3, 3] = -eps * bq
    for a, s in enumerate(spec.signs):
        target[4 + 2 * a, 4 + 2 * a] = s
        target[5 + 2 * a, 5 + 2 * a] = -eps * s
    return float(np.abs(G - target).max())


# -------------------------------------------------- linear-type structures


@dataclass(frozen=True, eq=False)
class LinearTypeStructure:
    """Vector data defining a structure tensor of linear type.

    ``xi`` maps a point (entries may be jets) to components.  In the
    epsilon-Kaehler case zeta = lam * xi; in the quaternionic case
    ``zeta_quat`` returns three vectors.
    """

    xi: Callable
    lam: float = 0.0
    kind: str = "kahler"
    zeta_quat: Callable | None = None
    spec: ModelSpec | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("kahler", "quaternionic"):
            raise InvalidInputError("kind must be 'kahler' or 'quaternionic'")

    def xi_at(self, p) -> np.ndarray:
        return np.array([float(v) for v in self.xi(np.asarray(p, dtype=float))])

    def theta(self, chart: Chart, p) -> np.ndarray:
        g, _ = metric_at(chart, p)
        return g @ self.xi_at(p)

    def scaled(self, factor: float) -> "LinearTypeStructure":
        f = float(factor)
        base = self.xi
        zq = self.zeta_quat
        return LinearTypeStructure(
            xi=lambda p: [f * v for v in base(p)],
            lam=self.lam,
            kind=self.kind,
            zeta_quat=None if zq is None else (lambda p: [[f * v for v in z] for z in zq(p)]),
            spec=self.spec,
        )


def structure_for(spec: ModelSpec) -> LinearTypeStructure:
    return LinearTypeStructure(xi=lambda p: xi_components(spec, p), lam=spec.lambda_value, spec=spec)


def zero_structure(dim: int, kind: str = "kahler") -> LinearTypeStructure:
    zq = (lambda p: [[0.0] * dim for _ in range(3)]) if kind == "quaternionic" else None
    return LinearTypeStructure(xi=lambda p: [0.0] * dim, lam=0.0, kind=kind, zeta_quat=zq)
