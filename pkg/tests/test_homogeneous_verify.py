import numpy as np
import pytest

from ekahler.algebraic import model_curvature_R0
from ekahler.chart_calculus import (
    AlgebraicCurvature,
    Chart,
    euclidean_chart,
    flat_quaternionic_chart,
    metric_at,
    quaternionic_sphere_chart,
    riemann_at,
)
from ekahler.epsilon_algebra import QuatSignature, standard_triple
from ekahler.errors import FitUndefinedError, InvalidInputError, PreconditionError, ResourceError
from ekahler.homogeneous_verify import (
    as_residuals,
    curvature_form_fit,
    infinitesimal_holonomy,
    nabla_theta_residual,
    quat_decompose,
    quat_integrability_residual,
    recurrence_residual,
    require_structure,
    s_kahler,
    s_quat,
    s_skew_residual,
    sp_kernel_dim,
)
from ekahler.linear_models import (
    LinearTypeStructure,
    J_matrix,
    ModelSpec,
    adapted_frame,
    all_singular_specs,
    build_chart,
    default_profile,
    sample_domain,
    structure_for,
    zero_structure,
)

SINGULAR = all_singular_specs(0)
SINGULAR_N1 = [ModelSpec(epsilon=s.epsilon, lam=s.lam, n=1, signs=(1,)) for s in SINGULAR]


def _ids(specs):
    return [s.label() for s in specs]


def _flat_kahler():
    J = J_matrix(4, -1)
    return Chart(dim=4, metric_fn=lambda p: np.eye(4), J_fn=lambda p: J, epsilon=-1, name="flat_kahler")


def _S_kahler_display(g, J, eps, xi, zeta, X, Y):
    gg = lambda u, v: u @ g @ v  # noqa: E731
    return (
        gg(X, Y) * xi
        - gg(xi, Y) * X
        + eps * gg(X, J @ Y) * (J @ xi)
        - eps * gg(xi, J @ Y) * (J @ X)
        - 2 * gg(zeta, J @ X) * (J @ Y)
    )


# ------------------------------------------------------------ S tensors


def test_s_kahler_example():
    spec = ModelSpec(epsilon=-1, lam="zero", R0=4.0)
    chart = build_chart(spec)
    e_w1 = np.array([0.0, 0.0, 1.0, 0.0])
    S = s_kahler(structure_for(spec), chart, [0, 0, 1, 0], e_w1, e_w1)
    np.testing.assert_allclose(S, [-1.0, 0.0, 1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("spec", SINGULAR_N1, ids=_ids(SINGULAR_N1))
def test_s_kahler_matches_display(spec):
    chart = build_chart(spec)
    st = structure_for(spec)
    rng = np.random.default_rng(0)
    for p in sample_domain(spec, rng, 10):
        g, _ = metric_at(chart, p)
        J = chart.J_value(p)
        xi = st.xi_at(p)
        for _ in range(5):
            X, Y = rng.normal(size=(2, spec.dim))
            ref = _S_kahler_display(g, J, spec.epsilon, xi, spec.lambda_value * xi, X, Y)
            assert np.abs(s_kahler(st, chart, p, X, Y) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())
        Y = rng.normal(size=spec.dim)
        assert np.abs(s_kahler(st, chart, p, xi, Y)).max() <= 1e-12 * max(1.0, np.abs(xi).max() * np.abs(Y).max()) * 10
        assert s_skew_residual(st, chart, p) <= 1e-10


def test_s_vanishes_for_zero_xi():
    chart = _flat_kahler()
    X, Y = np.random.default_rng(1).normal(size=(2, 4))
    assert np.abs(s_kahler(zero_structure(4), chart, np.zeros(4), X, Y)).max() == 0.0
    qchart = flat_quaternionic_chart(1)
    assert np.abs(s_quat(zero_structure(4, "quaternionic"), qchart, np.zeros(4), X, Y)).max() == 0.0


def test_s_quat_examples():
    sig = QuatSignature.para()
    chart = flat_quaternionic_chart(2, sig)
    g, _ = metric_at(chart, np.zeros(8))
    xi = np.zeros(8)
    xi[0] = xi[2] = 1.0
    assert xi @ g @ xi == 0.0
    X = np.zeros(8)
    X[4] = 1.0
    for Js in chart.quat_values(np.zeros(8)):
        assert X @ g @ (Js @ xi) == 0.0
    st = LinearTypeStructure(xi=lambda p: list(xi), kind="quaternionic", zeta_quat=lambda p: [[0.0] * 8] * 3)
    np.testing.assert_array_equal(s_quat(st, chart, np.zeros(8), X, X), xi)
    st1 = LinearTypeStructure(xi=lambda p: list(xi), kind="quaternionic", zeta_quat=lambda p: [list(xi), [0.0] * 8, [0.0] * 8])
    np.testing.assert_array_equal(s_quat(st1, chart, np.zeros(8), X, X), xi)


def test_s_quat_needs_quaternionic_chart():
    with pytest.raises(InvalidInputError):
        s_quat(zero_structure(4, "quaternionic"), euclidean_chart(4), np.zeros(4), np.ones(4), np.ones(4))


# ------------------------------------------------------------ Ambrose-Singer residuals


@pytest.mark.parametrize("spec", SINGULAR_N1, ids=_ids(SINGULAR_N1))
def test_as_residuals_on_models(spec):
    chart = build_chart(spec)
    st = structure_for(spec)
    pts = sample_domain(spec, np.random.default_rng(2), 10)
    res = as_residuals(st, chart, pts, seed=1)
    assert res.max < 1e-7
    assert set(res.as_dict()) >= {"nabla_g", "nabla_J", "nabla_R", "nabla_S", "nabla_xi"}
    for factor in (1.1, 0.5, -1.0):
        assert as_residuals(st.scaled(factor), chart, pts[:3], seed=1).R > 1e-3


def test_as_residuals_flat_zero():
    res = as_residuals(zero_structure(4), _flat_kahler(), [np.zeros(4), np.ones(4)])
    assert res.max == 0.0


def test_require_structure():
    spec = SINGULAR[0]
    chart = build_chart(spec)
    p = np.array([0.0, 0.0, 1.0, 0.3])
    require_structure(structure_for(spec), chart, p)
    with pytest.raises(PreconditionError):
        require_structure(structure_for(spec).scaled(2.0), chart, p)


# ------------------------------------------------------------ recurrence and fits


@pytest.mark.parametrize("spec", SINGULAR_N1, ids=_ids(SINGULAR_N1))
def test_recurrence_and_nabla_theta(spec):
    chart = build_chart(spec)
    st = structure_for(spec)
    for p in sample_domain(spec, np.random.default_rng(3), 10):
        assert recurrence_residual(chart, st, p) < 1e-7
        assert nabla_theta_residual(chart, st, p) < 1e-8


def test_flat_recurrence_and_theta():
    chart = _flat_kahler()
    assert recurrence_residual(chart, zero_structure(4), np.zeros(4)) == 0.0
    assert nabla_theta_residual(chart, zero_structure(4), np.zeros(4)) == 0.0


@pytest.mark.parametrize("spec", SINGULAR, ids=_ids(SINGULAR))
def test_curvature_form_reproduces_essential_component(spec):
    chart = build_chart(spec)
    st = structure_for(spec)
    b = default_profile(spec)
    for p in sample_domain(spec, np.random.default_rng(4), 10):
        k, resid = curvature_form_fit(chart, st, p)
        assert resid < 1e-7 and k != 0.0 and np.isfinite(k)
        theta = st.theta(chart, p)
        tJ = theta @ chart.J_value(p)
        w = np.outer(theta, tJ) - np.outer(tJ, theta)
        w1, w2 = p[2], p[3]
        h = 1e-4
        lap = (-spec.epsilon * (b(w1 + h, w2) - 2 * b(w1, w2) + b(w1 - h, w2)) + (b(w1, w2 + h) - 2 * b(w1, w2) + b(w1, w2 - h))) / h**2
        R = riemann_at(chart, p).components
        assert abs(k * w[2, 3] ** 2 - R[2, 3, 2, 3]) <= 1e-6 * max(1.0, abs(R[2, 3, 2, 3]))
        # the stored component is -(1/2) of the epsilon-Laplacian of b
        assert abs(R[2, 3, 2, 3] + 0.5 * lap) <= 1e-5 * max(1.0, abs(lap))


def test_curvature_fit_on_flat_chart():
    xi = np.array([1.0, 0.0, 0.0, 0.0])
    st = LinearTypeStructure(xi=lambda p: list(xi))
    k, resid = curvature_form_fit(_flat_kahler(), st, np.zeros(4))
    assert k == 0.0 and resid == 0.0
    with pytest.raises(FitUndefinedError):
        curvature_form_fit(_flat_kahler(), zero_structure(4), np.zeros(4))


# ------------------------------------------------------------ holonomy


@pytest.mark.parametrize("spec", SINGULAR_N1, ids=_ids(SINGULAR_N1))
def test_holonomy_is_one_dimensional_and_matches_A(spec):
    chart = build_chart(spec)
    eps = spec.epsilon
    for p in sample_domain(spec, np.random.default_rng(5), 3):
        dims = [len(infinitesimal_holonomy(chart, p, d)) for d in range(3)]
        assert dims == [1, 1, 1]
        (H,) = infinitesimal_holonomy(chart, p, 0)
        fr = adapted_frame(spec, p)
        # A: q1 -> J xi, q2 -> eps xi, xi, J xi, X_i, J X_i -> 0
        c = np.dot(H @ fr.q1, fr.Jxi) / np.dot(fr.Jxi, fr.Jxi)
        F = fr.matrix()
        images = np.zeros_like(F)
        images[:, 2] = c * fr.Jxi
        images[:, 3] = c * eps * fr.xi
        A = images @ np.linalg.inv(F)
        assert np.abs(H - A).max() <= 1e-7 * np.abs(H).max()


def test_flat_holonomy_is_trivial():
    assert infinitesimal_holonomy(euclidean_chart(4), np.zeros(4), 2) == []
    with pytest.raises(ResourceError):
        infinitesimal_holonomy(euclidean_chart(4), np.zeros(4), 4)


# ------------------------------------------------------------ quaternionic side


@pytest.mark.parametrize("sig", [QuatSignature.pseudo(), QuatSignature.para()])
@pytest.mark.parametrize("n", [1, 2])
def test_quat_decompose(sig, n):
    g, *Js = standard_triple(n, sig)
    R0 = model_curvature_R0(g, Js, "quaternionic")
    ginv = np.linalg.inv(g)
    # the scalar curvature of R0 is 16 n (n + 2)
    assert abs(np.einsum("ac,bd,abcd->", ginv, ginv, R0.components) - 16 * n * (n + 2)) <= 1e-9
    nu, Rsp = quat_decompose(R0, g, Js)
    assert abs(nu - 1.0) <= 1e-12 and np.abs(Rsp.components).max() <= 1e-12
    nu3, _ = quat_decompose(AlgebraicCurvature(3 * R0.components), g, Js)
    assert abs(nu3 - 3.0) <= 1e-12
    nu0, R0sp = quat_decompose(AlgebraicCurvature(np.zeros_like(R0.components)), g, Js)
    assert nu0 == 0.0 and np.abs(R0sp.components).max() == 0.0
    with pytest.raises(InvalidInputError):
        quat_decompose(AlgebraicCurvature(np.random.default_rng(0).normal(size=R0.components.shape)), g, Js)


def test_sp_kernel_pseudo_vanishes():
    k, info = sp_kernel_dim(2, QuatSignature.pseudo(), return_details=True)
    assert k == 0 and info["space_dim"] > 0
    assert abs(info["theta_norm"]) <= 1e-12
    assert sp_kernel_dim(1, QuatSignature.pseudo()) == 0
    with pytest.raises(ResourceError):
        sp_kernel_dim(3, QuatSignature.pseudo())


def _wedge_1_2(t, w):
    return np.einsum("e,cd->ecd", t, w) + np.einsum("c,de->ecd", t, w) + np.einsum("d,ec->ecd", t, w)


@pytest.mark.parametrize("n", [1, 2])
def test_para_kernel_contains_an_explicit_tensor(n):
    """In split signature the wedge conditions leave a rank-one tensor alive."""
    sig = QuatSignature.para()
    g, *Js = standard_triple(n, sig)
    ginv = np.linalg.inv(g)
    theta = np.zeros(4 * n)
    theta[0] = theta[2] = 1.0
    assert theta @ ginv @ theta == 0.0
    t1 = theta @ Js[0]
    omega = np.outer(theta, t1) - np.outer(t1, theta)
    R = np.einsum("ab,cd->abcd", omega, omega)
    assert AlgebraicCurvature(R).is_valid(1e-12)
    assert np.abs(np.einsum("ac,abcd->bd", ginv, R)).max() == 0.0
    endo = ginv @ omega
    for J in Js:
        assert np.abs(endo @ J - J @ endo).max() <= 1e-12
        assert np.abs(_wedge_1_2(theta @ J, omega)).max() <= 1e-12
    assert np.abs(_wedge_1_2(theta, omega)).max() <= 1e-12
    assert sp_kernel_dim(n, sig) == 1


def test_quaternionic_sphere_structures():
    chart = quaternionic_sphere_chart()
    p = np.array([0.2, -0.1, 0.3, 0.05])
    zero = zero_structure(4, "quaternionic")
    assert as_residuals(zero, chart, [p]).max < 1e-7
    xi = np.array([1.0, 0.0, 0.0, 0.0])
    st = LinearTypeStructure(xi=lambda q: list(xi), kind="quaternionic", zeta_quat=lambda q: [[0.0] * 4] * 3)
    assert quat_integrability_residual(chart, st, p) > 1e-3
    assert as_residuals(st, chart, [p]).max > 1e-3
    flat = flat_quaternionic_chart(1)
    assert as_residuals(zero, flat, [np.zeros(4)]).max == 0.0
