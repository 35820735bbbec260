"""Pointwise algebraic curvature constructions.

Includes the epsilon-complex Kulkarni-Nomizu product, the model curvature
tensors of constant holomorphic and quaternionic sectional curvature, the
fundamental 4-form of an epsilon-quaternionic structure and null spaces of
linear curvature constraints.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from . import kernels
from .chart_calculus import AlgebraicCurvature, Chart, metric_at
from .errors import InvalidInputError, ResourceError

MAX_ALGEBRAIC_DIM = 12


def _hj(h: np.ndarray, J: np.ndarray) -> np.ndarray:
    # (hJ)_{ab} = h(e_a, J e_b)
    return h @ J


def kulkarni_epsilon(h, k, J, epsilon: int) -> AlgebraicCurvature:
    """Ten-term epsilon-complex Kulkarni-Nomizu product of symmetric h and k.

    The result has curvature symmetries when h and k are J-Hermitian
    (``J^T h J = -epsilon h``), which is the setting it is defined for.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    J = np.asarray(J, dtype=float)
    if h.ndim != 2 or h.shape != k.shape or h.shape != J.shape or h.shape[0] != h.shape[1]:
        raise InvalidInputError("h, k and J must be square arrays of equal shape")
    if np.abs(h - h.T).max() > 1e-12 * max(1.0, np.abs(h).max()) or np.abs(k - k.T).max() > 1e-12 * max(
        1.0, np.abs(k).max()
    ):
        raise InvalidInputError("h and k must be symmetric")
    e = float(epsilon)
    hJ, kJ = _hj(h, J), _hj(k, J)
    ein = np.einsum
    T = (
        ein("ac,bd->abcd", h, k)
        + ein("bd,ac->abcd", h, k)
        - ein("ad,bc->abcd", h, k)
        - ein("bc,ad->abcd", h, k)
        - e * ein("ac,bd->abcd", hJ, kJ)
        - e * ein("bd,ac->abcd", hJ, kJ)
        + e * ein("ad,bc->abcd", hJ, kJ)
        + e * ein("bc,ad->abcd", hJ, kJ)
        - 2 * e * ein("ab,cd->abcd", hJ, kJ)
        - 2 * e * ein("cd,ab->abcd", hJ, kJ)
    )
    return AlgebraicCurvature(T)


def model_curvature_R0(g, structure, flavor: str = "kahler", epsilon: int | None = None, signs=None) -> AlgebraicCurvature:
    """Model curvature tensor R0 for an epsilon-Kaehler or epsilon-quaternionic structure.

    ``structure`` is a single J (``flavor="kahler"``, with ``epsilon``) or a
    triple (J1, J2, J3) (``flavor="quaternionic"``, with ``signs`` the
    squares eps_a; inferred from the triple when omitted).
    """
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    ein = np.einsum
    if flavor == "kahler":
        J = np.asarray(structure, dtype=float)
        if J.shape != g.shape:
            raise InvalidInputError("J must match the metric shape")
        e = float(epsilon) if epsilon is not None else float(np.round((J @ J)[0, 0]))
        _check_structure(g, [J], [e])
        gJ = g @ J
        R = (
            ein("ac,bd->abcd", g, g)
            - ein("ad,bc->abcd", g, g)
            - e * ein("ac,bd->abcd", gJ, gJ)
            + e * ein("ad,bc->abcd", gJ, gJ)
            - 2 * e * ein("ab,cd->abcd", gJ, gJ)
        )
        return AlgebraicCurvature(R)
    if flavor == "quaternionic":
        Js = [np.asarray(J, dtype=float) for J in structure]
        if len(Js) != 3 or any(J.shape != g.shape for J in Js):
            raise InvalidInputError("a quaternionic structure is three arrays matching g")
        if signs is None:
            signs = [float(np.round((J @ J)[0, 0])) for J in Js]
        _check_structure(g, Js, signs)
        R = ein("ac,bd->abcd", g, g) - ein("bc,ad->abcd", g, g)
        for J, e in zip(Js, signs):
            Jg = J.T @ g  # Jg[x, z] = g(J e_x, e_z)
            gJ = g @ J  # gJ[x, y] = g(e_x, J e_y)
            R = R - e * (
                ein("ac,bd->abcd", Jg, Jg) - ein("bc,ad->abcd", Jg, Jg) + 2 * ein("ab,cd->abcd", gJ, gJ)
            )
        return AlgebraicCurvature(R)
    raise InvalidInputError(f"unknown flavor {flavor!r}")


def _check_structure(g, Js, signs, tol: float = 1e-9) -> None:
    eye = np.eye(g.shape[0])
    if any(e not in (-1, 1) for e in signs):
        raise InvalidInputError("structure squares must be -1 or +1")
    for J, e in zip(Js, signs):
        if np.abs(J @ J - e * eye).max() > tol or np.abs(J.T @ g + g @ J).max() > tol * max(1.0, np.abs(g).max()):
            raise InvalidInputError("structure is inconsistent with the metric")


def wedge2(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Wedge of two 2-forms as a 4-form (sum over the six (2,2)-shuffles)."""
    ein = np.einsum
    return (
        ein("ab,cd->abcd", alpha, beta)
        - ein("ac,bd->abcd", alpha, beta)
        + ein("ad,bc->abcd", alpha, beta)
        + ein("bc,ad->abcd", alpha, beta)
        - ein("bd,ac->abcd", alpha, beta)
        + ein("cd,ab->abcd", alpha, beta)
    )


def fundamental_form(g, Js, signs) -> np.ndarray:
    omega = np.zeros((g.shape[0],) * 4)
    for J, e in zip(Js, signs):
        w = g @ J  # w(X, Y) = g(X, J Y)
        omega -= e * wedge2(w, w)
    return omega


def quat_fundamental_form(chart: Chart, p) -> np.ndarray:
    if chart.quat_fns is None:
        raise InvalidInputError(f"{chart.name} carries no quaternionic structure")
    g, _ = metric_at(chart, p)
    Js = chart.quat_values(p)
    signs = chart.quat_sig.eps if chart.quat_sig is not None else [float(np.round((J @ J)[0, 0])) for J in Js]
    return fundamental_form(g, Js, signs)


# --------------------------------------------------- constraint null spaces

_CONSTRAINTS = {"pair", "bianchi", "commute_with_Js", "traceless"}


def _pair_tables(m: int):
    pairs = list(combinations(range(m), 2))
    pair_index = np.zeros((m, m), dtype=np.int64)
    sign = np.zeros((m, m))
    for idx, (a, b) in enumerate(pairs):
        pair_index[a, b] = pair_index[b, a] = idx
        sign[a, b], sign[b, a] = 1.0, -1.0
    return pairs, pair_index, sign


def _null_space(A: np.ndarray, n: int, rel_cut: float) -> np.ndarray:
    if A.shape[0] == 0:
        return np.eye(n)
    if A.shape[0] < n:
        A = np.vstack([A, np.zeros((n - A.shape[0], n))])
    _, s, vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n)
    rank = int(np.sum(s > rel_cut * s[0]))
    return vt[rank:].T


def algebraic_curvature_space(
    dim: int,
    constraints,
    *,
    metric=None,
    structures=None,
    rel_cut: float = 1e-10,
) -> list[AlgebraicCurvature]:
    """Orthonormal basis of rank-4 tensors antisymmetric in each slot pair and
    satisfying the selected linear constraints.

    ``commute_with_Js`` needs ``structures`` (a list of endomorphisms) and
    ``traceless`` needs ``metric``.
    """
    constraints = set(constraints)
    unknown = constraints - _CONSTRAINTS
    if unknown:
        raise InvalidInputError(f"unknown constraints {sorted(unknown)}")
    if dim > MAX_ALGEBRAIC_DIM:
        raise ResourceError(f"dim {dim} exceeds the desk-scale limit {MAX_ALGEBRAIC_DIM}")
    if dim < 1:
        raise InvalidInputError("dim must be positive")
    m = dim
    pairs, pair_index, sign = _pair_tables(m)
    N = len(pairs)
    if "pair" in constraints:
        param_index = np.zeros((N, N), dtype=np.int64)
        n_params = 0
        for P in range(N):
            for Q in range(P, N):
                param_index[P, Q] = param_index[Q, P] = n_params
                n_params += 1
    else:
        param_index = np.arange(N * N, dtype=np.int64).reshape(N, N)
        n_params = N * N
    if n_params == 0:
        return []
    # component map: R_abcd = sign(a,b) sign(c,d) x[param(pair(ab), pair(cd))]
    a, b, c, d = np.meshgrid(*(np.arange(m),) * 4, indexing="ij")
    s = (sign[a, b] * sign[c, d]).ravel()
    col = param_index[pair_index[a, b], pair_index[c, d]].ravel()
    mask = s != 0
    M = None
    if constraints & {"commute_with_Js", "traceless"}:
        M = np.zeros((m**4, n_params))
        M[np.nonzero(mask)[0], col[mask]] = s[mask]
        M = M.reshape(m, m, m, m, n_params)
    rows = []
    if "bianchi" in constraints and m >= 3:
        rows.append(kernels.bianchi_rows(m, pair_index, sign, param_index, n_params))
    if "commute_with_Js" in constraints:
        if not structures:
            raise InvalidInputError("commute_with_Js needs the structures argument")
        for J in structures:
            J = np.asarray(J, dtype=float)
            C = np.einsum("abmdp,mc->abcdp", M, J) + np.einsum("abcmp,md->abcdp", M, J)
            rows.append(_upper_pairs(C, m))
    if "traceless" in constraints:
        if metric is None:
            raise InvalidInputError("traceless needs the metric argument")
        ginv = np.linalg.inv(np.asarray(metric, dtype=float))
        rows.append(np.einsum("bd,abcdp->acp", ginv, M).reshape(m * m, n_params))
    A = np.vstack(rows) if rows else np.zeros((0, n_params))
    null = _null_space(A, n_params, rel_cut)
    if null.shape[1] == 0:
        return []
    # orthonormalise in component space; each parameter occupies a fixed
    # number of component slots, so the Gram matrix is diagonally weighted
    mult = np.bincount(col[mask], minlength=n_params).astype(float)
    w, v = np.linalg.eigh(null.T @ (mult[:, None] * null))
    keep = w > (rel_cut**2) * w.max()
    coeff = null @ (v[:, keep] / np.sqrt(w[keep]))
    basis = []
    for i in range(coeff.shape[1]):
        comp = np.zeros(m**4)
        comp[mask] = s[mask] * coeff[col[mask], i]
        basis.append(AlgebraicCurvature(comp.reshape(m, m, m, m)))
    return basis


def _upper_pairs(C: np.ndarray, m: int) -> np.ndarray:
    a, b = np.triu_indices(m, 1)
    return C[a, b].reshape(-1, C.shape[-1])
