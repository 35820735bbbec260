"""Finite-dimensional Lie algebras given by structure constants.

Convention: ``[e_i, e_j] = sum_k c[k, i, j] e_k``.  The bracket tables of the
two model algebras are stored as data so that misprint fixes can be applied
as named overlays and reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import InvalidInputError, PreconditionError

RANK_CUT = 1e-9


@dataclass(frozen=True, eq=False)
class StructureConstants:
    basis: tuple[str, ...]
    c: np.ndarray
    form: np.ndarray | None = None
    m_indices: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        d = len(self.basis)
        if c.shape != (d, d, d):
            raise InvalidInputError(f"c must have shape ({d},{d},{d})")
        if np.abs(c + c.transpose(0, 2, 1)).max(initial=0.0) > 1e-12:
            raise InvalidInputError("structure constants must be antisymmetric in (i, j)")
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "c", c)
        if self.form is not None:
            f = np.asarray(self.form, dtype=float)
            mi = tuple(range(d)) if self.m_indices is None else tuple(self.m_indices)
            if f.shape != (len(mi), len(mi)) or np.abs(f - f.T).max() > 1e-12:
                raise InvalidInputError("form must be a symmetric array on the marked subspace")
            object.__setattr__(self, "form", f)
            object.__setattr__(self, "m_indices", mi)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, name: str) -> int:
        try:
            return self.basis.index(name)
        except ValueError as exc:
            raise InvalidInputError(f"unknown basis element {name!r}") from exc

    def vec(self, name_or_terms) -> np.ndarray:
        v = np.zeros(self.dim)
        if isinstance(name_or_terms, str):
            v[self.index(name_or_terms)] = 1.0
        else:
            for name, coeff in dict(name_or_terms).items():
                v[self.index(name)] += coeff
        return v

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, np.asarray(x, float), np.asarray(y, float))

    def to_json(self) -> dict:
        brackets = []
        for i, j in combinations(range(self.dim), 2):
            terms = [{"k": int(k), "coeff": float(self.c[k, i, j])} for k in np.nonzero(self.c[:, i, j])[0]]
            if terms:
                brackets.append({"i": i, "j": j, "terms": terms})
        doc = {"basis": list(self.basis), "brackets": brackets}
        if self.form is not None:
            doc["form"] = {"indices": list(self.m_indices), "matrix": self.form.tolist()}
        return doc

    @classmethod
    def from_json(cls, doc) -> "StructureConstants":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            basis = tuple(doc["basis"])
            d = len(basis)
            c = np.zeros((d, d, d))
            for br in doc.get("brackets", []):
                i, j = int(br["i"]), int(br["j"])
                for t in br["terms"]:
                    c[int(t["k"]), i, j] += float(t["coeff"])
                    c[int(t["k"]), j, i] -= float(t["coeff"])
            form = doc.get("form")
            if form is not None:
                return cls(basis, c, np.array(form["matrix"], float), tuple(form["indices"]))
            return cls(basis, c)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidInputError(f"malformed structure-constants document: {exc}") from exc


def from_brackets(names, brackets: dict, form=None, m_indices=None, meta=None) -> StructureConstants:
    """Build from ``{(a, b): {k: coeff}}`` keyed by basis names."""
    idx = {n: i for i, n in enumerate(names)}
    d = len(names)
    c = np.zeros((d, d, d))
    for (a, b), terms in brackets.items():
        for k, v in terms.items():
            c[idx[k], idx[a], idx[b]] += v
            c[idx[k], idx[b], idx[a]] -= v
    return StructureConstants(tuple(names), c, form, m_indices, dict(meta or {}))


def abelian(d: int) -> StructureConstants:
    return StructureConstants(tuple(f"e{i + 1}" for i in range(d)), np.zeros((d, d, d)))


def heisenberg() -> StructureConstants:
    return from_brackets(["e1", "e2", "e3"], {("e1", "e2"): {"e3": 1.0}})


# ------------------------------------------------------------ model tables

# Entries: (left, right, {target: coefficient function of (eps, b, R0)}).
# Names ending in "_a" expand over a = 1..n; "y_a" is a symbol the source
# table uses without defining it, kept verbatim so overlays can resolve it.
_TABLE_MINUS_EPS_HALF = [
    ("B_a", "C_a", {"A": lambda e, b, R: e}),
    ("B_a", "K", {"C_a": lambda e, b, R: -1.0}),
    ("C_a", "K", {"B_a": lambda e, b, R: -e}),
    ("A", "q1", {"p2": lambda e, b, R: 2.0}),
    ("A", "q2", {"p1": lambda e, b, R: 2.0 * e}),
    ("B_a", "q1", {"JX_a": lambda e, b, R: -1.0}),
    ("B_a", "q2", {"X_a": lambda e, b, R: -e}),
    ("B_a", "X_a", {"p2": lambda e, b, R: -1.0}),
    ("B_a", "JX_a", {"p1": lambda e, b, R: -e}),
    ("C_a", "q1", {"X_a": lambda e, b, R: -e}),
    ("C_a", "q2", {"y_a": lambda e, b, R: -e}),
    ("C_a", "X_a", {"p1": lambda e, b, R: e}),
    ("C_a", "JX_a", {"p2": lambda e, b, R: e}),
    ("K", "X_a", {"JX_a": lambda e, b, R: 1.0}),
    ("K", "JX_a", {"X_a": lambda e, b, R: e}),
    ("p1", "q1", {"p1": lambda e, b, R: -1.0}),
    ("p2", "q1", {"p2": lambda e, b, R: -3.0, "A": lambda e, b, R: -1.0}),
    ("p2", "q2", {"p1": lambda e, b, R: -2.0 * e}),
    (
        "q1",
        "q2",
        {
            "p2": lambda e, b, R: 2.0 * b,
            "q2": lambda e, b, R: -1.0,
            "A": lambda e, b, R: -0.5 * (R - b),
            "K": lambda e, b, R: 1.0,
        },
    ),
    ("q1", "X_a", {"X_a": lambda e, b, R: 1.0}),
    ("q1", "JX_a", {"JX_a": lambda e, b, R: 1.0}),
    ("q2", "X_a", {"JX_a": lambda e, b, R: 2.0, "B_a": lambda e, b, R: -1.0}),
    ("q2", "JX_a", {"X_a": lambda e, b, R: 2.0 * e, "C_a": lambda e, b, R: -1.0}),
    ("X_a", "JX_a", {"p2": lambda e, b, R: 2.0, "A": lambda e, b, R: 1.0}),
]

_TABLE_ZERO = [
    ("A", "q1", {"p2": lambda e, b, R: 2.0}),
    ("A", "q2", {"p1": lambda e, b, R: 2.0 * e}),
    ("p1", "q1", {"p1": lambda e, b, R: -1.0}),
    ("p1", "q2", {"p2": lambda e, b, R: 1.0, "A": lambda e, b, R: 1.0}),
    ("p2", "q1", {"p2": lambda e, b, R: -3.0, "A": lambda e, b, R: -1.0}),
    ("p2", "q2", {"p1": lambda e, b, R: -e}),
    ("q1", "q2", {"p2": lambda e, b, R: 2.0 * b, "A": lambda e, b, R: -0.5 * (R - 2.0 * b)}),
    ("q1", "X_a", {"X_a": lambda e, b, R: 1.0}),
    ("q1", "JX_a", {"JX_a": lambda e, b, R: 1.0}),
    ("q2", "X_a", {"JX_a": lambda e, b, R: 1.0}),
    ("q2", "JX_a", {"X_a": lambda e, b, R: e}),
    ("X_a", "JX_a", {"p2": lambda e, b, R: 2.0, "A": lambda e, b, R: 1.0}),
]

# Named overlays.  "rename" maps template symbols; "set" replaces a bracket.
OVERLAYS: dict[str, dict] = {
    "y_a->JX_a": {"rename": {"y_a": "JX_a"}},
    "p2q2:-eps": {"set": {("p2", "q2"): {"p1": lambda e, b, R: -e}}},
}
DEFAULT_OVERLAYS = {"minus_eps_half": ("y_a->JX_a",), "zero": ()}


def m_names(n: int) -> list[str]:
    names = ["p1", "p2", "q1", "q2"]
    for a in range(1, n + 1):
        names += [f"X{a}", f"JX{a}"]
    return names


def h_names(lam: str, n: int) -> list[str]:
    if lam == "zero":
        return ["A"]
    return ["A"] + [f"B{a}" for a in range(1, n + 1)] + [f"C{a}" for a in range(1, n + 1)] + ["K"]


def _expand(name: str, a: int) -> str:
    return name[:-2] + str(a) if name.endswith("_a") else name


def paper_algebra(
    lam: str,
    epsilon: int,
    n: int,
    b_p: float,
    R0: float,
    overlays: tuple[str, ...] | None = None,
) -> StructureConstants:
    """The model algebra m + hol for lambda in {"zero", "minus_eps_half"}.

    The form on m is the metric in the adapted frame with g(q1, q1) = b_p and
    all X_a of norm +1.  Brackets naming an undefined symbol are dropped and
    listed under ``meta["unresolved"]``.
    """
    if lam not in ("zero", "minus_eps_half"):
        raise InvalidInputError("lam must be 'zero' or 'minus_eps_half'")
    if epsilon not in (-1, 1) or n < 0:
        raise InvalidInputError("epsilon must be +-1 and n >= 0")
    overlays = DEFAULT_OVERLAYS[lam] if overlays is None else tuple(overlays)
    for o in overlays:
        if o not in OVERLAYS:
            raise InvalidInputError(f"unknown overlay {o!r}")
    table = list(_TABLE_ZERO if lam == "zero" else _TABLE_MINUS_EPS_HALF)
    rename: dict[str, str] = {}
    replace: dict = {}
    for o in overlays:
        rename.update(OVERLAYS[o].get("rename", {}))
        replace.update(OVERLAYS[o].get("set", {}))
    table = [(l, r, replace.get((l, r), t)) for l, r, t in table]
    mn = m_names(n)
    names = mn + h_names(lam, n)
    known = set(names)
    brackets: dict = {}
    unresolved = []
    for left, right, terms in table:
        per_a = any(s.endswith("_a") for s in [left, right, *terms])
        for a in range(1, n + 1) if per_a else [None]:
            ex = (lambda s: _expand(rename.get(s, s), a)) if a is not None else (lambda s: rename.get(s, s))
            L, Rn = ex(left), ex(right)
            out = {}
            for tgt, fn in terms.items():
                T = ex(tgt)
                if T not in known:
                    unresolved.append(f"[{L},{Rn}] -> {T}")
                    continue
                out[T] = out.get(T, 0.0) + float(fn(epsilon, b_p, R0))
            if out:
                brackets[(L, Rn)] = out
    form = np.zeros((len(mn), len(mn)))
    form[0, 2] = form[2, 0] = 1.0
    form[1, 3] = form[3, 1] = -epsilon
    form[2, 2] = b_p
    form[3, 3] = -epsilon * b_p
    for a in range(n):
        form[4 + 2 * a, 4 + 2 * a] = 1.0
        form[5 + 2 * a, 5 + 2 * a] = -epsilon
    meta = {
        "lambda": lam,
        "epsilon": epsilon,
        "n": n,
        "b_p": b_p,
        "R0": R0,
        "overlays": list(overlays),
        "unresolved": unresolved,
    }
    return from_brackets(names, brackets, form, tuple(range(len(mn))), meta)


def quoted_nilradical(sc: StructureConstants) -> np.ndarray:
    """Rows spanning the nilradical stated for the model algebra."""
    lam, n = sc.meta["lambda"], sc.meta["n"]
    rows = [sc.vec("p1"), sc.vec("p2")]
    if lam == "minus_eps_half":
        rows.append(sc.vec({"q2": 1.0, "K": -1.0}))
    for a in range(1, n + 1):
        rows += [sc.vec(f"X{a}"), sc.vec(f"JX{a}")]
    rows.append(sc.vec("A"))
    if lam == "minus_eps_half":
        rows += [sc.vec(f"B{a}") for a in range(1, n + 1)] + [sc.vec(f"C{a}") for a in range(1, n + 1)]
    return np.array(rows)


def sigma_map(sc: StructureConstants) -> np.ndarray:
    """Diagonal involution with the sign pattern used for the lambda = -eps/2 algebra."""
    signs = {"A": -1, "K": -1, "p1": 1, "p2": -1, "q1": 1, "q2": -1}
    diag = []
    for name in sc.basis:
        if name in signs:
            diag.append(signs[name])
        elif name.startswith("JX") or name.startswith("B"):
            diag.append(-1)
        elif name.startswith("X") or name.startswith("C"):
            diag.append(1)
        else:
            raise InvalidInputError(f"no sign for {name}")
    return np.diag(np.array(diag, float))


def theta_map(sub: StructureConstants) -> np.ndarray:
    """Involution of the sigma-fixed subalgebra: C_a, X_a negated, p1, q1 fixed."""
    diag = [-1.0 if (nm.startswith("C") or nm.startswith("X")) else 1.0 for nm in sub.basis]
    return np.diag(diag)


# ------------------------------------------------------------ diagnostics


def jacobi_tensor(c: np.ndarray) -> np.ndarray:
    """J[i, j, l, :] = [[e_i, e_j], e_l] + [[e_j, e_l], e_i] + [[e_l, e_i], e_j]."""
    T = np.einsum("kij,mkl->ijlm", c, c)
    return T + np.transpose(T, (2, 0, 1, 3)) + np.transpose(T, (1, 2, 0, 3))


def jacobi_residual(sc: StructureConstants) -> float:
    return float(np.abs(jacobi_tensor(sc.c)).max(initial=0.0))


def jacobi_failures(sc: StructureConstants, tol: float = 1e-12) -> list[dict]:
    J = jacobi_tensor(sc.c)
    out = []
    for i, j, l in combinations(range(sc.dim), 3):
        v = J[i, j, l]
        if np.abs(v).max() > tol:
            out.append(
                {
                    "triple": [sc.basis[i], sc.basis[j], sc.basis[l]],
                    "residual": {sc.basis[m]: float(v[m]) for m in np.nonzero(np.abs(v) > tol)[0]},
                }
            )
    return out


def minimal_corrections(sc: StructureConstants, tol: float = 1e-12, limit: int = 20) -> list[dict]:
    """Single structure-constant changes that restore the Jacobi identity.

    For every entry c[k, i, j] (i < j) the Jacobi tensor is a quadratic
    polynomial in the change; its squared norm is minimised exactly.
    """
    base = jacobi_tensor(sc.c)
    if np.abs(base).max(initial=0.0) <= tol:
        return []
    found = []
    d = sc.dim
    for i, j in combinations(range(d), 2):
        for k in range(d):
            E = np.zeros_like(sc.c)
            E[k, i, j], E[k, j, i] = 1.0, -1.0
            jp = jacobi_tensor(sc.c + E).ravel()
            jm = jacobi_tensor(sc.c - E).ravel()
            j0 = base.ravel()
            a2 = 0.5 * (jp + jm) - j0
            a1 = 0.5 * (jp - jm)
            # minimise |j0 + t a1 + t^2 a2|^2
            poly = np.array(
                [
                    4 * a2 @ a2,
                    6 * a1 @ a2,
                    2 * (a1 @ a1 + 2 * j0 @ a2),
                    2 * j0 @ a1,
                ]
            )
            poly = np.trim_zeros(poly, "f")
            if poly.size <= 1:
                continue
            roots = np.roots(poly)
            for t in roots[np.abs(roots.imag) < 1e-9].real:
                r = j0 + t * a1 + t * t * a2
                if t != 0.0 and np.abs(r).max() <= tol * 10:
                    found.append(
                        {
                            "bracket": [sc.basis[i], sc.basis[j]],
                            "target": sc.basis[k],
                            "old": float(sc.c[k, i, j]),
                            "new": float(sc.c[k, i, j] + t),
                        }
                    )
                    if len(found) >= limit:
                        return found
    return found


def _span(rows: np.ndarray, rel_cut: float = RANK_CUT, floor: float = 0.0) -> np.ndarray:
    """Orthonormal rows spanning the row space.

    Singular values below ``rel_cut`` times the largest, or below ``floor``,
    count as zero.
    """
    rows = np.atleast_2d(np.asarray(rows, float))
    if rows.size == 0:
        return np.zeros((0, rows.shape[-1] if rows.ndim == 2 else 0))
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        return np.zeros((0, rows.shape[1]))
    return vt[: int(np.sum(s > max(rel_cut * s[0], floor)))]


def _brackets_of(sc: StructureConstants, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    if U.shape[0] == 0 or V.shape[0] == 0:
        return np.zeros((0, sc.dim))
    return np.einsum("kij,ai,bj->abk", sc.c, U, V).reshape(-1, sc.dim)


def _contained(U: np.ndarray, V: np.ndarray, tol: float = 1e-9) -> bool:
    """Is the row space of U inside that of the orthonormal V?"""
    if U.shape[0] == 0:
        return True
    if V.shape[0] == 0:
        return bool(np.abs(U).max() <= tol)
    resid = U - (U @ V.T) @ V
    return bool(np.abs(resid).max() <= tol * max(1.0, np.abs(U).max()))


@dataclass(frozen=True)
class SeriesReport:
    solvable_steps: int | None
    derived_dims: list[int]
    nilpotent_steps: int | None
    lower_central_dims: list[int]
    is_ideal: bool


def _as_rows(sc: StructureConstants, ideal_basis) -> np.ndarray:
    if ideal_basis is None:
        return np.eye(sc.dim)
    arr = np.asarray(ideal_basis)
    if arr.ndim == 1:
        idx = [int(i) for i in arr]
        if any(i < 0 or i >= sc.dim for i in idx):
            raise InvalidInputError("ideal index out of range")
        return np.eye(sc.dim)[idx]
    if arr.shape[1] != sc.dim:
        raise InvalidInputError("ideal vectors must have the algebra dimension")
    return arr.astype(float)


def series_analysis(sc: StructureConstants, ideal_basis=None, max_steps: int = 50) -> SeriesReport:
    floor = 1e-10 * max(1.0, float(np.abs(sc.c).max(initial=0.0)))
    G = np.eye(sc.dim)
    D = G
    derived = [sc.dim]
    solvable = None
    for step in range(1, max_steps + 1):
        nxt = _span(_brackets_of(sc, D, D), floor=floor)
        derived.append(nxt.shape[0])
        if nxt.shape[0] == 0:
            solvable = step
            break
        if nxt.shape[0] == D.shape[0]:
            break
        D = nxt
    N = _span(_as_rows(sc, ideal_basis))
    lower = [N.shape[0]]
    nil = None
    C = N
    if N.shape[0] == 0:
        nil = 0
    else:
        for step in range(1, max_steps + 1):
            nxt = _span(_brackets_of(sc, N, C), floor=floor)
            lower.append(nxt.shape[0])
            if nxt.shape[0] == 0:
                nil = step
                break
            if nxt.shape[0] == C.shape[0]:
                break
            C = nxt
    is_ideal = _contained(_brackets_of(sc, G, N), N)
    return SeriesReport(solvable, derived, nil, lower, is_ideal)


def killing_form(sc: StructureConstants) -> np.ndarray:
    ad = adjoint_rep(sc)
    return np.einsum("iab,jba->ij", ad, ad)


def same_subspace(U: np.ndarray, V: np.ndarray) -> bool:
    A, B = _span(U), _span(V)
    return A.shape[0] == B.shape[0] and _contained(A, B) and _contained(B, A)


def _weight_mass(ad: np.ndarray, x: np.ndarray) -> float:
    ev = np.linalg.eigvals(np.einsum("i,iab->ab", x, ad))
    return float(np.sum(np.abs(ev) ** 2))


def nilradical(sc: StructureConstants, rel_cut: float = 1e-6) -> np.ndarray:
    """Rows spanning the nilradical of a solvable algebra.

    By Lie's theorem the adjoint weights are linear functionals, so
    ``x -> sum |weight(x)|^2`` is a positive semidefinite quadratic form whose
    kernel is the set of ad-nilpotent elements, i.e. the nilradical.  The form
    is recovered from eigenvalues by polarisation; the kernel is then checked
    exactly to be a nilpotent ideal.
    """
    d = sc.dim
    ad = adjoint_rep(sc)
    eye = np.eye(d)
    diag = np.array([_weight_mass(ad, eye[i]) for i in range(d)])
    H = np.diag(diag)
    for i, j in combinations(range(d), 2):
        H[i, j] = H[j, i] = 0.5 * (_weight_mass(ad, eye[i] + eye[j]) - diag[i] - diag[j])
    w, v = np.linalg.eigh(H)
    scale = max(1.0, np.abs(w).max())
    N = v[:, np.abs(w) <= rel_cut * scale].T
    # eigenvalues of nearly nilpotent matrices carry ~sqrt(machine eps) errors;
    # drop that noise before the exact checks
    N[np.abs(N) < 1e-7] = 0.0
    N = _span(N) if N.size else N
    rep = series_analysis(sc, N) if N.shape[0] else None
    if rep is not None and (not rep.is_ideal or rep.nilpotent_steps is None):
        raise PreconditionError("weight kernel is not a nilpotent ideal; is the algebra solvable?")
    return N


def center(sc: StructureConstants) -> np.ndarray:
    """Rows spanning {x : [x, e_j] = 0 for all j}."""
    d = sc.dim
    M = sc.c.transpose(2, 0, 1).reshape(d * d, d)  # row (j, k), column i
    if not np.any(M):
        return np.eye(d)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > RANK_CUT * s[0]))
    return vt[rank:]


def adjoint_rep(sc: StructureConstants) -> np.ndarray:
    """ad[i] is the matrix of ad(e_i): column j holds [e_i, e_j]."""
    return sc.c.transpose(1, 0, 2).copy()


def adjoint_compatibility(sc: StructureConstants) -> float:
    ad = adjoint_rep(sc)
    comm = np.einsum("iab,jbc->ijac", ad, ad) - np.einsum("jab,ibc->ijac", ad, ad)
    rhs = np.einsum("kij,kac->ijac", sc.c, ad)
    return float(np.abs(comm - rhs).max(initial=0.0))


@dataclass(frozen=True)
class AutomorphismReport:
    auto_residual: float
    isometry_residual: float | None
    fixed_subspace: np.ndarray
    fixed_names: list[str] | None


def automorphism_check(sc: StructureConstants, mapping) -> AutomorphismReport:
    M = np.asarray(mapping, dtype=float)
    if M.shape != (sc.dim, sc.dim):
        raise InvalidInputError("map must be a square array of the algebra dimension")
    lhs = np.einsum("ak,kij->aij", M, sc.c)
    rhs = np.einsum("kab,ai,bj->kij", sc.c, M, M)
    auto = float(np.abs(lhs - rhs).max(initial=0.0))
    iso = None
    if sc.form is not None:
        mi = list(sc.m_indices)
        other = [i for i in range(sc.dim) if i not in mi]
        Mm = M[np.ix_(mi, mi)]
        leak = float(np.abs(M[np.ix_(other, mi)]).max(initial=0.0))
        iso = max(float(np.abs(Mm.T @ sc.form @ Mm - sc.form).max()), leak)
    fixed = _null_rows(M - np.eye(sc.dim))
    names = None
    support = np.abs(fixed).max(axis=0) > 1e-9 if fixed.size else np.zeros(sc.dim, bool)
    if fixed.shape[0] == int(support.sum()):
        names = [sc.basis[i] for i in np.nonzero(support)[0]]
    return AutomorphismReport(auto, iso, fixed, names)


def _null_rows(A: np.ndarray) -> np.ndarray:
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return np.eye(A.shape[1])
    return vt[int(np.sum(s > RANK_CUT * s[0])) :]


def subalgebra(sc: StructureConstants, names) -> StructureConstants:
    """Restriction to a subalgebra spanned by basis elements (closure is checked)."""
    idx = [sc.index(nm) for nm in names]
    other = [i for i in range(sc.dim) if i not in idx]
    if other and np.abs(sc.c[np.ix_(other, idx, idx)]).max() > 1e-12:
        raise InvalidInputError("the chosen basis elements do not span a subalgebra")
    form, mi = None, None
    if sc.form is not None:
        keep = [i for i in idx if i in sc.m_indices]
        pos = {m: k for k, m in enumerate(sc.m_indices)}
        form = sc.form[np.ix_([pos[i] for i in keep], [pos[i] for i in keep])]
        mi = tuple(idx.index(i) for i in keep)
    return StructureConstants(tuple(sc.basis[i] for i in idx), sc.c[np.ix_(idx, idx, idx)], form, mi, dict(sc.meta))


# -------------------------------------------------- infinitesimal models


@dataclass(frozen=True, eq=False)
class InfinitesimalModel:
    sc: StructureConstants
    m_dim: int
    h_dim: int
    closure_enlarged: bool
    h_basis: tuple[np.ndarray, ...]
    frame: np.ndarray
    residuals: dict

    def reductivity_residual(self) -> float:
        m = list(range(self.m_dim))
        h = list(range(self.m_dim, self.m_dim + self.h_dim))
        c = self.sc.c
        hh = np.abs(c[np.ix_(m, h, h)]).max(initial=0.0)
        hm = np.abs(c[np.ix_(h, h, m)]).max(initial=0.0)
        return float(max(hh, hm))


def _coords_in(Hflat: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, float]:
    coef = X.reshape(X.shape[0], -1) @ Hflat.T
    resid = X.reshape(X.shape[0], -1) - coef @ Hflat
    return coef, float(np.abs(resid).max(initial=0.0))


def build_infinitesimal_model(chart, struct, p, tol: float = 1e-6, rel_cut: float = RANK_CUT) -> InfinitesimalModel:
    """Assemble g = T_pM + hol from S and the canonical curvature at p."""
    from .chart_calculus import LocalGeometry
    from .homogeneous_verify import require_structure, s_tensor_jet
    from .linear_models import adapted_frame

    res = require_structure(struct, chart, p, tol)
    geo = LocalGeometry(chart, p, order=2)
    d = chart.dim
    if struct.spec is not None and struct.spec.singular:
        fr = adapted_frame(struct.spec, geo.p)
        F = fr.matrix()
        names = fr.names
    else:
        F = np.eye(d)
        names = [f"e{i + 1}" for i in range(d)]
    Finv = np.linalg.inv(F)
    S = np.einsum("ck,kij,ia,jb->cab", Finv, s_tensor_jet(geo, chart, struct, 0).value, F, F)
    g = F.T @ geo.g.value @ F
    ginv = np.linalg.inv(g)
    Rlow = np.einsum("ijkl,ia,jb,kc,ld->abcd", geo.riemann.value, F, F, F, F)
    # R_{ab} as endomorphism: (R_ab)^d_c = g^{dw} R_{abcw}
    Rend = np.einsum("dw,abcw->abdc", ginv, Rlow)
    SX = S.transpose(1, 0, 2)  # SX[a] is the matrix of S_{e_a}
    comm = np.einsum("adm,bmc->abdc", SX, SX) - np.einsum("bdm,amc->abdc", SX, SX)
    tors = S.transpose(0, 1, 2) - S.transpose(0, 2, 1)  # (S_a e_b - S_b e_a)^k = tors[k, a, b]
    RS = comm - np.einsum("kab,kdc->abdc", tors, SX)
    Rt = Rend - RS
    pairs = [(a, b) for a, b in combinations(range(d), 2)]
    mats = np.array([Rt[a, b] for a, b in pairs])
    flat = _span(mats.reshape(len(pairs), -1), rel_cut)
    enlarged = False
    for _ in range(3):
        H = flat.reshape(-1, d, d)
        br = np.einsum("iab,jbc->ijac", H, H) - np.einsum("jab,ibc->ijac", H, H)
        _, out = _coords_in(flat, br.reshape(-1, d, d)) if len(H) else (None, 0.0)
        if out <= 1e-9 * max(1.0, np.abs(mats).max()):
            break
        enlarged = True
        flat = _span(np.vstack([flat, br.reshape(-1, d * d)]), rel_cut)
    else:
        raise PreconditionError("holonomy span failed to close under brackets in 3 rounds")
    H = flat.reshape(-1, d, d)
    h = len(H)
    D = d + h
    c = np.zeros((D, D, D))
    # [e_a, e_b] = S_a e_b - S_b e_a - Rt_ab
    c[:d, :d, :d] = tors
    coef, r_m = _coords_in(flat, mats)
    for (a, b), row in zip(pairs, coef):
        c[d:, a, b] = -row
        c[d:, b, a] = row
    # [H_i, e_a] = H_i e_a
    for i in range(h):
        c[:d, d + i, :d] = H[i]
        c[:d, :d, d + i] = -H[i]
    br = np.einsum("iab,jbc->ijac", H, H) - np.einsum("jab,ibc->ijac", H, H)
    hc, r_h = _coords_in(flat, br.reshape(-1, d, d))
    c[d:, d:, d:] = hc.reshape(h, h, h).transpose(2, 0, 1)
    sc = StructureConstants(
        tuple(names) + tuple(f"h{i + 1}" for i in range(h)),
        c,
        g,
        tuple(range(d)),
        {"source": chart.name},
    )
    return InfinitesimalModel(
        sc,
        d,
        h,
        enlarged,
        tuple(H),
        F,
        {"as_max": res.max, "m_projection": r_m, "h_projection": r_h},
    )
