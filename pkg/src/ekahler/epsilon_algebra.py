"""Arithmetic of epsilon-complex scalars and checks for epsilon-quaternionic triples.

One code path serves both geometries: ``epsilon = -1`` gives the complex
numbers and ``epsilon = +1`` the para-complex (split-complex) numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_EPS_VALUES = (-1, 1)


def _check_eps(eps: int) -> int:
    if eps not in _EPS_VALUES:
        raise InvalidInputError(f"epsilon must be -1 or +1, got {eps!r}")
    return int(eps)


@dataclass(frozen=True)
class EpsilonComplex:
    re: float
    im: float
    epsilon: int = -1

    def __post_init__(self) -> None:
        _check_eps(self.epsilon)

    def norm2(self) -> float:
        """Modulus squared ``re^2 - epsilon im^2`` (indefinite when epsilon = +1)."""
        return self.re * self.re - self.epsilon * self.im * self.im

    def conj(self) -> "EpsilonComplex":
        return EpsilonComplex(self.re, -self.im, self.epsilon)

    def __add__(self, other: "EpsilonComplex") -> "EpsilonComplex":
        _same_eps(self, other)
        return EpsilonComplex(self.re + other.re, self.im + other.im, self.epsilon)

    def __mul__(self, other: "EpsilonComplex") -> "EpsilonComplex":
        return ec_mul(self, other)

    def exp(self) -> "EpsilonComplex":
        return ec_exp(self)

    def as_tuple(self) -> tuple[float, float]:
        return (self.re, self.im)


def _same_eps(a: EpsilonComplex, b: EpsilonComplex) -> None:
    if not isinstance(b, EpsilonComplex) or a.epsilon != b.epsilon:
        raise InvalidInputError("operands must be EpsilonComplex with equal epsilon")


def ec_mul(a: EpsilonComplex, b: EpsilonComplex) -> EpsilonComplex:
    _same_eps(a, b)
    eps = a.epsilon
    return EpsilonComplex(a.re * b.re + eps * a.im * b.im, a.re * b.im + a.im * b.re, eps)


def ec_exp(z: EpsilonComplex) -> EpsilonComplex:
    scale = math.exp(z.re)
    if z.epsilon == -1:
        return EpsilonComplex(scale * math.cos(z.im), scale * math.sin(z.im), -1)
    return EpsilonComplex(scale * math.cosh(z.im), scale * math.sinh(z.im), 1)


# ------------------------------------------------------------ quaternionic


@dataclass(frozen=True)
class QuatSignature:
    """Admissible sign triple (eps_1, eps_2, eps_3) with J_a^2 = eps_a."""

    eps: tuple[int, int, int]

    def __post_init__(self) -> None:
        e = tuple(int(x) for x in self.eps)
        if e not in ((-1, -1, -1), (-1, 1, 1)):
            raise InvalidInputError(
                f"quaternionic signature must be (-1,-1,-1) or (-1,1,1), got {self.eps!r}"
            )
        object.__setattr__(self, "eps", e)

    @property
    def is_para(self) -> bool:
        return self.eps == (-1, 1, 1)

    @classmethod
    def pseudo(cls) -> "QuatSignature":
        return cls((-1, -1, -1))

    @classmethod
    def para(cls) -> "QuatSignature":
        return cls((-1, 1, 1))


@dataclass(frozen=True)
class TripleReport:
    square_residuals: tuple[float, float, float]
    product_residual: float
    skew_residuals: tuple[float, float, float]

    @property
    def max_residual(self) -> float:
        return max(*self.square_residuals, self.product_residual, *self.skew_residuals)

    @property
    def ok(self) -> bool:
        return self.max_residual <= 1e-10


def quat_triple_check(J1, J2, J3, sig: QuatSignature, g) -> TripleReport:
    """Residuals of J_a^2 = eps_a, J_1 J_2 = J_3 and g-skewness (max-abs norms)."""
    mats = [np.asarray(J, dtype=float) for J in (J1, J2, J3)]
    g = np.asarray(g, dtype=float)
    dim = g.shape[0]
    for M in mats + [g]:
        if M.ndim != 2 or M.shape != (dim, dim):
            raise InvalidInputError("all arrays must be square of one common dimension")
    if dim % 4 != 0 or dim == 0:
        raise InvalidInputError(f"dimension {dim} is not a positive multiple of 4")
    if np.abs(g - g.T).max() > 1e-12 or abs(np.linalg.det(g)) < 1e-14:
        raise InvalidInputError("g must be symmetric and nondegenerate")
    eye = np.eye(dim)
    sq = tuple(float(np.abs(M @ M - e * eye).max()) for M, e in zip(mats, sig.eps))
    prod = float(np.abs(mats[0] @ mats[1] - mats[2]).max())
    # g(J X, Y) + g(X, J Y) over the coordinate basis is J^T g + g J
    skew = tuple(float(np.abs(M.T @ g + g @ M).max()) for M in mats)
    return TripleReport(sq, prod, skew)


# Left multiplication by i, j, k on (a, b, c, d) ~ a + b i + c j + d k.
_L_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
_L_J = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
_L_K = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
# Split quaternions: i^2 = -1, j^2 = k^2 = +1.
_S_J = np.array([[0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
_S_K = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)


def standard_triple(n: int, sig: QuatSignature, neutral: bool = False):
    """Metric and triple (g, J1, J2, J3) on R^{4n} satisfying all the relations.

    The pseudo case uses block-diagonal quaternion multiplication with a
    definite metric, or with signature (4n/2, 4n/2) when ``neutral`` is set and
    n is even.  The para case uses split quaternions with blocks of signature
    (2, 2).
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    if sig.is_para:
        blocks = (_L_I, _S_J, _S_K)
        gblock = [np.diag([1.0, 1.0, -1.0, -1.0])] * n
    else:
        blocks = (_L_I, _L_J, _L_K)
        if neutral:
            if n % 2:
                raise InvalidInputError("a neutral pseudo-quaternionic metric needs even n")
            gblock = [np.eye(4)] * (n // 2) + [-np.eye(4)] * (n // 2)
        else:
            gblock = [np.eye(4)] * n
    g = _block_diag(gblock)
    Js = tuple(_block_diag([B] * n) for B in blocks)
    return g, Js[0], Js[1], Js[2]


def _block_diag(blocks) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i : i + k, i : i + k] = b
        i += k
    return out
