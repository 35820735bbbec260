"""Forward-mode truncated Taylor arithmetic (jets).

Two layers live here.

``Jet``
    A scalar carrying all partial derivatives up to a fixed order with respect
    to a few variables.  Derivative tensors are stored flattened and in full
    (non-symmetrised) form, so the k-th part of a jet is the tensor of k-th
    partials.  Products use the Leibniz rule over position subsets, which is a
    sparse bilinear map precomputed once per (nvar, order).

``JetTensor``
    An array-valued jet stored as a list of parts ``parts[k]`` of shape
    ``base_shape + (nvar,)*k``.  Tensor algebra (einsum contractions,
    inversion, coordinate derivatives) acts on all parts at once.

Metric functions written with ordinary arithmetic and numpy ufuncs work
unchanged on ``Jet`` inputs.
"""

from __future__ import annotations

import math
import string
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import kernels


class JetSpace:
    """Layout and Leibniz table for jets in ``nvar`` variables up to ``order``."""

    def __init__(self, nvar: int, order: int) -> None:
        self.nvar = nvar
        self.order = order
        self.sizes = [nvar**k for k in range(order + 1)]
        self.offsets = [int(sum(self.sizes[:k])) for k in range(order + 1)]
        self.length = int(sum(self.sizes))
        outs, lefts, rights = [], [], []
        for k in range(order + 1):
            shape = (nvar,) * k
            idx = np.indices(shape).reshape(k, -1) if k else np.zeros((0, 1), dtype=np.int64)
            flat_out = self.offsets[k] + np.arange(nvar**k)
            for j in range(k + 1):
                for sub in combinations(range(k), j):
                    comp = [q for q in range(k) if q not in sub]
                    left = self._ravel(idx[list(sub)], j)
                    right = self._ravel(idx[comp], k - j)
                    outs.append(flat_out)
                    lefts.append(self.offsets[j] + left)
                    rights.append(self.offsets[k - j] + right)
        self.out_idx = np.ascontiguousarray(np.concatenate(outs), dtype=np.int64)
        self.a_idx = np.ascontiguousarray(np.concatenate(lefts), dtype=np.int64)
        self.b_idx = np.ascontiguousarray(np.concatenate(rights), dtype=np.int64)

    def _ravel(self, rows: np.ndarray, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros(rows.shape[1] if rows.ndim == 2 else 1, dtype=np.int64)
        return np.ravel_multi_index(tuple(rows), (self.nvar,) * k)

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return kernels.jet_mul(x, y, self.out_idx, self.a_idx, self.b_idx, self.length)

    def part(self, c: np.ndarray, k: int) -> np.ndarray:
        o = self.offsets[k]
        return c[o : o + self.sizes[k]].reshape((self.nvar,) * k)


@lru_cache(maxsize=64)
def jet_space(nvar: int, order: int) -> JetSpace:
    return JetSpace(nvar, order)


def _unwrap(x, space: JetSpace) -> np.ndarray:
    if isinstance(x, Jet):
        if x.space is not space:
            raise ValueError("jets from different spaces cannot be combined")
        return x.c
    c = np.zeros(space.length)
    c[0] = float(x)
    return c


class Jet:
    """Scalar truncated Taylor expansion; see the module docstring."""

    __slots__ = ("space", "c")

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        # numpy scalars and ufuncs (np.exp, np.sin, ...) route back to jet methods
        if method != "__call__" or kwargs:
            return NotImplemented
        args = [x if isinstance(x, Jet) else float(x) for x in inputs]
        name = ufunc.__name__
        if name in _BINARY:
            return _BINARY[name](*args)
        if name in _UNARY and isinstance(args[0], Jet):
            return getattr(args[0], _UNARY[name])()
        return NotImplemented

    def __init__(self, space: JetSpace, c: np.ndarray) -> None:
        self.space = space
        self.c = c

    # -- constructors
    @classmethod
    def variable(cls, value: float, index: int, space: JetSpace) -> "Jet":
        c = np.zeros(space.length)
        c[0] = float(value)
        if space.order >= 1:
            c[1 + index] = 1.0
        return cls(space, c)

    @classmethod
    def constant(cls, value: float, space: JetSpace) -> "Jet":
        c = np.zeros(space.length)
        c[0] = float(value)
        return cls(space, c)

    @property
    def value(self) -> float:
        return float(self.c[0])

    def part(self, k: int) -> np.ndarray:
        return self.space.part(self.c, k)

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, nvar={self.space.nvar}, order={self.space.order})"

    def __float__(self) -> float:
        raise TypeError("a Jet cannot be converted to float without losing derivatives")

    # -- arithmetic
    def __add__(self, other):
        return Jet(self.space, self.c + _unwrap(other, self.space))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.c - _unwrap(other, self.space))

    def __rsub__(self, other):
        return Jet(self.space, _unwrap(other, self.space) - self.c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.mul(self.c, _unwrap(other, self.space)))
        return Jet(self.space, self.c * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.space, self.c / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (self.log() * p).exp()
        if float(p).is_integer() and p >= 0:
            n = int(p)
            result = Jet.constant(1.0, self.space)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        x0 = self.value
        return self._compose([_falling(p, m) * x0 ** (p - m) for m in range(self.space.order + 1)])

    def __rpow__(self, base):
        return (self * math.log(float(base))).exp()

    def _square(self):
        return self * self

    def __abs__(self):
        return -self if self.value < 0 else self

    # comparisons look at the value only, which keeps piecewise profiles usable
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    # -- elementary functions (also reached through numpy ufuncs on objects)
    def _compose(self, derivs) -> "Jet":
        """f(self) given f^(m)(x0) for m = 0..order, via the nilpotent series."""
        order = self.space.order
        h = self.c.copy()
        h[0] = 0.0
        h = Jet(self.space, h)
        out = np.zeros(self.space.length)
        out[0] = derivs[0]
        power = None
        fact = 1.0
        for m in range(1, order + 1):
            power = h if power is None else power * h
            fact *= m
            if derivs[m] != 0.0:
                out += (derivs[m] / fact) * power.c
        return Jet(self.space, out)

    def reciprocal(self) -> "Jet":
        x0 = self.value
        if x0 == 0.0:
            raise ZeroDivisionError("jet reciprocal at zero")
        return self._compose([(-1) ** m * math.factorial(m) / x0 ** (m + 1) for m in range(self.space.order + 1)])

    def exp(self):
        e = math.exp(self.value)
        return self._compose([e] * (self.space.order + 1))

    def log(self):
        x0 = self.value
        d = [math.log(x0)] + [(-1) ** (m - 1) * math.factorial(m - 1) / x0**m for m in range(1, self.space.order + 1)]
        return self._compose(d)

    def sqrt(self):
        return self**0.5

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._compose([(s, c, -s, -c)[m % 4] for m in range(self.space.order + 1)])

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._compose([(c, -s, -c, s)[m % 4] for m in range(self.space.order + 1)])

    def sinh(self):
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self._compose([(s, c)[m % 2] for m in range(self.space.order + 1)])

    def cosh(self):
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self._compose([(c, s)[m % 2] for m in range(self.space.order + 1)])

    def tan(self):
        return self.sin() / self.cos()

    def tanh(self):
        return self.sinh() / self.cosh()

    def arctan(self):
        return _antiderivative_along(self, math.atan(self.value))


def _antiderivative_along(x: Jet, f0: float) -> Jet:
    # derivatives of arctan at x0 are those of 1/(1+t^2) shifted by one order
    order = x.space.order
    sp1 = jet_space(1, max(order - 1, 0))
    t = Jet.variable(x.value, 0, sp1)
    d1 = (1.0 + t * t).reciprocal()
    derivs = [f0] + [float(sp1.part(d1.c, m - 1).ravel()[0]) for m in range(1, order + 1)]
    return x._compose(derivs)


_BINARY = {
    "add": lambda a, b: a + b,
    "subtract": lambda a, b: a - b,
    "multiply": lambda a, b: a * b,
    "true_divide": lambda a, b: a / b,
    "divide": lambda a, b: a / b,
    "power": lambda a, b: a**b,
}
_UNARY = {
    "exp": "exp",
    "log": "log",
    "sqrt": "sqrt",
    "sin": "sin",
    "cos": "cos",
    "tan": "tan",
    "sinh": "sinh",
    "cosh": "cosh",
    "tanh": "tanh",
    "arctan": "arctan",
    "negative": "__neg__",
    "absolute": "__abs__",
    "positive": "__pos__",
    "square": "_square",
}


def _falling(p: float, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= p - i
    return out


def _val(x) -> float:
    return x.value if isinstance(x, Jet) else float(x)


# ============================================================== tensor jets

_LETTERS = string.ascii_letters


class JetTensor:
    """Array-valued jet: ``parts[k]`` has shape ``base_shape + (nvar,)*k``."""

    __slots__ = ("parts", "nvar")

    def __init__(self, parts, nvar: int) -> None:
        self.parts = [np.asarray(p, dtype=float) for p in parts]
        self.nvar = nvar

    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def base_shape(self) -> tuple[int, ...]:
        return self.parts[0].shape

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @classmethod
    def constant(cls, array, nvar: int, order: int) -> "JetTensor":
        a = np.asarray(array, dtype=float)
        return cls([a] + [np.zeros(a.shape + (nvar,) * k) for k in range(1, order + 1)], nvar)

    @classmethod
    def from_nested(cls, nested, space: JetSpace) -> "JetTensor":
        arr = np.asarray(nested, dtype=object)
        flat = arr.ravel()
        rows = np.zeros((flat.size, space.length))
        for i, entry in enumerate(flat):
            if isinstance(entry, Jet):
                rows[i] = entry.c
            else:
                rows[i, 0] = float(entry)
        parts = []
        for k in range(space.order + 1):
            o = space.offsets[k]
            block = rows[:, o : o + space.sizes[k]]
            parts.append(block.reshape(arr.shape + (space.nvar,) * k))
        return cls(parts, space.nvar)

    def truncate(self, order: int) -> "JetTensor":
        return JetTensor(self.parts[: order + 1], self.nvar)

    def __add__(self, other: "JetTensor") -> "JetTensor":
        k = min(self.order, other.order)
        return JetTensor([a + b for a, b in zip(self.parts[: k + 1], other.parts[: k + 1])], self.nvar)

    def __sub__(self, other: "JetTensor") -> "JetTensor":
        k = min(self.order, other.order)
        return JetTensor([a - b for a, b in zip(self.parts[: k + 1], other.parts[: k + 1])], self.nvar)

    def __neg__(self) -> "JetTensor":
        return JetTensor([-a for a in self.parts], self.nvar)

    def __mul__(self, s: float) -> "JetTensor":
        return JetTensor([a * float(s) for a in self.parts], self.nvar)

    __rmul__ = __mul__

    def transpose_base(self, perm) -> "JetTensor":
        perm = list(perm)
        nb = len(perm)
        out = []
        for k, p in enumerate(self.parts):
            out.append(p.transpose(perm + list(range(nb, nb + k))))
        return JetTensor(out, self.nvar)

    def derivative(self, dim: int, active) -> "JetTensor":
        """Coordinate gradient as a new trailing base axis of length ``dim``.

        Only the ``active`` coordinates carry jet variables; derivatives along
        the others are zero by construction.
        """
        active = list(active)
        nb = len(self.base_shape)
        out = []
        for k in range(self.order):
            p = self.parts[k + 1]  # base + (a,) + (a,)*k
            shape = p.shape[:nb] + (dim,) + p.shape[nb + 1 :]
            z = np.zeros(shape)
            index = [slice(None)] * nb + [active]
            z[tuple(index)] = p
            # move the new axis to the end of the base block (it already is)
            out.append(z)
        return JetTensor(out, self.nvar)


def _order_part(subs: str, A: JetTensor, B: JetTensor, k: int, jmin: int = 0, b_parts=None) -> np.ndarray:
    """Order-k part of the Leibniz product described by an einsum spec."""
    ins, out = subs.split("->")
    sa, sb = ins.split(",")
    free = [c for c in _LETTERS if c not in subs]
    bp = B.parts if b_parts is None else b_parts
    nb = len(out)
    acc = None
    for j in range(jmin, k + 1):
        da = "".join(free[:j])
        db = "".join(free[j:k])
        E = np.einsum(f"{sa}{da},{sb}{db}->{out}{da}{db}", A.parts[j], bp[k - j])
        for sub in combinations(range(k), j):
            comp = [q for q in range(k) if q not in sub]
            perm = list(range(nb)) + [
                nb + sub.index(q) if q in sub else nb + j + comp.index(q) for q in range(k)
            ]
            term = E.transpose(perm) if k else E
            acc = term if acc is None else acc + term
    return acc


def jcontract(subs: str, A: JetTensor, B: JetTensor) -> JetTensor:
    """Einsum-style product of two tensor jets with the Leibniz rule applied."""
    K = min(A.order, B.order)
    return JetTensor([_order_part(subs, A, B, k) for k in range(K + 1)], A.nvar)


def jinverse(G: JetTensor) -> JetTensor:
    """Matrix inverse of a square-matrix-valued jet."""
    g0inv = np.linalg.inv(G.parts[0])
    parts = [g0inv]
    for k in range(1, G.order + 1):
        padded = parts + [np.zeros(g0inv.shape + (G.nvar,) * k)]
        rest = _order_part("ij,jl->il", G, None, k, jmin=1, b_parts=padded)
        free = "".join(c for c in _LETTERS if c not in "aijl")[:k]
        parts.append(-np.einsum(f"ai,il{free}->al{free}", g0inv, rest))
    return JetTensor(parts, G.nvar)


# ================================================== finite-difference mode

_FD_STEPS = {1: 1e-5, 2: 1e-4, 3: 5e-4, 4: 2e-3, 5: 5e-3}


def fd_tensor_jet(fn, p, active, order: int, scale: float = 1.0) -> JetTensor:
    """Derivative tensors of an array-valued ``fn`` by central differences.

    Order-k mixed partials use the k-fold tensor product of central difference
    stencils, so the parts have the same full symmetric layout as jet output.
    """
    p = np.asarray(p, dtype=float)
    active = list(active)
    a = len(active)
    base = np.asarray(fn(p), dtype=float)
    parts = [base]
    for k in range(1, order + 1):
        h = _FD_STEPS.get(k, 1e-2) * scale
        part = np.zeros(base.shape + (a,) * k)
        cache: dict[tuple[int, ...], np.ndarray] = {}
        for combo in _sorted_multi_indices(a, k):
            val = np.zeros(base.shape)
            for signs in np.ndindex(*(2,) * k):
                s = np.array([1.0 if b == 0 else -1.0 for b in signs])
                q = p.copy()
                for c, sgn in zip(combo, s):
                    q[active[c]] += sgn * h
                val = val + np.prod(s) * np.asarray(fn(q), dtype=float)
            val = val / (2.0 * h) ** k
            cache[combo] = val
        for full in np.ndindex(*(a,) * k):
            part[(Ellipsis,) + full] = cache[tuple(sorted(full))]
        parts.append(part)
    return JetTensor(parts, a)


def _sorted_multi_indices(a: int, k: int):
    from itertools import combinations_with_replacement

    return list(combinations_with_replacement(range(a), k))
