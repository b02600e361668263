"""Truncated univariate Taylor jets for forward-mode differentiation.

A :class:`Jet` carries a field value together with its first few pure
derivatives along one input coordinate.  Coefficients are stored as
*derivative values* ``[f, f', f'', f''']``, not as scaled Taylor
coefficients ``f^(k)/k!``; every operation below works directly in that
convention (Leibniz rule for products, Faa di Bruno for compositions).

Each coefficient may be a Python float or a numpy array, so one jet can
describe a whole matrix of hidden-node fields evaluated on a point set.
"""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np

MAX_ORDER = 3

Scalar = Union[float, np.ndarray]


class Jet:
    """Immutable truncated jet ``[f, f', ..., f^(order)]``."""

    __slots__ = ("_coeffs",)
    # make ndarray <op> Jet defer to the Jet's reflected operators
    __array_ufunc__ = None

    def __init__(self, coeffs: Sequence[Scalar]):
        order = len(coeffs) - 1
        if order < 1 or order > MAX_ORDER:
            raise ValueError(f"jet order must be in 1..{MAX_ORDER}, got {order}")
        object.__setattr__(self, "_coeffs", tuple(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("Jet is immutable")

    @property
    def coeffs(self) -> tuple:
        return self._coeffs

    @property
    def order(self) -> int:
        return len(self._coeffs) - 1

    @property
    def value(self) -> Scalar:
        return self._coeffs[0]

    def __getitem__(self, k: int) -> Scalar:
        return self._coeffs[k]

    def __len__(self) -> int:
        return len(self._coeffs)

    def __repr__(self) -> str:
        return f"Jet({list(self._coeffs)!r})"

    # arithmetic -----------------------------------------------------------

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError(
                    f"jet order mismatch: {self.order} vs {other.order}")
            return other
        return jet_const(other, self.order)

    def __add__(self, other):
        o = self._lift(other)
        return Jet([a + b for a, b in zip(self._coeffs, o._coeffs)])

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Jet([a - b for a, b in zip(self._coeffs, o._coeffs)])

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return Jet([-a for a in self._coeffs])

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([a * other for a in self._coeffs])
        o = self._lift(other)
        a, b = self._coeffs, o._coeffs
        out = [a[0] * b[0], a[1] * b[0] + a[0] * b[1]]
        if self.order >= 2:
            out.append(a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2])
        if self.order >= 3:
            out.append(a[3] * b[0] + 3.0 * a[2] * b[1]
                       + 3.0 * a[1] * b[2] + a[0] * b[3])
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet([a / other for a in self._coeffs])

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = jet_const(1.0, self.order)
        for _ in range(int(n)):
            out = out * self
        return out

    def __matmul__(self, w: np.ndarray) -> "Jet":
        """Right-multiply every coefficient by a constant matrix."""
        return Jet([a @ w for a in self._coeffs])


def jet_var(value: Scalar, order: int, slope: Scalar = 1.0) -> Jet:
    """Seed jet of the independent variable: ``[value, slope, 0, ...]``."""
    if order < 1 or order > MAX_ORDER:
        raise ValueError(f"unsupported jet order {order}")
    zero = np.zeros_like(value) if isinstance(value, np.ndarray) else 0.0
    return Jet([value, slope] + [zero] * (order - 1))


def jet_const(value: Scalar, order: int) -> Jet:
    if order < 1 or order > MAX_ORDER:
        raise ValueError(f"unsupported jet order {order}")
    zero = np.zeros_like(value) if isinstance(value, np.ndarray) else 0.0
    return Jet([value] + [zero] * order)


def jet_arith(a: Jet, b, op: str) -> Jet:
    """Functional form of the jet operators (``add``, ``sub``, ``mul``, ``scale``)."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        if not isinstance(b, Jet):
            raise ValueError("mul expects two jets; use 'scale' for a scalar")
        return a * b
    if op == "scale":
        if isinstance(b, Jet):
            raise ValueError("scale expects a scalar")
        return a * b
    raise ValueError(f"unknown jet op {op!r}")


def compose(a: Jet, derivs: Callable[[Scalar], Sequence[Scalar]]) -> Jet:
    """Compose a scalar function with a jet.

    ``derivs(x)`` must return ``[g(x), g'(x), ..., g^(order)(x)]``.
    """
    g = derivs(a[0])
    a1 = a[1]
    out = [g[0], g[1] * a1]
    if a.order >= 2:
        a2 = a[2]
        out.append(g[2] * a1 * a1 + g[1] * a2)
    if a.order >= 3:
        a3 = a[3]
        out.append(g[3] * a1 * a1 * a1 + 3.0 * g[2] * a1 * a2 + g[1] * a3)
    return Jet(out)


def _gaussian_derivs(x):
    s = np.exp(-x * x)
    return (s, -2.0 * x * s, (4.0 * x * x - 2.0) * s, (12.0 * x - 8.0 * x ** 3) * s)


def gaussian(x):
    """Gaussian activation ``exp(-x**2)`` on arrays or jets."""
    if isinstance(x, Jet):
        return compose(x, _gaussian_derivs)
    return np.exp(-x * x)


jet_gaussian = gaussian


# Elementary functions used by exact solutions and coefficient fields.
# Each accepts plain arrays as well as jets.

def _dispatch(x, fn, derivs):
    if isinstance(x, Jet):
        return compose(x, derivs)
    return fn(x)


def sin(x):
    return _dispatch(x, np.sin, lambda v: (np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)))


def cos(x):
    return _dispatch(x, np.cos, lambda v: (np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)))


def exp(x):
    def d(v):
        e = np.exp(v)
        return (e, e, e, e)
    return _dispatch(x, np.exp, d)


def cosh(x):
    return _dispatch(x, np.cosh, lambda v: (np.cosh(v), np.sinh(v), np.cosh(v), np.sinh(v)))


def sinh(x):
    return _dispatch(x, np.sinh, lambda v: (np.sinh(v), np.cosh(v), np.sinh(v), np.cosh(v)))


def tanh(x):
    def d(v):
        t = np.tanh(v)
        s = 1.0 - t * t
        return (t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0))
    return _dispatch(x, np.tanh, d)


def reciprocal(x):
    return _dispatch(x, lambda v: 1.0 / v,
                     lambda v: (1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3, -6.0 / v ** 4))
