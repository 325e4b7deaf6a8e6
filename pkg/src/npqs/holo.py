"""Holomorphic test functions as immutable expression trees.

Expressions are built from constants, coordinates ``z_k`` and linear forms
``<z, b>`` with the field operations, integer and real powers, ``log`` and
``exp``. Evaluation is vectorized over batches of points and symbolic
differentiation returns new trees, so derivative expressions can be fed back
into any integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import ball

__all__ = [
    "Add",
    "Const",
    "Div",
    "EvaluationError",
    "Exp",
    "HoloExpr",
    "IntPow",
    "LinForm",
    "Log",
    "Mul",
    "RealPow",
    "Sub",
    "Var",
    "add",
    "dimension_needed",
    "div",
    "differentiate",
    "evaluate",
    "gradient",
    "gradient_values",
    "invariant_gradient",
    "invariant_gradient_values",
    "mul",
    "radial_derivative",
    "sub",
]


class EvaluationError(ArithmeticError):
    """Raised when evaluation hits a pole or a branch cut.

    ``expr`` is the offending subexpression; ``point`` the first sample point
    at which it failed, when known.
    """

    def __init__(self, message: str, expr: "HoloExpr", point=None):
        super().__init__(message)
        self.expr = expr
        self.point = point

    def with_point(self, point) -> "EvaluationError":
        return EvaluationError(str(self.args[0]), self.expr, point)


@dataclass(frozen=True)
class Const:
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Var:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("coordinate index is 1-based")


@dataclass(frozen=True)
class LinForm:
    """<z, b> = sum_k z_k conj(b_k)."""

    b: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(complex(v) for v in self.b))


@dataclass(frozen=True)
class Add:
    left: "HoloExpr"
    right: "HoloExpr"


@dataclass(frozen=True)
class Sub:
    left: "HoloExpr"
    right: "HoloExpr"


@dataclass(frozen=True)
class Mul:
    left: "HoloExpr"
    right: "HoloExpr"


@dataclass(frozen=True)
class Div:
    left: "HoloExpr"
    right: "HoloExpr"


@dataclass(frozen=True)
class IntPow:
    base: "HoloExpr"
    m: int


@dataclass(frozen=True)
class RealPow:
    """Principal branch of ``base ** t``."""

    base: "HoloExpr"
    t: float

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class Log:
    arg: "HoloExpr"


@dataclass(frozen=True)
class Exp:
    arg: "HoloExpr"


HoloExpr = Union[Const, Var, LinForm, Add, Sub, Mul, Div, IntPow, RealPow, Log, Exp]

ZERO = Const(0)
ONE = Const(1)


def dimension_needed(f: HoloExpr) -> int:
    """Smallest ambient dimension in which ``f`` makes sense."""
    match f:
        case Const():
            return 1
        case Var(k):
            return k
        case LinForm(b):
            return len(b)
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r):
            return max(dimension_needed(l), dimension_needed(r))
        case IntPow(u, _) | RealPow(u, _) | Log(u) | Exp(u):
            return dimension_needed(u)
    raise TypeError(f"not an expression: {f!r}")


# -- smart constructors -----------------------------------------------------
# These keep derivative trees small: constants fold, 0 and 1 are absorbed.


def add(x: HoloExpr, y: HoloExpr) -> HoloExpr:
    if isinstance(x, Const) and isinstance(y, Const):
        return Const(x.value + y.value)
    if x == ZERO:
        return y
    if y == ZERO:
        return x
    return Add(x, y)


def sub(x: HoloExpr, y: HoloExpr) -> HoloExpr:
    if isinstance(x, Const) and isinstance(y, Const):
        return Const(x.value - y.value)
    if y == ZERO:
        return x
    if x == ZERO:
        return mul(Const(-1), y)
    return Sub(x, y)


def mul(x: HoloExpr, y: HoloExpr) -> HoloExpr:
    if isinstance(y, Const) and not isinstance(x, Const):
        x, y = y, x
    if isinstance(x, Const):
        if x.value == 0:
            return ZERO
        if isinstance(y, Const):
            return Const(x.value * y.value)
        if x.value == 1:
            return y
        if isinstance(y, Mul) and isinstance(y.left, Const):
            return mul(Const(x.value * y.left.value), y.right)
    return Mul(x, y)


def div(x: HoloExpr, y: HoloExpr) -> HoloExpr:
    if x == ZERO:
        return ZERO
    if y == ONE:
        return x
    return Div(x, y)


def _pow(u: HoloExpr, m: int) -> HoloExpr:
    if m == 0:
        return ONE
    if m == 1:
        return u
    return IntPow(u, m)


# -- evaluation ---------------------------------------------------------------


def _fail(message: str, expr: HoloExpr, bad: np.ndarray, z: np.ndarray):
    idx = np.flatnonzero(np.broadcast_to(bad, bad.shape).ravel())
    point = None
    if idx.size and z.ndim > 1:
        point = z.reshape(-1, z.shape[-1])[idx[0]]
    elif z.ndim == 1:
        point = z
    raise EvaluationError(message, expr, point)


def _on_cut(u: np.ndarray) -> np.ndarray:
    return (u.imag == 0.0) & (u.real <= 0.0)


def _eval(f: HoloExpr, z: np.ndarray) -> np.ndarray:
    match f:
        case Const(v):
            return np.full(z.shape[:-1], v, dtype=complex)
        case Var(k):
            if k > z.shape[-1]:
                raise EvaluationError(f"z{k} used in dimension {z.shape[-1]}", f)
            return z[..., k - 1]
        case LinForm(b):
            return ball.inner(z, np.asarray(b, dtype=complex))
        case Add(l, r):
            return _eval(l, z) + _eval(r, z)
        case Sub(l, r):
            return _eval(l, z) - _eval(r, z)
        case Mul(l, r):
            return _eval(l, z) * _eval(r, z)
        case Div(l, r):
            den = _eval(r, z)
            bad = den == 0
            if np.any(bad):
                _fail("division by zero", f, bad, z)
            return _eval(l, z) / den
        case IntPow(u, m):
            base = _eval(u, z)
            if m < 0:
                bad = base == 0
                if np.any(bad):
                    _fail("negative power of zero", f, bad, z)
            return base**m
        case RealPow(u, t):
            base = _eval(u, z)
            bad = _on_cut(base)
            if np.any(bad):
                _fail("real power on the branch cut (-inf, 0]", f, bad, z)
            return np.exp(t * np.log(base))
        case Log(u):
            arg = _eval(u, z)
            bad = _on_cut(arg)
            if np.any(bad):
                _fail("log on the branch cut (-inf, 0]", f, bad, z)
            return np.log(arg)
        case Exp(u):
            return np.exp(_eval(u, z))
    raise TypeError(f"not an expression: {f!r}")


def evaluate(f: HoloExpr, z) -> np.ndarray | complex:
    """Evaluate ``f`` at one point (returns a complex) or a batch of points."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim <= 1
    if z.ndim == 0:
        z = z.reshape(1)
    with np.errstate(all="ignore"):
        out = _eval(f, z)
    bad = ~np.isfinite(out)
    if np.any(bad):
        _fail("non-finite value", f, bad, z)
    return complex(out) if single else out


# -- differentiation ------------------------------------------------------------


def differentiate(f: HoloExpr, k: int) -> HoloExpr:
    """Symbolic partial derivative with respect to z_k (1-based)."""
    if k < 1:
        raise ValueError("coordinate index is 1-based")
    match f:
        case Const():
            return ZERO
        case Var(j):
            return ONE if j == k else ZERO
        case LinForm(b):
            return Const(b[k - 1].conjugate()) if k <= len(b) else ZERO
        case Add(l, r):
            return add(differentiate(l, k), differentiate(r, k))
        case Sub(l, r):
            return sub(differentiate(l, k), differentiate(r, k))
        case Mul(l, r):
            return add(mul(differentiate(l, k), r), mul(l, differentiate(r, k)))
        case Div(l, r):
            dl, dr = differentiate(l, k), differentiate(r, k)
            if dr == ZERO:
                return div(dl, r)
            return div(sub(mul(dl, r), mul(l, dr)), _pow(r, 2))
        case IntPow(u, m):
            du = differentiate(u, k)
            if m == 0 or du == ZERO:
                return ZERO
            return mul(mul(Const(m), _pow(u, m - 1)), du)
        case RealPow(u, t):
            du = differentiate(u, k)
            if du == ZERO:
                return ZERO
            return mul(mul(Const(t), RealPow(u, t - 1.0)), du)
        case Log(u):
            du = differentiate(u, k)
            return div(du, u) if du != ZERO else ZERO
        case Exp(u):
            du = differentiate(u, k)
            return mul(f, du) if du != ZERO else ZERO
    raise TypeError(f"not an expression: {f!r}")


def gradient(f: HoloExpr, n: int) -> tuple[HoloExpr, ...]:
    return tuple(differentiate(f, k) for k in range(1, n + 1))


def radial_derivative(f: HoloExpr, n: int | None = None) -> HoloExpr:
    """Rf = sum_k z_k df/dz_k."""
    if n is None:
        n = dimension_needed(f)
    out: HoloExpr = ZERO
    for k in range(1, n + 1):
        out = add(out, mul(Var(k), differentiate(f, k)))
    return out


def gradient_values(grad: tuple[HoloExpr, ...], z) -> np.ndarray:
    """Stack the components of a symbolic gradient evaluated at ``z``."""
    z = np.asarray(z, dtype=complex)
    cols = [np.asarray(evaluate(g, z)) for g in grad]
    return np.stack(cols, axis=-1)


def invariant_gradient_values(grad_z: np.ndarray, z, omz=None) -> np.ndarray:
    """Apply transpose(Phi_z'(0)) to precomputed gradient values, batched.

    With Rf = sum z_k g_k this is
    -(1-|z|^2) conj(z) Rf/|z|^2 - s_z (g - conj(z) Rf/|z|^2).
    ``omz`` optionally supplies 1-|z|^2 computed to full precision.
    """
    z = np.asarray(z, dtype=complex)
    z2 = ball.norm_sq(z)
    if omz is None:
        omz = 1.0 - z2
    zero = z2 == 0.0
    rf = np.sum(z * grad_z, axis=-1)
    coef = np.where(zero, 0.0, rf / np.where(zero, 1.0, z2))
    par = coef[..., None] * np.conj(z)
    s = np.sqrt(omz)
    return -omz[..., None] * par - s[..., None] * (grad_z - par)


def invariant_gradient(f: HoloExpr, z, n: int | None = None) -> np.ndarray:
    """Mobius-invariant gradient grad(f o Phi_z)(0) at a single point."""
    z = ball.as_point(z)
    if n is None:
        n = z.shape[-1]
    g = gradient_values(gradient(f, n), z)
    jac = ball.mobius_jacobian_at_zero(z)
    return jac.T @ g
